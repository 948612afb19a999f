"""Desk-scale synthetic graphs (uniform random and R-MAT)."""
from __future__ import annotations

import numpy as np

from .graph import CSRGraph, EdgeList, build_csr


def uniform_edges(n: int, m: int, seed: int, directed: bool = True,
                  self_loops: bool = True) -> EdgeList:
    rng = np.random.default_rng(seed)
    src = rng.integers(0, n, m)
    dst = rng.integers(0, n, m)
    if not self_loops:
        keep = src != dst
        src, dst = src[keep], dst[keep]
    return EdgeList(src, dst, directed=directed, vertex_count=n)


def rmat_edges(scale: int, edge_factor: int, seed: int, directed: bool = True,
               a: float = 0.57, b: float = 0.19, c: float = 0.19) -> EdgeList:
    """Recursive-matrix generator: 2**scale vertices, edge_factor * 2**scale edges."""
    if a + b + c >= 1:
        raise ValueError("R-MAT requires a + b + c < 1")
    n = 1 << scale
    m = edge_factor * n
    rng = np.random.default_rng(seed)
    src = np.zeros(m, dtype=np.int64)
    dst = np.zeros(m, dtype=np.int64)
    for bit in range(scale):
        r = rng.random(m)
        # quadrants: a=(0,0) b=(0,1) c=(1,0) d=(1,1)
        row = r >= a + b
        col = ((r >= a) & (r < a + b)) | (r >= a + b + c)
        src |= row.astype(np.int64) << bit
        dst |= col.astype(np.int64) << bit
    # scramble ids so hubs are not clustered at low ids
    perm = rng.permutation(n)
    return EdgeList(perm[src], perm[dst], directed=directed, vertex_count=n)


def uniform_graph(n, m, seed, directed=True, build_reverse=True) -> CSRGraph:
    return build_csr(uniform_edges(n, m, seed, directed), build_reverse=build_reverse)


def rmat_graph(scale, edge_factor, seed, directed=True, build_reverse=True) -> CSRGraph:
    return build_csr(rmat_edges(scale, edge_factor, seed, directed), build_reverse=build_reverse)
