"""BFS, delta-stepping SSSP, k-Core, PageRank and belief propagation as ACC specs.

Each algorithm comes as a spec factory, a runner that drives the engine, and
a sequential reference implementation used for verification.
"""
from __future__ import annotations

import heapq
import math
from collections import deque

import numpy as np

from .acc import INT_SUM, MIN, SUM, AlgorithmSpec, CombineClass, Metadata, int_min
from .engine import EngineConfig, RunResult, run
from .graph import CSRGraph

UNVISITED = np.iinfo(np.int64).max
DEFAULT_K = 16
DEFAULT_DAMPING = 0.85
DEFAULT_BP_ITERATIONS = 30
SWITCH_STABLE_FRACTION = 0.9


def _check_source(graph: CSRGraph, source: int) -> int:
    if not 0 <= int(source) < graph.vertex_count:
        raise ValueError(f"invalid source {source} for {graph.vertex_count} vertices")
    return int(source)


def _nonempty(ids):
    return np.asarray(ids, dtype=np.int64)


# ---------------------------------------------------------------- BFS

def bfs_spec(source: int) -> AlgorithmSpec:
    def init(g):
        src = _check_source(g, source)
        level = np.full(g.vertex_count, UNVISITED, dtype=np.int64)
        level[src] = 0
        return Metadata(level, params={"source": src})

    def compute(meta, src, w, dst):
        return meta.values[src] + 1

    def apply(meta, dst, lvl):
        cur = meta.values[dst]
        better = lvl < cur
        meta.values[dst] = np.where(better, lvl, cur)
        return better

    return AlgorithmSpec(
        "bfs", init, lambda m: _nonempty([m.params["source"]]), compute, int_min(UNVISITED),
        CombineClass.VOTING, apply,
        pull_candidates=lambda m: m.values == UNVISITED,
        direction="auto",
    )


def bfs(graph: CSRGraph, source: int = 0, cfg: EngineConfig | None = None) -> RunResult:
    return run(graph, bfs_spec(source), cfg)


def bfs_oracle(graph: CSRGraph, source: int) -> np.ndarray:
    level = np.full(graph.vertex_count, UNVISITED, dtype=np.int64)
    level[source] = 0
    q = deque([source])
    off, nbr = graph.out_offsets, graph.out_neighbors
    while q:
        v = q.popleft()
        for u in nbr[off[v]:off[v + 1]].tolist():
            if level[u] == UNVISITED:
                level[u] = level[v] + 1
                q.append(u)
    return level


# ---------------------------------------------------------------- SSSP

def default_delta(graph: CSRGraph) -> float:
    if graph.edge_count == 0:
        return 1.0
    return max(1.0, float(np.mean(graph.out_weights, dtype=np.float64)))


def sssp_spec(source: int, delta: float | None = None) -> AlgorithmSpec:
    """Delta-stepping: only vertices in the current distance bucket are active.

    Improved vertices outside the bucket stay pending and are picked up when
    the bucket advances.
    """
    def init(g):
        src = _check_source(g, source)
        if g.edge_count and float(g.out_weights.min()) <= 0:
            raise ValueError("non-positive weight in graph; SSSP requires positive weights")
        d = default_delta(g) if delta is None else float(delta)
        if not d > 0:
            raise ValueError("delta must be positive")
        dist = np.full(g.vertex_count, np.inf)
        dist[src] = 0.0
        pending = np.zeros(g.vertex_count, dtype=bool)
        pending[src] = True
        return Metadata(dist, {"pending": pending}, params={"source": src, "delta": d, "bucket": 0})

    def compute(meta, src, w, dst):
        return meta.values[src] + w

    def apply(meta, dst, cand):
        cur = meta.values[dst]
        better = cand < cur
        meta.values[dst] = np.where(better, cand, cur)
        meta.aux["pending"][dst] |= better
        return better

    def in_bucket(meta, ids):
        return meta.values[ids] < (meta.params["bucket"] + 1) * meta.params["delta"]

    def consume(meta, ids):
        meta.aux["pending"][ids] = False

    def refill(meta):
        pend = np.flatnonzero(meta.aux["pending"])
        if len(pend) == 0:
            return pend
        d = meta.params["delta"]
        b = math.floor(float(meta.values[pend].min()) / d) if math.isfinite(d) else 0
        meta.params["bucket"] = b
        return pend[meta.values[pend] < (b + 1) * d]

    def initial(meta):
        return _nonempty([meta.params["source"]])

    return AlgorithmSpec("sssp", init, initial, compute, MIN, CombineClass.AGGREGATION, apply,
                         active=in_bucket, consume=consume, refill=refill, direction="auto")


def sssp(graph: CSRGraph, source: int = 0, delta: float | None = None,
         cfg: EngineConfig | None = None) -> RunResult:
    return run(graph, sssp_spec(source, delta), cfg)


def dijkstra(graph: CSRGraph, source: int) -> np.ndarray:
    dist = np.full(graph.vertex_count, np.inf)
    dist[source] = 0.0
    off, nbr = graph.out_offsets, graph.out_neighbors
    w = graph.out_weights.astype(np.float64)
    heap = [(0.0, source)]
    done = np.zeros(graph.vertex_count, dtype=bool)
    while heap:
        d, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        for e in range(off[v], off[v + 1]):
            u = nbr[e]
            nd = d + w[e]
            if nd < dist[u]:
                dist[u] = nd
                heapq.heappush(heap, (nd, u))
    return dist


# ---------------------------------------------------------------- k-Core

def kcore_spec(k: int = DEFAULT_K) -> AlgorithmSpec:
    """Peeling: the frontier is the set of vertices that died last superstep.

    Each dead vertex subtracts one from every neighbor's counter; a counter
    stops moving once its vertex has dropped below k.
    """
    if k < 0:
        raise ValueError("k must be non-negative")

    def init(g):
        if g.directed:
            raise ValueError("k-core is defined for undirected graphs only")
        counter = g.out_degree.astype(np.int64).copy()
        return Metadata(counter, {"alive": counter >= k}, params={"k": k})

    def compute(meta, src, w, dst):
        return np.ones(len(src), dtype=np.int64)

    def apply(meta, dst, removed):
        alive = meta.aux["alive"][dst]
        cur = meta.values[dst]
        new = cur - removed
        dies = alive & (new < k)
        meta.values[dst] = np.where(alive, new, cur)
        meta.aux["alive"][dst] = alive & ~dies
        return dies

    return AlgorithmSpec(
        "kcore", init, lambda m: np.flatnonzero(~m.aux["alive"]), compute, INT_SUM,
        CombineClass.AGGREGATION, apply,
        pull_candidates=lambda m: m.aux["alive"],
        direction="pull_then_push",
    )


def kcore(graph: CSRGraph, k: int = DEFAULT_K, cfg: EngineConfig | None = None) -> RunResult:
    return run(graph, kcore_spec(k), cfg)


def kcore_oracle(graph: CSRGraph, k: int) -> np.ndarray:
    """Alive mask of the k-core by sequential peeling with a queue."""
    deg = graph.out_degree.astype(np.int64).tolist()
    alive = [d >= k for d in deg]
    q = deque(v for v in range(graph.vertex_count) if not alive[v])
    off, nbr = graph.out_offsets, graph.out_neighbors
    while q:
        v = q.popleft()
        for u in nbr[off[v]:off[v + 1]].tolist():
            if alive[u]:
                deg[u] -= 1
                if deg[u] < k:
                    alive[u] = False
                    q.append(u)
    return np.array(alive, dtype=bool)


# ---------------------------------------------------------------- PageRank

def pagerank_spec(damping: float = DEFAULT_DAMPING, epsilon: float | None = None) -> AlgorithmSpec:
    """Residual-propagating PageRank.

    rank starts at 1 - d and every vertex carries a residual (the rank change
    not yet pushed to its out-neighbors). A superstep moves d * residual /
    outdeg along each out-edge of every active vertex. All vertices are
    active while pulling; in push mode only vertices whose residual exceeds
    epsilon / n stay active. Dangling vertices lose their residual.
    """
    if not 0 < damping < 1:
        raise ValueError("damping must be in (0, 1)")

    def init(g):
        n = g.vertex_count
        eps = 1e-6 * n if epsilon is None else float(epsilon)
        rank = np.full(n, 1.0 - damping)
        outdeg = g.out_degree.astype(np.float64)
        return Metadata(rank, {"residual": rank.copy(), "outdeg": outdeg},
                        params={"damping": damping, "epsilon": eps,
                                "tol": eps / max(n, 1), "l1": math.inf})

    def compute(meta, src, w, dst):
        return damping * meta.aux["residual"][src] / meta.aux["outdeg"][src]

    def consume(meta, ids):
        meta.aux["residual"][ids] = 0.0

    def apply(meta, dst, s):
        meta.values[dst] += s
        res = meta.aux["residual"]
        res[dst] += s
        meta.params["l1"] = float(np.abs(s).sum())
        return np.abs(res[dst]) > meta.params["tol"]

    def mostly_stable(meta):
        stable = np.abs(meta.aux["residual"]) <= meta.params["tol"]
        return bool(stable.mean() > SWITCH_STABLE_FRACTION) if len(stable) else True

    def initial(meta):
        return np.arange(len(meta), dtype=np.int64)

    return AlgorithmSpec(
        "pagerank", init, initial, compute, SUM, CombineClass.AGGREGATION, apply,
        consume=consume, all_active=lambda d: d == "pull",
        direction="pull_then_push", switch_to_push=mostly_stable,
        converged=lambda meta, it: meta.params["l1"] < meta.params["epsilon"],
    )


def pagerank(graph: CSRGraph, damping: float = DEFAULT_DAMPING, epsilon: float | None = None,
             max_iter: int | None = None, cfg: EngineConfig | None = None) -> RunResult:
    cfg = cfg or EngineConfig()
    if max_iter is not None:
        cfg = EngineConfig(**{**cfg.__dict__, "max_iterations": max_iter})
    return run(graph, pagerank_spec(damping, epsilon), cfg)


def pagerank_matrix(graph: CSRGraph, damping: float = DEFAULT_DAMPING) -> np.ndarray:
    """Dense d * A^T D^-1 so that one Jacobi step is r' = (1 - d) + M @ r."""
    n = graph.vertex_count
    m = np.zeros((n, n))
    src, dst = graph.edge_sources, graph.out_neighbors
    outdeg = graph.out_degree.astype(np.float64)
    np.add.at(m, (dst, src), damping / outdeg[src])
    return m


def pagerank_oracle(graph: CSRGraph, damping: float = DEFAULT_DAMPING, tol: float = 1e-14,
                    max_iter: int = 10_000) -> np.ndarray:
    """Power iteration to a tight fixpoint (dense for small graphs)."""
    n = graph.vertex_count
    r = np.full(n, 1.0 - damping)
    if n <= 2048:
        m = pagerank_matrix(graph, damping)
        step = lambda x: (1.0 - damping) + m @ x  # noqa: E731
    else:
        src, dst = graph.edge_sources, graph.out_neighbors
        share = damping / graph.out_degree.astype(np.float64)[src]
        step = lambda x: (1.0 - damping) + np.bincount(dst, x[src] * share, minlength=n)  # noqa: E731
    for _ in range(max_iter):
        nxt = step(r)
        if np.abs(nxt - r).sum() < tol * max(n, 1):
            return nxt
        r = nxt
    return r


# ---------------------------------------------------------------- belief propagation

def _bp_message(b, lik):
    return np.log((b * lik + (1 - b) * (1 - lik)) / (b * (1 - lik) + (1 - b) * lik))


def _bp_belief(prior, s):
    with np.errstate(divide="ignore"):
        lo = np.log(prior) + s
        post = np.exp(lo - np.logaddexp(lo, np.log1p(-prior)))
    return np.where(s == 0, prior, post)


def default_bp_inputs(graph: CSRGraph, seed: int = 0):
    rng = np.random.default_rng(seed)
    priors = rng.uniform(0.05, 0.95, graph.vertex_count)
    lik = rng.uniform(0.55, 0.95, graph.edge_count)
    return priors, lik


def bp_spec(priors, edge_likelihoods, iterations: int = DEFAULT_BP_ITERATIONS) -> AlgorithmSpec:
    """Binary-state belief propagation on log-odds.

    Every in-neighbor v sends log(P(b_v | u=1) / P(b_v | u=0)) where the edge
    likelihood is the probability that both endpoints agree. Messages are
    summed and combined with the vertex prior.
    """
    priors = np.asarray(priors, dtype=np.float64)
    lik = np.asarray(edge_likelihoods, dtype=np.float64)
    if np.any(~np.isfinite(priors)) or np.any((priors < 0) | (priors > 1)):
        raise ValueError("priors must lie in [0, 1]")
    if np.any(~np.isfinite(lik)) or np.any((lik <= 0) | (lik >= 1)):
        raise ValueError("edge likelihoods must lie in (0, 1)")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")

    def init(g):
        if len(priors) != g.vertex_count or len(lik) != g.edge_count:
            raise ValueError("priors/likelihoods do not match the graph shape")
        return Metadata(priors.copy(), {"prior": priors.copy()}, edge=lik,
                        params={"iterations": iterations})

    def compute(meta, src, l, dst):
        return _bp_message(meta.values[src], l)

    def apply(meta, dst, s):
        old = meta.values[dst]
        new = _bp_belief(meta.aux["prior"][dst], s)
        meta.values[dst] = new
        return new != old

    def initial(meta):
        return np.arange(len(meta), dtype=np.int64)

    return AlgorithmSpec(
        "bp", init, initial, compute, SUM, CombineClass.AGGREGATION, apply,
        all_active=lambda d: True, direction="pull",
        converged=lambda meta, it: it >= meta.params["iterations"],
        edge_values=lambda g: lik,
    )


def belief_propagation(graph: CSRGraph, priors=None, edge_likelihoods=None,
                       iterations: int = DEFAULT_BP_ITERATIONS, seed: int = 0,
                       cfg: EngineConfig | None = None) -> RunResult:
    if priors is None or edge_likelihoods is None:
        p, l = default_bp_inputs(graph, seed)
        priors = p if priors is None else priors
        edge_likelihoods = l if edge_likelihoods is None else edge_likelihoods
    return run(graph, bp_spec(priors, edge_likelihoods, iterations), cfg)


def bp_oracle(graph: CSRGraph, priors, edge_likelihoods, iterations: int) -> np.ndarray:
    """Sequential synchronous message passing, one edge at a time."""
    prior = np.asarray(priors, dtype=np.float64)
    lik = np.asarray(edge_likelihoods, dtype=np.float64).tolist()
    src = graph.edge_sources.tolist()
    dst = graph.out_neighbors.tolist()
    order = np.lexsort((graph.edge_sources, graph.out_neighbors)).tolist()
    b = prior.copy()
    for _ in range(iterations):
        bl = b.tolist()
        acc = [0.0] * graph.vertex_count
        for e in order:
            x, l = bl[src[e]], lik[e]
            acc[dst[e]] += math.log((x * l + (1 - x) * (1 - l)) / (x * (1 - l) + (1 - x) * l))
        b = _bp_belief(prior, np.array(acc))
    return b


ALGORITHMS = ("bfs", "sssp", "kcore", "pagerank", "bp")
