"""Edge-list ingestion, CSR construction and the binary CSR format."""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

MAX_VERTEX_ID = 2**32 - 1

MAGIC = b"ACCX"
FORMAT_VERSION = 1
FLAG_WEIGHTED = 1
FLAG_REVERSE = 2
FLAG_DIRECTED = 4
_HEADER = struct.Struct("<4sIIQQ")


class GraphFormatError(ValueError):
    """Malformed text edge list or binary CSR file."""


class MissingReverseError(ValueError):
    pass


@dataclass
class EdgeList:
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray | None = None
    directed: bool = True
    vertex_count: int = 0

    def __post_init__(self):
        self.src = np.asarray(self.src, dtype=np.int64)
        self.dst = np.asarray(self.dst, dtype=np.int64)
        if self.src.shape != self.dst.shape:
            raise ValueError("src and dst must have the same length")
        if self.weight is not None:
            self.weight = np.asarray(self.weight, dtype=np.float64)
            if self.weight.shape != self.src.shape:
                raise ValueError("weight must match edge count")
            if not np.all(np.isfinite(self.weight)) or np.any(self.weight < 0):
                raise ValueError("weights must be finite and non-negative")
        if len(self.src):
            lo = min(self.src.min(), self.dst.min())
            hi = max(self.src.max(), self.dst.max())
            if lo < 0:
                raise ValueError("negative vertex id")
            if hi > MAX_VERTEX_ID:
                raise ValueError(f"vertex id {hi} overflows uint32")
            self.vertex_count = max(self.vertex_count, int(hi) + 1)

    def __len__(self):
        return len(self.src)

    @property
    def weighted(self) -> bool:
        return self.weight is not None


def load_edge_list(source, directed: bool = True, vertex_count: int = 0) -> EdgeList:
    """Parse ``src dst [weight]`` lines; ``#`` and ``%`` start comment lines.

    ``source`` may be a path, a text/binary stream, or raw bytes.
    """
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            data = fh.read()
    elif isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")

    src, dst, wts = [], [], []
    any_weight = False
    for lineno, raw in enumerate(io.StringIO(data), start=1):
        line = raw.strip()
        if not line or line[0] in "#%":
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise GraphFormatError(f"line {lineno}: expected 'src dst [weight]', got {line!r}")
        try:
            s, d = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"line {lineno}: vertex ids must be integers: {line!r}") from None
        if s < 0 or d < 0:
            raise GraphFormatError(f"line {lineno}: negative vertex id")
        if s > MAX_VERTEX_ID or d > MAX_VERTEX_ID:
            raise GraphFormatError(f"line {lineno}: vertex id overflows uint32")
        w = 1.0
        if len(parts) == 3:
            try:
                w = float(parts[2])
            except ValueError:
                raise GraphFormatError(f"line {lineno}: bad weight {parts[2]!r}") from None
            if not np.isfinite(w):
                raise GraphFormatError(f"line {lineno}: weight must be finite")
            if w < 0:
                raise GraphFormatError(f"line {lineno}: negative weight {w}")
            any_weight = True
        src.append(s)
        dst.append(d)
        wts.append(w)
    return EdgeList(
        np.array(src, dtype=np.int64),
        np.array(dst, dtype=np.int64),
        np.array(wts, dtype=np.float64) if any_weight else None,
        directed=directed,
        vertex_count=vertex_count,
    )


def _ranges(offsets: np.ndarray) -> np.ndarray:
    """Owning vertex of every edge slot."""
    return np.repeat(np.arange(len(offsets) - 1, dtype=np.int64), np.diff(offsets))


@dataclass(eq=False)
class CSRGraph:
    vertex_count: int
    out_offsets: np.ndarray
    out_neighbors: np.ndarray
    out_weights: np.ndarray
    directed: bool = True
    weighted: bool = False
    in_offsets: np.ndarray | None = None
    in_neighbors: np.ndarray | None = None
    in_weights: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def edge_count(self) -> int:
        return len(self.out_neighbors)

    @property
    def has_reverse(self) -> bool:
        return self.in_offsets is not None

    @cached_property
    def out_degree(self) -> np.ndarray:
        return np.diff(self.out_offsets)

    @cached_property
    def in_degree(self) -> np.ndarray:
        if self.in_offsets is not None:
            return np.diff(self.in_offsets)
        return np.bincount(self.out_neighbors, minlength=self.vertex_count).astype(np.int64)

    @cached_property
    def edge_sources(self) -> np.ndarray:
        return _ranges(self.out_offsets)

    @cached_property
    def in_to_out(self) -> np.ndarray:
        """For each in-edge slot, the index of the same edge in the out arrays."""
        return np.argsort(self.out_neighbors, kind="stable")

    def neighbors(self, v: int) -> np.ndarray:
        return self.out_neighbors[self.out_offsets[v]:self.out_offsets[v + 1]]

    def can_pull(self) -> bool:
        return self.has_reverse or not self.directed

    def in_csr(self):
        """(offsets, neighbors, weights, in_to_out) of the transposed graph.

        Undirected graphs are symmetric, so the forward arrays double as the
        reverse structure.
        """
        if self.has_reverse:
            return self.in_offsets, self.in_neighbors, self.in_weights, self.in_to_out
        if not self.directed:
            return self.out_offsets, self.out_neighbors, self.out_weights, self.in_to_out
        raise MissingReverseError("pull requires the reverse (in-neighbor) structure")

    def edges(self):
        """Edge tuples (src, dst, weight) in CSR order."""
        return list(zip(self.edge_sources.tolist(), self.out_neighbors.tolist(),
                        self.out_weights.tolist()))

    def with_weights(self, weights: np.ndarray) -> "CSRGraph":
        weights = np.asarray(weights, dtype=np.float32)
        g = CSRGraph(self.vertex_count, self.out_offsets, self.out_neighbors, weights,
                     directed=self.directed, weighted=True)
        if self.has_reverse:
            g.in_offsets = self.in_offsets
            g.in_neighbors = self.in_neighbors
            g.in_weights = weights[self.in_to_out]
        return g

    def structurally_equal(self, other: "CSRGraph") -> bool:
        if (self.vertex_count, self.directed, self.weighted, self.has_reverse) != (
            other.vertex_count, other.directed, other.weighted, other.has_reverse
        ):
            return False
        pairs = [(self.out_offsets, other.out_offsets), (self.out_neighbors, other.out_neighbors),
                 (self.out_weights, other.out_weights)]
        if self.has_reverse:
            pairs += [(self.in_offsets, other.in_offsets), (self.in_neighbors, other.in_neighbors),
                      (self.in_weights, other.in_weights)]
        return all(np.array_equal(a, b) for a, b in pairs)

    def summary(self) -> str:
        return f"V={self.vertex_count} E={self.edge_count}"


def _csr_from_pairs(n, src, dst, w):
    order = np.lexsort((dst, src))
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=offsets[1:])
    return offsets, dst[order].astype(np.int64), w[order]


def build_csr(el: EdgeList, build_reverse: bool = False) -> CSRGraph:
    """Canonical CSR: neighbor ranges sorted ascending, duplicates and self-loops kept.

    Undirected input materializes every edge in both endpoints' ranges.
    """
    n = el.vertex_count
    w = el.weight if el.weight is not None else np.ones(len(el), dtype=np.float64)
    src, dst = el.src, el.dst
    if not el.directed:
        src, dst = np.concatenate([src, dst]), np.concatenate([dst, src])
        w = np.concatenate([w, w])
    offsets, nbrs, wts = _csr_from_pairs(n, src, dst, w.astype(np.float32))
    g = CSRGraph(n, offsets, nbrs, wts, directed=el.directed, weighted=el.weighted)
    if build_reverse:
        perm = g.in_to_out
        g.in_offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(nbrs, minlength=n), out=g.in_offsets[1:])
        g.in_neighbors = g.edge_sources[perm]
        g.in_weights = wts[perm]
    return g


def transpose(g: CSRGraph) -> CSRGraph:
    """Graph with every edge reversed (forward structure only)."""
    src = g.edge_sources
    el = EdgeList(g.out_neighbors, src, g.out_weights.astype(np.float64), directed=True,
                  vertex_count=g.vertex_count)
    t = build_csr(el)
    t.weighted = g.weighted
    return t


def generate_weights(g: CSRGraph, seed: int, lo: float = 1.0, hi: float = 64.0) -> CSRGraph:
    """Uniform random weights in [lo, hi), one per logical edge."""
    if not (lo >= 0 and lo < hi):
        raise ValueError(f"invalid weight range [{lo}, {hi})")
    rng = np.random.default_rng(seed)
    raw = rng.uniform(lo, hi, g.edge_count)
    if not g.directed:
        # twin of out-edge u->v is the out-edge v->u; both take the smaller slot's draw
        raw = raw[np.minimum(np.arange(g.edge_count), g.in_to_out)]
    w = raw.astype(np.float32)
    top = np.nextafter(np.float32(hi), np.float32(lo))
    w = np.minimum(w, top)
    return g.with_weights(w)


def write_binary(g: CSRGraph, sink) -> None:
    flags = (FLAG_WEIGHTED if g.weighted else 0) | (FLAG_REVERSE if g.has_reverse else 0) \
        | (FLAG_DIRECTED if g.directed else 0)
    chunks = [_HEADER.pack(MAGIC, FORMAT_VERSION, flags, g.vertex_count, g.edge_count)]

    def put(off, nbr, wts):
        chunks.append(np.asarray(off, dtype="<u8").tobytes())
        chunks.append(np.asarray(nbr, dtype="<u4").tobytes())
        if g.weighted:
            chunks.append(np.asarray(wts, dtype="<f4").tobytes())

    put(g.out_offsets, g.out_neighbors, g.out_weights)
    if g.has_reverse:
        put(g.in_offsets, g.in_neighbors, g.in_weights)
    data = b"".join(chunks)
    if isinstance(sink, (str, Path)):
        Path(sink).write_bytes(data)
    else:
        sink.write(data)


def read_binary(source) -> CSRGraph:
    if isinstance(source, (str, Path)):
        data = Path(source).read_bytes()
    elif isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        data = source.read()
    if len(data) < _HEADER.size:
        raise GraphFormatError("truncated header")
    magic, version, flags, n, m = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise GraphFormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise GraphFormatError(f"unsupported version {version}")
    weighted = bool(flags & FLAG_WEIGHTED)
    reverse = bool(flags & FLAG_REVERSE)
    block = 8 * (n + 1) + 4 * m + (4 * m if weighted else 0)
    expected = _HEADER.size + block * (2 if reverse else 1)
    if len(data) != expected:
        raise GraphFormatError(
            f"shape mismatch: header declares V={n} E={m} ({expected} bytes), file has {len(data)}")

    pos = _HEADER.size

    def take(count, dtype, size):
        nonlocal pos
        arr = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
        pos += count * size
        return arr

    def block_arrays():
        off = take(n + 1, "<u8", 8).astype(np.int64)
        nbr = take(m, "<u4", 4).astype(np.int64)
        wts = take(m, "<f4", 4).astype(np.float32) if weighted else np.ones(m, dtype=np.float32)
        if off[0] != 0 or off[-1] != m or np.any(np.diff(off) < 0):
            raise GraphFormatError("shape mismatch: offsets are not a valid CSR index")
        if m and nbr.max() >= n:
            raise GraphFormatError("shape mismatch: neighbor id out of range")
        return off, nbr, wts

    g = CSRGraph(n, *block_arrays(), directed=bool(flags & FLAG_DIRECTED), weighted=weighted)
    if reverse:
        g.in_offsets, g.in_neighbors, g.in_weights = block_arrays()
    return g
