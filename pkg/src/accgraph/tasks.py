"""Just-in-time task management.

Three ways to build the next iteration's active lists:

* online filter: owners record changed vertices into capacity-limited
  thread bins while applying updates; bins are concatenated by prefix scan.
* ballot filter: each worker scans a contiguous range of the updated-flag
  array; the concatenation is sorted and duplicate-free.
* batch filter: baseline that materializes the whole active edge list and
  records destinations per update (unsorted, redundant, memory hungry).

:class:`JITController` runs online first and falls back to ballot for any
iteration in which a bin overflowed.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .acc import AlgorithmSpec, Metadata, segmented_scan

DEFAULT_THRESHOLD = 64
DEFAULT_SEPARATORS = (32, 128)

SMALL, MEDIUM, LARGE = "small", "medium", "large"

_EMPTY = np.zeros(0, dtype=np.int64)


class ContractViolation(RuntimeError):
    pass


class MemoryBudgetExceeded(MemoryError):
    pass


def classify(v: int, degree: int, separators=DEFAULT_SEPARATORS) -> str:
    if degree < 0:
        raise ValueError("degree must be non-negative")
    lo, hi = separators
    if degree < lo:
        return SMALL
    if degree < hi:
        return MEDIUM
    return LARGE


@dataclass
class ThreadBin:
    owner: int
    capacity: int | None = DEFAULT_THRESHOLD
    overflowed: bool = False
    _chunks: list = field(default_factory=list, repr=False)
    _size: int = 0

    def __len__(self):
        return self._size

    @property
    def entries(self) -> np.ndarray:
        if not self._chunks:
            return _EMPTY
        return np.concatenate(self._chunks)

    def clear(self):
        self._chunks.clear()
        self._size = 0
        self.overflowed = False

    def extend(self, ids: np.ndarray) -> bool:
        """Record many vertices; returns False once the bin has overflowed."""
        ids = np.asarray(ids, dtype=np.int64)
        if self.overflowed:
            return False
        if self.capacity is not None and self._size + len(ids) > self.capacity:
            ids = ids[: self.capacity - self._size]
            self.overflowed = True
        if len(ids):
            self._chunks.append(ids)
            self._size += len(ids)
        return not self.overflowed


def online_record(bin: ThreadBin, v: int) -> bool:
    """Append ``v`` if there is room; otherwise flag overflow and drop it."""
    return bin.extend(np.array([v], dtype=np.int64))


@dataclass
class ActiveLists:
    small: np.ndarray = field(default_factory=lambda: _EMPTY)
    medium: np.ndarray = field(default_factory=lambda: _EMPTY)
    large: np.ndarray = field(default_factory=lambda: _EMPTY)
    small_degree: int = 0
    medium_degree: int = 0
    large_degree: int = 0

    @classmethod
    def from_ids(cls, ids, degrees, separators=DEFAULT_SEPARATORS) -> "ActiveLists":
        ids = np.asarray(ids, dtype=np.int64)
        d = degrees[ids]
        lo, hi = separators
        s, m = d < lo, (d >= lo) & (d < hi)
        l = d >= hi
        return cls(ids[s], ids[m], ids[l], int(d[s].sum()), int(d[m].sum()), int(d[l].sum()))

    def __len__(self):
        return len(self.small) + len(self.medium) + len(self.large)

    @property
    def total_degree(self) -> int:
        return self.small_degree + self.medium_degree + self.large_degree

    def sizes(self) -> tuple[int, int, int]:
        return len(self.small), len(self.medium), len(self.large)

    def ids(self) -> np.ndarray:
        return np.concatenate([self.small, self.medium, self.large])

    def select(self, keep_fn, degrees, separators=DEFAULT_SEPARATORS) -> "ActiveLists":
        parts = []
        for lst in (self.small, self.medium, self.large):
            parts.append(lst[keep_fn(lst)] if len(lst) else lst)
        out = ActiveLists.from_ids(np.concatenate(parts), degrees, separators)
        return out


def worker_ranges(n: int, worker_count: int) -> np.ndarray:
    """Boundaries of contiguous equal-size vertex ranges; the last worker takes the rest."""
    size = n // worker_count
    bounds = np.arange(worker_count + 1, dtype=np.int64) * size
    bounds[-1] = n
    return bounds


def ballot_filter(flags: np.ndarray, degrees: np.ndarray, worker_count: int,
                  separators=DEFAULT_SEPARATORS, executor=None) -> ActiveLists:
    """Range-partitioned flag scan; per class the result is sorted and unique."""
    bounds = worker_ranges(len(flags), worker_count)

    def scan(w):
        lo, hi = bounds[w], bounds[w + 1]
        return ActiveLists.from_ids(np.flatnonzero(flags[lo:hi]) + lo, degrees, separators)

    mapper = executor.map if executor is not None else map
    parts = list(mapper(scan, range(worker_count)))
    return _concat_lists(parts)


def _concat_lists(parts) -> ActiveLists:
    if not parts:
        return ActiveLists()
    return ActiveLists(
        np.concatenate([p.small for p in parts]),
        np.concatenate([p.medium for p in parts]),
        np.concatenate([p.large for p in parts]),
        sum(p.small_degree for p in parts),
        sum(p.medium_degree for p in parts),
        sum(p.large_degree for p in parts),
    )


def exclusive_scan(sizes) -> np.ndarray:
    sizes = np.asarray(sizes, dtype=np.int64)
    out = np.zeros(len(sizes), dtype=np.int64)
    if len(sizes) > 1:
        np.cumsum(sizes[:-1], out=out[1:])
    return out


def concat_bins(bins, degrees, separators=DEFAULT_SEPARATORS) -> ActiveLists:
    """Prefix-scan concatenation of thread bins (duplicates preserved)."""
    if any(b.overflowed for b in bins):
        raise ContractViolation("concat_bins called with an overflowed bin")
    sizes = [len(b) for b in bins]
    offsets = exclusive_scan(sizes)
    total = int(sum(sizes))
    flat = np.empty(total, dtype=np.int64)
    for b, off in zip(bins, offsets):
        flat[off:off + len(b)] = b.entries
    return ActiveLists.from_ids(flat, degrees, separators)


@dataclass
class TraceRow:
    iteration: int
    filter: str
    small: int
    medium: int
    large: int
    overflow: bool


@dataclass
class JITController:
    threshold: int = DEFAULT_THRESHOLD
    mode: str = "online"
    trace: list[TraceRow] = field(default_factory=list)

    def make_bins(self, worker_count: int) -> list[ThreadBin]:
        return [ThreadBin(w, self.threshold) for w in range(worker_count)]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "filter", "small", "medium", "large", "overflow"])
            for r in self.trace:
                w.writerow([r.iteration, r.filter, r.small, r.medium, r.large, int(r.overflow)])


def jit_step(ctrl: JITController, bins, flags, degrees, worker_count: int | None = None,
             separators=DEFAULT_SEPARATORS, iteration: int | None = None,
             executor=None) -> ActiveLists:
    """Choose the filter for this iteration: ballot iff some bin overflowed."""
    overflow = any(b.overflowed for b in bins)
    if overflow:
        lists = ballot_filter(flags, degrees, worker_count or len(bins), separators, executor)
        ctrl.mode = "ballot"
    else:
        lists = concat_bins(bins, degrees, separators)
        ctrl.mode = "online"
    it = iteration if iteration is not None else len(ctrl.trace) + 1
    ctrl.trace.append(TraceRow(it, ctrl.mode, *lists.sizes(), overflow))
    return lists


def expand_ranges(starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Concatenation of arange(starts[i], ends[i]) for all i."""
    lens = ends - starts
    total = int(lens.sum())
    if total == 0:
        return _EMPTY
    shift = np.repeat(starts - exclusive_scan(lens), lens)
    return shift + np.arange(total, dtype=np.int64)


@dataclass
class BatchResult:
    lists: ActiveLists
    bins: list[ThreadBin]
    changed: np.ndarray
    active_edges: int
    recorded: int


def batch_filter(current: ActiveLists, graph, spec: AlgorithmSpec, meta: Metadata,
                 worker_count: int = 1, memory_budget: int | None = None,
                 separators=DEFAULT_SEPARATORS, deterministic: bool = False,
                 edge_values: np.ndarray | None = None) -> BatchResult:
    """Push superstep through a materialized active edge list.

    Every update that would change its destination, given the updates
    before it in list order, appends the destination to the bin of the
    worker holding that edge. Metadata receives one folded apply per
    destination, exactly as on the online/ballot path.
    """
    budget = 2 * graph.edge_count if memory_budget is None else memory_budget
    src_ids = current.ids()
    if spec.combine_class.value == "aggregation":
        src_ids = np.unique(src_ids)
    off = graph.out_offsets
    eidx = expand_ranges(off[src_ids], off[src_ids + 1])
    if len(eidx) > budget:
        raise MemoryBudgetExceeded(
            f"active edge list needs {len(eidx)} entries, budget is {budget}")
    src = np.repeat(src_ids, off[src_ids + 1] - off[src_ids])
    dst = graph.out_neighbors[eidx]
    ev = (edge_values if edge_values is not None else graph.out_weights)[eidx]
    vals = np.asarray(spec.compute(meta, src, ev, dst))
    comb = spec.combine
    if spec.consume is not None:
        spec.consume(meta, src_ids)

    # record pass: state before/after each update under list-order application
    order = np.argsort(dst, kind="stable")
    d_sorted = dst[order]
    prefix = segmented_scan(comb, vals[order], d_sorted, exclusive=True)
    before = meta.take(d_sorted)
    rows = np.arange(len(order))
    spec.apply(before, rows, prefix)
    changed_sorted = spec.apply(before, rows, vals[order].astype(comb.dtype))
    hit = np.zeros(len(order), dtype=bool)
    hit[order] = changed_sorted

    # fold + single apply per destination
    if deterministic:
        o = np.lexsort((src, dst))
        keys, inv = np.unique(dst[o], return_inverse=True)
        acc = np.full(len(keys), comb.identity, dtype=comb.dtype)
        comb.fold_into(acc, inv, vals[o])
    else:
        keys, inv = np.unique(dst, return_inverse=True)
        acc = np.full(len(keys), comb.identity, dtype=comb.dtype)
        comb.fold_into(acc, inv, vals)
    changed = keys[spec.apply(meta, keys, acc)] if len(keys) else _EMPTY

    bins = [ThreadBin(w, None) for w in range(worker_count)]
    bounds = np.linspace(0, len(eidx), worker_count + 1).astype(np.int64)
    for w, b in enumerate(bins):
        sl = slice(bounds[w], bounds[w + 1])
        b.extend(dst[sl][hit[sl]])
    lists = concat_bins(bins, graph.out_degree, separators)
    return BatchResult(lists, bins, changed, len(eidx), len(lists))
