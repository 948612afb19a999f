"""Bulk-synchronous ACC execution engine.

Each superstep runs compute over the active lists on ``worker_count``
logical workers, folds the updates per destination, applies every
destination exactly once, and hands the changed set to the task manager to
build the next lists. Compute only reads metadata; all writes happen in the
apply step (and the optional ``consume`` hook) after the compute barrier.
"""
from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext
from dataclasses import asdict, dataclass, field

import numpy as np

from .acc import AlgorithmSpec, Metadata
from .graph import CSRGraph, MissingReverseError
from .tasks import (DEFAULT_SEPARATORS, DEFAULT_THRESHOLD, ActiveLists, JITController,
                    TraceRow, ballot_filter, batch_filter, exclusive_scan, expand_ranges,
                    jit_step, worker_ranges)

PUSH, PULL = "push", "pull"
FILTERS = ("jit", "ballot", "batch")
DIRECTION_HEURISTIC = "edge-ratio"


@dataclass
class EngineConfig:
    worker_count: int = 1
    overflow_threshold: int = DEFAULT_THRESHOLD
    separators: tuple[int, int] = DEFAULT_SEPARATORS
    direction_alpha: float = 20.0
    deterministic: bool = False
    max_iterations: int = 100_000
    filter: str = "jit"
    memory_budget: int | None = None  # batch filter entries; None -> 2 * edge_count
    parallel: bool = False            # run workers on a thread pool
    block_edges: int = 1 << 16        # edges a worker materializes at once

    def __post_init__(self):
        if self.worker_count < 1:
            raise ValueError("worker_count must be >= 1")
        lo, hi = self.separators
        if not 0 < lo < hi:
            raise ValueError("separators must be strictly increasing and positive")
        if self.direction_alpha <= 0:
            raise ValueError("direction_alpha must be positive")
        if self.filter not in FILTERS:
            raise ValueError(f"filter must be one of {FILTERS}")
        if self.overflow_threshold < 1:
            raise ValueError("overflow_threshold must be >= 1")
        if self.block_edges < 1:
            raise ValueError("block_edges must be >= 1")


@dataclass
class IterationStats:
    iteration: int
    direction: str
    filter: str
    small: int
    medium: int
    large: int
    active_vertices: int
    active_edges: int
    edges_examined: int
    applied: int
    changed: int
    overflow: bool
    next_size: int
    list_entries: int        # thread-bin entries plus the next active lists
    active_edge_buffer: int  # materialized active-edge list (batch filter only)
    work_buffer: int         # transient per-block edge records
    wall_time: float

    @property
    def memory_entries(self) -> int:
        return self.list_entries + self.active_edge_buffer + self.work_buffer


@dataclass
class RunStats:
    iterations: list[IterationStats] = field(default_factory=list)
    converged: bool = False
    reason: str = ""
    wall_time: float = 0.0
    direction_heuristic: str = DIRECTION_HEURISTIC

    def directions(self) -> list[str]:
        return [s.direction for s in self.iterations]

    def filters(self) -> list[str]:
        return [s.filter for s in self.iterations]

    @property
    def peak_list_entries(self) -> int:
        return max((s.list_entries for s in self.iterations), default=0)

    @property
    def peak_active_edge_buffer(self) -> int:
        return max((s.active_edge_buffer for s in self.iterations), default=0)

    @property
    def peak_memory_entries(self) -> int:
        """High-water of task-management memory, in vertex/edge entries."""
        return max((s.memory_entries for s in self.iterations), default=0)

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "reason": self.reason,
            "wall_time": self.wall_time,
            "peak_memory_entries": self.peak_memory_entries,
            "direction_heuristic": self.direction_heuristic,
            "iterations": [asdict(s) for s in self.iterations],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def write_csv(self, path, columns=None) -> None:
        cols = columns or list(IterationStats.__dataclass_fields__)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for s in self.iterations:
                row = asdict(s)
                w.writerow([int(row[c]) if isinstance(row[c], bool) else row[c] for c in cols])

    def write_trace(self, path) -> None:
        self.write_csv(path, ["iteration", "direction", "filter", "small", "medium", "large",
                              "overflow"])


@dataclass
class RunResult:
    meta: Metadata
    stats: RunStats

    @property
    def values(self) -> np.ndarray:
        return self.meta.values


@dataclass
class PhaseState:
    direction: str
    iteration: int
    frontier: ActiveLists
    stats: list[IterationStats] = field(default_factory=list)


@dataclass
class WorkAssignment:
    """Work items (vertex, edge range) and the worker each is assigned to."""
    vertex: np.ndarray
    start: np.ndarray
    end: np.ndarray
    owner: np.ndarray
    worker_count: int

    def __len__(self):
        return len(self.vertex)

    def loads(self) -> np.ndarray:
        return np.bincount(self.owner, weights=self.end - self.start,
                           minlength=self.worker_count).astype(np.int64)

    def worker(self, w: int):
        sel = self.owner == w
        return self.vertex[sel], self.start[sel], self.end[sel]


def _chunk(vertices, offsets, grain):
    if len(vertices) == 0:
        e = np.zeros(0, dtype=np.int64)
        return e, e, e
    lo, hi = offsets[vertices], offsets[vertices + 1]
    if grain is None:
        return vertices, lo, hi
    n_chunks = np.maximum(1, -(-(hi - lo) // grain))
    first = np.repeat(lo, n_chunks)
    j = np.arange(int(n_chunks.sum()), dtype=np.int64) - np.repeat(exclusive_scan(n_chunks), n_chunks)
    start = first + j * grain
    end = np.minimum(start + grain, np.repeat(hi, n_chunks))
    return np.repeat(vertices, n_chunks), start, end


def schedule_tasks(lists: ActiveLists, offsets: np.ndarray, worker_count: int,
                   separators=DEFAULT_SEPARATORS, split: bool = True) -> WorkAssignment:
    """Granularity-matched work items spread over workers by prefix-scan of loads.

    Small vertices are single items; medium and large vertices are cut into
    chunks of ``separators[0]`` and ``separators[1]`` edges. Items are laid
    end to end and worker w takes those whose start falls in
    [w * mean, (w + 1) * mean), so no worker exceeds the mean by more than
    one item. ``split=False`` keeps every vertex whole (owner-computes).
    """
    small_grain, large_grain = separators
    parts = [_chunk(lists.small, offsets, None),
             _chunk(lists.medium, offsets, small_grain if split else None),
             _chunk(lists.large, offsets, large_grain if split else None)]
    vertex = np.concatenate([p[0] for p in parts])
    start = np.concatenate([p[1] for p in parts])
    end = np.concatenate([p[2] for p in parts])
    load = end - start
    total = int(load.sum())
    if total == 0 or worker_count == 1:
        owner = np.zeros(len(vertex), dtype=np.int64)
        if worker_count > 1 and len(vertex):
            owner = np.arange(len(vertex), dtype=np.int64) * worker_count // len(vertex)
    else:
        begin = np.cumsum(load) - load
        owner = np.minimum(begin * worker_count // total, worker_count - 1)
    return WorkAssignment(vertex, start, end, owner, worker_count)


def direction_select(active_edges: int, edge_count: int, alpha: float = 20.0) -> str:
    """Pull iff the frontier's out-edges exceed edge_count / alpha."""
    return PULL if active_edges > edge_count / alpha else PUSH


@dataclass
class WorkRecord:
    active_vertices: int = 0
    active_edges: int = 0
    edges_examined: int = 0
    applied: int = 0
    changed: int = 0
    work_buffer: int = 0  # peak transient edge records held by workers


def _mapper(executor):
    return executor.map if executor is not None else map


def _blocks(load: np.ndarray, limit: int) -> list[slice]:
    """Consecutive item slices of at most ``limit`` edges (one item minimum)."""
    out = []
    if len(load) == 0:
        return out
    cum = np.cumsum(load)
    i, base = 0, 0
    while i < len(load):
        j = max(int(np.searchsorted(cum, base + limit, side="right")), i + 1)
        out.append(slice(i, j))
        base = int(cum[j - 1])
        i = j
    return out


def _fold_sparse(comb, keys, vals):
    ukeys, inv = np.unique(keys, return_inverse=True)
    acc = np.full(len(ukeys), comb.identity, dtype=comb.dtype)
    comb.fold_into(acc, inv, vals)
    return ukeys, acc


def _merge(comb, parts):
    """Fold per-worker (keys, partial) pairs into one (destinations, update)."""
    if not parts:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=comb.dtype)
    return _fold_sparse(comb, np.concatenate([p[0] for p in parts]),
                        np.concatenate([p[1] for p in parts]))


def _apply_and_record(spec, meta, keys, acc, bins, flags, bounds) -> int:
    if len(keys) == 0:
        return 0
    changed = keys[np.asarray(spec.apply(meta, keys, acc), dtype=bool)]
    flags[changed] = True
    cuts = np.searchsorted(changed, bounds)
    for w, b in enumerate(bins):
        b.extend(changed[cuts[w]:cuts[w + 1]])
    return len(changed)


def superstep_push(frontier: ActiveLists, graph: CSRGraph, spec: AlgorithmSpec, meta: Metadata,
                   bins, flags, cfg: EngineConfig, edge_values=None, executor=None) -> WorkRecord:
    """Out-edge propagation from every frontier vertex; one apply per touched destination.

    Workers walk their chunks in blocks of at most ``cfg.block_edges`` edges
    and keep sparse partial folds. In deterministic mode the chunks are
    instead streamed in ascending source order into a single accumulator,
    so every destination folds its updates in the same order for any
    worker count.
    """
    ev_all = graph.out_weights if edge_values is None else edge_values
    comb = spec.combine
    if not spec.voting:
        frontier = ActiveLists.from_ids(np.unique(frontier.ids()), graph.out_degree, cfg.separators)
    work = schedule_tasks(frontier, graph.out_offsets, cfg.worker_count, cfg.separators)

    def run_block(vertex, start, end):
        eidx = expand_ranges(start, end)
        src = np.repeat(vertex, end - start)
        dst = graph.out_neighbors[eidx]
        return dst, np.asarray(spec.compute(meta, src, ev_all[eidx], dst), dtype=comb.dtype)

    if cfg.deterministic:
        order = np.lexsort((work.start, work.vertex))
        vertex, start, end = work.vertex[order], work.start[order], work.end[order]
        acc = np.full(graph.vertex_count, comb.identity, dtype=comb.dtype)
        touched = np.zeros(graph.vertex_count, dtype=bool)
        peak = 0
        for sl in _blocks(end - start, cfg.block_edges):
            dst, vals = run_block(vertex[sl], start[sl], end[sl])
            comb.fold_into(acc, dst, vals)
            touched[dst] = True
            peak = max(peak, len(dst))
        keys = np.flatnonzero(touched)
        acc = acc[keys]
    else:
        def worker(w):
            vertex, start, end = work.worker(w)
            parts, peak = [], 0
            for sl in _blocks(end - start, cfg.block_edges):
                dst, vals = run_block(vertex[sl], start[sl], end[sl])
                parts.append(_fold_sparse(comb, dst, vals))
                peak = max(peak, len(dst))
            return _merge(comb, parts) + (peak,)

        parts = list(_mapper(executor)(worker, range(cfg.worker_count)))
        peak = sum(p[2] for p in parts)
        keys, acc = _merge(comb, [p[:2] for p in parts])
    if spec.consume is not None:
        spec.consume(meta, frontier.ids())
    bounds = worker_ranges(graph.vertex_count, len(bins))
    changed = _apply_and_record(spec, meta, keys, acc, bins, flags, bounds)
    return WorkRecord(len(frontier), frontier.total_degree, frontier.total_degree, len(keys),
                      changed, peak)


def superstep_pull(frontier: ActiveLists | None, graph: CSRGraph, spec: AlgorithmSpec,
                   meta: Metadata, bins, flags, cfg: EngineConfig, edge_values=None,
                   executor=None) -> WorkRecord:
    """Owner-computes gather over in-edges; ``frontier=None`` means every vertex is a source.

    Each candidate destination is handled whole by one worker, scanning its
    in-neighbors in ascending order, so the fold order never depends on the
    worker count. Voting specs stop at the first frontier in-neighbor.
    """
    in_off, in_nbr, _, perm = graph.in_csr()
    ev_all = graph.out_weights if edge_values is None else edge_values
    comb = spec.combine
    n = graph.vertex_count
    if frontier is None:
        src_mask = np.ones(n, dtype=bool)
        n_active, active_edges = n, graph.edge_count
        frontier_ids = np.arange(n, dtype=np.int64)
    else:
        frontier_ids = frontier.ids()
        src_mask = np.zeros(n, dtype=bool)
        src_mask[frontier_ids] = True
        n_active, active_edges = len(frontier), frontier.total_degree
    if spec.pull_candidates is not None:
        cand = np.flatnonzero(spec.pull_candidates(meta))
    else:
        cand = np.arange(n, dtype=np.int64)
    in_deg = np.diff(in_off)
    lists = ActiveLists.from_ids(cand, in_deg, cfg.separators)
    work = schedule_tasks(lists, in_off, cfg.worker_count, cfg.separators, split=False)
    voting = spec.voting

    def run_block(vertex, start, end):
        lens = end - start
        eidx = expand_ranges(start, end)
        hit = src_mask[in_nbr[eidx]]
        if voting and len(eidx):
            nz = lens > 0
            pos = np.where(hit, np.arange(len(eidx)), len(eidx))
            seg_start = exclusive_scan(lens)[nz]
            first = np.minimum.reduceat(pos, seg_start)
            found = first < len(eidx)
            examined = int(np.where(found, first - seg_start + 1, lens[nz]).sum())
            sel = first[found]
        else:
            examined = len(eidx)
            sel = np.flatnonzero(hit)
        e = eidx[sel]
        dst = np.repeat(vertex, lens)[sel]
        vals = np.asarray(spec.compute(meta, in_nbr[e], ev_all[perm[e]], dst), dtype=comb.dtype)
        keys, acc = _fold_sparse(comb, dst, vals)
        return keys, acc, examined, len(eidx)

    def worker(w):
        vertex, start, end = work.worker(w)
        out = [run_block(vertex[sl], start[sl], end[sl])
               for sl in _blocks(end - start, cfg.block_edges)]
        return out

    blocks = [b for part in _mapper(executor)(worker, range(cfg.worker_count)) for b in part]
    examined = sum(b[2] for b in blocks)
    peak = cfg.worker_count * max((b[3] for b in blocks), default=0)
    folded = np.full(len(cand), comb.identity, dtype=comb.dtype)
    for keys, acc, _, _ in blocks:  # each destination lives in exactly one block
        folded[np.searchsorted(cand, keys)] = acc
    if spec.consume is not None:
        spec.consume(meta, frontier_ids)
    bounds = worker_ranges(n, len(bins))
    changed = _apply_and_record(spec, meta, cand, folded, bins, flags, bounds)
    return WorkRecord(n_active, active_edges, examined, len(cand), changed, peak)


class _Directions:
    """Per-spec direction policy."""

    def __init__(self, spec: AlgorithmSpec, graph: CSRGraph, cfg: EngineConfig):
        self.spec, self.graph, self.cfg = spec, graph, cfg
        self.policy = spec.direction
        self.push_only = cfg.filter == "batch"
        if self.policy not in ("auto", PUSH, PULL, "pull_then_push"):
            raise ValueError(f"unknown direction policy {self.policy!r}")
        if not self.push_only and self.policy in (PULL, "pull_then_push") and not graph.can_pull():
            raise MissingReverseError(f"{spec.name} pulls; build the graph with the reverse structure")

    def heuristic(self, lists: ActiveLists) -> str:
        if not self.graph.can_pull():
            return PUSH
        return direction_select(lists.total_degree, self.graph.edge_count, self.cfg.direction_alpha)

    def initial(self, lists: ActiveLists) -> str:
        if self.push_only or self.policy == PUSH:
            return PUSH
        if self.policy in (PULL, "pull_then_push"):
            return PULL
        return self.heuristic(lists)

    def early(self, current: str, meta: Metadata) -> str | None:
        """Next direction when it does not depend on the next frontier."""
        if self.push_only or self.policy == PUSH:
            return PUSH
        if self.policy == PULL:
            return PULL
        if self.policy == "pull_then_push":
            if current == PUSH:
                return PUSH
            if self.spec.switch_to_push is not None:
                return PUSH if self.spec.switch_to_push(meta) else PULL
        return None

    def late(self, current: str, lists: ActiveLists) -> str:
        if self.policy == "pull_then_push" and current == PUSH:
            return PUSH
        return self.heuristic(lists)


def _drain(frontier: ActiveLists, spec: AlgorithmSpec, meta: Metadata, deg, seps) -> ActiveLists:
    """Skip frontiers without out-edges; they cannot produce updates."""
    while frontier.total_degree == 0:
        if len(frontier) and spec.consume is not None:
            spec.consume(meta, frontier.ids())
        if spec.refill is None:
            break
        frontier = ActiveLists.from_ids(spec.refill(meta), deg, seps)
        if len(frontier) == 0:
            break
    return frontier


def run(graph: CSRGraph, spec: AlgorithmSpec, cfg: EngineConfig | None = None) -> RunResult:
    """Execute supersteps until the frontier empties, the spec converges, or max_iterations."""
    cfg = cfg or EngineConfig()
    t_run = time.perf_counter()
    n = graph.vertex_count
    deg = graph.out_degree
    seps = cfg.separators
    W = cfg.worker_count
    meta = spec.init(graph)
    edge_values = spec.edge_values(graph) if spec.edge_values is not None else None
    dirs = _Directions(spec, graph, cfg)
    ctrl = JITController(cfg.overflow_threshold)
    bins = ctrl.make_bins(W)
    flags = np.zeros(n, dtype=bool)
    all_lists = None

    lists = ActiveLists.from_ids(spec.initial_frontier(meta), deg, seps)
    if len(lists) == 0 and spec.refill is not None:
        lists = ActiveLists.from_ids(spec.refill(meta), deg, seps)
    state = PhaseState(dirs.initial(lists), 0, lists)
    stats = RunStats(state.stats)
    static_built = False

    pool = ThreadPoolExecutor(W) if cfg.parallel and W > 1 else None
    with pool or nullcontext():
        for it in range(1, cfg.max_iterations + 1):
            direction = state.direction
            all_active = spec.is_all_active(direction)
            if not all_active:
                state.frontier = _drain(state.frontier, spec, meta, deg, seps)
            if not all_active and state.frontier.total_degree == 0:
                stats.converged, stats.reason = True, "frontier empty"
                break
            t0 = time.perf_counter()
            state.iteration = it
            if all_active:
                if all_lists is None:
                    all_lists = ActiveLists.from_ids(np.arange(n, dtype=np.int64), deg, seps)
                frontier = all_lists
            else:
                frontier = state.frontier
            buffer = 0

            if cfg.filter == "batch":
                res = batch_filter(frontier, graph, spec, meta, W, cfg.memory_budget, seps,
                                   cfg.deterministic, edge_values)
                rec = WorkRecord(len(frontier), frontier.total_degree, res.active_edges,
                                 len(np.unique(res.lists.ids())), len(res.changed))
                nxt, used, overflow = res.lists, "batch", False
                buffer = res.active_edges
                list_entries = 2 * res.recorded  # bins and their concatenation
                ctrl.trace.append(TraceRow(it, used, *nxt.sizes(), False))
                next_dir = PUSH
            else:
                flags[:] = False
                for b in bins:
                    b.clear()
                if direction == PUSH:
                    rec = superstep_push(frontier, graph, spec, meta, bins, flags, cfg,
                                         edge_values, pool)
                else:
                    rec = superstep_pull(None if all_active else frontier, graph, spec, meta,
                                         bins, flags, cfg, edge_values, pool)
                overflow = any(b.overflowed for b in bins)
                next_dir = dirs.early(direction, meta)
                if next_dir is not None and spec.is_all_active(next_dir) and static_built:
                    nxt, used = all_lists, "static"
                    ctrl.trace.append(TraceRow(it, used, *nxt.sizes(), overflow))
                elif cfg.filter == "ballot":
                    nxt, used = ballot_filter(flags, deg, W, seps, pool), "ballot"
                    ctrl.trace.append(TraceRow(it, used, *nxt.sizes(), overflow))
                else:
                    nxt = jit_step(ctrl, bins, flags, deg, W, seps, it, pool)
                    used = ctrl.mode
                if next_dir is not None and spec.is_all_active(next_dir):
                    static_built = True
                list_entries = sum(len(b) for b in bins) + len(nxt)

            if spec.active is not None and len(nxt):
                nxt = nxt.select(lambda ids: spec.active(meta, ids), deg, seps)
            if len(nxt) == 0 and spec.refill is not None:
                nxt = ActiveLists.from_ids(spec.refill(meta), deg, seps)
            if next_dir is None:
                next_dir = dirs.late(direction, nxt)

            state.stats.append(IterationStats(
                it, direction, used, *frontier.sizes(), rec.active_vertices, rec.active_edges,
                rec.edges_examined, rec.applied, rec.changed, overflow, len(nxt), list_entries,
                buffer, rec.work_buffer, time.perf_counter() - t0))
            state.frontier, state.direction = nxt, next_dir
            if spec.converged is not None and spec.converged(meta, it):
                stats.converged, stats.reason = True, "converged"
                break
        else:
            stats.reason = "max_iterations"
    stats.wall_time = time.perf_counter() - t_run
    return RunResult(meta, stats)
