"""Active-Compute-Combine programming model.

An algorithm is an :class:`AlgorithmSpec`: an activity predicate, a per-edge
``compute`` producing updates, and a commutative/associative ``combine`` that
folds every update destined to one vertex before a single ``apply``.

All spec callables are vectorized over numpy arrays and must be pure apart
from ``apply``/``consume``, which the engine calls from one owner at a time.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np


class CombineClass(enum.Enum):
    AGGREGATION = "aggregation"  # every update is needed
    VOTING = "voting"            # any single update gives the same post-state


@dataclass
class Metadata:
    """Per-vertex state: one primary array plus named auxiliary arrays.

    ``edge`` holds optional per-edge values aligned with the out-CSR;
    ``params`` holds scalars (damping, k, current bucket, ...).
    """
    values: np.ndarray
    aux: dict[str, np.ndarray] = field(default_factory=dict)
    edge: np.ndarray | None = None
    params: dict[str, Any] = field(default_factory=dict)

    def __len__(self):
        return len(self.values)

    def take(self, ids) -> "Metadata":
        """Gathered copy where row i is vertex ids[i]."""
        return Metadata(self.values[ids].copy(), {k: a[ids].copy() for k, a in self.aux.items()},
                        None, dict(self.params))

    def copy(self) -> "Metadata":
        return Metadata(self.values.copy(), {k: a.copy() for k, a in self.aux.items()},
                        None if self.edge is None else self.edge.copy(), dict(self.params))


@dataclass(frozen=True)
class Combine:
    """Binary operator with an explicit identity.

    ``op`` is normally a numpy ufunc so the engine can fold with ``op.at``;
    plain callables still work with :func:`fold_updates` and
    :func:`validate_combine`.
    """
    op: Callable
    identity: Any
    name: str = ""
    dtype: Any = np.float64
    tolerance: float = 0.0
    sampler: Callable[[np.random.Generator, int], np.ndarray] | None = None

    def __call__(self, a, b):
        return self.op(a, b)

    def fold_into(self, acc: np.ndarray, index: np.ndarray, values: np.ndarray) -> None:
        """acc[index[i]] = acc[index[i]] (+) values[i], sequentially in array order."""
        if isinstance(self.op, np.ufunc):
            self.op.at(acc, index, values)
        else:
            for i, v in zip(index.tolist(), values.tolist()):
                acc[i] = self.op(acc[i], v)


def _nonneg(rng, size):
    return rng.uniform(0.0, 1e6, size)


def _floats(rng, size):
    return rng.uniform(-1.0, 1.0, size) * 10.0 ** rng.integers(-8, 8, size)


def _ints(rng, size):
    return rng.integers(-2**20, 2**20, size)


MIN = Combine(np.minimum, math.inf, "min", np.float64, 0.0, _nonneg)
MAX = Combine(np.maximum, -math.inf, "max", np.float64, 0.0, _nonneg)
SUM = Combine(np.add, 0.0, "sum", np.float64, 0.0, _floats)
INT_SUM = Combine(np.add, 0, "int_sum", np.int64, 0.0, _ints)
SUBTRACT = Combine(np.subtract, 0.0, "subtract", np.float64, 0.0, _floats)


def int_min(identity: int) -> Combine:
    return Combine(np.minimum, identity, "int_min", np.int64, 0.0,
                   lambda rng, size: rng.integers(0, identity, size))


# compute(meta, src, edge_values, dst) -> update values
ComputeFn = Callable[[Metadata, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
# apply(meta, dst, combined) -> changed mask; dst is duplicate-free
ApplyFn = Callable[[Metadata, np.ndarray, np.ndarray], np.ndarray]


@dataclass
class AlgorithmSpec:
    """The ACC triple plus the hooks the engine needs to drive it.

    direction: "auto" (edge-ratio heuristic every superstep), "push", "pull",
    or "pull_then_push" (pull first, push once the switch fires, never back).
    """
    name: str
    init: Callable[[Any], Metadata]
    initial_frontier: Callable[[Metadata], np.ndarray]
    compute: ComputeFn
    combine: Combine
    combine_class: CombineClass
    apply: ApplyFn
    active: Callable[[Metadata, np.ndarray], np.ndarray] | None = None
    consume: Callable[[Metadata, np.ndarray], None] | None = None
    refill: Callable[[Metadata], np.ndarray] | None = None
    pull_candidates: Callable[[Metadata], np.ndarray] | None = None
    all_active: Callable[[str], bool] | None = None
    direction: str = "auto"
    switch_to_push: Callable[[Metadata], bool] | None = None
    converged: Callable[[Metadata, int], bool] | None = None
    edge_values: Callable[[Any], np.ndarray] | None = None

    @property
    def voting(self) -> bool:
        return self.combine_class is CombineClass.VOTING

    def is_all_active(self, direction: str) -> bool:
        return bool(self.all_active and self.all_active(direction))


@dataclass
class Violation:
    kind: str  # "commutativity" | "associativity" | "identity"
    operands: tuple
    lhs: Any
    rhs: Any


@dataclass
class ValidationReport:
    combine: str
    samples: int
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def count(self, kind: str) -> int:
        return sum(v.kind == kind for v in self.violations)


def _close(x, y, tol):
    if x == y:
        return True
    try:
        return abs(x - y) <= tol
    except TypeError:
        return False


def validate_combine(spec, sample_count: int = 1000, seed: int = 0) -> ValidationReport:
    """Sample triples and report commutativity, associativity and identity violations."""
    comb: Combine = getattr(spec, "combine", spec)
    if comb.sampler is None:
        raise ValueError(f"combine {comb.name!r} has no value sampler")
    rng = np.random.default_rng(seed)
    a, b, c = (comb.sampler(rng, sample_count).tolist() for _ in range(3))
    op, tol = comb.op, comb.tolerance
    report = ValidationReport(comb.name, sample_count)
    for x, y, z in zip(a, b, c):
        xy, yx = op(x, y), op(y, x)
        if not _close(xy, yx, tol):
            report.violations.append(Violation("commutativity", (x, y), xy, yx))
        left, right = op(op(x, y), z), op(x, op(y, z))
        if not _close(left, right, tol):
            report.violations.append(Violation("associativity", (x, y, z), left, right))
        e = op(x, comb.identity)
        if not _close(e, x, tol):
            report.violations.append(Violation("identity", (x,), e, x))
    return report


def fold_updates(spec, updates) -> Any:
    """Left fold of the combine operator starting from its identity."""
    comb: Combine = getattr(spec, "combine", spec)
    return functools.reduce(comb.op, updates, comb.identity)


def segmented_scan(comb: Combine, values: np.ndarray, segments: np.ndarray,
                   exclusive: bool = False) -> np.ndarray:
    """Per-segment prefix fold (Hillis-Steele doubling), order preserved.

    ``segments`` labels each element; equal labels must be contiguous.
    """
    n = len(values)
    out = np.array(values, dtype=comb.dtype, copy=True)
    if n == 0:
        return out
    step = 1
    while step < n:
        same = segments[step:] == segments[:-step]
        shifted = out[:-step].copy()
        tail = out[step:]
        tail[same] = comb.op(shifted[same], tail[same])
        step *= 2
    if exclusive:
        excl = np.empty_like(out)
        excl[0] = comb.identity
        excl[1:] = out[:-1]
        first = np.ones(n, dtype=bool)
        first[1:] = segments[1:] != segments[:-1]
        excl[first] = comb.identity
        return excl
    return out
