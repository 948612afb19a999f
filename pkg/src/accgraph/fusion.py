"""Kernel fusion planning: register-limited occupancy, barrier deadlock, launch counts.

Nothing here runs on a GPU. Register costs are inputs (in practice they come
from the compiler's resource report) and the global barrier is a round-based
simulation of the lock-array protocol between one monitor CTA and workers.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

STRATEGIES = ("none", "selective", "all")
KERNELS_PER_ITERATION = 4  # thread, warp, CTA and task-management kernels


class OccupancyError(ValueError):
    pass


@dataclass(frozen=True)
class DeviceProfile:
    name: str
    registers_per_smx: int
    smx_count: int
    threads_per_cta: int = 128

    def __post_init__(self):
        for f in ("registers_per_smx", "smx_count", "threads_per_cta"):
            if getattr(self, f) <= 0:
                raise ValueError(f"{f} must be positive")


@dataclass(frozen=True)
class KernelCost:
    name: str
    registers_per_thread: int
    note: str = ""

    def __post_init__(self):
        if self.registers_per_thread <= 0:
            raise ValueError("registers_per_thread must be positive")


K40 = DeviceProfile("K40", 65536, 15)
K20 = DeviceProfile("K20", 32768, 13)
PROFILES = {"K40": K40, "K20": K20}

PUSH_KERNELS = (KernelCost("push.thread", 26), KernelCost("push.warp", 27),
                KernelCost("push.cta", 28), KernelCost("push.taskmgt", 24))
PULL_KERNELS = (KernelCost("pull.thread", 24), KernelCost("pull.warp", 24),
                KernelCost("pull.cta", 22), KernelCost("pull.taskmgt", 30))
FUSED_PUSH = KernelCost("fused.push", 48)
FUSED_PULL = KernelCost("fused.pull", 50)
FUSED_ALL = KernelCost("fused.all", 110)


def default_costs() -> dict[str, KernelCost]:
    return {k.name: k for k in (*PUSH_KERNELS, *PULL_KERNELS, FUSED_PUSH, FUSED_PULL, FUSED_ALL)}


def max_resident_ctas(profile: DeviceProfile, kernel: KernelCost, strict: bool = True) -> int:
    """Resident CTA capacity: floor(regs/SMX / (regs/thread * threads/CTA)) * SMX."""
    per_smx = profile.registers_per_smx // (kernel.registers_per_thread * profile.threads_per_cta)
    ctas = per_smx * profile.smx_count
    if ctas == 0 and strict:
        raise OccupancyError(
            f"kernel {kernel.name!r} exceeds per-SMX register capacity at this CTA width "
            f"({kernel.registers_per_thread} regs x {profile.threads_per_cta} threads "
            f"> {profile.registers_per_smx})")
    return ctas


@dataclass
class BarrierResult:
    completed: bool
    rounds_done: int
    deadlock_round: int | None
    steps: int
    peak_resident: int

    @property
    def verdict(self) -> str:
        if self.completed:
            return "completed"
        return f"deadlocked at round {self.deadlock_round}"


RUN, ARRIVED, DONE = 0, 1, 2


def simulate_barrier(launched_ctas: int, resident_capacity: int,
                     barrier_rounds: int = 1) -> BarrierResult:
    """Step the monitor/worker lock-array protocol until completion or no progress.

    CTA 0 is the monitor; CTAs are dispatched in id order into free resident
    slots and hold them until they exit. A resident worker computes, writes
    "arrived" into its lock slot and spins. The monitor, once resident, flips
    every slot to "departure" when all workers have arrived. A CTA exits after
    its last round, which is the only way a slot is ever freed.
    """
    if launched_ctas < 1:
        raise ValueError("launched_ctas must be >= 1")
    if resident_capacity < 0 or barrier_rounds < 1:
        raise ValueError("resident_capacity must be >= 0 and barrier_rounds >= 1")
    n = launched_ctas
    lock = [RUN] * n
    rounds = [0] * n
    resident: set[int] = set()
    next_cta = 0
    monitor_round = 0
    steps = peak = 0
    while True:
        steps += 1
        progressed = False
        # dispatch into free slots
        while next_cta < n and len(resident) < resident_capacity:
            resident.add(next_cta)
            next_cta += 1
            progressed = True
        peak = max(peak, len(resident))
        # workers: compute then arrive; exit after the last round
        for c in sorted(resident):
            if c == 0:
                continue
            if lock[c] == RUN:
                if rounds[c] == barrier_rounds:
                    lock[c] = DONE
                    resident.discard(c)
                else:
                    lock[c] = ARRIVED
                progressed = True
        # monitor
        if 0 in resident:
            if monitor_round == barrier_rounds:
                lock[0] = DONE
                resident.discard(0)
                progressed = True
            elif all(lock[c] == ARRIVED for c in range(1, n)):
                monitor_round += 1
                for c in range(1, n):
                    lock[c] = RUN
                    rounds[c] = monitor_round
                progressed = True
        if all(s == DONE for s in lock):
            return BarrierResult(True, barrier_rounds, None, steps, peak)
        if not progressed:
            return BarrierResult(False, monitor_round, monitor_round + 1, steps, peak)


@dataclass
class LaunchGroup:
    kernels: tuple[str, ...]
    direction: str
    iterations: int
    launches: int
    cta_count: int | None = None
    launched_ctas: int | None = None
    barrier: str | None = None


@dataclass
class FusionPlan:
    strategy: str
    launch_count: int
    groups: list[LaunchGroup] = field(default_factory=list)
    profile: str | None = None

    @property
    def deadlock_free(self) -> bool:
        return all(g.barrier in (None, "completed") for g in self.groups)

    def to_dict(self) -> dict:
        return {"strategy": self.strategy, "launch_count": self.launch_count,
                "profile": self.profile, "deadlock_free": self.deadlock_free,
                "groups": [asdict(g) for g in self.groups]}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def direction_runs(phases) -> list[tuple[str, int]]:
    """Maximal runs of equal direction as (direction, length)."""
    runs: list[tuple[str, int]] = []
    for p in phases:
        if p not in ("push", "pull"):
            raise ValueError(f"phase must be push or pull, got {p!r}")
        if runs and runs[-1][0] == p:
            runs[-1] = (p, runs[-1][1] + 1)
        else:
            runs.append((p, 1))
    return runs


def plan_fusion(phase_sequence, strategy: str, profile: DeviceProfile | None = None,
                costs: dict[str, KernelCost] | None = None,
                launched_ctas: int | None = None, barrier_rounds: int | None = None) -> FusionPlan:
    """Launch schedule for a per-iteration push/pull sequence.

    With a profile, each fused launch gets its register-limited CTA count and
    the barrier is simulated with ``launched_ctas`` (default: that capacity).
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}")
    phases = list(phase_sequence)
    if not phases:
        raise ValueError("phase sequence is empty")
    runs = direction_runs(phases)
    costs = costs or default_costs()

    def group(kernels, direction, iterations, launches, fused):
        g = LaunchGroup(tuple(kernels), direction, iterations, launches)
        if profile is not None:
            g.cta_count = min(max_resident_ctas(profile, costs[k]) for k in kernels)
            if fused:
                g.launched_ctas = g.cta_count if launched_ctas is None else launched_ctas
                rounds = iterations if barrier_rounds is None else barrier_rounds
                g.barrier = simulate_barrier(g.launched_ctas, g.cta_count, max(rounds, 1)).verdict
        return g

    if strategy == "none":
        groups = [group([k.name for k in (PUSH_KERNELS if d == "push" else PULL_KERNELS)],
                        d, length, KERNELS_PER_ITERATION * length, False) for d, length in runs]
    elif strategy == "selective":
        groups = [group([FUSED_PUSH.name if d == "push" else FUSED_PULL.name], d, length, 1, True)
                  for d, length in runs]
    else:
        direction = runs[0][0] if len(runs) == 1 else "mixed"
        groups = [group([FUSED_ALL.name], direction, len(phases), 1, True)]
    return FusionPlan(strategy, sum(g.launches for g in groups), groups,
                      profile.name if profile else None)


@dataclass
class FusedCost:
    cost: KernelCost
    lower_bound: int
    upper_bound: int
    mode: str


def fused_register_cost(kernels, mode: str = "sum", measured: int | None = None,
                        name: str = "fused") -> FusedCost:
    """Register estimate for a fused kernel.

    "measured" passes a compiler-reported value through; "sum" reports the
    sum of the parts, an upper bound (the true value lies between the max
    and the sum).
    """
    kernels = list(kernels)
    if not kernels:
        raise ValueError("kernel set is empty")
    regs = [k.registers_per_thread for k in kernels]
    lo, hi = max(regs), sum(regs)
    if mode == "measured":
        if measured is None:
            raise ValueError("measured mode needs a measured register count")
        return FusedCost(KernelCost(name, measured, "measured"), lo, hi, mode)
    if mode != "sum":
        raise ValueError("mode must be 'sum' or 'measured'")
    return FusedCost(KernelCost(name, hi, f"upper bound; true cost in [{lo}, {hi}]"), lo, hi, mode)


def _parse_kv(text: str) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _read(source) -> str:
    if isinstance(source, (str, Path)) and Path(source).exists():
        return Path(source).read_text()
    return str(source)


def load_profile(source) -> DeviceProfile:
    """key=value file with registers_per_smx, smx_count, optional threads_per_cta and name."""
    kv = _parse_kv(_read(source))
    try:
        return DeviceProfile(kv.get("name", "custom"), int(kv["registers_per_smx"]),
                             int(kv["smx_count"]), int(kv.get("threads_per_cta", 128)))
    except KeyError as e:
        raise ValueError(f"profile is missing {e.args[0]}") from None


def load_costs(source) -> dict[str, KernelCost]:
    """key=value file mapping kernel name to registers per thread; merged over the defaults."""
    costs = default_costs()
    for k, v in _parse_kv(_read(source)).items():
        costs[k] = KernelCost(k, int(v))
    return costs
