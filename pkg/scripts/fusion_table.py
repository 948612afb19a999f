"""Resident CTA capacity, barrier outcome and launch counts per fusion strategy."""
import argparse

from accgraph import fusion as fu


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--phases", default="push,push,pull,pull,pull,push,push",
                    help="comma separated per-iteration directions")
    a = ap.parse_args()
    phases = a.phases.split(",")

    costs = fu.default_costs()
    print(f"{'kernel':<14}" + "".join(f"{p.name:>8}" for p in fu.PROFILES.values()))
    for k in costs.values():
        row = "".join(f"{fu.max_resident_ctas(p, k, strict=False):>8}" for p in fu.PROFILES.values())
        print(f"{k.name:<14}{row}    ({k.registers_per_thread} regs)")

    print("\nbarrier with the fused-all kernel on K40")
    cap = fu.max_resident_ctas(fu.K40, fu.FUSED_ALL)
    for launched in (cap // 2, cap, cap + 1, 2 * cap):
        print(f"  launched {launched:>4} / capacity {cap}: {fu.simulate_barrier(launched, cap, 3).verdict}")

    print(f"\nphases {','.join(phases)} ({len(phases)} iterations)")
    for strategy in fu.STRATEGIES:
        plan = fu.plan_fusion(phases, strategy, fu.K40)
        print(f"  {strategy:<9} launches={plan.launch_count:<4} deadlock_free={plan.deadlock_free}")
    s = fu.fused_register_cost(fu.PUSH_KERNELS + fu.PULL_KERNELS)
    print(f"\nsum-of-parts estimate for fusing everything: {s.cost.registers_per_thread} regs "
          f"({s.cost.note}); table value {fu.FUSED_ALL.registers_per_thread}")


if __name__ == "__main__":
    main()
