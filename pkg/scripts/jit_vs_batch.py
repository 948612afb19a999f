"""Wall time and list memory of the JIT filter against the batch baseline."""
import argparse
import time

import numpy as np

from accgraph import algorithms as alg
from accgraph.engine import EngineConfig, run
from accgraph.generate import rmat_graph, uniform_graph


def best_of(g, spec_fn, cfg, repeat):
    times, res = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        res = run(g, spec_fn(), cfg)
        times.append(time.perf_counter() - t0)
    return min(times), res


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scales", type=int, nargs="+", default=[12, 14, 16])
    ap.add_argument("--edge-factor", type=int, default=16)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--uniform", action="store_true", help="uniform graphs of the same size")
    a = ap.parse_args()

    print(f"{'graph':<22}{'filter':<10}{'time s':>9}{'iters':>7}{'peak mem':>11}{'edge buf':>11}")
    for scale in a.scales:
        if a.uniform:
            g = uniform_graph(1 << scale, a.edge_factor << scale, scale)
        else:
            g = rmat_graph(scale, a.edge_factor, scale)
        src = int(np.argmax(g.out_degree))

        def push_bfs():
            spec = alg.bfs_spec(src)
            spec.direction = "push"
            return spec

        for label, cfg in (("jit", EngineConfig()), ("ballot", EngineConfig(filter="ballot")),
                           ("batch", EngineConfig(filter="batch"))):
            t, res = best_of(g, push_bfs, cfg, a.repeat)
            st = res.stats
            print(f"{g.summary():<22}{label:<10}{t:>9.3f}{len(st.iterations):>7}"
                  f"{st.peak_memory_entries:>11}{st.peak_active_edge_buffer:>11}")


if __name__ == "__main__":
    main()
