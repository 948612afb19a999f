"""Per-iteration filter choice and list sizes for each algorithm on one R-MAT graph."""
import argparse

import numpy as np

from accgraph import algorithms as alg
from accgraph.engine import EngineConfig
from accgraph.generate import rmat_graph
from accgraph.graph import generate_weights


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scale", type=int, default=14)
    ap.add_argument("--edge-factor", type=int, default=16)
    ap.add_argument("--workers", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", help="directory for per-algorithm trace CSVs")
    a = ap.parse_args()

    cfg = EngineConfig(worker_count=a.workers)
    g = generate_weights(rmat_graph(a.scale, a.edge_factor, a.seed), a.seed, 1.0, 64.0)
    gu = rmat_graph(a.scale, a.edge_factor, a.seed, directed=False)
    src = int(np.argmax(g.out_degree))
    p, lik = alg.default_bp_inputs(g, a.seed)
    runs = {
        "bfs": alg.bfs(g, src, cfg),
        "sssp": alg.sssp(g, src, cfg=cfg),
        "kcore": alg.kcore(gu, alg.DEFAULT_K, cfg),
        "pagerank": alg.pagerank(g, cfg=cfg),
        "bp": alg.belief_propagation(g, p, lik, 10, cfg=cfg),
    }
    print(f"graph {g.summary()}  workers={a.workers}")
    for name, res in runs.items():
        st = res.stats
        print(f"\n{name}: {len(st.iterations)} iterations, {st.reason}, {st.wall_time:.3f}s")
        print(f"{'it':>4} {'dir':>4} {'filter':>7} {'small':>7} {'medium':>7} {'large':>7} overflow")
        for s in st.iterations[:25]:
            print(f"{s.iteration:>4} {s.direction:>4} {s.filter:>7} {s.small:>7} {s.medium:>7} "
                  f"{s.large:>7} {int(s.overflow)}")
        if len(st.iterations) > 25:
            print(f"  ... {len(st.iterations) - 25} more")
        if a.out:
            st.write_trace(f"{a.out}/{name}_trace.csv")


if __name__ == "__main__":
    main()
