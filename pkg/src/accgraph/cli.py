"""accgraph command line: convert, gen, run, plan."""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import algorithms as alg
from . import fusion
from .engine import EngineConfig, RunResult
from .generate import rmat_edges, uniform_edges
from .graph import MAGIC, CSRGraph, build_csr, generate_weights, load_edge_list, read_binary, write_binary


def _separators(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected two integers, e.g. 32,128") from None
    return lo, hi


def _weight_range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected lo,hi") from None
    return lo, hi


def load_graph(path, undirected: bool = False, reverse: bool = True) -> CSRGraph:
    """Binary CSR if the file starts with the magic, text edge list otherwise."""
    p = Path(path)
    with open(p, "rb") as fh:
        head = fh.read(len(MAGIC))
    if head == MAGIC:
        return read_binary(p)
    with open(p, "rb") as fh:
        el = load_edge_list(fh, directed=not undirected)
    return build_csr(el, build_reverse=reverse)


def _graph_flags(p):
    p.add_argument("--undirected", action="store_true", help="treat each line as an undirected edge")
    p.add_argument("--reverse", action="store_true", help="also store in-neighbors")
    p.add_argument("--weights", type=_weight_range, metavar="LO,HI",
                   help="replace weights with seeded uniform values in [LO, HI)")


def _engine_flags(p):
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--threshold", type=int, default=64, help="thread-bin overflow threshold")
    p.add_argument("--separators", type=_separators, default=(32, 128))
    p.add_argument("--alpha", type=float, default=20.0, help="push/pull edge-ratio divisor")
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--filter", choices=("jit", "ballot", "batch"), default="jit")
    p.add_argument("--parallel", action="store_true", help="run workers on a thread pool")
    p.add_argument("--max-iterations", type=int, default=100_000)
    p.add_argument("--repeat", type=int, default=1)
    p.add_argument("--json", metavar="PATH", help="write the run report as JSON ('-' for stdout)")
    p.add_argument("--csv", metavar="PATH", help="write per-iteration stats as CSV")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="accgraph", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    c = sub.add_parser("convert", help="edge list -> binary CSR")
    c.add_argument("input")
    c.add_argument("output")
    c.add_argument("--seed", type=int, default=0)
    _graph_flags(c)

    g = sub.add_parser("gen", help="write a synthetic graph as binary CSR")
    g.add_argument("kind", choices=("rmat", "uniform"))
    g.add_argument("output")
    g.add_argument("--scale", type=int, default=16, help="rmat: 2**scale vertices")
    g.add_argument("--edge-factor", type=int, default=16)
    g.add_argument("--vertices", type=int, default=1000, help="uniform: vertex count")
    g.add_argument("--edges", type=int, default=5000, help="uniform: edge count")
    g.add_argument("--seed", type=int, default=0)
    _graph_flags(g)

    r = sub.add_parser("run", help="run an algorithm")
    r.add_argument("algorithm", choices=alg.ALGORITHMS)
    r.add_argument("graph")
    r.add_argument("--source", type=int, default=0)
    r.add_argument("--delta", type=float)
    r.add_argument("--k", type=int, default=alg.DEFAULT_K)
    r.add_argument("--damping", type=float, default=alg.DEFAULT_DAMPING)
    r.add_argument("--epsilon", type=float)
    r.add_argument("--iterations", type=int, default=alg.DEFAULT_BP_ITERATIONS)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--verify", action="store_true")
    r.add_argument("--trace", metavar="PATH", help="per-iteration CSV: direction, filter, list sizes")
    _graph_flags(r)
    _engine_flags(r)

    pl = sub.add_parser("plan", help="kernel fusion plan")
    pl.add_argument("--profile", default="K40", help="K40, K20 or a key=value file")
    pl.add_argument("--costs", help="key=value kernel register table")
    pl.add_argument("--strategy", choices=fusion.STRATEGIES, default="selective")
    src = pl.add_mutually_exclusive_group()
    src.add_argument("--phases", help="comma separated push/pull per iteration")
    src.add_argument("--trace", help="trace CSV with a direction column")
    src.add_argument("--iterations", type=int, help="synthetic all-push sequence of this length")
    pl.add_argument("--regs", type=int, help="measured registers per thread for the fused kernel(s)")
    pl.add_argument("--override", type=int, metavar="CTAS", help="launch this many CTAs")
    pl.add_argument("--rounds", type=int, help="barrier rounds to simulate (default: iterations)")
    return ap


def _config(a) -> EngineConfig:
    return EngineConfig(worker_count=a.workers, overflow_threshold=a.threshold,
                        separators=a.separators, direction_alpha=a.alpha,
                        deterministic=a.deterministic, max_iterations=a.max_iterations,
                        filter=a.filter, parallel=a.parallel)


def _prepare(a):
    t0 = time.perf_counter()
    g = load_graph(a.graph, a.undirected, reverse=True)
    if a.weights:
        g = generate_weights(g, a.seed, *a.weights)
    return g, time.perf_counter() - t0


def _execute(a, g, cfg) -> tuple[RunResult, dict]:
    name = a.algorithm
    extra: dict = {}
    if name == "bfs":
        return alg.bfs(g, a.source, cfg), extra
    if name == "sssp":
        return alg.sssp(g, a.source, a.delta, cfg), extra
    if name == "kcore":
        return alg.kcore(g, a.k, cfg), extra
    if name == "pagerank":
        eps = a.epsilon
        if eps is None and a.verify:
            eps = 1e-9  # tight enough for the 1e-6 L1 check
        extra["epsilon"] = eps if eps is not None else 1e-6 * g.vertex_count
        return alg.pagerank(g, a.damping, eps, cfg=cfg), extra
    priors, lik = alg.default_bp_inputs(g, a.seed)
    extra.update(priors=priors, likelihoods=lik)
    return alg.belief_propagation(g, priors, lik, a.iterations, cfg=cfg), extra


def verify(name: str, g: CSRGraph, res: RunResult, a, extra) -> dict:
    if name == "bfs":
        got, want, tol, norm = res.values, alg.bfs_oracle(g, a.source), 0.0, "exact"
    elif name == "sssp":
        got, want, tol, norm = res.values, alg.dijkstra(g, a.source), 0.0, "exact"
    elif name == "kcore":
        got, want, tol, norm = res.meta.aux["alive"], alg.kcore_oracle(g, a.k), 0.0, "exact"
    elif name == "pagerank":
        got, want, tol, norm = res.values, alg.pagerank_oracle(g, a.damping), 1e-6, "l1"
    else:
        want = alg.bp_oracle(g, extra["priors"], extra["likelihoods"], a.iterations)
        got, tol, norm = res.values, 1e-12, "linf"
    if norm == "exact":
        bad = np.flatnonzero(got != want)
        err = float(len(bad))
        ok = len(bad) == 0
    else:
        diff = np.abs(got - want)
        err = float(diff.sum() if norm == "l1" else diff.max(initial=0.0))
        ok = err <= tol
        bad = np.flatnonzero(diff > (tol if norm == "linf" else 0.0)) if not ok else np.zeros(0, int)
    out = {"verdict": "PASS" if ok else "FAIL", "norm": norm, "error": err, "tolerance": tol}
    if not ok and len(bad):
        v = int(bad[0])
        out["first_divergent_vertex"] = v
        out["got"], out["expected"] = got[v].item(), want[v].item()
    return out


def cmd_run(a) -> int:
    g, load_time = _prepare(a)
    cfg = _config(a)
    times = []
    res = extra = None
    for _ in range(max(1, a.repeat)):
        t0 = time.perf_counter()
        res, extra = _execute(a, g, cfg)
        times.append(time.perf_counter() - t0)
    stats = res.stats
    report = {
        "algorithm": a.algorithm,
        "graph": {"V": g.vertex_count, "E": g.edge_count},
        "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in cfg.__dict__.items()},
        "load_time": load_time,
        "wall_time": {"mean": float(np.mean(times)), "min": float(np.min(times)), "runs": len(times)},
        **{k: v for k, v in stats.to_dict().items() if k != "wall_time"},
    }
    if "epsilon" in extra:
        report["epsilon"] = extra["epsilon"]
    if a.verify:
        report["verification"] = verify(a.algorithm, g, res, a, extra)
    if a.trace:
        stats.write_trace(a.trace)
    if a.csv:
        stats.write_csv(a.csv)
    if a.json == "-":
        print(json.dumps(report, indent=2, default=float))
    else:
        if a.json:
            Path(a.json).write_text(json.dumps(report, indent=2, default=float))
        print(f"{a.algorithm} {g.summary()} iterations={len(stats.iterations)} "
              f"{stats.reason} mean={report['wall_time']['mean']:.4f}s "
              f"min={report['wall_time']['min']:.4f}s")
        if a.verify:
            v = report["verification"]
            line = f"verify: {v['verdict']} ({v['norm']} error {v['error']:.3g})"
            if "first_divergent_vertex" in v:
                line += (f" first divergent vertex {v['first_divergent_vertex']}: "
                         f"got {v['got']} expected {v['expected']}")
            print(line)
    if a.verify and report["verification"]["verdict"] != "PASS":
        return 1
    return 0


def _write_graph(g: CSRGraph, a) -> None:
    if a.weights:
        g = generate_weights(g, a.seed, *a.weights)
    with open(a.output, "wb") as fh:
        write_binary(g, fh)
    print(g.summary())


def cmd_convert(a) -> int:
    with open(a.input, "rb") as fh:
        el = load_edge_list(fh, directed=not a.undirected)
    _write_graph(build_csr(el, build_reverse=a.reverse), a)
    return 0


def cmd_gen(a) -> int:
    if a.kind == "rmat":
        el = rmat_edges(a.scale, a.edge_factor, a.seed, directed=not a.undirected)
    else:
        el = uniform_edges(a.vertices, a.edges, a.seed, directed=not a.undirected)
    _write_graph(build_csr(el, build_reverse=a.reverse), a)
    return 0


def _phases(a) -> list[str]:
    if a.phases:
        return [p.strip() for p in a.phases.split(",") if p.strip()]
    if a.trace:
        with open(a.trace, newline="") as fh:
            return [row["direction"] for row in csv.DictReader(fh)]
    return ["push"] * (a.iterations or 1)


def cmd_plan(a) -> int:
    profile = fusion.PROFILES.get(a.profile) or fusion.load_profile(a.profile)
    costs = fusion.load_costs(a.costs) if a.costs else fusion.default_costs()
    if a.regs is not None:
        fused = {"selective": (fusion.FUSED_PUSH, fusion.FUSED_PULL), "all": (fusion.FUSED_ALL,)}
        for k in fused.get(a.strategy, ()):
            costs[k.name] = fusion.KernelCost(k.name, a.regs, "measured")
    plan = fusion.plan_fusion(_phases(a), a.strategy, profile, costs, a.override, a.rounds)
    print(plan.to_json(indent=2))
    return 0


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    handler = {"convert": cmd_convert, "gen": cmd_gen, "run": cmd_run, "plan": cmd_plan}[a.cmd]
    try:
        return handler(a)
    except (ValueError, OSError, MemoryError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
