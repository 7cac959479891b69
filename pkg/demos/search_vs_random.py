"""Search the star catalog for high-headroom queries and compare with random sampling.

Both searches get the same number of evaluations. The search archive is then
reduced to a benchmark suite and summarized.
"""
import argparse
import time
from pathlib import Path

from headroom.bo import RunConfig, best_objective, random_search, run
from headroom.datasets import star_catalog
from headroom.report import export_benchmark, select_top_k, summarize
from headroom.stats import build_stats


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--iterations", type=int, default=300)
    ap.add_argument("--k", type=int, default=20)
    ap.add_argument("--out", default="star_demo")
    args = ap.parse_args()

    cat = star_catalog()
    stats = build_stats(cat)
    print(cat)
    cfg = RunConfig(seed=args.seed, iterations=args.iterations)
    budget = cfg.n_init + cfg.iterations * cfg.batch_size
    out = Path(args.out)

    t0 = time.perf_counter()
    rs = random_search(cfg, cat, stats)
    print(f"random search: best relative {best_objective(rs, cfg):.2f} "
          f"({budget} evaluations, {time.perf_counter() - t0:.0f}s)")
    t0 = time.perf_counter()
    obs = run(cfg, cat, out / "run", stats=stats)
    print(f"bayesian opt:  best relative {best_objective(obs, cfg):.2f} "
          f"({len(obs)} evaluations, {time.perf_counter() - t0:.0f}s)")

    suite = select_top_k(obs, args.k)
    export_benchmark(suite, out / "suite", cat.fingerprint)
    rep = summarize(suite)
    print(f"top {len(suite)}: median relative {rep.median_relative:.2f}, "
          f"geometric mean {rep.geomean_relative:.2f}, max {rep.max_relative:.2f}")
    for e in suite.entries[:3]:
        print(f"  {e.relative:6.2f}  {e.sql}")
    print(f"suite written to {out / 'suite'}")


if __name__ == "__main__":
    main()
