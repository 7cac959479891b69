"""Command-line entry point: ``headroom <subcommand> ...``.

On failure a single JSON line ``{"error": ..., "message": ...}`` goes to
stderr and the exit code is 2.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import yaml

from headroom import bo, report
from headroom.catalog import Catalog, load_catalog
from headroom.sql import parse_sql
from headroom.stats import build_stats
from headroom.synth import generate_synthetic, parse_generator_spec


def _common(p: argparse.ArgumentParser, config_help: str) -> None:
    p.add_argument("--config", help=config_help)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)


def cmd_ingest(args) -> None:
    if not args.config:
        raise ValueError("ingest needs --config <schema file>")
    cat = load_catalog(Path(args.config), args.data)
    cat.save(args.out)
    print(json.dumps({"catalog": args.out, "fingerprint": cat.fingerprint,
                      "rows": {t.name: cat.row_count(t.name) for t in cat.tables}}))


def cmd_stats(args) -> None:
    stats = build_stats(Catalog.load(args.catalog), args.buckets)
    Path(args.out).write_text(json.dumps(stats.to_dict(), indent=1, sort_keys=True), encoding="utf-8")


def cmd_synth(args) -> None:
    if not args.config:
        raise ValueError("synth needs --config <schema file with generator section>")
    spec = parse_generator_spec(Path(args.config).read_text(encoding="utf-8"), args.config)
    if args.seed is not None:
        spec.seed = args.seed
    cat = generate_synthetic(spec)
    cat.save(args.out)
    print(json.dumps({"catalog": args.out, "fingerprint": cat.fingerprint,
                      "rows": {t.name: cat.row_count(t.name) for t in cat.tables}}))


def cmd_run(args) -> None:
    raw = {}
    if args.config:
        raw = yaml.safe_load(Path(args.config).read_text(encoding="utf-8")) or {}
    config = bo.RunConfig.from_dict(raw)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.iterations is not None:
        overrides["iterations"] = args.iterations
    if args.objective is not None:
        overrides["objective_mode"] = args.objective
    catalog_path = args.catalog or config.catalog
    if not catalog_path:
        raise ValueError("run needs --catalog or a 'catalog' entry in the run config")
    overrides["catalog"] = str(catalog_path)
    config = dataclasses.replace(config, **overrides)
    obs = bo.run(config, Catalog.load(catalog_path), args.out, resume=args.resume)
    print(json.dumps({"observations": len(obs),
                      "best": bo.best_objective(obs, config),
                      "archive": str(Path(args.out) / "archive.jsonl")}))


def cmd_export(args) -> None:
    catalog = Catalog.load(args.catalog)
    suite = report.select_top_k(bo.read_archive(args.archive), args.k, args.rank)
    for e in suite.entries:
        parse_sql(e.sql, catalog)
    report.export_benchmark(suite, args.out, catalog.fingerprint)
    print(json.dumps({"entries": len(suite), "out": args.out}))


def cmd_report(args) -> None:
    rep = report.summarize(report.load_suite(args.suite))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")
    report.write_cdf_csv(rep.relative, out / "cdf_relative.csv")
    report.write_cdf_csv(rep.absolute, out / "cdf_absolute.csv")
    if args.plot:
        report.plot_cdfs(rep, out / "cdf.svg")
    print(json.dumps(rep.to_dict(), sort_keys=True))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="headroom", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="schema + CSV data -> catalog cache (.npz)")
    _common(p, "schema config (YAML)")
    p.add_argument("--data", required=True, help="directory holding <table>.csv files")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("stats", help="catalog cache -> statistics JSON")
    _common(p, "unused")
    p.add_argument("--catalog", required=True)
    p.add_argument("--buckets", type=int, default=32)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("synth", help="generator spec -> catalog cache (.npz)")
    _common(p, "schema config with a generator section")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="run Bayesian optimization; writes archive + checkpoint")
    _common(p, "run config (YAML mapping of RunConfig fields)")
    p.add_argument("--catalog")
    p.add_argument("--iterations", type=int)
    p.add_argument("--objective", choices=("relative", "absolute"))
    p.add_argument("--resume", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("export", help="archive -> benchmark suite files")
    _common(p, "unused")
    p.add_argument("--catalog", required=True)
    p.add_argument("--archive", required=True)
    p.add_argument("--k", type=int, default=report.DEFAULT_K)
    p.add_argument("--rank", choices=("relative", "absolute"), default="relative")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("report", help="suite -> headroom report + CDF CSVs")
    _common(p, "unused")
    p.add_argument("--suite", required=True, help="directory written by 'export'")
    p.add_argument("--plot", action="store_true", help="also write cdf.svg")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        args.func(args)
    except Exception as exc:  # noqa: BLE001 - surfaced as a machine-readable line
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
