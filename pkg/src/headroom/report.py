"""Benchmark suites: selection from an archive, export, and headroom summaries."""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from headroom.bo import ENGINE_VERSION, Observation
from headroom.plan_codec import format_tokens

DEFAULT_K = 122
HEADROOM_COLUMNS = ("name", "l_default", "l_witness", "relative", "absolute")


@dataclass(frozen=True)
class SuiteEntry:
    name: str
    sql: str
    witness_plan: str
    plan_tokens: tuple[int, ...]
    l_default: int
    l_witness: int
    relative: float
    absolute: float


@dataclass
class BenchmarkSuite:
    entries: list[SuiteEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def relatives(self) -> list[float]:
        return [e.relative for e in self.entries]

    @property
    def absolutes(self) -> list[float]:
        return [e.absolute for e in self.entries]


def geometric_mean(values) -> float:
    """exp(mean(log v)); every value must be strictly positive."""
    vals = np.asarray(list(values), dtype=np.float64)
    if vals.size == 0:
        raise ValueError("geometric mean of an empty sequence")
    if np.any(~(vals > 0)):
        raise ValueError("geometric mean needs strictly positive values")
    return float(np.exp(np.mean(np.log(vals))))


def median(values) -> float:
    s = sorted(values)
    if not s:
        raise ValueError("median of an empty sequence")
    mid = len(s) // 2
    return float(s[mid]) if len(s) % 2 else (s[mid - 1] + s[mid]) / 2.0


def select_top_k(observations: list[Observation], k: int = DEFAULT_K,
                 rank_mode: str = "relative") -> BenchmarkSuite:
    """Best witness per distinct query, ranked by ``rank_mode``, top ``k``.

    Witnesses that hit their work-unit cap are never selected.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    if rank_mode not in ("relative", "absolute"):
        raise ValueError(f"unknown rank mode {rank_mode!r}")
    if not observations:
        raise ValueError("archive is empty")

    def score(o):
        rel = o.l_default / max(1, o.l_witness)
        return rel if rank_mode == "relative" else float(o.l_default - o.l_witness)

    best: dict[str, Observation] = {}
    for o in observations:
        if o.witness_timed_out:
            continue
        cur = best.get(o.sql)
        if cur is None or score(o) > score(cur):
            best[o.sql] = o
    ranked = sorted(best.values(), key=lambda o: (-score(o), o.sql))[:k]
    if len(ranked) < k:
        warnings.warn(f"only {len(ranked)} distinct queries available for k={k}", stacklevel=2)
    entries = [
        SuiteEntry(f"q{i}", o.sql, o.witness_plan, tuple(o.plan_tokens), o.l_default, o.l_witness,
                   o.l_default / max(1, o.l_witness), float(o.l_default - o.l_witness))
        for i, o in enumerate(ranked, start=1)
    ]
    return BenchmarkSuite(entries)


@dataclass(frozen=True)
class HeadroomReport:
    relative: list[float]
    absolute: list[float]
    median_relative: float
    median_absolute: float
    geomean_relative: float
    min_relative: float
    max_relative: float
    min_absolute: float
    max_absolute: float

    @staticmethod
    def cdf(values) -> list[tuple[float, float]]:
        n = len(values)
        return [(v, (i + 1) / n) for i, v in enumerate(sorted(values))]

    def to_dict(self) -> dict:
        return {
            "n": len(self.relative),
            "median_relative": self.median_relative,
            "median_absolute": self.median_absolute,
            "geomean_relative": self.geomean_relative,
            "min_relative": self.min_relative,
            "max_relative": self.max_relative,
            "min_absolute": self.min_absolute,
            "max_absolute": self.max_absolute,
        }


def summarize(suite: BenchmarkSuite) -> HeadroomReport:
    if not len(suite):
        raise ValueError("cannot summarize an empty suite")
    rel = sorted(suite.relatives)
    ab = sorted(suite.absolutes)
    if rel[0] <= 0:
        raise ValueError(f"nonpositive relative headroom {rel[0]}")
    return HeadroomReport(rel, ab, median(rel), median(ab), geometric_mean(rel),
                          rel[0], rel[-1], ab[0], ab[-1])


def _num(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def export_benchmark(suite: BenchmarkSuite, out_dir, catalog_fingerprint: str = "") -> list[Path]:
    """Write queries.sql, witness_plans.jsonl, headroom.csv and manifest.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "queries.sql", out / "witness_plans.jsonl", out / "headroom.csv", out / "manifest.json"]
    with open(paths[0], "w", encoding="utf-8", newline="\n") as fh:
        for e in suite.entries:
            fh.write(f"-- {e.name}\n{e.sql}\n\n")
    with open(paths[1], "w", encoding="utf-8", newline="\n") as fh:
        for e in suite.entries:
            fh.write(json.dumps({"name": e.name, "plan_tokens": format_tokens(e.plan_tokens),
                                 "plan_text": e.witness_plan}, sort_keys=True) + "\n")
    with open(paths[2], "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADROOM_COLUMNS)
        for e in suite.entries:
            w.writerow([e.name, e.l_default, e.l_witness, _num(e.relative), _num(e.absolute)])
    manifest = {"catalog_fingerprint": catalog_fingerprint, "engine_version": ENGINE_VERSION,
                "entries": len(suite), "latency_unit": "work_units"}
    paths[3].write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths


def read_queries_sql(path) -> list[tuple[str, str]]:
    """``(name, sql)`` blocks of an exported queries.sql."""
    out, name, buf = [], None, []
    for line in Path(path).read_text(encoding="utf-8").split("\n"):
        if not buf and not line.strip():
            continue
        if line.startswith("-- ") and not buf:
            name = line[3:].strip()
            continue
        buf.append(line)
        if line.rstrip().endswith(";"):
            out.append((name, "\n".join(buf).strip()))
            name, buf = None, []
    return out


def load_suite(out_dir) -> BenchmarkSuite:
    """Rebuild a suite from the files written by :func:`export_benchmark`."""
    out = Path(out_dir)
    sql = dict(read_queries_sql(out / "queries.sql"))
    plans = {}
    for line in (out / "witness_plans.jsonl").read_text(encoding="utf-8").splitlines():
        if line.strip():
            r = json.loads(line)
            plans[r["name"]] = r
    entries = []
    with open(out / "headroom.csv", newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            n = row["name"]
            entries.append(SuiteEntry(n, sql[n], plans[n]["plan_text"],
                                      tuple(int(v) for v in plans[n]["plan_tokens"].split()),
                                      int(row["l_default"]), int(row["l_witness"]),
                                      float(row["relative"]), float(row["absolute"])))
    return BenchmarkSuite(entries)


def write_cdf_csv(values, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("value", "fraction"))
        for v, f in HeadroomReport.cdf(values):
            w.writerow((_num(float(v)), _num(f)))


def plot_cdfs(report: HeadroomReport, path) -> None:
    """Static SVG of both CDFs with the medians marked."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(8, 3))
    for ax, values, med, label in ((axes[0], report.absolute, report.median_absolute, "absolute headroom (work units)"),
                                   (axes[1], report.relative, report.median_relative, "relative headroom")):
        pts = HeadroomReport.cdf(values)
        ax.step([p[0] for p in pts], [p[1] for p in pts], where="post")
        ax.plot([med], [0.5], "rx")
        ax.set_xlabel(label)
        ax.set_ylabel("CDF")
    axes[1].set_xscale("log")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
