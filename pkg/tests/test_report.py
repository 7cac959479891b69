import dataclasses
import math
import warnings

import pytest
from hypothesis import given, strategies as st

from headroom.bo import Observation
from headroom.report import (BenchmarkSuite, HeadroomReport, SuiteEntry, export_benchmark, geometric_mean,
                             load_suite, median, read_queries_sql, select_top_k, summarize)
from headroom.sql import parse_sql

BASE = Observation((0,) * 256, (0,) * 64, "SELECT COUNT(*) FROM A;", 1.0, 100, 100,
                   "(Scan A)", "(Scan A)", False, 1, 0, 0)


def _obs(sql, l_default, l_witness, timed_out=False):
    return dataclasses.replace(BASE, sql=sql, l_default=l_default, l_witness=l_witness,
                               objective=l_default / l_witness, witness_timed_out=timed_out)


def _suite(relatives):
    return BenchmarkSuite([SuiteEntry(f"q{i}", "SELECT COUNT(*) FROM A;", "(Scan A)", (0,) * 64,
                                      1000, int(1000 / r), r, 1000 - 1000 / r)
                           for i, r in enumerate(relatives, start=1)])


def test_single_observation_with_large_k_warns():
    with pytest.warns(UserWarning):
        suite = select_top_k([_obs("SELECT COUNT(*) FROM A;", 300, 100)], k=5)
    assert len(suite) == 1


def test_keeps_best_witness_per_query():
    obs = [_obs("SELECT COUNT(*) FROM A;", 300, 100), _obs("SELECT COUNT(*) FROM A;", 700, 100)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        suite = select_top_k(obs, k=1)
    assert suite.relatives == [7.0]


def test_ranked_nonincreasing():
    obs = [_obs(f"SELECT COUNT(*) FROM A WHERE A.c < {i};", 100 * (i % 7 + 1), 50 + i) for i in range(30)]
    for mode in ("relative", "absolute"):
        suite = select_top_k(obs, k=10, rank_mode=mode)
        key = suite.relatives if mode == "relative" else suite.absolutes
        assert key == sorted(key, reverse=True)


def test_capped_witnesses_are_skipped():
    obs = [_obs("SELECT COUNT(*) FROM A;", 300, 100), _obs("SELECT COUNT(*) FROM B;", 300, 10, timed_out=True)]
    with pytest.warns(UserWarning):
        suite = select_top_k(obs, k=2)
    assert [e.sql for e in suite.entries] == ["SELECT COUNT(*) FROM A;"]


def test_bad_arguments():
    with pytest.raises(ValueError):
        select_top_k([], k=3)
    with pytest.raises(ValueError):
        select_top_k([BASE], k=0)
    with pytest.raises(ValueError):
        select_top_k([BASE], rank_mode="both")


def test_median_and_geomean_hand_values():
    rep = summarize(_suite([1.5, 20, 80]))
    assert rep.median_relative == 20
    assert geometric_mean([1.5, 20, 80]) == pytest.approx(2400 ** (1 / 3))
    assert geometric_mean([1.5, 20, 80]) == pytest.approx(13.3887, abs=1e-4)
    assert geometric_mean([2, 8]) == pytest.approx(4)
    assert median([1, 2, 3, 10]) == 2.5


def test_single_entry_summary():
    rep = summarize(_suite([3.0]))
    assert rep.median_relative == 3.0
    assert rep.geomean_relative == pytest.approx(3.0, rel=1e-12)


def test_geomean_rejects_nonpositive():
    with pytest.raises(ValueError):
        geometric_mean([1.0, 0.0])
    with pytest.raises(ValueError):
        geometric_mean([])


@given(st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=40), st.floats(1e-2, 1e2))
def test_geomean_properties(values, c):
    g = geometric_mean(values)
    assert geometric_mean([c * v for v in values]) == pytest.approx(c * g, rel=1e-9)
    assert g <= sum(values) / len(values) * (1 + 1e-12)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
def test_cdf_is_monotone(values):
    pts = HeadroomReport.cdf(values)
    assert all(a[0] <= b[0] and a[1] < b[1] for a, b in zip(pts, pts[1:]))
    assert pts[-1][1] == 1.0


def test_export_round_trip(tmp_path, five_catalog):
    sqls = ["SELECT COUNT(*) FROM A, B WHERE A.id = B.a AND B.s = 'o''brien';",
            "SELECT COUNT(*) FROM A WHERE A.f < -0.5;", "SELECT COUNT(*) FROM E;"]
    obs = [_obs(s, 400 + i, 100) for i, s in enumerate(sqls)]
    suite = select_top_k(obs, k=3)
    export_benchmark(suite, tmp_path / "a", "fp")
    export_benchmark(suite, tmp_path / "b", "fp")
    for name in ("queries.sql", "witness_plans.jsonl", "headroom.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    lines = (tmp_path / "a" / "headroom.csv").read_text().splitlines()
    assert lines[0] == "name,l_default,l_witness,relative,absolute"
    assert len(lines) - 1 == len(suite)
    parsed = [parse_sql(sql, five_catalog) for _, sql in read_queries_sql(tmp_path / "a" / "queries.sql")]
    assert parsed == [parse_sql(e.sql, five_catalog) for e in suite.entries]
    assert load_suite(tmp_path / "a") == suite


def test_summary_matches_brute_force(tmp_path):
    obs = [_obs(f"SELECT COUNT(*) FROM A WHERE A.c < {i};", 1000 + 37 * i, 100 + 11 * i) for i in range(40)]
    suite = select_top_k(obs, k=25)
    rep = summarize(suite)
    rel = sorted(o.l_default / o.l_witness for o in obs)[-25:]
    assert rep.median_relative == rel[12]
    assert rep.geomean_relative == pytest.approx(math.exp(sum(map(math.log, rel)) / 25), rel=1e-12)
