import numpy as np
import pytest

from headroom.catalog import Catalog, CatalogError, TableDef, ingest_csv, load_catalog, parse_schema, write_csv
from headroom.stats import build_stats, column_stats
from headroom.synth import bounded_zipf, generate_synthetic, parse_generator_spec

TWO_TABLES = """
tables:
  - name: A
    columns: [x: integer, c: integer]
  - name: B
    columns: [y: integer, s: string]
joins:
  - [A.x, B.y]
"""


def test_empty_csvs_give_empty_tables(tmp_path):
    (tmp_path / "A.csv").write_text("x,c\n")
    (tmp_path / "B.csv").write_text("y,s\n")
    cat = load_catalog(TWO_TABLES, tmp_path)
    assert cat.table_names == ("A", "B")
    assert cat.row_count("A") == 0 and cat.row_count("B") == 0


def test_edge_type_mismatch_is_rejected(tmp_path):
    bad = TWO_TABLES.replace("[A.x, B.y]", "[A.x, B.s]")
    (tmp_path / "A.csv").write_text("x,c\n")
    (tmp_path / "B.csv").write_text("y,s\n")
    with pytest.raises(CatalogError, match="type"):
        load_catalog(bad, tmp_path)


def test_chain_row_counts_match_fixture_lines(tmp_path):
    schema = """
tables:
  - {name: A, columns: [id: integer]}
  - {name: B, columns: [a: integer, c: integer]}
  - {name: C, columns: [id: integer]}
joins: [[A.id, B.a], [B.c, C.id]]
"""
    sizes = {"A": 10, "B": 20, "C": 30}
    for name, n in sizes.items():
        header = "a,c" if name == "B" else "id"
        body = "".join(f"{i},{i}\n" if name == "B" else f"{i}\n" for i in range(n))
        (tmp_path / f"{name}.csv").write_text(header + "\n" + body)
    cat = load_catalog(schema, tmp_path)
    expected = {name: len((tmp_path / f"{name}.csv").read_text().splitlines()) - 1 for name in sizes}
    assert {t: cat.row_count(t) for t in sizes} == expected == sizes


def test_ingest_two_rows(tmp_path):
    f = tmp_path / "t.csv"
    f.write_text("a,b\n1,x\n2,y")
    cols = ingest_csv(TableDef("t", (("a", "integer"), ("b", "string"))), f)
    assert cols["a"].tolist() == [1, 2] and cols["b"].tolist() == ["x", "y"]


def test_ingest_reports_bad_row(tmp_path):
    f = tmp_path / "t.csv"
    f.write_text("a\nfoo")
    with pytest.raises(CatalogError, match=r"row 1"):
        ingest_csv(TableDef("t", (("a", "integer"),)), f)


def test_ingest_large_file(tmp_path):
    f = tmp_path / "t.csv"
    n = 100_000
    f.write_text("a\n" + "\n".join(map(str, range(n))) + "\n")
    lines = len(f.read_text().splitlines()) - 1
    cols = ingest_csv(TableDef("t", (("a", "integer"),)), f)
    assert len(cols["a"]) == lines == n


def test_config_syntax_error_has_line_number():
    with pytest.raises(CatalogError, match=r":\d+"):
        parse_schema("tables:\n  - name: [A\n", "schema.yaml")


def test_reserved_and_invalid_names():
    with pytest.raises(CatalogError):
        Catalog.from_columns([TableDef("select", (("x", "integer"),))], [], {})
    with pytest.raises(CatalogError):
        Catalog.from_columns([TableDef("A", (("1x", "integer"),))], [], {})


def test_unknown_edge_column():
    with pytest.raises(CatalogError):
        Catalog.from_columns([TableDef("A", (("x", "integer"),)), TableDef("B", (("y", "integer"),))],
                             [(("A", "x"), ("B", "nope"))], {})


def test_save_load_round_trip(tmp_path, five_catalog):
    five_catalog.save(tmp_path / "c.npz")
    back = Catalog.load(tmp_path / "c.npz")
    assert back.fingerprint == five_catalog.fingerprint
    assert back.join_graph == five_catalog.join_graph


def test_csv_round_trip(tmp_path, ab_catalog):
    write_csv(ab_catalog, tmp_path)
    cat = load_catalog(TWO_TABLES.replace("s: string", "d: integer"), tmp_path)
    for t in ("A", "B"):
        for c in ab_catalog.table(t).column_names:
            assert cat.column(t, c).tolist() == ab_catalog.column(t, c).tolist()


def test_column_arrays_are_read_only(ab_catalog):
    with pytest.raises(ValueError):
        ab_catalog.column("A", "x")[0] = 5


# statistics

def test_stats_small_column():
    cs = column_stats(np.array([1, 1, 2, 3]), buckets=2)
    assert cs.row_count == 4 and cs.distinct_count == 3
    assert sum(cs.counts) == 4


def test_stats_empty_and_constant():
    empty = column_stats(np.array([], dtype=np.int64), buckets=8)
    assert empty.row_count == 0 and empty.buckets == 0
    const = column_stats(np.full(50, 7), buckets=8)
    assert const.distinct_count == 1 and const.buckets == 1


def test_stats_bucket_count_must_be_positive(ab_catalog):
    with pytest.raises(ValueError):
        build_stats(ab_catalog, buckets=0)


def test_histogram_is_equi_depth():
    values = np.random.default_rng(0).integers(0, 1000, size=10_000)
    cs = column_stats(values, buckets=10)
    assert cs.buckets == 10
    assert max(cs.counts) - min(cs.counts) < 200
    assert list(cs.lows) == sorted(cs.lows)


# synthetic generation

GEN = """
tables:
  - name: t
    columns: [id: integer, a: integer, b: integer, z: integer]
  - name: u
    columns: [id: integer, t: integer]
joins: [[u.t, t.id]]
generator:
  seed: 3
  tables:
    t: {rows: 1000, columns: {id: sequential, a: {uniform: 100}, z: {zipf: [1.1, 1000]}}}
    u: {rows: 500, columns: {id: sequential, t: {fk: t.id}}}
  correlations:
    - {table: t, target: b, source: a, fn: mod, arg: 10}
"""


def test_generator_is_deterministic():
    a = generate_synthetic(parse_generator_spec(GEN))
    b = generate_synthetic(parse_generator_spec(GEN))
    assert a.fingerprint == b.fingerprint


def test_generator_seed_changes_data():
    spec = parse_generator_spec(GEN)
    spec.seed = 4
    assert generate_synthetic(spec).fingerprint != generate_synthetic(parse_generator_spec(GEN)).fingerprint


def test_mod_correlation_holds():
    cat = generate_synthetic(parse_generator_spec(GEN))
    assert np.array_equal(cat.column("t", "b"), cat.column("t", "a") % 10)


def test_foreign_keys_reference_existing_rows():
    cat = generate_synthetic(parse_generator_spec(GEN))
    assert set(cat.column("u", "t").tolist()) <= set(cat.column("t", "id").tolist())


def test_zipf_top_value_dominates():
    ranks = bounded_zipf(np.random.default_rng(0), 1.1, 1000, 100_000)
    counts = np.sort(np.bincount(ranks))[::-1]
    assert counts[0] > counts[1]


def test_generator_rejects_unknown_column():
    bad = GEN.replace("a: {uniform: 100}", "q: {uniform: 100}")
    with pytest.raises(CatalogError):
        parse_generator_spec(bad)
