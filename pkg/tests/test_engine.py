import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from headroom.catalog import Catalog, JoinEdge, TableDef
from headroom.engine import OracleLimitError, execute_plan, naive_count_oracle
from headroom.plan import JOIN_OPS, Join, PlanError, Scan, join, parse_plan, scan, validate_plan
from headroom.plan_codec import decode_plan, enumerate_plans
from headroom.query import ConjunctiveQuery, Predicate, validate_query
from headroom.query_codec import decode_query


def _q(tables, joins=(), preds=()):
    return ConjunctiveQuery.make(tables, joins, preds)


def test_single_table_query_is_valid(ab_catalog):
    assert validate_query(_q(["A"]), ab_catalog) == []


def test_disconnected_query_is_flagged(chain_catalog):
    problems = validate_query(_q(["A", "C"]), chain_catalog)
    assert any("disconnected" in p for p in problems)


def test_predicate_on_non_filterable_column(ab_catalog):
    problems = validate_query(_q(["A"], (), [Predicate("A", "x", "=", 1)]), ab_catalog)
    assert any("A.x" in p for p in problems)


def test_literal_type_is_checked(ab_catalog):
    assert validate_query(_q(["A"], (), [Predicate("A", "c", "=", "abc")]), ab_catalog)


# plans

def test_join_rejects_cross_product(chain_catalog):
    q = _q(["A", "B", "C"], chain_catalog.join_graph)
    with pytest.raises(PlanError):
        join(q, "HashJoinBuildLeft", scan(q, "A"), scan(q, "C"))


def test_plan_text_round_trip(chain_catalog):
    q = _q(["A", "B", "C"], chain_catalog.join_graph)
    for p in enumerate_plans(q):
        assert parse_plan(p.text(), q) == p
        assert validate_plan(p, q) == []


def test_validate_plan_flags_missing_table(chain_catalog):
    q = _q(["A", "B", "C"], chain_catalog.join_graph)
    q2 = _q(["A", "B"], chain_catalog.edges_between("A", "B"))
    p = join(q2, "NestedLoopJoin", scan(q2, "A"), scan(q2, "B"))
    assert validate_plan(p, q)


# engine

def _tiny(rows_a, rows_b, edge=True):
    tables = [TableDef("A", (("x", "integer"),), ("x",)), TableDef("B", (("y", "integer"),), ("y",))]
    joins = [(("A", "x"), ("B", "y"))] if edge else []
    return Catalog.from_columns(tables, joins, {"A": {"x": rows_a}, "B": {"y": rows_b}})


def test_scan_of_empty_table():
    cat = _tiny([], [1])
    res = execute_plan(Scan("A"), cat)
    assert (res.count, res.work_units) == (0, 0)


def test_hash_join_work_units():
    # 10 rows join 20 rows with exactly 5 matches
    a = list(range(10))
    b = [0, 1, 2, 3, 4] + list(range(100, 115))
    cat = _tiny(a, b)
    q = _q(["A", "B"], cat.join_graph)
    p = join(q, "HashJoinBuildLeft", scan(q, "A"), scan(q, "B"))
    res = execute_plan(p, cat)
    assert res.count == 5
    assert res.work_units == (10 + 20 + 5) + (10 + 20)


def test_nested_loop_work_units():
    cat = _tiny(list(range(10)), list(range(5, 25)))
    q = _q(["A", "B"], cat.join_graph)
    res = execute_plan(join(q, "NestedLoopJoin", scan(q, "A"), scan(q, "B")), cat)
    assert res.count == 5
    assert res.work_units == 10 * 20 + 5 + 30


def test_cap_reports_timeout():
    cat = _tiny(list(range(10)), list(range(20)))
    q = _q(["A", "B"], cat.join_graph)
    res = execute_plan(join(q, "NestedLoopJoin", scan(q, "A"), scan(q, "B")), cat, cap=100)
    assert res.timed_out and res.work_units == 100


def test_all_plans_agree_on_count(chain_catalog):
    q = _q(["A", "B", "C"], chain_catalog.join_graph, [Predicate("B", "w", "<", 3)])
    counts = {execute_plan(p, chain_catalog).count for p in enumerate_plans(q)}
    assert counts == {naive_count_oracle(q, chain_catalog)}


def test_wall_clock_mode(chain_catalog):
    q = _q(["A", "B"], chain_catalog.edges_between("A", "B"))
    res = execute_plan(join(q, "HashJoinBuildRight", scan(q, "A"), scan(q, "B")), chain_catalog,
                       mode="wall_clock")
    assert res.wall_clock is not None and res.wall_clock >= 0


# naive oracle

def test_oracle_two_matching_pairs():
    cat = _tiny([1, 2], [2, 3])
    assert naive_count_oracle(_q(["A", "B"], cat.join_graph), cat) == 1


def test_oracle_empty_table():
    cat = _tiny([], [2, 3])
    assert naive_count_oracle(_q(["A", "B"], cat.join_graph), cat) == 0


def test_oracle_single_table_predicate():
    cat = _tiny([1, 2, 3, 4], [0])
    assert naive_count_oracle(_q(["A"], (), [Predicate("A", "x", "<", 3)]), cat) == 2


def test_oracle_row_limit():
    cat = _tiny(list(range(100)), list(range(100)))
    with pytest.raises(OracleLimitError):
        naive_count_oracle(_q(["A", "B"], cat.join_graph), cat, row_limit=1000)


def test_string_predicates(five_catalog):
    q = _q(["B"], (), [Predicate("B", "s", "=", "o'brien")])
    expected = int(np.sum(five_catalog.column("B", "s") == "o'brien"))
    assert execute_plan(Scan("B", q.predicates), five_catalog).count == expected
    assert naive_count_oracle(q, five_catalog) == expected


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 63), min_size=256, max_size=256),
       st.lists(st.integers(0, 63), min_size=64, max_size=64))
def test_random_pairs_match_oracle(five_catalog, qt, pt):
    q = decode_query(qt, five_catalog)
    p = decode_plan(pt, q)
    try:
        expected = naive_count_oracle(q, five_catalog, row_limit=2_000_000)
    except OracleLimitError:
        return
    assert execute_plan(p, five_catalog).count == expected


def test_join_ops_are_the_three_operators():
    assert JOIN_OPS == ("HashJoinBuildLeft", "HashJoinBuildRight", "NestedLoopJoin")
    edge = JoinEdge.make(("A", "x"), ("B", "y"))
    node = Join("NestedLoopJoin", Scan("A"), Scan("B"), (edge,))
    assert node.text() == "(NestedLoopJoin (Scan A) (Scan B))"
