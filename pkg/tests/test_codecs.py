import math

import numpy as np
import pytest
from scipy.special import logit
from hypothesis import given, settings, strategies as st

from headroom import latent
from headroom.plan import join, scan, validate_plan
from headroom.plan_codec import PLAN_LENGTH, PlanLimitError, decode_plan, encode_plan, enumerate_plans
from headroom.query import ConjunctiveQuery, Predicate, validate_query
from headroom.query_codec import (QUERY_LENGTH, QueryCodecError, codec_for, decode_query, encode_query,
                                  parse_tokens, quantile_anchors)
from headroom.sql import SqlSemanticError, SqlSyntaxError, grammar_text, parse_sql, print_sql

query_tokens = st.lists(st.integers(0, 63), min_size=QUERY_LENGTH, max_size=QUERY_LENGTH)
plan_tokens = st.lists(st.integers(0, 63), min_size=PLAN_LENGTH, max_size=PLAN_LENGTH)


def _pad(prefix, n):
    return list(prefix) + [0] * (n - len(prefix))


@pytest.fixture(scope="module")
def abc(chain_catalog):
    return ConjunctiveQuery.make(["A", "B", "C"], chain_catalog.join_graph)


# plan codec

def test_zero_tokens_give_left_deep_hash_plan(abc):
    p = decode_plan(_pad([0, 0], PLAN_LENGTH), abc)
    assert p.text() == "(HashJoinBuildLeft (HashJoinBuildLeft (Scan A) (Scan B)) (Scan C))"


def test_tokens_one_two(abc):
    p = decode_plan(_pad([1, 2], PLAN_LENGTH), abc)
    assert p.text() == "(NestedLoopJoin (Scan A) (HashJoinBuildLeft (Scan B) (Scan C)))"
    assert encode_plan(p, abc)[:2] == [1, 2]


def test_encode_inverts_hand_trace(abc):
    p = join(abc, "HashJoinBuildLeft", join(abc, "HashJoinBuildLeft", scan(abc, "A"), scan(abc, "B")),
             scan(abc, "C"))
    assert encode_plan(p, abc) == _pad([0, 0], PLAN_LENGTH)


def test_non_injective_strings_share_canonical_encoding(abc):
    a = decode_plan(_pad([0, 0], PLAN_LENGTH), abc)
    b = decode_plan(_pad([6, 3], PLAN_LENGTH), abc)
    assert a == b
    assert encode_plan(b, abc) == _pad([0, 0], PLAN_LENGTH)


def test_single_table_plan_is_scan(chain_catalog):
    q = ConjunctiveQuery.make(["B"])
    assert decode_plan(list(range(PLAN_LENGTH)), q) == scan(q, "B")
    assert enumerate_plans(q) == [scan(q, "B")]


def test_plan_counts(chain_catalog, abc):
    q2 = ConjunctiveQuery.make(["A", "B"], chain_catalog.edges_between("A", "B"))
    assert len(enumerate_plans(q2)) == 3
    assert len(enumerate_plans(abc)) == 18
    assert len({p.text() for p in enumerate_plans(abc)}) == 18


def test_every_enumerated_plan_round_trips(five_catalog):
    q = ConjunctiveQuery.make(list("ABCD"), [e for e in five_catalog.join_graph if set(e.tables) <= set("ABCD")])
    for p in enumerate_plans(q):
        assert decode_plan(encode_plan(p, q), q) == p


def test_enumeration_limit(five_catalog):
    q = ConjunctiveQuery.make(list("ABCDE"), five_catalog.join_graph)
    with pytest.raises(PlanLimitError):
        enumerate_plans(q, limit=10)


def test_bad_token_strings_are_rejected(abc):
    with pytest.raises(ValueError):
        decode_plan([0] * 10, abc)
    with pytest.raises(ValueError):
        decode_plan([64] * PLAN_LENGTH, abc)


@settings(max_examples=200, deadline=None)
@given(query_tokens, plan_tokens)
def test_plan_decode_is_total_and_idempotent(five_catalog, qt, pt):
    q = decode_query(qt, five_catalog)
    p = decode_plan(pt, q)
    assert validate_plan(p, q) == []
    again = decode_plan(encode_plan(p, q), q)
    assert again == p


# query codec

def test_zero_query_tokens(ab_catalog):
    q = decode_query([0] * QUERY_LENGTH, ab_catalog)
    assert print_sql(q) == "SELECT COUNT(*) FROM A;"


def test_one_join_query(ab_catalog):
    q = decode_query(_pad([0, 1, 0, 0], QUERY_LENGTH), ab_catalog)
    assert q.tables == ("A", "B") and len(q.joins) == 1 and q.predicates == ()


def test_round_trip_of_simple_query(ab_catalog):
    q = ConjunctiveQuery.make(["A"])
    assert decode_query(encode_query(q, ab_catalog), ab_catalog) == q


def test_round_trip_of_three_tables_two_predicates(five_catalog):
    codec = codec_for(five_catalog)
    g = codec.anchors[("C", "g")][3]
    k = codec.anchors[("A", "k")][10]
    q = ConjunctiveQuery.make(list("ABC"), [e for e in five_catalog.join_graph if set(e.tables) <= set("ABC")],
                              [Predicate("C", "g", "<", g), Predicate("A", "k", "<>", k)])
    assert decode_query(encode_query(q, five_catalog), five_catalog) == q


def test_nine_predicates_exceed_capacity(five_catalog):
    values = sorted(set(codec_for(five_catalog).anchors[("A", "k")]))[:2]
    preds = [Predicate("A", "k", op, v) for v in values for op in ("=", "<", ">", "<=", ">=", "<>")]
    assert len(set(preds[:9])) == 9
    with pytest.raises(QueryCodecError, match="capacity"):
        encode_query(ConjunctiveQuery.make(["A"], (), preds[:9]), five_catalog)


def test_non_anchor_literal_is_not_encodable(five_catalog):
    q = ConjunctiveQuery.make(["A"], (), [Predicate("A", "f", "<", 123.456)])
    with pytest.raises(QueryCodecError, match="anchor"):
        encode_query(q, five_catalog)


def test_anchors_sit_at_bucket_centres():
    anchors = quantile_anchors(np.arange(160), "integer")
    assert anchors == tuple(range(5, 160, 10))


def test_token_text_parsing():
    assert parse_tokens(" ".join(["3"] * QUERY_LENGTH)) == [3] * QUERY_LENGTH
    with pytest.raises(ValueError):
        parse_tokens("1 2 3")


@settings(max_examples=300, deadline=None)
@given(query_tokens)
def test_query_decode_is_total(five_catalog, qt):
    q = decode_query(qt, five_catalog)
    assert validate_query(q, five_catalog) == []
    assert decode_query(encode_query(q, five_catalog), five_catalog) == q


# SQL

def test_print_single_table():
    assert print_sql(ConjunctiveQuery.make(["title"])) == "SELECT COUNT(*) FROM title;"


def test_print_join_with_filter(ab_catalog):
    q = ConjunctiveQuery.make(["B", "A"], ab_catalog.join_graph, [Predicate("A", "c", "<", 5)])
    assert print_sql(q) == "SELECT COUNT(*) FROM A, B WHERE A.x = B.y AND A.c < 5;"


def test_parse_is_case_insensitive(ab_catalog):
    assert parse_sql("select count(*) from A;", ab_catalog) == ConjunctiveQuery.make(["A"])


def test_cross_product_is_rejected(ab_catalog):
    with pytest.raises(SqlSemanticError, match="disconnected"):
        parse_sql("SELECT COUNT(*) FROM A, B;", ab_catalog)


def test_star_projection_is_a_syntax_error(ab_catalog):
    with pytest.raises(SqlSyntaxError) as err:
        parse_sql("SELECT * FROM A;", ab_catalog)
    assert err.value.position == 7


def test_string_literal_quoting(five_catalog):
    q = ConjunctiveQuery.make(["B"], (), [Predicate("B", "s", "=", "o'brien")])
    text = print_sql(q)
    assert "'o''brien'" in text
    assert parse_sql(text, five_catalog) == q


def test_grammar_ships_with_package():
    g = grammar_text()
    assert "query" in g and "COUNT" in g


@settings(max_examples=300, deadline=None)
@given(query_tokens)
def test_print_parse_round_trip(five_catalog, qt):
    q = decode_query(qt, five_catalog)
    assert parse_sql(print_sql(q), five_catalog) == q


# latent bridge

def test_zero_latent_quantizes_to_32(five_catalog):
    z = np.zeros(latent.LATENT_DIM)
    assert set(latent.to_tokens(z).tolist()) == {32}
    q, p = latent.decode_latent(z, five_catalog)
    assert q == decode_query([32] * QUERY_LENGTH, five_catalog)
    assert p == decode_plan([32] * PLAN_LENGTH, q)


def test_saturation():
    assert set(latent.to_tokens(np.full(latent.LATENT_DIM, -50.0)).tolist()) == {0}
    assert set(latent.to_tokens(np.full(latent.LATENT_DIM, 50.0)).tolist()) == {63}


def test_bucket_centres():
    assert latent.from_tokens([0])[0] == pytest.approx(math.log((0.5 / 64) / (1 - 0.5 / 64)))
    assert latent.from_tokens([0])[0] == pytest.approx(-math.log(127))
    assert latent.from_tokens([63])[0] == pytest.approx(math.log(127))


def test_non_finite_latent_is_rejected():
    with pytest.raises(ValueError):
        latent.to_tokens([np.nan])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-8, 8), min_size=latent.LATENT_DIM, max_size=latent.LATENT_DIM),
       st.floats(-0.45, 0.45))
def test_decode_is_constant_within_a_bucket(five_catalog, zs, shift):
    z = np.array(zs)
    tok = latent.to_tokens(z)
    # a point strictly inside every coordinate's quantization bucket
    moved = logit((tok + 0.5 + shift) / 64)
    assert np.array_equal(latent.to_tokens(moved), tok)
    assert latent.decode_latent(moved, five_catalog) == latent.decode_latent(z, five_catalog)


@settings(max_examples=100, deadline=None)
@given(query_tokens, plan_tokens)
def test_latent_round_trip(five_catalog, qt, pt):
    q, p = latent.decode_tokens(qt, pt, five_catalog)
    z = latent.encode_pair(q, p, five_catalog)
    assert latent.decode_latent(z, five_catalog) == (q, p)
