"""Integer-string representation of join plans.

Decoding is total: every length-64 string over ``[0, 63]`` yields a valid
plan for any query. Several strings map to the same plan; :func:`encode_plan`
returns the canonical, smallest-token one.

Decoding starts from one leaf per query table. Step ``k`` lists the tree
pairs joined by at least one query edge, ordered by the smallest table
of each tree, and reads token ``v``: pair ``v mod |C|``, operator
``(v div |C|) mod 3``.
"""
from __future__ import annotations

import itertools

import numpy as np

from headroom.optimizer import connected_splits
from headroom.plan import JOIN_OPS, Join, PhysicalPlan, PlanError, Scan, join, scan, validate_plan
from headroom.query import ConjunctiveQuery

PLAN_LENGTH = 64
VOCAB = 64


class PlanLimitError(PlanError):
    pass


def _candidates(forest: list, q: ConjunctiveQuery) -> list[tuple[int, int]]:
    # forest is kept sorted by min table, so index pairs come out canonical
    return [(i, j) for i, j in itertools.combinations(range(len(forest)), 2)
            if q.edges_between(forest[i].tables, forest[j].tables)]


def _merge(forest: list, i: int, j: int, op: str, q: ConjunctiveQuery) -> list:
    node = join(q, op, forest[i], forest[j])
    rest = [t for k, t in enumerate(forest) if k not in (i, j)] + [node]
    return sorted(rest, key=lambda t: t.min_table)


def check_tokens(tokens, length: int = PLAN_LENGTH) -> list[int]:
    arr = np.asarray(tokens)
    if arr.dtype.kind in "USO":
        try:
            arr = np.array([int(v) for v in arr.ravel()]).reshape(arr.shape)
        except (TypeError, ValueError):
            raise ValueError("tokens must be integers") from None
    if arr.shape != (length,):
        raise ValueError(f"token string must have length {length}, got shape {arr.shape}")
    if arr.dtype.kind not in "iu" or arr.min() < 0 or arr.max() >= VOCAB:
        if arr.dtype.kind in "iu" or not np.all(arr == np.floor(arr)):
            raise ValueError(f"tokens must be integers in [0, {VOCAB - 1}]")
        arr = arr.astype(np.int64)
        if arr.min() < 0 or arr.max() >= VOCAB:
            raise ValueError(f"tokens must be integers in [0, {VOCAB - 1}]")
    return arr.tolist()


def decode_plan(tokens, q: ConjunctiveQuery) -> PhysicalPlan:
    tokens = check_tokens(tokens)
    if len(q.tables) - 1 > PLAN_LENGTH:
        raise PlanLimitError(f"queries over more than {PLAN_LENGTH + 1} tables are not decodable")
    forest: list = [scan(q, t) for t in q.tables]
    for v in tokens[: len(q.tables) - 1]:
        cands = _candidates(forest, q)
        i, j = cands[v % len(cands)]
        op = JOIN_OPS[(v // len(cands)) % 3]
        forest = _merge(forest, i, j, op, q)
    return forest[0]


def encode_plan(p: PhysicalPlan, q: ConjunctiveQuery) -> list[int]:
    problems = validate_plan(p, q)
    if problems:
        raise PlanError("not a plan of the query: " + "; ".join(problems))
    pending = {id(n): n for n in p.joins()}
    forest: list = [scan(q, t) for t in q.tables]
    tokens = []
    while pending:
        cands = _candidates(forest, q)
        by_tables = {frozenset(t.tables): k for k, t in enumerate(forest)}
        ready = []
        for n in pending.values():
            i, j = by_tables.get(n.left.tables), by_tables.get(n.right.tables)
            if i is not None and j is not None:
                ready.append((cands.index((min(i, j), max(i, j))), n))
        idx, node = min(ready, key=lambda r: r[0])
        token = JOIN_OPS.index(node.op) * len(cands) + idx
        if token >= VOCAB:
            raise PlanLimitError(f"plan step needs token {token} > {VOCAB - 1}")
        tokens.append(token)
        i, j = cands[idx]
        forest = _merge(forest, i, j, node.op, q)
        del pending[id(node)]
    return tokens + [0] * (PLAN_LENGTH - len(tokens))


def enumerate_plans(q: ConjunctiveQuery, limit: int = 100_000) -> list[PhysicalPlan]:
    """Every valid plan of ``q`` (all bushy shapes times all operators)."""
    memo: dict[frozenset, list] = {}

    def plans(sub: frozenset) -> list:
        got = memo.get(sub)
        if got is not None:
            return got
        if len(sub) == 1:
            got = [scan(q, next(iter(sub)))]
        else:
            got = []
            for a, b in connected_splits(sub, q):
                conds = q.edges_between(a, b)
                for pa, pb in itertools.product(plans(a), plans(b)):
                    for op in JOIN_OPS:
                        got.append(Join(op, pa, pb, conds))
                        if len(got) > limit:
                            raise PlanLimitError(f"more than {limit} plans")
        memo[sub] = got
        return got

    return plans(frozenset(q.tables))


def random_plan_tokens(rng: np.random.Generator) -> list[int]:
    return rng.integers(0, VOCAB, size=PLAN_LENGTH).tolist()


def format_tokens(tokens) -> str:
    return " ".join(str(int(v)) for v in tokens)


def parse_tokens(text: str, length: int = PLAN_LENGTH) -> list[int]:
    return check_tokens(text.split(), length)
