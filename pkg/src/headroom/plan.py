"""Physical plans: binary join trees over filtered scans.

Text form (stable, used in exports)::

    plan  = "(" "Scan" table ")"
          | "(" op plan plan ")" ;
    op    = "HashJoinBuildLeft" | "HashJoinBuildRight" | "NestedLoopJoin" ;

Pushed-down predicates and join conditions are implied by the query and are
not part of the text. In every plan the left child holds the
lexicographically smallest table of the two subtrees.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property

from headroom.catalog import JoinEdge
from headroom.query import ConjunctiveQuery, Predicate

HASH_BUILD_LEFT = "HashJoinBuildLeft"
HASH_BUILD_RIGHT = "HashJoinBuildRight"
NESTED_LOOP = "NestedLoopJoin"
JOIN_OPS = (HASH_BUILD_LEFT, HASH_BUILD_RIGHT, NESTED_LOOP)


class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class Scan:
    table: str
    predicates: tuple[Predicate, ...] = ()

    @cached_property
    def tables(self) -> frozenset:
        return frozenset((self.table,))

    @property
    def min_table(self) -> str:
        return self.table

    def text(self) -> str:
        return f"(Scan {self.table})"

    def joins(self):
        return iter(())


@dataclass(frozen=True)
class Join:
    op: str
    left: "Scan | Join"
    right: "Scan | Join"
    conditions: tuple[JoinEdge, ...]

    @cached_property
    def tables(self) -> frozenset:
        return self.left.tables | self.right.tables

    @cached_property
    def min_table(self) -> str:
        return min(self.tables)

    def text(self) -> str:
        return f"({self.op} {self.left.text()} {self.right.text()})"

    def joins(self):
        """Join nodes in post-order (children before parents)."""
        yield from self.left.joins()
        yield from self.right.joins()
        yield self


PhysicalPlan = Scan | Join


def scan(q: ConjunctiveQuery, table: str) -> Scan:
    return Scan(table, q.predicates_on(table))


def join(q: ConjunctiveQuery, op: str, a: PhysicalPlan, b: PhysicalPlan) -> Join:
    """Join two subtrees of ``q``; children are put in canonical order."""
    if op not in JOIN_OPS:
        raise PlanError(f"unknown join operator {op!r}")
    if b.min_table < a.min_table:
        a, b = b, a
    conds = q.edges_between(a.tables, b.tables)
    if not conds:
        raise PlanError(f"no join edge between {sorted(a.tables)} and {sorted(b.tables)}")
    return Join(op, a, b, conds)


def plan_text(p: PhysicalPlan) -> str:
    return p.text()


_TOKEN = re.compile(r"\s*(\(|\)|[A-Za-z_][A-Za-z0-9_]*)")


def parse_plan(text: str, q: ConjunctiveQuery) -> PhysicalPlan:
    """Parse the s-expression text form back into a plan of ``q``."""
    tokens, pos = [], 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise PlanError(f"bad plan text at position {pos}: {text[pos:pos + 10]!r}")
        tokens.append(m.group(1))
        pos = m.end()
    i = 0

    def node():
        nonlocal i
        if i >= len(tokens) or tokens[i] != "(":
            raise PlanError("expected '(' in plan text")
        head = tokens[i + 1] if i + 1 < len(tokens) else None
        i += 2
        if head == "Scan":
            table = tokens[i]
            i += 1
            out = scan(q, table)
        elif head in JOIN_OPS:
            a = node()
            b = node()
            out = Join(head, a, b, q.edges_between(a.tables, b.tables))
        else:
            raise PlanError(f"unknown plan node {head!r}")
        if i >= len(tokens) or tokens[i] != ")":
            raise PlanError("expected ')' in plan text")
        i += 1
        return out

    p = node()
    if i != len(tokens):
        raise PlanError("trailing tokens in plan text")
    problems = validate_plan(p, q)
    if problems:
        raise PlanError("; ".join(problems))
    return p


def validate_plan(p: PhysicalPlan, q: ConjunctiveQuery) -> list[str]:
    """Violations of the plan invariants for query ``q`` (empty if valid)."""
    out = []
    leaves = []

    def walk(n):
        if isinstance(n, Scan):
            leaves.append(n.table)
            if n.predicates != q.predicates_on(n.table):
                out.append(f"scan of {n.table} does not carry exactly its predicates")
            return
        if n.op not in JOIN_OPS:
            out.append(f"unknown operator {n.op!r}")
        walk(n.left)
        walk(n.right)
        if n.left.min_table > n.right.min_table:
            out.append(f"children of {n.op} not in canonical order")
        expected = q.edges_between(n.left.tables, n.right.tables)
        if not expected:
            out.append(f"cross product between {sorted(n.left.tables)} and {sorted(n.right.tables)}")
        if n.conditions != expected:
            out.append(f"join conditions of {n.op} do not match the query edges")

    walk(p)
    if sorted(leaves) != list(q.tables):
        out.append(f"plan leaves {sorted(leaves)} != query tables {list(q.tables)}")
    return out
