"""Conjunctive COUNT(*) queries: equijoins plus AND-ed column predicates."""
from __future__ import annotations

from dataclasses import dataclass

from headroom.catalog import Catalog, JoinEdge

OPERATORS = ("=", "<", ">", "<=", ">=", "<>")


class QueryError(ValueError):
    pass


@dataclass(frozen=True)
class Predicate:
    table: str
    column: str
    op: str
    value: object

    def sort_key(self):
        # literals of one column share a type, so they compare
        return (self.table, self.column, OPERATORS.index(self.op), self.value)

    def __str__(self) -> str:
        from headroom.sql import format_literal

        return f"{self.table}.{self.column} {self.op} {format_literal(self.value)}"


@dataclass(frozen=True)
class ConjunctiveQuery:
    """Canonical query: sorted tables, sorted edges, sorted unique predicates.

    Build through :meth:`make`, which canonicalizes.
    """

    tables: tuple[str, ...]
    joins: tuple[JoinEdge, ...] = ()
    predicates: tuple[Predicate, ...] = ()

    @classmethod
    def make(cls, tables, joins=(), predicates=()) -> "ConjunctiveQuery":
        preds = sorted(set(predicates), key=Predicate.sort_key)
        return cls(tuple(sorted(set(tables))), tuple(sorted(set(joins))), tuple(preds))

    def predicates_on(self, table: str) -> tuple[Predicate, ...]:
        return tuple(p for p in self.predicates if p.table == table)

    def edges_between(self, left: frozenset, right: frozenset) -> tuple[JoinEdge, ...]:
        return tuple(e for e in self.joins
                     if (e.left_table in left and e.right_table in right)
                     or (e.left_table in right and e.right_table in left))

    def is_connected(self) -> bool:
        if not self.tables:
            return False
        seen = {self.tables[0]}
        frontier = [self.tables[0]]
        while frontier:
            t = frontier.pop()
            for e in self.joins:
                if t in e.tables:
                    other = e.right_table if e.left_table == t else e.left_table
                    if other not in seen:
                        seen.add(other)
                        frontier.append(other)
        return seen == set(self.tables)


def with_implied_edges(q: ConjunctiveQuery, catalog: Catalog) -> ConjunctiveQuery:
    """Add every catalog edge whose endpoints are both in the query."""
    ts = set(q.tables)
    edges = set(q.joins) | {e for e in catalog.join_graph if e.left_table in ts and e.right_table in ts}
    return ConjunctiveQuery.make(q.tables, edges, q.predicates)


def _literal_matches(type_name: str, value) -> bool:
    if isinstance(value, bool):
        return False
    if type_name == "integer":
        return isinstance(value, int)
    if type_name == "float":
        return isinstance(value, float)
    return isinstance(value, str)


def validate_query(q: ConjunctiveQuery, catalog: Catalog) -> list[str]:
    """Return a list of violations; empty means ``q`` is valid over ``catalog``."""
    out = []
    if not q.tables:
        return ["query has no tables"]
    if len(set(q.tables)) != len(q.tables):
        out.append("table appears more than once (aliases are not supported)")
    if list(q.tables) != sorted(set(q.tables)):
        out.append("tables not in canonical order")
    unknown = [t for t in q.tables if not catalog.has_table(t)]
    for t in unknown:
        out.append(f"unknown table {t!r}")
    graph = set(catalog.join_graph)
    for e in q.joins:
        if e not in graph:
            out.append(f"join {e} is not an edge of the join graph")
        if e.left_table not in q.tables or e.right_table not in q.tables:
            out.append(f"join {e} references a table outside the query")
    if list(q.joins) != sorted(set(q.joins)):
        out.append("joins not in canonical order")
    if not unknown and not q.is_connected():
        out.append("disconnected join graph: " + ", ".join(q.tables))
    for p in q.predicates:
        if p.table not in q.tables or not catalog.has_table(p.table):
            out.append(f"predicate {p.table}.{p.column} on a table outside the query")
            continue
        tdef = catalog.table(p.table)
        if not tdef.has_column(p.column):
            out.append(f"unknown column {p.table}.{p.column}")
            continue
        if p.column not in tdef.filterable:
            out.append(f"column {p.table}.{p.column} is not filterable")
        if p.op not in OPERATORS:
            out.append(f"unknown operator {p.op!r} on {p.table}.{p.column}")
        if not _literal_matches(tdef.column_type(p.column), p.value):
            out.append(f"literal {p.value!r} does not match type of {p.table}.{p.column}")
    if not out:
        keys = [p.sort_key() for p in q.predicates]
        if keys != sorted(set(keys)):
            out.append("predicates not canonical (unsorted or duplicated)")
    return out
