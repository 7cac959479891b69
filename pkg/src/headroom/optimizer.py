"""The baseline cost-based optimizer.

Histogram selectivities combined under the independence assumption,
1/max(ndv) join selectivity, and exact dynamic programming over connected
subsets (bushy trees). Its estimation errors on correlated data are what
the search exploits.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from headroom.plan import JOIN_OPS, NESTED_LOOP, Join, PhysicalPlan, Scan, scan
from headroom.query import ConjunctiveQuery
from headroom.stats import ColumnStats, Statistics


class OptimizerError(ValueError):
    pass


@dataclass(frozen=True)
class CostedPlan:
    plan: PhysicalPlan
    estimated_cost: float
    estimated_rows: float


def _frac(value, lo, hi) -> float:
    """Position of ``value`` inside ``[lo, hi]`` (0.5 when not numeric)."""
    if isinstance(lo, (str, np.str_)):
        return 0.5
    lo, hi = float(lo), float(hi)
    if hi <= lo:
        return 0.0
    return min(1.0, max(0.0, (float(value) - lo) / (hi - lo)))


def _eq_fraction(cs: ColumnStats, value) -> float:
    for lo, hi, c, d in zip(cs.lows, cs.highs, cs.counts, cs.distincts):
        if lo <= value <= hi:
            return float(c) / float(d) / cs.row_count
    return 0.0


def _lt_fraction(cs: ColumnStats, value) -> float:
    rows = 0.0
    for lo, hi, c, d in zip(cs.lows, cs.highs, cs.counts, cs.distincts):
        if hi < value:
            rows += float(c)
        elif lo < value:
            # partial bucket; the equality mass at ``value`` is excluded
            rows += float(c) * _frac(value, lo, hi) * (1.0 - 1.0 / float(d))
        else:
            break
    return rows / cs.row_count


def selectivity(cs: ColumnStats, op: str, value) -> float:
    if cs.row_count == 0:
        return 0.0
    eq = _eq_fraction(cs, value)
    if op == "=":
        s = eq
    elif op == "<>":
        s = 1.0 - eq
    else:
        lt = _lt_fraction(cs, value)
        s = {"<": lt, "<=": lt + eq, ">": 1.0 - lt - eq, ">=": 1.0 - lt}[op]
    return min(1.0, max(0.0, s))


def _require(stats: Statistics, key):
    try:
        return stats[key]
    except (KeyError, TypeError):
        raise OptimizerError(f"missing statistics for {key[0]}.{key[1]}") from None


def estimate_table(table: str, predicates, stats: Statistics) -> float:
    """Filtered row estimate of one table, floored at 1 unless the table is empty."""
    n = None
    sel = 1.0
    for p in predicates:
        cs = _require(stats, (table, p.column))
        n = cs.row_count
        sel *= selectivity(cs, p.op, p.value)
    if n is None:
        try:
            n = stats.row_count(table)
        except KeyError:
            raise OptimizerError(f"missing statistics for table {table!r}") from None
    if n == 0:
        return 0.0
    return max(1.0, n * sel)


def join_selectivity(edge, stats: Statistics) -> float:
    d = max(_require(stats, (edge.left_table, edge.left_column)).distinct_count,
            _require(stats, (edge.right_table, edge.right_column)).distinct_count)
    return 1.0 / d if d > 0 else 0.0


class Estimator:
    """Set-based cardinality estimates for one query (memoized)."""

    def __init__(self, q: ConjunctiveQuery, stats: Statistics):
        self.q = q
        self.stats = stats
        self.base = {t: estimate_table(t, q.predicates_on(t), stats) for t in q.tables}
        self.edge_sel = {e: join_selectivity(e, stats) for e in q.joins}
        self._memo: dict[frozenset, float] = {}

    def rows(self, tables: frozenset) -> float:
        got = self._memo.get(tables)
        if got is None:
            got = 1.0
            for t in self.q.tables:
                if t in tables:
                    got *= self.base[t]
            for e in self.q.joins:
                if e.left_table in tables and e.right_table in tables:
                    got *= self.edge_sel[e]
            self._memo[tables] = got
        return got

    def join_cost(self, op: str, left: frozenset, right: frozenset) -> float:
        nl, nr, out = self.rows(left), self.rows(right), self.rows(left | right)
        if op == NESTED_LOOP:
            return nl * nr + out
        return nl + nr + out

    def scan_cost(self, table: str) -> float:
        return float(self.stats.row_count(table))


def estimate_cardinality(q: ConjunctiveQuery, stats: Statistics, tables=None) -> float:
    """Estimated output rows of ``q`` restricted to ``tables`` (default: all)."""
    est = Estimator(q, stats)
    return est.rows(frozenset(q.tables if tables is None else tables))


def cost_plan(p: PhysicalPlan, q: ConjunctiveQuery, stats: Statistics,
              estimator: Estimator | None = None) -> CostedPlan:
    """Work-unit formulas of the engine applied to estimated cardinalities."""
    est = estimator or Estimator(q, stats)

    def cost(n) -> float:
        if isinstance(n, Scan):
            return est.scan_cost(n.table)
        return cost(n.left) + cost(n.right) + est.join_cost(n.op, n.left.tables, n.right.tables)

    return CostedPlan(p, cost(p), est.rows(p.tables))


def _connected(tables: frozenset, q: ConjunctiveQuery) -> bool:
    start = min(tables)
    seen, stack = {start}, [start]
    while stack:
        t = stack.pop()
        for e in q.joins:
            if t in e.tables:
                o = e.right_table if e.left_table == t else e.left_table
                if o in tables and o not in seen:
                    seen.add(o)
                    stack.append(o)
    return seen == tables


def connected_splits(subset: frozenset, q: ConjunctiveQuery):
    """Unordered splits of a connected ``subset`` into two connected, joinable parts.

    The first part always contains ``min(subset)``.
    """
    items = sorted(subset)
    first, rest = items[0], items[1:]
    for mask in range(0, 2 ** len(rest) - 1):
        a = frozenset([first] + [t for i, t in enumerate(rest) if mask >> i & 1])
        b = subset - a
        if _connected(a, q) and _connected(b, q) and q.edges_between(a, b):
            yield a, b


def optimize(q: ConjunctiveQuery, stats: Statistics) -> CostedPlan:
    """Minimum estimated-cost plan; ties go to the smallest plan text."""
    if not q.tables or not q.is_connected():
        raise OptimizerError("query invalid: empty or disconnected join graph")
    est = Estimator(q, stats)
    best: dict[frozenset, tuple[float, str, PhysicalPlan]] = {}
    for t in q.tables:
        s = scan(q, t)
        best[frozenset((t,))] = (est.scan_cost(t), s.text(), s)
    # connected subsets in order of size
    subsets = _connected_subsets(q)
    for size in range(2, len(q.tables) + 1):
        for sub in subsets.get(size, ()):
            cand = None
            for a, b in connected_splits(sub, q):
                ca, _, pa = best[a]
                cb, _, pb = best[b]
                base = ca + cb
                for op in JOIN_OPS:
                    c = base + est.join_cost(op, a, b)
                    node = Join(op, pa, pb, q.edges_between(a, b))
                    key = (c, node.text())
                    if cand is None or key < cand[:2]:
                        cand = (c, key[1], node)
            best[sub] = cand
    c, _, plan = best[frozenset(q.tables)]
    return CostedPlan(plan, c, est.rows(frozenset(q.tables)))


def _connected_subsets(q: ConjunctiveQuery) -> dict[int, list[frozenset]]:
    out: dict[int, set] = {1: {frozenset((t,)) for t in q.tables}}
    for size in range(2, len(q.tables) + 1):
        grown = set()
        for s in out[size - 1]:
            for e in q.joins:
                if (e.left_table in s) != (e.right_table in s):
                    grown.add(s | {e.left_table, e.right_table})
        out[size] = grown
    return {k: sorted(v, key=lambda s: sorted(s)) for k, v in out.items()}
