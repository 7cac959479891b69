"""Plan execution with deterministic work-unit accounting.

Work units (tuples touched) stand in for latency:

* scan: rows examined (the table's row count)
* hash join (either build side): |build| + |probe| + |output|
* nested-loop join: |outer| * |inner| + |output|
"""
from __future__ import annotations

import operator
import time
from dataclasses import dataclass

import numpy as np

from headroom.catalog import Catalog
from headroom.plan import NESTED_LOOP, Join, PhysicalPlan, Scan
from headroom.query import ConjunctiveQuery

DEFAULT_MAX_INTERMEDIATE = 20_000_000

_NP_OPS = {"=": np.equal, "<": np.less, ">": np.greater,
           "<=": np.less_equal, ">=": np.greater_equal, "<>": np.not_equal}


class OracleLimitError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExecutionResult:
    count: int | None
    work_units: int
    timed_out: bool = False
    wall_clock: float | None = None


class _Timeout(Exception):
    pass


def scan_rows(catalog: Catalog, node: Scan) -> np.ndarray:
    """Row ids of ``node.table`` passing all pushed-down predicates."""
    n = catalog.row_count(node.table)
    mask = np.ones(n, dtype=bool)
    for p in node.predicates:
        mask &= _NP_OPS[p.op](catalog.column(node.table, p.column), p.value)
    return np.flatnonzero(mask)


def _factorize(cols_left, cols_right):
    """Integer codes such that left/right rows share a code iff all keys match."""
    nl = len(cols_left[0])
    code = None
    for a, b in zip(cols_left, cols_right):
        _, inv = np.unique(np.concatenate([a, b]), return_inverse=True)
        inv = inv.astype(np.int64)
        if code is None:
            code = inv
        else:
            _, code = np.unique(code * (inv.max() + 1) + inv, return_inverse=True)
    return code[:nl], code[nl:]


class _Executor:
    def __init__(self, catalog: Catalog, cap: int | None, max_intermediate: int):
        self.catalog = catalog
        self.cap = cap
        self.max_intermediate = max_intermediate
        self.work = 0

    def charge(self, units: int) -> None:
        self.work += int(units)
        if self.cap is not None and self.work > self.cap:
            raise _Timeout

    def run(self, node: PhysicalPlan, root: bool = False):
        """Return ``(row ids per table, row count)``; the root returns only the count."""
        if isinstance(node, Scan):
            self.charge(self.catalog.row_count(node.table))
            rows = scan_rows(self.catalog, node)
            return {node.table: rows}, len(rows)
        left, nl = self.run(node.left)
        right, nr = self.run(node.right)
        if node.op == NESTED_LOOP:
            self.charge(nl * nr)
        else:
            self.charge(nl + nr)
        if nl == 0 or nr == 0:
            return ({t: np.empty(0, np.int64) for t in (*left, *right)}, 0)
        lkeys, rkeys = [], []
        for e in node.conditions:
            lt, rt = (e.left_table, e.right_table) if e.left_table in left else (e.right_table, e.left_table)
            lkeys.append(self.catalog.column(lt, e.side(lt))[left[lt]])
            rkeys.append(self.catalog.column(rt, e.side(rt))[right[rt]])
        lc, rc = _factorize(lkeys, rkeys)
        ncodes = int(max(lc.max(), rc.max())) + 1
        rcount = np.bincount(rc, minlength=ncodes)
        per_left = rcount[lc]
        out = int(per_left.sum())
        self.charge(out)
        if root:
            return None, out
        if out > self.max_intermediate:
            raise _Timeout
        # expand matches: left row i pairs with every right row sharing its code
        order = np.argsort(rc, kind="stable")
        starts = np.concatenate(([0], np.cumsum(rcount)[:-1]))
        li = np.repeat(np.arange(nl), per_left)
        offsets = np.arange(out) - np.repeat(np.cumsum(per_left) - per_left, per_left)
        ri = order[np.repeat(starts[lc], per_left) + offsets]
        rows = {t: r[li] for t, r in left.items()}
        rows.update({t: r[ri] for t, r in right.items()})
        return rows, out


def execute_plan(plan: PhysicalPlan, catalog: Catalog, mode: str = "work_units",
                 cap: int | None = None,
                 max_intermediate: int = DEFAULT_MAX_INTERMEDIATE) -> ExecutionResult:
    """Execute ``plan``; exceeding ``cap`` work units yields a timed-out result.

    An intermediate result larger than ``max_intermediate`` rows is also
    reported as a timeout, with ``work_units`` set to the cap.
    """
    if mode not in ("work_units", "wall_clock"):
        raise ValueError(f"unknown execution mode {mode!r}")
    ex = _Executor(catalog, cap, max_intermediate)
    t0 = time.perf_counter()
    try:
        _, count = ex.run(plan, root=True)
    except _Timeout:
        units = cap if cap is not None else ex.work
        return ExecutionResult(None, int(units), True)
    elapsed = time.perf_counter() - t0 if mode == "wall_clock" else None
    return ExecutionResult(int(count), ex.work, False, elapsed)


_PY_OPS = {"=": operator.eq, "<": operator.lt, ">": operator.gt,
           "<=": operator.le, ">=": operator.ge, "<>": operator.ne}


def naive_count_oracle(q: ConjunctiveQuery, catalog: Catalog, row_limit: int = 5_000_000) -> int:
    """Count by materializing the full cross product as a dense boolean tensor."""
    sizes = [catalog.row_count(t) for t in q.tables]
    total = 1
    for s in sizes:
        total *= s
    if total == 0:
        return 0
    if total > row_limit:
        raise OracleLimitError(f"cross product of {total} rows exceeds oracle limit {row_limit}")
    axis = {t: i for i, t in enumerate(q.tables)}
    k = len(q.tables)

    def along(t, vec):
        shape = [1] * k
        shape[axis[t]] = len(vec)
        return np.asarray(vec, dtype=bool).reshape(shape)

    acc = np.ones(sizes, dtype=bool)
    for t in q.tables:
        values = [catalog.column(t, p.column).tolist() for p in q.predicates_on(t)]
        keep = [all(_PY_OPS[p.op](vals[r], p.value) for p, vals in zip(q.predicates_on(t), values))
                for r in range(catalog.row_count(t))]
        acc &= along(t, keep)
    for e in q.joins:
        a = catalog.column(e.left_table, e.left_column).tolist()
        b = catalog.column(e.right_table, e.right_column).tolist()
        eq = np.array([[x == y for y in b] for x in a], dtype=bool)
        i, j = axis[e.left_table], axis[e.right_table]
        shape = [1] * k
        shape[i], shape[j] = len(a), len(b)
        acc &= eq.reshape(shape)
    return int(acc.sum())
