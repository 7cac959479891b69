"""Closed-vocabulary integer strings for conjunctive queries.

Layout of the 256 slots (values in ``[0, 63]``, always reduced modulo the
number of live choices, so every string decodes to a valid query):

====================  ==================================================
slot 0                start table (mod table count)
slot 1                requested join count ``j`` (mod table count)
slots 2 .. 31         join growth: pick one frontier edge per step
slots 32 .. 55        8 predicate slots of (column, operator, value);
                      column 0 means "no predicate"
slots 56 .. 255       reserved, ignored
====================  ==================================================

After growth every catalog edge between selected tables is added, so
cyclic join graphs are reachable.
"""
from __future__ import annotations

import weakref

import numpy as np

from headroom.catalog import Catalog, python_value
from headroom.query import OPERATORS, ConjunctiveQuery, Predicate, validate_query, with_implied_edges

QUERY_LENGTH = 256
VOCAB = 64
GROWTH_START, GROWTH_SLOTS = 2, 30
PRED_START, PRED_SLOTS = 32, 8
ANCHORS = 16


class QueryCodecError(ValueError):
    pass


def quantile_anchors(values: np.ndarray, type_name: str, k: int = ANCHORS) -> tuple:
    """``k`` literals taken from the column at the centers of ``k`` equal-mass bins."""
    if len(values) == 0:
        return tuple(python_value(type_name, {"integer": 0, "float": 0.0, "string": ""}[type_name])
                     for _ in range(k))
    s = np.sort(values, kind="stable")
    idx = ((np.arange(k) + 0.5) * len(s) / k).astype(np.int64)
    return tuple(python_value(type_name, s[i]) for i in idx)


class QueryCodec:
    def __init__(self, catalog: Catalog):
        self.catalog = catalog
        self.anchors = {}
        for t in catalog.tables:
            for c in t.filterable:
                self.anchors[(t.name, c)] = quantile_anchors(catalog.column(t.name, c), t.column_type(c))

    def _frontier(self, selected: set) -> list:
        return [e for e in self.catalog.join_graph
                if (e.left_table in selected) != (e.right_table in selected)]

    def _filterable(self, tables) -> list[tuple[str, str]]:
        return [(t, c) for t in sorted(tables) for c in self.catalog.table(t).filterable]

    def decode(self, tokens) -> ConjunctiveQuery:
        t = check_tokens(tokens)
        names = self.catalog.table_names
        n = len(names)
        start = names[t[0] % n]
        j = min(t[1] % n, GROWTH_SLOTS)
        selected = {start}
        for k in range(j):
            frontier = self._frontier(selected)
            if not frontier:
                break
            e = frontier[t[GROWTH_START + k] % len(frontier)]
            selected.update(e.tables)
        cols = self._filterable(selected)
        preds = []
        for s in range(PRED_SLOTS):
            c, o, v = t[PRED_START + 3 * s: PRED_START + 3 * s + 3]
            c %= len(cols) + 1
            if c == 0:
                continue
            table, column = cols[c - 1]
            preds.append(Predicate(table, column, OPERATORS[o % 6],
                                   self.anchors[(table, column)][v % ANCHORS]))
        return with_implied_edges(ConjunctiveQuery.make(selected, (), preds), self.catalog)

    def encode(self, q: ConjunctiveQuery) -> list[int]:
        problems = validate_query(q, self.catalog)
        if problems:
            raise QueryCodecError("invalid query: " + "; ".join(problems))
        if len(q.predicates) > PRED_SLOTS:
            raise QueryCodecError(f"{len(q.predicates)} predicates exceed the capacity of {PRED_SLOTS}")
        if with_implied_edges(q, self.catalog) != q:
            raise QueryCodecError("query omits join edges implied by its tables; not encodable")
        if len(q.tables) - 1 > GROWTH_SLOTS:
            raise QueryCodecError(f"more than {GROWTH_SLOTS + 1} tables; not encodable")
        tokens = [0] * QUERY_LENGTH
        tokens[0] = self.catalog.table_index[q.tables[0]]
        tokens[1] = len(q.tables) - 1
        selected = {q.tables[0]}
        wanted = set(q.tables)
        for k in range(len(q.tables) - 1):
            frontier = self._frontier(selected)
            pick = next(i for i, e in enumerate(frontier) if set(e.tables) <= wanted)
            tokens[GROWTH_START + k] = pick
            selected.update(frontier[pick].tables)
        cols = self._filterable(q.tables)
        for s, p in enumerate(q.predicates):
            anchors = self.anchors[(p.table, p.column)]
            try:
                v = anchors.index(p.value)
            except ValueError:
                raise QueryCodecError(f"literal {p.value!r} of {p.table}.{p.column} is not an anchor value") from None
            base = PRED_START + 3 * s
            tokens[base:base + 3] = [cols.index((p.table, p.column)) + 1, OPERATORS.index(p.op), v]
        if max(tokens) >= VOCAB:
            raise QueryCodecError("query needs a token beyond the vocabulary")
        return tokens


_codecs: "weakref.WeakKeyDictionary[Catalog, QueryCodec]" = weakref.WeakKeyDictionary()


def codec_for(catalog: Catalog) -> QueryCodec:
    codec = _codecs.get(catalog)
    if codec is None:
        codec = _codecs[catalog] = QueryCodec(catalog)
    return codec


def check_tokens(tokens, length: int = QUERY_LENGTH) -> list[int]:
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


def decode_query(tokens, catalog: Catalog) -> ConjunctiveQuery:
    return codec_for(catalog).decode(tokens)


def encode_query(q: ConjunctiveQuery, catalog: Catalog) -> list[int]:
    return codec_for(catalog).encode(q)


def format_tokens(tokens) -> str:
    return " ".join(str(int(v)) for v in tokens)


def parse_tokens(text: str) -> list[int]:
    return check_tokens(text.split())
