"""Printer and parser for the conjunctive COUNT(*) subset.

The grammar ships as ``grammar.ebnf`` next to this module.
"""
from __future__ import annotations

import re
from importlib import resources

from headroom.catalog import Catalog, JoinEdge
from headroom.query import OPERATORS, ConjunctiveQuery, Predicate, validate_query

KEYWORDS = ("SELECT", "COUNT", "FROM", "WHERE", "AND")


class SqlSyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"syntax error at position {position}: {message}")
        self.position = position


class SqlSemanticError(ValueError):
    pass


def grammar_text() -> str:
    return resources.files("headroom").joinpath("grammar.ebnf").read_text(encoding="utf-8")


def format_literal(value) -> str:
    if isinstance(value, str):
        return "'" + value.replace("'", "''") + "'"
    if isinstance(value, float):
        return repr(value)
    return str(int(value))


def print_sql(q: ConjunctiveQuery) -> str:
    sql = "SELECT COUNT(*) FROM " + ", ".join(q.tables)
    conds = [str(e) for e in q.joins] + [str(p) for p in q.predicates]
    if conds:
        sql += " WHERE " + " AND ".join(conds)
    return sql + ";"


_LEX = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<string>'(?:[^']|'')*')
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|<>|[=<>])
  | (?P<punct>[(),.;*])
""", re.VERBOSE)


def _tokenize(text: str):
    pos, out = 0, []
    while pos < len(text):
        m = _LEX.match(text, pos)
        if not m:
            raise SqlSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            value = m.group()
            if kind == "ident" and value.upper() in KEYWORDS:
                kind, value = "kw", value.upper()
            out.append((kind, value, pos))
        pos = m.end()
    out.append(("eof", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, kind: str, value: str | None = None):
        k, v, pos = self.toks[self.i]
        if k != kind or (value is not None and v != value):
            want = value or kind
            got = v or "end of input"
            raise SqlSyntaxError(f"expected {want!r}, found {got!r}", pos)
        self.i += 1
        return v, pos

    def accept(self, kind: str, value: str) -> bool:
        k, v, _ = self.peek()
        if k == kind and v == value:
            self.i += 1
            return True
        return False

    def col(self):
        t, pos = self.take("ident")
        self.take("punct", ".")
        c, _ = self.take("ident")
        return t, c, pos

    def parse(self):
        self.take("kw", "SELECT")
        self.take("kw", "COUNT")
        self.take("punct", "(")
        self.take("punct", "*")
        self.take("punct", ")")
        self.take("kw", "FROM")
        tables = [self.take("ident")]
        while self.accept("punct", ","):
            tables.append(self.take("ident"))
        preds = []
        if self.accept("kw", "WHERE"):
            preds.append(self.pred())
            while self.accept("kw", "AND"):
                preds.append(self.pred())
        self.take("punct", ";")
        self.take("eof")
        return tables, preds

    def pred(self):
        left = self.col()
        k, v, pos = self.peek()
        if k != "op":
            raise SqlSyntaxError(f"expected comparison operator, found {v or 'end of input'!r}", pos)
        self.i += 1
        k2, _, _ = self.peek()
        if v == "=" and k2 == "ident":
            return ("join", left, self.col())
        if k2 == "number":
            lit, lpos = self.take("number")
            return ("filter", left, v, ("number", lit, lpos))
        if k2 == "string":
            lit, lpos = self.take("string")
            return ("filter", left, v, ("string", lit[1:-1].replace("''", "'"), lpos))
        _, got, gpos = self.peek()
        raise SqlSyntaxError(f"expected literal, found {got or 'end of input'!r}", gpos)


def _literal(kind: str, text: str, type_name: str, where: str):
    if type_name == "string":
        if kind != "string":
            raise SqlSemanticError(f"literal {text} does not match string column {where}")
        return text
    if kind != "number":
        raise SqlSemanticError(f"literal '{text}' does not match {type_name} column {where}")
    if type_name == "integer":
        if re.fullmatch(r"-?\d+", text) is None:
            raise SqlSemanticError(f"literal {text} does not match integer column {where}")
        return int(text)
    return float(text)


def parse_sql(text: str, catalog: Catalog) -> ConjunctiveQuery:
    tables, preds = _Parser(text).parse()
    names = []
    for name, pos in tables:
        if not catalog.has_table(name):
            raise SqlSemanticError(f"unknown table {name!r} at position {pos}")
        if name in names:
            raise SqlSemanticError(f"table {name!r} listed twice (aliases are not supported)")
        names.append(name)

    def check_col(t, c, pos):
        if t not in names:
            raise SqlSemanticError(f"table {t!r} at position {pos} is not in FROM")
        if not catalog.table(t).has_column(c):
            raise SqlSemanticError(f"unknown column {t}.{c} at position {pos}")

    joins, filters = [], []
    for p in preds:
        if p[0] == "join":
            (lt, lc, lpos), (rt, rc, rpos) = p[1], p[2]
            check_col(lt, lc, lpos)
            check_col(rt, rc, rpos)
            if lt == rt:
                raise SqlSemanticError(f"{lt}.{lc} = {rt}.{rc} is not an equijoin between tables")
            edge = JoinEdge.make((lt, lc), (rt, rc))
            if edge not in catalog.edge_index:
                raise SqlSemanticError(f"{edge} is not an edge of the join graph")
            joins.append(edge)
        else:
            (t, c, pos), op, (kind, lit, _) = p[1], p[2], p[3]
            check_col(t, c, pos)
            value = _literal(kind, lit, catalog.table(t).column_type(c), f"{t}.{c}")
            filters.append(Predicate(t, c, op, value))
    q = ConjunctiveQuery.make(names, joins, filters)
    problems = validate_query(q, catalog)
    if problems:
        raise SqlSemanticError("; ".join(problems))
    return q


__all__ = ["print_sql", "parse_sql", "format_literal", "grammar_text", "OPERATORS",
           "SqlSyntaxError", "SqlSemanticError"]
