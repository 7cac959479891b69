"""Schema, in-memory columnar data, and the YAML/CSV loaders.

A schema config is a YAML (or JSON) mapping::

    tables:
      - name: title
        columns:
          - {name: id, type: integer}
          - {name: kind, type: string}
        filterable: [kind]
        file: title.csv          # optional, defaults to <name>.csv
    joins:
      - [movie_info.movie_id, title.id]
    generator: {...}             # optional, see headroom.synth

Tables and join edges are kept in canonical (lexicographic) order so that
table and edge indices are stable across loads.
"""
from __future__ import annotations

import csv
import hashlib
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import yaml

COLUMN_TYPES = ("integer", "float", "string")
RESERVED = {"select", "count", "from", "where", "and"}
_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class CatalogError(ValueError):
    """Raised for malformed schema configs, data files, or catalogs."""


@dataclass(frozen=True)
class TableDef:
    name: str
    columns: tuple[tuple[str, str], ...]
    filterable: tuple[str, ...] = ()

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(c for c, _ in self.columns)

    def column_type(self, column: str) -> str:
        for c, t in self.columns:
            if c == column:
                return t
        raise KeyError(f"{self.name}.{column}")

    def has_column(self, column: str) -> bool:
        return column in self.column_names


@dataclass(frozen=True, order=True)
class JoinEdge:
    """An equijoin edge, stored with ``left_table < right_table``."""

    left_table: str
    left_column: str
    right_table: str
    right_column: str

    @classmethod
    def make(cls, a: tuple[str, str], b: tuple[str, str]) -> "JoinEdge":
        if a[0] == b[0]:
            raise CatalogError(f"self-join edge on table {a[0]!r}")
        if b < a:
            a, b = b, a
        return cls(a[0], a[1], b[0], b[1])

    @property
    def tables(self) -> tuple[str, str]:
        return (self.left_table, self.right_table)

    def side(self, table: str) -> str:
        """Column of this edge on ``table``."""
        if table == self.left_table:
            return self.left_column
        if table == self.right_table:
            return self.right_column
        raise KeyError(table)

    def __str__(self) -> str:
        return f"{self.left_table}.{self.left_column} = {self.right_table}.{self.right_column}"


def _numpy_dtype(type_name: str):
    return {"integer": np.int64, "float": np.float64, "string": np.str_}[type_name]


def python_value(type_name: str, value):
    """Coerce a numpy scalar to the plain Python value for a column type."""
    if type_name == "integer":
        return int(value)
    if type_name == "float":
        return float(value)
    return str(value)


class Catalog:
    """Immutable schema + data. Build through :func:`load_catalog`,
    :func:`headroom.synth.generate_synthetic` or :meth:`Catalog.from_columns`."""

    def __init__(self, tables, join_graph, data):
        tables = sorted(tables, key=lambda t: t.name)
        edges = sorted(set(join_graph))
        self.tables: tuple[TableDef, ...] = tuple(tables)
        self.join_graph: tuple[JoinEdge, ...] = tuple(edges)
        self._by_name = {t.name: t for t in self.tables}
        self.data: dict[str, dict[str, np.ndarray]] = {}
        for t in self.tables:
            cols = data.get(t.name, {})
            self.data[t.name] = {}
            for c, ty in t.columns:
                arr = np.asarray(cols.get(c, np.empty(0)), dtype=_numpy_dtype(ty))
                arr.setflags(write=False)
                self.data[t.name][c] = arr
        self._validate()

    @classmethod
    def from_columns(cls, tables, joins, data) -> "Catalog":
        return cls(tables, [JoinEdge.make(*e) if not isinstance(e, JoinEdge) else e for e in joins], data)

    def _validate(self) -> None:
        if len(self._by_name) != len(self.tables):
            raise CatalogError("duplicate table name")
        for t in self.tables:
            _check_ident(t.name, "table")
            if not t.columns:
                raise CatalogError(f"table {t.name!r} has no columns")
            names = t.column_names
            if len(set(names)) != len(names):
                raise CatalogError(f"duplicate column name in table {t.name!r}")
            for c, ty in t.columns:
                _check_ident(c, "column")
                if ty not in COLUMN_TYPES:
                    raise CatalogError(f"unknown type name {ty!r} for {t.name}.{c}")
            for c in t.filterable:
                if c not in names:
                    raise CatalogError(f"filterable column {t.name}.{c} is not a column")
            lengths = {len(a) for a in self.data[t.name].values()}
            if len(lengths) > 1:
                raise CatalogError(f"ragged columns in table {t.name!r}")
        for e in self.join_graph:
            for tab, col in ((e.left_table, e.left_column), (e.right_table, e.right_column)):
                if tab not in self._by_name or not self._by_name[tab].has_column(col):
                    raise CatalogError(f"join edge {e} references unknown column {tab}.{col}")
            lt = self._by_name[e.left_table].column_type(e.left_column)
            rt = self._by_name[e.right_table].column_type(e.right_column)
            if lt != rt:
                raise CatalogError(f"join edge {e} type mismatch: {lt} vs {rt}")

    # lookups
    def table(self, name: str) -> TableDef:
        try:
            return self._by_name[name]
        except KeyError:
            raise KeyError(f"unknown table {name!r}") from None

    def has_table(self, name: str) -> bool:
        return name in self._by_name

    @cached_property
    def table_index(self) -> dict[str, int]:
        return {t.name: i for i, t in enumerate(self.tables)}

    @cached_property
    def edge_index(self) -> dict[JoinEdge, int]:
        return {e: i for i, e in enumerate(self.join_graph)}

    @property
    def table_names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.tables)

    def column(self, table: str, column: str) -> np.ndarray:
        return self.data[table][column]

    def row_count(self, table: str) -> int:
        cols = self.data[table]
        return len(next(iter(cols.values()))) if cols else 0

    def edges_between(self, a: str, b: str) -> list[JoinEdge]:
        key = (a, b) if a < b else (b, a)
        return [e for e in self.join_graph if e.tables == key]

    @cached_property
    def fingerprint(self) -> str:
        """SHA-256 over schema and data; identical catalogs hash identically."""
        h = hashlib.sha256()
        for t in self.tables:
            h.update(repr((t.name, t.columns, t.filterable)).encode())
            for c, ty in t.columns:
                arr = self.data[t.name][c]
                if ty == "string":
                    h.update("\x1f".join(arr.tolist()).encode("utf-8"))
                else:
                    h.update(np.ascontiguousarray(arr).tobytes())
                h.update(b"\x1e")
        for e in self.join_graph:
            h.update(str(e).encode())
        return h.hexdigest()

    # cache format: a single .npz without pickled objects
    def save(self, path) -> None:
        schema = {
            "tables": [
                {"name": t.name, "columns": [{"name": c, "type": ty} for c, ty in t.columns],
                 "filterable": list(t.filterable)}
                for t in self.tables
            ],
            "joins": [[f"{e.left_table}.{e.left_column}", f"{e.right_table}.{e.right_column}"]
                      for e in self.join_graph],
        }
        arrays = {"__schema__": np.array(yaml.safe_dump(schema, sort_keys=True))}
        for t in self.tables:
            for c, _ in t.columns:
                arrays[f"{t.name}/{c}"] = self.data[t.name][c]
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)

    @classmethod
    def load(cls, path) -> "Catalog":
        with np.load(path, allow_pickle=False) as npz:
            schema = yaml.safe_load(str(npz["__schema__"]))
            tables = [_parse_table(t, "<cache>") for t in schema["tables"]]
            data = {t.name: {c: npz[f"{t.name}/{c}"] for c, _ in t.columns} for t in tables}
        joins = [_parse_edge(j, "<cache>") for j in schema["joins"]]
        return cls(tables, joins, data)

    def __repr__(self) -> str:
        sizes = ", ".join(f"{t.name}[{self.row_count(t.name)}]" for t in self.tables)
        return f"Catalog({sizes}; {len(self.join_graph)} edges)"


def _check_ident(name: str, what: str) -> None:
    if not isinstance(name, str) or not _IDENT.match(name):
        raise CatalogError(f"invalid {what} name {name!r}")
    if name.lower() in RESERVED:
        raise CatalogError(f"{what} name {name!r} is a reserved word")


def _parse_table(raw, source) -> TableDef:
    if not isinstance(raw, dict) or "name" not in raw:
        raise CatalogError(f"{source}: table entry needs a 'name'")
    cols = []
    for c in raw.get("columns") or []:
        if isinstance(c, dict) and "name" in c:
            name, ty = c["name"], c.get("type", "integer")
        elif isinstance(c, dict) and len(c) == 1:
            (name, ty), = c.items()
        elif isinstance(c, str) and ":" in c:
            name, ty = (s.strip() for s in c.split(":", 1))
        else:
            raise CatalogError(f"{source}: bad column entry {c!r} in table {raw['name']!r}")
        if ty not in COLUMN_TYPES:
            raise CatalogError(f"{source}: unknown type name {ty!r} for {raw['name']}.{name}")
        cols.append((name, ty))
    filterable = raw.get("filterable")
    if filterable is None:
        filterable = [c for c, _ in cols]
    return TableDef(raw["name"], tuple(cols), tuple(filterable))


def _parse_edge(raw, source) -> JoinEdge:
    if isinstance(raw, str):
        parts = [p.strip() for p in raw.split("=")]
    elif isinstance(raw, dict):
        parts = [raw.get("left"), raw.get("right")]
    else:
        parts = list(raw)
    if len(parts) != 2 or not all(isinstance(p, str) and p.count(".") == 1 for p in parts):
        raise CatalogError(f"{source}: bad join edge {raw!r}; expected ['t1.col', 't2.col']")
    a, b = (tuple(p.split(".")) for p in parts)
    return JoinEdge.make(a, b)


def parse_schema(text: str, source: str = "<config>"):
    """Parse schema config text into ``(tables, joins, raw_mapping)``."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark is not None else source
        raise CatalogError(f"{where}: config syntax error: {getattr(exc, 'problem', exc)}") from None
    if not isinstance(raw, dict) or not isinstance(raw.get("tables"), list):
        raise CatalogError(f"{source}: config must be a mapping with a 'tables' list")
    tables = [_parse_table(t, source) for t in raw["tables"]]
    joins = [_parse_edge(j, source) for j in raw.get("joins") or []]
    return tables, joins, raw


def ingest_csv(table: TableDef, file) -> dict[str, np.ndarray]:
    """Read one CSV file (header row required) into typed column arrays."""
    file = Path(file)
    with open(file, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise CatalogError(f"{file}:1: missing header")
        header = [h.strip() for h in header]
        if header != list(table.column_names):
            raise CatalogError(
                f"{file}:1: header {header} does not match columns {list(table.column_names)}")
        values: list[list] = [[] for _ in table.columns]
        for row_no, row in enumerate(reader, start=1):
            if len(row) != len(table.columns):
                raise CatalogError(
                    f"{file}:{row_no + 1}: row {row_no} has {len(row)} fields, expected {len(table.columns)}")
            for k, ((cname, ty), cell) in enumerate(zip(table.columns, row)):
                values[k].append(_parse_cell(cell, ty, file, row_no, cname))
    return {c: np.asarray(v, dtype=_numpy_dtype(ty)) for (c, ty), v in zip(table.columns, values)}


def _parse_cell(cell: str, ty: str, file, row_no: int, column: str):
    if ty == "string":
        return cell
    try:
        v = int(cell) if ty == "integer" else float(cell)
    except ValueError:
        raise CatalogError(
            f"{file}:{row_no + 1}: cannot parse {cell!r} as {ty} (row {row_no}, column {column!r})") from None
    if ty == "float" and not np.isfinite(v):
        raise CatalogError(f"{file}:{row_no + 1}: non-finite float in column {column!r}")
    return v


def load_catalog(schema_config, data_dir) -> Catalog:
    """Load a schema config (path or text) plus one CSV per table from ``data_dir``."""
    if isinstance(schema_config, Path) or (isinstance(schema_config, str) and "\n" not in schema_config
                                           and Path(schema_config).exists()):
        source = str(schema_config)
        text = Path(schema_config).read_text(encoding="utf-8")
    else:
        source, text = "<config>", schema_config
    tables, joins, raw = parse_schema(text, source)
    files = {t["name"]: t.get("file", f"{t['name']}.csv") for t in raw["tables"]}
    data = {}
    for t in tables:
        path = Path(data_dir) / files[t.name]
        if not path.exists():
            raise CatalogError(f"{source}: data file {path} for table {t.name!r} not found")
        data[t.name] = ingest_csv(t, path)
    return Catalog(tables, joins, data)


def write_csv(catalog: Catalog, out_dir) -> None:
    """Dump every table as ``<name>.csv`` (inverse of :func:`ingest_csv`)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for t in catalog.tables:
        cols = [catalog.column(t.name, c).tolist() for c in t.column_names]
        with open(out_dir / f"{t.name}.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(t.column_names)
            w.writerows(zip(*cols))
