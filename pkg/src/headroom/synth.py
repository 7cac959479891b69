"""Seeded synthetic catalogs with skew and exact functional dependencies.

Generator section of a schema config::

    generator:
      seed: 42
      fk_skew: 1.0                # 0 = uniform foreign keys
      tables:
        orders:
          rows: 10000
          columns:
            id: sequential
            region: {uniform: 8}
            product: {zipf: [1.1, 500]}
            customer: {fk: customers.id}
      correlations:
        - {table: orders, target: zone, source: region, fn: mod, arg: 4}

Supported correlation functions: ``copy``, ``mod`` (x mod arg),
``div`` (x div arg), ``affine`` (arg[0] * x + arg[1]).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from headroom.catalog import Catalog, CatalogError, JoinEdge, TableDef, parse_schema


@dataclass(frozen=True)
class Uniform:
    k: int


@dataclass(frozen=True)
class Zipf:
    s: float
    k: int


@dataclass(frozen=True)
class Sequential:
    pass


@dataclass(frozen=True)
class ForeignKey:
    table: str
    column: str


@dataclass(frozen=True)
class Correlation:
    table: str
    target: str
    source: str
    fn: str
    arg: object = None

    def apply(self, x: np.ndarray) -> np.ndarray:
        if self.fn == "copy":
            return x.copy()
        if self.fn == "mod":
            return np.mod(x, int(self.arg))
        if self.fn == "div":
            return np.floor_divide(x, int(self.arg))
        if self.fn == "affine":
            a, b = self.arg
            return int(a) * x + int(b)
        raise CatalogError(f"unknown correlation function {self.fn!r}")


@dataclass
class GeneratorSpec:
    tables: list[TableDef]
    joins: list[JoinEdge]
    rows: dict[str, int]
    distributions: dict[tuple[str, str], object]
    correlations: list[Correlation] = field(default_factory=list)
    fk_skew: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        names = {t.name: t for t in self.tables}
        if not 0 <= self.seed < 2**64:
            raise CatalogError("generator seed must be an unsigned 64-bit integer")
        if self.fk_skew < 0:
            raise CatalogError("fk_skew must be >= 0")
        for t in self.tables:
            if self.rows.get(t.name, 0) < 0:
                raise CatalogError(f"negative row count for table {t.name!r}")
        for (t, c), d in self.distributions.items():
            if t not in names or not names[t].has_column(c):
                raise CatalogError(f"distribution for unknown column {t}.{c}")
            if isinstance(d, Zipf) and not (d.s > 0 and d.k >= 1):
                raise CatalogError(f"zipf for {t}.{c} needs s > 0 and k >= 1")
            if isinstance(d, Uniform) and d.k < 1:
                raise CatalogError(f"uniform for {t}.{c} needs k >= 1")
            if isinstance(d, ForeignKey):
                if d.table not in names or not names[d.table].has_column(d.column):
                    raise CatalogError(f"foreign key {t}.{c} references unknown {d.table}.{d.column}")
                if isinstance(self.distributions.get((d.table, d.column)), ForeignKey):
                    raise CatalogError(f"foreign key {t}.{c} must reference a non-foreign-key column")
        for corr in self.correlations:
            t = names.get(corr.table)
            if t is None or not t.has_column(corr.target) or not t.has_column(corr.source):
                raise CatalogError(f"correlation references unknown column in {corr}")
            for d in self.distributions.values():
                if isinstance(d, ForeignKey) and (d.table, d.column) == (corr.table, corr.target):
                    raise CatalogError(f"foreign keys may not reference correlated column {d.table}.{d.column}")


def _parse_distribution(raw, where):
    if raw == "sequential" or raw == {"sequential": None}:
        return Sequential()
    if isinstance(raw, dict) and len(raw) == 1:
        (kind, arg), = raw.items()
        if kind == "uniform":
            return Uniform(int(arg))
        if kind == "zipf":
            s, k = arg
            return Zipf(float(s), int(k))
        if kind == "fk":
            table, column = str(arg).split(".")
            return ForeignKey(table, column)
    raise CatalogError(f"{where}: unknown distribution {raw!r}")


def parse_generator_spec(text: str, source: str = "<config>") -> GeneratorSpec:
    tables, joins, raw = parse_schema(text, source)
    gen = raw.get("generator")
    if not isinstance(gen, dict):
        raise CatalogError(f"{source}: config has no 'generator' section")
    rows, dists = {}, {}
    for name, tspec in (gen.get("tables") or {}).items():
        rows[name] = int(tspec.get("rows", 0))
        for col, d in (tspec.get("columns") or {}).items():
            dists[(name, col)] = _parse_distribution(d, f"{source}: {name}.{col}")
    corrs = [Correlation(c["table"], c["target"], c["source"], c.get("fn", "copy"), c.get("arg"))
             for c in gen.get("correlations") or []]
    spec = GeneratorSpec(tables, joins, rows, dists, corrs,
                         fk_skew=float(gen.get("fk_skew", 0.0)), seed=int(gen.get("seed", 0)))
    spec.validate()
    return spec


def bounded_zipf(rng: np.random.Generator, s: float, k: int, size: int) -> np.ndarray:
    """Draw ``size`` ranks in ``[0, k)`` with P(r) proportional to (r + 1)^-s."""
    weights = np.arange(1, k + 1, dtype=np.float64) ** -s
    return rng.choice(k, size=size, p=weights / weights.sum())


def _draw(dist, n: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(dist, Sequential):
        return np.arange(n, dtype=np.int64)
    if isinstance(dist, Uniform):
        return rng.integers(0, dist.k, size=n, dtype=np.int64)
    if isinstance(dist, Zipf):
        return bounded_zipf(rng, dist.s, dist.k, n).astype(np.int64)
    raise TypeError(dist)


def _to_type(raw: np.ndarray, type_name: str) -> np.ndarray:
    if type_name == "integer":
        return raw.astype(np.int64)
    if type_name == "float":
        return raw.astype(np.float64)
    return np.array([f"s{v}" for v in raw.tolist()], dtype=np.str_)


def generate_synthetic(spec: GeneratorSpec) -> Catalog:
    """Pure function of ``spec``: same spec and seed give identical catalogs."""
    spec.validate()
    tables = sorted(spec.tables, key=lambda t: t.name)
    raw: dict[str, dict[str, np.ndarray]] = {}
    pending_fk = []
    for ti, t in enumerate(tables):
        n = spec.rows.get(t.name, 0)
        raw[t.name] = {}
        for ci, (c, _) in enumerate(t.columns):
            rng = np.random.default_rng([spec.seed, ti, ci])
            dist = spec.distributions.get((t.name, c), Sequential())
            if isinstance(dist, ForeignKey):
                pending_fk.append((t.name, c, dist, rng))
            else:
                raw[t.name][c] = _draw(dist, n, rng)
    for tname, c, fk, rng in pending_fk:
        ref = raw[fk.table][fk.column]
        n = spec.rows.get(tname, 0)
        if len(ref) == 0:
            if n:
                raise CatalogError(f"foreign key {tname}.{c} references empty table {fk.table!r}")
            raw[tname][c] = np.empty(0, np.int64)
            continue
        if spec.fk_skew > 0:
            idx = bounded_zipf(rng, spec.fk_skew, len(ref), n)
        else:
            idx = rng.integers(0, len(ref), size=n)
        raw[tname][c] = ref[idx]
    for corr in spec.correlations:
        raw[corr.table][corr.target] = corr.apply(raw[corr.table][corr.source])
    data = {t.name: {c: _to_type(raw[t.name][c], ty) for c, ty in t.columns} for t in tables}
    return Catalog(tables, spec.joins, data)
