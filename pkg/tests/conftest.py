import numpy as np
import pytest

from headroom.catalog import Catalog, TableDef
from headroom.datasets import correlated_catalog, star_catalog
from headroom.stats import build_stats


def _ints(rng, n, k):
    return rng.integers(0, k, size=n)


@pytest.fixture(scope="session")
def ab_catalog():
    """Two tables joined on A.x = B.y, with a filterable column A.c."""
    tables = [TableDef("A", (("x", "integer"), ("c", "integer")), ("c",)),
              TableDef("B", (("y", "integer"), ("d", "integer")), ("d",))]
    data = {"A": {"x": [1, 2, 3, 4], "c": [1, 4, 6, 9]},
            "B": {"y": [2, 3, 3, 5, 7], "d": [0, 1, 2, 3, 4]}}
    return Catalog.from_columns(tables, [(("A", "x"), ("B", "y"))], data)


@pytest.fixture(scope="session")
def chain_catalog():
    """A - B - C chain."""
    rng = np.random.default_rng(3)
    tables = [TableDef("A", (("id", "integer"), ("v", "integer")), ("v",)),
              TableDef("B", (("a", "integer"), ("c", "integer"), ("w", "integer")), ("w",)),
              TableDef("C", (("id", "integer"), ("u", "integer")), ("u",))]
    data = {"A": {"id": np.arange(10), "v": _ints(rng, 10, 4)},
            "B": {"a": _ints(rng, 20, 10), "c": _ints(rng, 20, 30), "w": _ints(rng, 20, 5)},
            "C": {"id": np.arange(30), "u": _ints(rng, 30, 6)}}
    return Catalog.from_columns(tables, [(("A", "id"), ("B", "a")), (("B", "c"), ("C", "id"))], data)


def five_table_catalog(seed: int = 5, rows=(40, 60, 30, 50, 20)) -> Catalog:
    """Five tables with a cycle (A-B-C-A) and two pendant tables."""
    rng = np.random.default_rng(seed)
    na, nb, nc, nd, ne = rows
    tables = [
        TableDef("A", (("id", "integer"), ("k", "integer"), ("f", "float")), ("k", "f")),
        TableDef("B", (("id", "integer"), ("a", "integer"), ("s", "string")), ("s",)),
        TableDef("C", (("b", "integer"), ("k", "integer"), ("g", "integer")), ("g",)),
        TableDef("D", (("c", "integer"), ("h", "integer")), ("h",)),
        TableDef("E", (("d", "integer"), ("e", "integer")), ("e",)),
    ]
    data = {
        "A": {"id": np.arange(na), "k": _ints(rng, na, 6), "f": np.round(rng.normal(size=na), 3)},
        "B": {"id": np.arange(nb), "a": _ints(rng, nb, na),
              "s": rng.choice(np.array(["red", "green", "blue", "o'brien"]), size=nb)},
        "C": {"b": _ints(rng, nc, nb), "k": _ints(rng, nc, 6), "g": _ints(rng, nc, 8)},
        "D": {"c": _ints(rng, nd, 6), "h": _ints(rng, nd, 10)},
        "E": {"d": _ints(rng, ne, 10), "e": _ints(rng, ne, 3)},
    }
    joins = [(("A", "id"), ("B", "a")), (("B", "id"), ("C", "b")), (("A", "k"), ("C", "k")),
             (("C", "g"), ("D", "c")), (("D", "h"), ("E", "d"))]
    return Catalog.from_columns(tables, joins, data)


@pytest.fixture(scope="session")
def five_catalog():
    return five_table_catalog()


@pytest.fixture(scope="session")
def five_stats(five_catalog):
    return build_stats(five_catalog)


@pytest.fixture(scope="session")
def correlated():
    return correlated_catalog()


@pytest.fixture(scope="session")
def star():
    return star_catalog()
