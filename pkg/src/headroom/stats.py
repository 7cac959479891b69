"""Per-column statistics: row counts, distinct counts, equi-depth histograms."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from headroom.catalog import Catalog, CatalogError

DEFAULT_BUCKETS = 32


@dataclass(frozen=True)
class ColumnStats:
    """Equi-depth histogram of one column.

    Bucket ``i`` covers the closed value range ``[lows[i], highs[i]]`` and
    holds ``counts[i]`` rows with ``distincts[i]`` distinct values. A value
    never straddles two buckets.
    """

    row_count: int
    distinct_count: int
    lows: np.ndarray
    highs: np.ndarray
    counts: np.ndarray
    distincts: np.ndarray

    @property
    def buckets(self) -> int:
        return len(self.counts)

    def bounds(self) -> list:
        """Bucket boundaries: each bucket's low, then the last bucket's high."""
        if not len(self.counts):
            return []
        return list(self.lows) + [self.highs[-1]]


@dataclass(frozen=True)
class Statistics:
    columns: dict[tuple[str, str], ColumnStats]
    buckets: int

    def __getitem__(self, key: tuple[str, str]) -> ColumnStats:
        return self.columns[key]

    def row_count(self, table: str) -> int:
        for (t, _), cs in self.columns.items():
            if t == table:
                return cs.row_count
        raise KeyError(table)

    def to_dict(self) -> dict:
        out = {}
        for (t, c), cs in sorted(self.columns.items()):
            out[f"{t}.{c}"] = {
                "row_count": cs.row_count,
                "distinct_count": cs.distinct_count,
                "bounds": [v.item() for v in cs.bounds()],
                "counts": cs.counts.tolist(),
            }
        return {"buckets": self.buckets, "columns": out}


def column_stats(values: np.ndarray, buckets: int = DEFAULT_BUCKETS) -> ColumnStats:
    if buckets <= 0:
        raise CatalogError("histogram bucket count must be positive")
    n = len(values)
    if n == 0:
        empty = np.empty(0, dtype=values.dtype)
        return ColumnStats(0, 0, empty, empty, np.empty(0, np.int64), np.empty(0, np.int64))
    uniq, freq = np.unique(values, return_counts=True)
    cum = np.cumsum(freq)
    # Cut after the distinct value whose cumulative count first reaches each
    # equi-depth target; equal values therefore stay in one bucket.
    targets = np.ceil(np.arange(1, buckets + 1) * n / buckets)
    cuts = np.unique(np.searchsorted(cum, targets, side="left"))
    cuts = cuts[cuts < len(uniq)]
    if cuts[-1] != len(uniq) - 1:
        cuts = np.append(cuts, len(uniq) - 1)
    starts = np.concatenate(([0], cuts[:-1] + 1))
    counts = cum[cuts] - np.concatenate(([0], cum[cuts[:-1]]))
    return ColumnStats(
        row_count=n,
        distinct_count=len(uniq),
        lows=uniq[starts],
        highs=uniq[cuts],
        counts=counts.astype(np.int64),
        distincts=(cuts - starts + 1).astype(np.int64),
    )


def build_stats(catalog: Catalog, buckets: int = DEFAULT_BUCKETS) -> Statistics:
    if buckets <= 0:
        raise CatalogError("histogram bucket count must be positive")
    cols = {}
    for t in catalog.tables:
        for c, _ in t.columns:
            cols[(t.name, c)] = column_stats(catalog.column(t.name, c), buckets)
    return Statistics(cols, buckets)
