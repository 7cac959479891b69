"""Seeded synthetic catalogs used by the tests and demos."""
from __future__ import annotations

from headroom.catalog import Catalog
from headroom.synth import generate_synthetic, parse_generator_spec

# Functional dependencies make pairs of predicates redundant (the optimizer
# multiplies their selectivities); skewed foreign keys break 1/max(ndv).
CORRELATED_SCHEMA = """
tables:
  - name: customer
    columns: [id: integer, seg: integer, seg2: integer]
    filterable: [seg, seg2]
  - name: item
    columns: [id: integer, cls: integer]
    filterable: [cls]
  - name: orders
    columns: [id: integer, cust: integer, item: integer, a: integer, b: integer]
    filterable: [a, b]
  - name: shipment
    columns: [id: integer, ord: integer, mode: integer]
    filterable: [mode]
joins:
  - [orders.cust, customer.id]
  - [orders.item, item.id]
  - [shipment.ord, orders.id]
generator:
  seed: 7
  fk_skew: 1.0
  tables:
    customer: {rows: 2000, columns: {id: sequential, seg: {uniform: 10}}}
    item: {rows: 1000, columns: {id: sequential, cls: {uniform: 20}}}
    orders: {rows: 20000, columns: {id: sequential, cust: {fk: customer.id}, item: {fk: item.id}, a: {uniform: 10}}}
    shipment: {rows: 5000, columns: {id: sequential, ord: {fk: orders.id}, mode: {uniform: 4}}}
  correlations:
    - {table: customer, target: seg2, source: seg, fn: copy}
    - {table: orders, target: b, source: a, fn: mod, arg: 10}
"""

# Six tables, about 10^5 rows at most, with a cyclic region edge. Coarse
# group columns derived from keys or other filters make stacked predicates
# look far more selective than they are.
STAR_SCHEMA = """
tables:
  - name: customer
    columns: [id: integer, region: integer, age: integer, grp: integer]
    filterable: [region, age, grp]
  - name: product
    columns: [id: integer, cat: integer, line: integer, supp: integer]
    filterable: [cat, line]
  - name: returns
    columns: [id: integer, sale: integer, reason: integer]
    filterable: [reason]
  - name: sales
    columns: [id: integer, cust: integer, prod: integer, store: integer, qty: integer, band: integer]
    filterable: [qty, band]
  - name: store
    columns: [id: integer, region: integer, size: integer, tier: integer]
    filterable: [region, size, tier]
  - name: supplier
    columns: [id: integer, country: integer, tier: integer]
    filterable: [country, tier]
joins:
  - [sales.cust, customer.id]
  - [sales.prod, product.id]
  - [sales.store, store.id]
  - [returns.sale, sales.id]
  - [product.supp, supplier.id]
  - [customer.region, store.region]
generator:
  seed: 11
  fk_skew: 1.5
  tables:
    customer: {rows: 5000, columns: {id: sequential, region: {uniform: 20}, age: {uniform: 80}}}
    product: {rows: 2000, columns: {id: sequential, cat: {zipf: [1.2, 50]}, supp: {fk: supplier.id}}}
    returns: {rows: 10000, columns: {id: sequential, sale: {fk: sales.id}, reason: {uniform: 10}}}
    sales: {rows: 100000, columns: {id: sequential, cust: {fk: customer.id}, prod: {fk: product.id}, store: {fk: store.id}, qty: {uniform: 50}}}
    store: {rows: 200, columns: {id: sequential, region: {uniform: 20}, size: {uniform: 5}}}
    supplier: {rows: 300, columns: {id: sequential, country: {uniform: 12}}}
  correlations:
    - {table: customer, target: grp, source: id, fn: div, arg: 500}
    - {table: product, target: line, source: id, fn: div, arg: 200}
    - {table: store, target: tier, source: id, fn: div, arg: 20}
    - {table: sales, target: band, source: qty, fn: div, arg: 5}
    - {table: supplier, target: tier, source: country, fn: mod, arg: 3}
"""


def correlated_catalog(seed: int | None = None) -> Catalog:
    spec = parse_generator_spec(CORRELATED_SCHEMA, "correlated")
    if seed is not None:
        spec.seed = seed
    return generate_synthetic(spec)


def star_catalog(seed: int | None = None) -> Catalog:
    spec = parse_generator_spec(STAR_SCHEMA, "star")
    if seed is not None:
        spec.seed = seed
    return generate_synthetic(spec)
