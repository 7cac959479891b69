"""Where the default optimizer goes wrong on the correlated catalog.

Two pairs of filter predicates are functionally dependent, so the optimizer
multiplies selectivities that should not be multiplied and underestimates
intermediate sizes. Enumerating every plan shows how much it leaves behind.
"""
import argparse

from headroom import ConjunctiveQuery, Predicate, build_stats, enumerate_plans, execute_plan, optimize
from headroom.datasets import correlated_catalog
from headroom.optimizer import estimate_cardinality


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seg", type=int, default=0)
    ap.add_argument("--value", type=int, default=2)
    args = ap.parse_args()

    cat = correlated_catalog()
    stats = build_stats(cat)
    print(cat)
    q = ConjunctiveQuery.make(
        ["customer", "item", "orders", "shipment"], cat.join_graph,
        [Predicate("orders", "a", "=", args.value), Predicate("orders", "b", "=", args.value),
         Predicate("customer", "seg", "=", args.seg), Predicate("customer", "seg2", "=", args.seg)])

    # estimated vs true size of the filtered orders table
    est = estimate_cardinality(q, stats, ["orders"])
    true = int(((cat.column("orders", "a") == args.value) & (cat.column("orders", "b") == args.value)).sum())
    print(f"orders after filters: estimated {est:.1f}, actual {true}")

    default = optimize(q, stats)
    d = execute_plan(default.plan, cat)
    runs = sorted((execute_plan(p, cat).work_units, p.text()) for p in enumerate_plans(q))
    print(f"default plan  {d.work_units:>9} work units  {default.plan.text()}")
    print(f"best plan     {runs[0][0]:>9} work units  {runs[0][1]}")
    print(f"relative headroom {d.work_units / runs[0][0]:.2f} over {len(runs)} plans")


if __name__ == "__main__":
    main()
