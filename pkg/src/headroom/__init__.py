"""Synthesize hard benchmark queries by Bayesian optimization over a joint
latent space of conjunctive SQL queries and join plans."""

from headroom.catalog import Catalog, JoinEdge, TableDef, load_catalog
from headroom.engine import ExecutionResult, execute_plan, naive_count_oracle
from headroom.latent import decode_latent, encode_pair
from headroom.optimizer import cost_plan, estimate_cardinality, optimize
from headroom.plan_codec import decode_plan, encode_plan, enumerate_plans
from headroom.query import ConjunctiveQuery, Predicate, validate_query
from headroom.query_codec import decode_query, encode_query
from headroom.sql import parse_sql, print_sql
from headroom.stats import build_stats
from headroom.synth import generate_synthetic

__version__ = "0.1.0"
