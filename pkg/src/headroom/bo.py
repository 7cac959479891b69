"""The latent-space BO loop: archive, headroom objective, proposals, checkpoints."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from headroom import latent
from headroom.catalog import Catalog
from headroom.engine import execute_plan
from headroom.optimizer import optimize
from headroom.plan import PhysicalPlan, parse_plan
from headroom.plan_codec import format_tokens as format_plan_tokens
from headroom.query import ConjunctiveQuery
from headroom.query_codec import format_tokens as format_query_tokens
from headroom.sql import print_sql
from headroom.stats import Statistics, build_stats
from headroom.surrogate import GPConfig, build_model, expected_improvement, fit, select_training_points

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
ENGINE_VERSION = "headroom-engine/1"


class EngineBugError(RuntimeError):
    """Witness and default plans disagree on COUNT(*)."""


class UnevaluableQuery(RuntimeError):
    """The default plan exceeded its work-unit cap."""


class CheckpointError(RuntimeError):
    pass


@dataclass(frozen=True)
class RunConfig:
    objective_mode: str = "relative"
    iterations: int = 300
    n_init: int = 64
    batch_size: int = 5
    n_local: int = 512
    n_global: int = 512
    half_width: float = 1.0
    shrink: float = 0.5
    expand: float = 1.6
    failure_tolerance: int = 8
    min_half_width: float = 0.01
    max_half_width: float = 5.0
    perturb_dims: float = 2.0
    restart_batches: int = 4
    success_tol: float = 1e-3
    default_cap: int = 10**9
    witness_cap_factor: int = 16
    min_default_work: int = 10**4
    seed: int = 0
    checkpoint_every: int = 10
    gp_starts: int = 8
    gp_fit_points: int = 256
    gp_refit_every: int = 5
    max_gp_points: int = 2000
    stats_buckets: int = 32
    record_wall_time: bool = False
    catalog: str | None = None

    def __post_init__(self):
        if self.objective_mode not in ("relative", "absolute"):
            raise ValueError(f"objective_mode must be 'relative' or 'absolute', not {self.objective_mode!r}")
        for name in ("n_init", "batch_size", "n_local", "n_global", "failure_tolerance",
                     "checkpoint_every", "gp_starts", "gp_fit_points", "gp_refit_every",
                     "default_cap", "witness_cap_factor", "stats_buckets"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.iterations < 0 or self.restart_batches < 0:
            raise ValueError("iterations and restart_batches must be >= 0")
        if not 0 < self.half_width <= 5:
            raise ValueError("half_width must lie in (0, 5]")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown run config fields: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class Observation:
    query_tokens: tuple[int, ...]
    plan_tokens: tuple[int, ...]
    sql: str
    objective: float
    l_default: int
    l_witness: int
    default_plan: str
    witness_plan: str
    witness_timed_out: bool
    count: int
    iteration: int
    seed: int
    timestamp: float | None = None

    def to_record(self) -> dict:
        d = dataclasses.asdict(self)
        d["query_tokens"] = format_query_tokens(self.query_tokens)
        d["plan_tokens"] = format_plan_tokens(self.plan_tokens)
        return d

    @classmethod
    def from_record(cls, d: dict) -> "Observation":
        d = dict(d)
        d["query_tokens"] = tuple(int(v) for v in d["query_tokens"].split())
        d["plan_tokens"] = tuple(int(v) for v in d["plan_tokens"].split())
        return cls(**d)


def objective_value(mode: str, l_default: int, l_witness: int, witness_timed_out: bool,
                    cap: int) -> float:
    if mode == "relative":
        return 0.0 if witness_timed_out else l_default / max(1, l_witness)
    return float(-cap) if witness_timed_out else float(l_default - l_witness)


@dataclass(frozen=True)
class Headroom:
    objective: float
    l_default: int
    l_witness: int
    witness_timed_out: bool
    default_plan: PhysicalPlan
    count: int


class Evaluator:
    """Executes witness plans against cached default plans."""

    def __init__(self, catalog: Catalog, config: RunConfig, stats: Statistics | None = None,
                 cache: dict | None = None):
        self.catalog = catalog
        self.config = config
        self.stats = stats or build_stats(catalog, config.stats_buckets)
        # canonical sql -> [default plan text, L_default, count] or None (unevaluable)
        self.cache: dict[str, list | None] = cache if cache is not None else {}

    def default(self, q: ConjunctiveQuery):
        key = print_sql(q)
        if key not in self.cache:
            plan = optimize(q, self.stats).plan
            res = execute_plan(plan, self.catalog, cap=self.config.default_cap)
            self.cache[key] = None if res.timed_out else [plan.text(), res.work_units, res.count]
        entry = self.cache[key]
        if entry is None:
            raise UnevaluableQuery(f"default plan exceeds {self.config.default_cap} work units: {key}")
        return parse_plan(entry[0], q), entry[1], entry[2]

    def headroom(self, q: ConjunctiveQuery, p: PhysicalPlan) -> Headroom:
        dplan, l_default, count = self.default(q)
        cap = self.config.witness_cap_factor * max(1, l_default)
        res = execute_plan(p, self.catalog, cap=cap)
        if not res.timed_out and res.count != count:
            raise EngineBugError(f"count mismatch {res.count} != {count} for {print_sql(q)} / {p.text()}")
        obj = objective_value(self.config.objective_mode, l_default, res.work_units, res.timed_out, cap)
        return Headroom(obj, l_default, res.work_units, res.timed_out, dplan, count)


def headroom(q: ConjunctiveQuery, p: PhysicalPlan, catalog: Catalog, mode: str = "relative",
             stats: Statistics | None = None, config: RunConfig | None = None) -> Headroom:
    """Objective of witness plan ``p`` against the baseline optimizer's plan for ``q``."""
    config = dataclasses.replace(config or RunConfig(), objective_mode=mode)
    return Evaluator(catalog, config, stats).headroom(q, p)


@dataclass
class BOState:
    config: RunConfig
    observations: list[Observation] = field(default_factory=list)
    cache: dict = field(default_factory=dict)
    discarded: list[dict] = field(default_factory=list)
    rng_state: dict | None = None
    half_width: float = 1.0
    failures: int = 0
    iteration: int = 0
    initialized: bool = False
    hyperparameters: list[float] | None = None
    # first observation of the current trust region, and global batches left after a restart
    region_start: int = 0
    restart_left: int = 0

    def to_payload(self) -> dict:
        return {
            "config": dataclasses.asdict(self.config),
            "observations": [o.to_record() for o in self.observations],
            "cache": self.cache,
            "discarded": self.discarded,
            "rng_state": self.rng_state,
            "half_width": self.half_width,
            "failures": self.failures,
            "iteration": self.iteration,
            "initialized": self.initialized,
            "hyperparameters": self.hyperparameters,
            "region_start": self.region_start,
            "restart_left": self.restart_left,
        }

    @classmethod
    def from_payload(cls, d: dict) -> "BOState":
        return cls(
            config=RunConfig.from_dict(d["config"]),
            observations=[Observation.from_record(o) for o in d["observations"]],
            cache=d["cache"],
            discarded=d["discarded"],
            rng_state=d["rng_state"],
            half_width=d["half_width"],
            failures=d["failures"],
            iteration=d["iteration"],
            initialized=d["initialized"],
            hyperparameters=d["hyperparameters"],
            region_start=d["region_start"],
            restart_left=d["restart_left"],
        )


# archive / checkpoint files

def write_archive(observations, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for o in observations:
            fh.write(json.dumps(o.to_record(), sort_keys=True) + "\n")


def read_archive(path) -> list[Observation]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(Observation.from_record(json.loads(line)))
    return out


def save_checkpoint(state: BOState, path) -> None:
    payload = json.dumps(state.to_payload(), sort_keys=True)
    digest = hashlib.sha256(payload.encode("utf-8")).hexdigest()
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps({"version": CHECKPOINT_VERSION, "sha256": digest}) + "\n" + payload,
                   encoding="utf-8")
    tmp.replace(path)


def load_checkpoint(path) -> BOState:
    text = Path(path).read_text(encoding="utf-8")
    header, _, payload = text.partition("\n")
    try:
        meta = json.loads(header)
    except json.JSONDecodeError:
        raise CheckpointError(f"{path}: corrupt checkpoint header") from None
    if meta.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: checkpoint version {meta.get('version')} != {CHECKPOINT_VERSION}")
    if hashlib.sha256(payload.encode("utf-8")).hexdigest() != meta.get("sha256"):
        raise CheckpointError(f"{path}: checksum mismatch (truncated or corrupt checkpoint)")
    return BOState.from_payload(json.loads(payload))


# the optimizer proper

def surrogate_target(o: Observation, config: RunConfig) -> float:
    """GP target: log relative headroom (floored) or raw absolute headroom.

    Observations whose default plan is too cheap to count are capped at
    "no headroom" so they do not attract the search.
    """
    if config.objective_mode == "relative":
        y = math.log(max(o.objective, 1.0 / (2 * config.witness_cap_factor)))
    else:
        y = o.objective
    if o.l_default < config.min_default_work:
        y = min(y, 0.0)
    return y


def eligible(o: Observation, config: RunConfig) -> bool:
    return o.l_default >= config.min_default_work


def best_objective(observations, config: RunConfig) -> float:
    vals = [o.objective for o in observations if eligible(o, config)]
    return max(vals) if vals else -math.inf


def incumbent(observations, config: RunConfig) -> Observation | None:
    best = None
    for o in observations:
        if eligible(o, config) and (best is None or o.objective > best.objective):
            best = o
    if best is None and observations:
        best = max(observations, key=lambda o: o.objective)
    return best


class BayesOpt:
    def __init__(self, catalog: Catalog, state: BOState, stats: Statistics | None = None):
        self.catalog = catalog
        self.state = state
        self.config = state.config
        self.evaluator = Evaluator(catalog, self.config, stats, state.cache)
        self.rng = np.random.Generator(np.random.PCG64(self.config.seed))
        if state.rng_state is not None:
            self.rng.bit_generator.state = state.rng_state
        # token bytes -> ((sql, plan text), canonical z); pool entries are dropped after each proposal
        self._canon: dict[bytes, tuple] = {}
        self._observed: set[bytes] = {self._bytes(o.query_tokens, o.plan_tokens) for o in state.observations}
        self._seen = {self._key(o.query_tokens, o.plan_tokens) for o in state.observations}

    @classmethod
    def new(cls, catalog: Catalog, config: RunConfig, stats=None) -> "BayesOpt":
        return cls(catalog, BOState(config, half_width=config.half_width), stats)

    @staticmethod
    def _bytes(qt, pt) -> bytes:
        return np.asarray(qt, dtype=np.int8).tobytes() + np.asarray(pt, dtype=np.int8).tobytes()

    # canonical representation of a token pair
    def _canonical(self, qt, pt) -> tuple[tuple, np.ndarray]:
        qt, pt = np.asarray(qt, dtype=np.int64), np.asarray(pt, dtype=np.int64)
        k = self._bytes(qt, pt)
        got = self._canon.get(k)
        if got is None:
            q, p = latent.decode_tokens(qt, pt, self.catalog)
            try:
                z = latent.encode_pair(q, p, self.catalog)
            except ValueError:
                z = latent.from_tokens(np.concatenate([qt, pt]))
            got = self._canon[k] = ((print_sql(q), p.text()), z)
        return got

    def _key(self, qt, pt) -> tuple:
        return self._canonical(qt, pt)[0]

    def canonical_z(self, qt, pt) -> np.ndarray:
        """Latent point of the canonical encoding of the decoded pair."""
        return self._canonical(qt, pt)[1]

    def evaluate(self, z) -> Observation | None:
        qt, pt = latent.split_tokens(z)
        q, p = latent.decode_tokens(qt, pt, self.catalog)
        try:
            h = self.evaluator.headroom(q, p)
        except UnevaluableQuery as exc:
            self.state.discarded.append({"iteration": self.state.iteration, "sql": print_sql(q),
                                         "reason": str(exc)})
            return None
        obs = Observation(
            query_tokens=tuple(qt), plan_tokens=tuple(pt), sql=print_sql(q), objective=h.objective,
            l_default=h.l_default, l_witness=h.l_witness, default_plan=h.default_plan.text(),
            witness_plan=p.text(), witness_timed_out=h.witness_timed_out, count=h.count,
            iteration=self.state.iteration, seed=self.config.seed,
            timestamp=time.time() if self.config.record_wall_time else None)
        self.state.observations.append(obs)
        self._seen.add((obs.sql, obs.witness_plan))
        self._observed.add(self._bytes(qt, pt))
        return obs

    def initialize(self) -> None:
        if self.state.initialized:
            return
        for _ in range(self.config.n_init):
            self.evaluate(self.rng.uniform(-latent.BOX, latent.BOX, latent.LATENT_DIM))
        self.state.initialized = True
        self._sync_rng()

    def _sync_rng(self) -> None:
        self.state.rng_state = self.rng.bit_generator.state

    def fit_model(self):
        obs = self.state.observations
        X = np.array([self.canonical_z(o.query_tokens, o.plan_tokens) for o in obs])
        y = np.array([surrogate_target(o, self.config) for o in obs])
        keep = select_training_points(y, self.config.max_gp_points)
        X, y = X[keep], y[keep]
        hp = self.state.hyperparameters
        if hp is None or self.state.iteration % self.config.gp_refit_every == 0:
            sub = select_training_points(y, self.config.gp_fit_points, n_best=self.config.gp_fit_points // 4)
            cfg = GPConfig(starts=self.config.gp_starts, seed=self.config.seed * 100_003 + self.state.iteration)
            hp = fit(X[sub], y[sub], cfg, warm_start=hp).hyperparameters()
            self.state.hyperparameters = [float(v) for v in hp]
        return build_model(X, y, *hp), float(y.max())

    def propose_batch(self, model, best: float) -> list[np.ndarray]:
        cfg = self.config
        center = self.center()
        zc = self.canonical_z(center.query_tokens, center.plan_tokens)
        hw = self.state.half_width
        d = latent.LATENT_DIM
        local = np.repeat(zc[None, :], cfg.n_local, axis=0)
        # perturb a few of the coordinates the decoders read; at least one per candidate
        live = np.flatnonzero(latent.live_dims(len(self.catalog.tables)))
        m = self.rng.random((cfg.n_local, len(live))) < min(1.0, cfg.perturb_dims / len(live))
        empty = ~m.any(axis=1)
        m[empty, self.rng.integers(0, len(live), size=int(empty.sum()))] = True
        mask = np.zeros((cfg.n_local, d), dtype=bool)
        mask[:, live] = m
        step = self.rng.uniform(-hw, hw, (cfg.n_local, d))
        local = np.clip(np.where(mask, local + step, local), -latent.BOX, latent.BOX)
        glob = self.rng.uniform(-latent.BOX, latent.BOX, (cfg.n_global, d))
        # right after a restart only whole-box candidates compete
        pool = glob if self.state.restart_left else np.vstack([local, glob])
        tokens = latent.to_tokens(pool)
        canon = np.array([self.canonical_z(t[:latent.QUERY_DIM], t[latent.QUERY_DIM:]) for t in tokens])
        mean, var = model.posterior(canon)
        ei = expected_improvement(mean, var, best)
        order = np.argsort(-ei, kind="stable")
        batch, keys = [], set(self._seen)
        for i in order:
            k = self._key(tokens[i][:latent.QUERY_DIM], tokens[i][latent.QUERY_DIM:])
            if k in keys:
                continue
            keys.add(k)
            batch.append(pool[i])
            if len(batch) == cfg.batch_size:
                break
        self.last_ei = ei[order]
        self._canon = {k: v for k, v in self._canon.items() if k in self._observed}
        return batch

    def center(self) -> Observation:
        """Trust-region center: the best observation since the region was (re)started."""
        return (incumbent(self.state.observations[self.state.region_start:], self.config)
                or incumbent(self.state.observations, self.config))

    def step(self) -> list[Observation]:
        cfg = self.config
        if len(self.state.observations) < 2:
            # nothing to model yet: sample the whole box
            added = [o for o in (self.evaluate(self.rng.uniform(-latent.BOX, latent.BOX, latent.LATENT_DIM))
                                 for _ in range(cfg.batch_size)) if o is not None]
            self.state.iteration += 1
            self._sync_rng()
            return added
        st = self.state
        # success means beating the region's own best, not only the global best
        bar = best_objective(st.observations[st.region_start:], cfg)
        model, best = self.fit_model()
        # expected improvement is measured against the current region's best
        best = max((surrogate_target(o, cfg) for o in st.observations[st.region_start:]), default=best)
        batch = self.propose_batch(model, best)
        added = [o for o in (self.evaluate(z) for z in batch) if o is not None]
        if st.restart_left:
            st.restart_left -= 1
        elif best_objective(added, cfg) > (bar + cfg.success_tol * abs(bar) if math.isfinite(bar) else bar):
            st.half_width = min(st.half_width * cfg.expand, cfg.max_half_width)
            st.failures = 0
        else:
            st.failures += 1
            if st.failures >= cfg.failure_tolerance:
                if st.half_width <= cfg.min_half_width:
                    # collapsed: start a new region from a few whole-box batches
                    st.region_start = len(st.observations)
                    st.restart_left = cfg.restart_batches
                    st.half_width = cfg.half_width
                else:
                    st.half_width = max(st.half_width * cfg.shrink, cfg.min_half_width)
                st.failures = 0
        self.state.iteration += 1
        self._sync_rng()
        return added


def run(config: RunConfig, catalog: Catalog, out_dir=None, resume: bool = False,
        stop_after: int | None = None, stats: Statistics | None = None) -> list[Observation]:
    """Initialize, then run BO steps up to ``config.iterations``.

    With ``out_dir`` a checkpoint is written every ``checkpoint_every`` steps
    and ``archive.jsonl`` at the end. ``resume`` continues from an existing
    checkpoint; ``stop_after`` halts after that many total steps (simulated
    interruption).
    """
    ckpt = archive = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        ckpt, archive = out_dir / "checkpoint.json", out_dir / "archive.jsonl"
    if resume and ckpt is not None and ckpt.exists():
        state = load_checkpoint(ckpt)
        state.config = dataclasses.replace(state.config, iterations=config.iterations)
        bo = BayesOpt(catalog, state, stats)
    else:
        bo = BayesOpt.new(catalog, config, stats)
    bo.initialize()
    limit = config.iterations if stop_after is None else min(config.iterations, stop_after)
    while bo.state.iteration < limit:
        bo.step()
        log.info("iteration %d best %.4g half-width %.3g", bo.state.iteration,
                 best_objective(bo.state.observations, bo.config), bo.state.half_width)
        if ckpt is not None and bo.state.iteration % config.checkpoint_every == 0:
            save_checkpoint(bo.state, ckpt)
    if ckpt is not None:
        save_checkpoint(bo.state, ckpt)
        write_archive(bo.state.observations, archive)
    return bo.state.observations


def random_search(config: RunConfig, catalog: Catalog, stats: Statistics | None = None) -> list[Observation]:
    """Uniform latent sampling with the same evaluation budget as :func:`run`."""
    bo = BayesOpt.new(catalog, config, stats)
    for _ in range(config.n_init + config.iterations * config.batch_size):
        bo.evaluate(bo.rng.uniform(-latent.BOX, latent.BOX, latent.LATENT_DIM))
    return bo.state.observations
