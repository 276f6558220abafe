"""Budget sweep: BO attack vs. random search over many seeds and budgets.

Failed runs are charged a fixed penalty (``failure_value`` for BO,
``random_cap`` for random search) so averages compare the two methods
conservatively.  Raw rows and per-(model, C, method) aggregates are written
as CSV with fixed headers.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from .attack import (
    FEASIBILITY_TOL,
    AttackOutcome,
    AttackProblem,
    BOConfig,
    DirectConfig,
    RandomSearchConfig,
    bo_attack,
    random_search_attack,
)
from .data import MODEL_KINDS, SPAM
from .direct import BOX_MODES
from .oracle import CountingOracle, QueryCounter, predict

log = logging.getLogger(__name__)

RAW_HEADER = ["model", "C", "seed_id", "method", "queries_raw", "queries_accounted", "success"]
AGG_HEADER = ["model", "C", "method", "mean_queries", "success_rate", "n"]
METHODS = ("bo", "random")


class ConfigError(ValueError):
    pass


class AuditError(AssertionError):
    """An attack broke the budget or the query accounting."""


def _parse_bool(s):
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_floats(s):
    return [float(v) for v in s.replace(",", " ").split()]


def _parse_kinds(s):
    kinds = [v for v in s.replace(",", " ").split()]
    bad = [k for k in kinds if k not in MODEL_KINDS]
    if bad:
        raise ValueError(f"unknown model kinds {bad}")
    return kinds


def _optional_float(s):
    return None if s.strip().lower() in ("", "none", "default") else float(s)


@dataclass
class SweepConfig:
    dataset: str = ""
    models: list = field(default_factory=lambda: list(MODEL_KINDS))
    budgets: list = field(default_factory=lambda: [1.0, 2.0, 5.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0])
    seeds_per_budget: int = 20
    bo_cap: int = 50
    random_cap: int = 500
    failure_value: int = 500
    rng_seed: int = 0
    n_train: int = 3500
    epsilon: float = 0.05
    kappa: float = 2.0
    orientation: str = "minimization-consistent"
    lengthscale: float | None = None
    signal_variance: float = 1.0
    noise_variance: float = 1e-4
    seed_origin: bool = True
    normalize: bool = True
    box: str = "reach"
    refit_every: int = 0
    direct_budget: int = 500
    direct_eps: float = 1e-4
    n_jobs: int = 1

    _PARSERS = {
        "models": _parse_kinds,
        "budgets": _parse_floats,
        "seed_origin": _parse_bool,
        "normalize": _parse_bool,
        "lengthscale": _optional_float,
    }

    def __post_init__(self):
        if self.box not in BOX_MODES:
            raise ConfigError(f"box must be one of {BOX_MODES}")
        if not self.budgets or any(c <= 0 for c in self.budgets):
            raise ConfigError("budgets must be a nonempty list of positive values")
        if self.bo_cap > self.failure_value:
            raise ConfigError("bo_cap must not exceed failure_value")
        if self.seeds_per_budget < 1 or self.bo_cap < 1 or self.random_cap < 1:
            raise ConfigError("seeds_per_budget, bo_cap and random_cap must be positive")

    @classmethod
    def from_text(cls, text: str) -> "SweepConfig":
        """Parse ``key = value`` lines; ``#`` starts a comment."""
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value")
            key, value = (p.strip() for p in line.split("=", 1))
            if key not in known:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            parser = cls._PARSERS.get(key) or type(known[key].default)
            try:
                kwargs[key] = parser(value)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
        try:
            return cls(**kwargs)
        except ConfigError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_file(cls, path) -> "SweepConfig":
        return cls.from_text(Path(path).read_text())

    def bo_config(self) -> BOConfig:
        return BOConfig(self.kappa, self.orientation, self.lengthscale, self.signal_variance,
                        self.noise_variance, self.seed_origin, self.refit_every, self.box)

    def direct_config(self) -> DirectConfig:
        return DirectConfig(self.direct_budget, self.direct_eps)


@dataclass(frozen=True)
class ExperimentRow:
    model: str
    C: float
    seed_id: int
    method: str
    queries_raw: int
    queries_accounted: int
    success: bool


@dataclass
class CellResult:
    row: ExperimentRow
    outcome: AttackOutcome
    counter_delta: int


def attack_bounds(x_A, upper=None):
    """Feature box for one seed: [0, upper] widened to contain x_A (test rows
    can fall outside the training min/max).  ``upper`` defaults to 1."""
    hi = 1.0 if upper is None else upper
    return np.minimum(0.0, x_A), np.maximum(hi, x_A)


def cell_rng(master_seed: int, kind: str, C: float, seed_id: int, method: str):
    # Fixed key per cell: adding budgets or seeds never shifts other cells' streams.
    key = (MODEL_KINDS.index(kind), int(round(C * 1_000_000)), int(seed_id), METHODS.index(method))
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=key))


def audit(outcome: AttackOutcome, problem: AttackProblem, counter_delta: int):
    if outcome.queries != counter_delta or outcome.queries != len(outcome.trace):
        raise AuditError(f"reported Q={outcome.queries}, trace={len(outcome.trace)}, oracle calls={counter_delta}")
    for rec in outcome.trace:
        if problem.cost(rec.x) > problem.C + FEASIBILITY_TOL:
            raise AuditError(f"query {rec.step} has L1 cost {problem.cost(rec.x)} > C={problem.C}")


def run_cell(model, kind: str, x_A, seed_id: int, C: float, method: str, cfg: SweepConfig) -> CellResult:
    counter = QueryCounter()
    oracle = CountingOracle(model, counter)
    bounds = attack_bounds(x_A, getattr(model, "domain_upper", None))
    if method == "bo":
        problem = AttackProblem(x_A, SPAM, C, cfg.bo_cap, bounds=bounds)
        outcome = bo_attack(oracle, problem, cfg.bo_config(), cfg.direct_config())
        penalty = cfg.failure_value
    elif method == "random":
        problem = AttackProblem(x_A, SPAM, C, 1, bounds=bounds)
        rs = RandomSearchConfig(cfg.epsilon, cfg.random_cap)
        outcome = random_search_attack(oracle, problem, rs, cell_rng(cfg.rng_seed, kind, C, seed_id, method))
        penalty = cfg.random_cap
    else:
        raise ValueError(f"unknown method {method!r}")
    audit(outcome, problem, counter.count)
    accounted = outcome.queries if outcome.success else penalty
    row = ExperimentRow(kind, float(C), int(seed_id), method, outcome.queries, accounted, outcome.success)
    return CellResult(row, outcome, counter.count)


def select_seeds(model, X_test, seed_pool, n_seeds: int, rng_seed: int) -> list[int]:
    """First ``n_seeds`` spam test rows (in a seeded order) that ``model``
    classifies as spam; misclassified ones are skipped and logged."""
    order = np.random.default_rng(rng_seed).permutation(np.asarray(seed_pool))
    chosen = []
    for idx in order:
        if predict(model, X_test[idx]).label != SPAM:
            log.info("%s: skipping seed %d (classified as ham)", model.kind, idx)
            continue
        chosen.append(int(idx))
        if len(chosen) == n_seeds:
            break
    if len(chosen) < n_seeds:
        log.warning("%s: only %d usable seeds (wanted %d)", model.kind, len(chosen), n_seeds)
    return chosen


def run_sweep(models: dict, X_test, seed_pool, cfg: SweepConfig, details: bool = False):
    """Attack every (model, C, seed) cell with both methods.

    Returns rows sorted by (model, C, seed_id, method), or the full
    :class:`CellResult` list when ``details`` is true.
    """
    if len(seed_pool) == 0:
        raise ValueError("seed pool is empty")
    jobs = []
    for kind in cfg.models:
        model = models[kind]
        for seed_id in select_seeds(model, X_test, seed_pool, cfg.seeds_per_budget, cfg.rng_seed):
            for C in cfg.budgets:
                for method in METHODS:
                    jobs.append((model, kind, X_test[seed_id], seed_id, C, method))
    results = Parallel(n_jobs=cfg.n_jobs)(delayed(run_cell)(*job, cfg) for job in jobs)
    results.sort(key=lambda r: (MODEL_KINDS.index(r.row.model), r.row.C, r.row.seed_id, METHODS.index(r.row.method)))
    return results if details else [r.row for r in results]


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_raw(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RAW_HEADER)
        for r in rows:
            w.writerow([_fmt(getattr(r, k)) for k in RAW_HEADER])


def read_raw(path) -> list[ExperimentRow]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RAW_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        return [ExperimentRow(m, float(c), int(s), meth, int(qr), int(qa), sc == "1")
                for m, c, s, meth, qr, qa, sc in reader]


def aggregate(rows) -> list[dict]:
    groups: dict[tuple, list] = {}
    for r in rows:
        groups.setdefault((r.model, r.C, r.method), []).append(r)
    out = []
    for (model, C, method), rs in groups.items():
        out.append({
            "model": model, "C": C, "method": method,
            "mean_queries": float(np.mean([r.queries_accounted for r in rs])),
            "success_rate": float(np.mean([r.success for r in rs])),
            "n": len(rs),
        })
    kind_rank = {k: i for i, k in enumerate(MODEL_KINDS)}
    out.sort(key=lambda a: (kind_rank.get(a["model"], len(kind_rank)), a["model"], a["C"], METHODS.index(a["method"])))
    return out


def write_aggregate(agg, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGG_HEADER)
        for a in agg:
            w.writerow([_fmt(a[k]) for k in AGG_HEADER])


def query_ratios(agg) -> dict:
    """Mean BO queries / mean random queries per (model, C)."""
    by = {(a["model"], a["C"], a["method"]): a["mean_queries"] for a in agg}
    return {(m, c): by[(m, c, "bo")] / by[(m, c, "random")]
            for (m, c, meth) in by if meth == "bo" and (m, c, "random") in by}


def aggregate_and_emit(rows, out_dir, raw_name="raw_rows.csv", agg_name="aggregate.csv", echo=print):
    if not rows:
        raise ValueError("no rows to aggregate")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_raw(rows, out_dir / raw_name)
    agg = aggregate(rows)
    write_aggregate(agg, out_dir / agg_name)
    ratios = query_ratios(agg)
    for (model, C), ratio in ratios.items():
        echo(f"{model:>10s}  C={C:<6g} BO/random mean-query ratio = {ratio:.3f}")
    return {"aggregate": agg, "ratios": ratios}
