"""Query-limited black-box attacks under an L1 feature-modification budget.

``bo_attack`` picks each query by maximizing a GP-UCB acquisition with the
constrained DIRECT optimizer; ``random_search_attack`` is the baseline that
samples points at L1 distance just under the budget.  Both talk to the model
only through an oracle callable, one call per query.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from .direct import InfeasibleStepError, build_search_box, l1_constraint, maximize
from .gp import AcquisitionConfig, GPState, KernelParams, acquisition_batch, gp_update, refit_lengthscale

log = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-9


@dataclass(frozen=True)
class AttackProblem:
    x_A: np.ndarray
    baseline_label: int
    C: float
    N: int = 50
    target_label: int | None = None
    bounds: tuple = (0.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "x_A", np.asarray(self.x_A, dtype=float).ravel())
        if not self.C > 0:
            raise ValueError("budget C must be positive")
        if self.N < 1:
            raise ValueError("N must be at least 1")
        lo, hi = (np.broadcast_to(np.asarray(b, dtype=float), self.x_A.shape) for b in self.bounds)
        if np.any(self.x_A < lo) or np.any(self.x_A > hi):
            raise ValueError("x_A lies outside the feature bounds")

    def cost(self, x) -> float:
        return float(np.abs(np.asarray(x, dtype=float) - self.x_A).sum())

    def is_success(self, label) -> bool:
        if self.target_label is None:
            return label != self.baseline_label
        return label == self.target_label


@dataclass(frozen=True)
class QueryRecord:
    step: int
    x: np.ndarray
    label: int
    confidence: float
    objective: float
    cost: float


@dataclass
class AttackOutcome:
    success: bool
    x_star: np.ndarray | None
    queries: int
    trace: list[QueryRecord] = field(default_factory=list)
    message: str = ""


def objective_from_response(resp, problem: AttackProblem) -> float:
    """Value to minimize: probability of the baseline class (untargeted) or
    one minus the probability of the target class (targeted)."""
    keep = problem.baseline_label if problem.target_label is None else problem.target_label
    p_keep = resp.confidence if resp.label == keep else 1.0 - resp.confidence
    return p_keep if problem.target_label is None else 1.0 - p_keep


def _query(oracle, problem, x, step, trace):
    resp = oracle(x)
    rec = QueryRecord(step, np.array(x, dtype=float), int(resp.label), float(resp.confidence),
                      objective_from_response(resp, problem), problem.cost(x))
    trace.append(rec)
    return rec


@dataclass(frozen=True)
class BOConfig:
    kappa: float = 2.0
    orientation: str = "minimization-consistent"
    lengthscale: float | None = None  # None -> 0.5 * sqrt(d)
    signal_variance: float = 1.0
    noise_variance: float = 1e-4
    seed_origin: bool = True  # observe (x_A, 1.0) for free before the first query
    refit_every: int = 0  # >0: refit the lengthscale by marginal likelihood every k queries
    box: str = "reach"  # search-box construction, see build_search_box

    def kernel_params(self, n_features) -> KernelParams:
        ls = 0.5 * np.sqrt(n_features) if self.lengthscale is None else self.lengthscale
        return KernelParams(ls, self.signal_variance, self.noise_variance)


@dataclass(frozen=True)
class DirectConfig:
    budget: int = 500
    eps: float = 1e-4


def bo_attack(oracle, problem: AttackProblem, bo_cfg: BOConfig = BOConfig(),
              direct_cfg: DirectConfig = DirectConfig(), callback=None) -> AttackOutcome:
    """Bayesian-optimization attack.

    ``callback(t, gp_state)`` is called after each GP update.
    """
    x_A = problem.x_A
    box = build_search_box(x_A, problem.C, problem.bounds, bo_cfg.box)
    constraint = l1_constraint(x_A, problem.C)
    acq_cfg = AcquisitionConfig(bo_cfg.kappa, bo_cfg.orientation)
    state = GPState(params=bo_cfg.kernel_params(len(x_A)))
    if bo_cfg.seed_origin:
        # f(x_A) is an input of the attack, so this observation costs no query.
        state = gp_update(state, x_A, 1.0)

    trace: list[QueryRecord] = []
    for t in range(1, problem.N + 1):
        try:
            x_t = maximize(lambda X: acquisition_batch(state, X, acq_cfg), constraint, box,
                           direct_cfg.budget, direct_cfg.eps)
        except InfeasibleStepError as exc:
            return AttackOutcome(False, None, len(trace), trace, f"step {t}: {exc}")
        rec = _query(oracle, problem, x_t, t, trace)
        if problem.is_success(rec.label):
            return AttackOutcome(True, rec.x, len(trace), trace, f"label changed at step {t}")
        state = gp_update(state, x_t, rec.objective)
        if bo_cfg.refit_every and t % bo_cfg.refit_every == 0:
            state = refit_lengthscale(state)
        if callback is not None:
            callback(t, state)
    return AttackOutcome(False, None, len(trace), trace, f"no label change in {problem.N} queries")


def l1_annulus_offset(n_features: int, C: float, epsilon: float, rng) -> np.ndarray:
    """Offset uniform in direction on the L1 sphere, radius uniform in (C - eps, C]."""
    if not 0 < epsilon < C:
        raise ValueError(f"need 0 < epsilon < C, got epsilon={epsilon}, C={C}")
    mags = rng.exponential(size=n_features)
    signs = rng.choice((-1.0, 1.0), size=n_features)
    radius = C - epsilon * rng.random()
    return radius * signs * mags / mags.sum()


def sample_l1_annulus(x_A, C: float, epsilon: float, bounds, rng) -> np.ndarray:
    x_A = np.asarray(x_A, dtype=float).ravel()
    lo, hi = (np.broadcast_to(np.asarray(b, dtype=float), x_A.shape) for b in bounds)
    # Clipping toward an in-bounds x_A only shrinks |x - x_A| per coordinate.
    return np.clip(x_A + l1_annulus_offset(len(x_A), C, epsilon, rng), lo, hi)


@dataclass(frozen=True)
class RandomSearchConfig:
    epsilon: float = 0.05
    cap: int = 500

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.cap < 1:
            raise ValueError("cap must be at least 1")


def random_search_attack(oracle, problem: AttackProblem, cfg: RandomSearchConfig = RandomSearchConfig(),
                         rng=None) -> AttackOutcome:
    rng = np.random.default_rng(rng)
    trace: list[QueryRecord] = []
    for t in range(1, cfg.cap + 1):
        x = sample_l1_annulus(problem.x_A, problem.C, cfg.epsilon, problem.bounds, rng)
        rec = _query(oracle, problem, x, t, trace)
        if problem.is_success(rec.label):
            return AttackOutcome(True, rec.x, t, trace, f"label changed at draw {t}")
    return AttackOutcome(False, None, cfg.cap, trace, f"no label change in {cfg.cap} draws")


class BayesianOptimizationAttack(BaseEstimator):
    """Estimator-style front end to :func:`bo_attack`."""

    def __init__(self, C=10.0, max_iter=50, kappa=2.0, orientation="minimization-consistent",
                 lengthscale=None, signal_variance=1.0, noise_variance=1e-4, seed_origin=True,
                 refit_every=0, box="reach", direct_budget=500, direct_eps=1e-4, bounds=(0.0, 1.0)):
        self.C = C
        self.max_iter = max_iter
        self.kappa = kappa
        self.orientation = orientation
        self.lengthscale = lengthscale
        self.signal_variance = signal_variance
        self.noise_variance = noise_variance
        self.seed_origin = seed_origin
        self.refit_every = refit_every
        self.box = box
        self.direct_budget = direct_budget
        self.direct_eps = direct_eps
        self.bounds = bounds

    def attack(self, oracle, x_A, baseline_label, target_label=None) -> AttackOutcome:
        problem = AttackProblem(x_A, baseline_label, self.C, self.max_iter, target_label, self.bounds)
        bo = BOConfig(self.kappa, self.orientation, self.lengthscale, self.signal_variance,
                      self.noise_variance, self.seed_origin, self.refit_every, self.box)
        return bo_attack(oracle, problem, bo, DirectConfig(self.direct_budget, self.direct_eps))


class RandomSearchAttack(BaseEstimator):
    """Estimator-style front end to :func:`random_search_attack`."""

    def __init__(self, C=10.0, epsilon=0.05, cap=500, bounds=(0.0, 1.0), random_state=None):
        self.C = C
        self.epsilon = epsilon
        self.cap = cap
        self.bounds = bounds
        self.random_state = random_state

    def attack(self, oracle, x_A, baseline_label, target_label=None) -> AttackOutcome:
        problem = AttackProblem(x_A, baseline_label, self.C, 1, target_label, self.bounds)
        return random_search_attack(oracle, problem, RandomSearchConfig(self.epsilon, self.cap),
                                    self.random_state)


def trace_records(outcome: AttackOutcome, x_A) -> list[dict]:
    """One JSON-ready dict per query; feature deltas stored sparsely."""
    x_A = np.asarray(x_A, dtype=float)
    out = []
    for rec in outcome.trace:
        delta = rec.x - x_A
        nz = np.flatnonzero(delta)
        out.append({
            "step": rec.step,
            "deltas": {str(int(i)): float(delta[i]) for i in nz},
            "label": rec.label,
            "confidence": rec.confidence,
            "objective": rec.objective,
            "l1_cost": rec.cost,
        })
    return out


def write_trace(outcome: AttackOutcome, x_A, path):
    with open(Path(path), "w") as fh:
        for row in trace_records(outcome, x_A):
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def read_trace(path) -> list[dict]:
    with open(Path(path)) as fh:
        return [json.loads(line) for line in fh if line.strip()]
