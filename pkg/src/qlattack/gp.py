"""Gaussian-process surrogate and UCB acquisition.

The functional core (``kernel_eval``, ``gp_update``, ``gp_posterior``,
``acquisition``) works on immutable :class:`GPState` snapshots so a state can
be shared across threads while posterior queries run.  The
:class:`GaussianProcessSurrogate` estimator wraps the same functions behind
``fit``/``predict`` for use with scikit-learn tooling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize_scalar
from sklearn.base import BaseEstimator, RegressorMixin

from ._validation import check_is_fitted, check_matrix, check_vector

JITTER_START = 1e-10
JITTER_MAX = 1e-4
# (K + noise*I) @ alpha must reproduce the targets this closely, otherwise the
# factorization only "succeeded" because jitter hid a contradiction.
_RESIDUAL_TOL = 1e-6


class ConditioningError(np.linalg.LinAlgError):
    """Gram matrix stayed non positive-definite after jitter escalation."""


@dataclass(frozen=True)
class KernelParams:
    """Squared-exponential kernel hyperparameters.

    ``lengthscale`` is a scalar (shared) or a per-dimension array.
    """

    lengthscale: float | np.ndarray = 1.0
    signal_variance: float = 1.0
    noise_variance: float = 1e-4

    def __post_init__(self):
        ls = np.asarray(self.lengthscale, dtype=float)
        if np.any(ls <= 0) or not np.all(np.isfinite(ls)):
            raise ValueError("lengthscale must be positive")
        if not self.signal_variance > 0:
            raise ValueError("signal_variance must be positive")
        if not self.noise_variance >= 0:
            raise ValueError("noise_variance must be nonnegative")

    @classmethod
    def default(cls, n_features: int) -> "KernelParams":
        return cls(lengthscale=0.5 * np.sqrt(n_features), signal_variance=1.0, noise_variance=1e-4)

    def scales(self, n_features: int) -> np.ndarray:
        ls = np.asarray(self.lengthscale, dtype=float)
        if ls.ndim == 0:
            return np.full(n_features, float(ls))
        if ls.shape != (n_features,):
            raise ValueError(f"lengthscale has {ls.shape[0]} entries, expected {n_features}")
        return ls


def kernel_matrix(A: np.ndarray, B: np.ndarray, params: KernelParams) -> np.ndarray:
    """Squared-exponential cross-covariance between the rows of A and B."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    ls = params.scales(A.shape[1])
    As = A / ls
    Bs = B / ls
    sq = (As**2).sum(1)[:, None] + (Bs**2).sum(1)[None, :] - 2.0 * As @ Bs.T
    np.maximum(sq, 0.0, out=sq)
    return params.signal_variance * np.exp(-0.5 * sq)


def kernel_eval(a, b, params: KernelParams) -> float:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    ls = params.scales(a.shape[0])
    # Sum of squares of the elementwise difference keeps k(a,b) == k(b,a) bit-for-bit.
    r = (a - b) / ls
    return float(params.signal_variance * np.exp(-0.5 * np.dot(r, r)))


@dataclass(frozen=True)
class Posterior:
    mean: float
    variance: float

    @property
    def std(self) -> float:
        return float(np.sqrt(self.variance))


@dataclass(frozen=True)
class GPState:
    """Observations D_{1:t} plus the cached Cholesky factor of K + noise*I."""

    params: KernelParams
    inputs: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    targets: np.ndarray = field(default_factory=lambda: np.empty(0))
    chol: np.ndarray | None = None
    alpha: np.ndarray | None = None
    jitter: float = 0.0

    @property
    def n_observations(self) -> int:
        return int(self.targets.shape[0])

    @property
    def n_features(self) -> int | None:
        return self.inputs.shape[1] if self.n_observations else None


def _factorize(X: np.ndarray, y: np.ndarray, params: KernelParams):
    K = kernel_matrix(X, X, params)
    K[np.diag_indices_from(K)] += params.noise_variance
    jitter = 0.0
    while True:
        try:
            L = np.linalg.cholesky(K + jitter * np.eye(len(K)) if jitter else K)
        except np.linalg.LinAlgError:
            L = None
        if L is not None:
            alpha = cho_solve((L, True), y)
            resid = np.max(np.abs(K @ alpha - y)) if len(y) else 0.0
            if resid <= _RESIDUAL_TOL * max(1.0, np.max(np.abs(y))):
                return L, alpha, jitter
        jitter = JITTER_START if jitter == 0.0 else jitter * 10.0
        if jitter > JITTER_MAX * (1 + 1e-9):
            raise ConditioningError(
                f"Gram matrix of {len(y)} observations is not positive definite "
                f"(or is inconsistent with the targets) even with jitter {JITTER_MAX:g}"
            )


def gp_fit(params: KernelParams, X, y) -> GPState:
    """Build a state from a batch of observations."""
    X = check_matrix(X, "X")
    y = check_vector(y, "y", n=X.shape[0])
    if len(y) == 0:
        return GPState(params=params)
    L, alpha, jitter = _factorize(X, y, params)
    return GPState(params=params, inputs=X, targets=y, chol=L, alpha=alpha, jitter=jitter)


def gp_update(state: GPState, x, y: float) -> GPState:
    """Return a new state with (x, y) appended and the factor refreshed."""
    x = np.asarray(x, dtype=float).ravel()
    if not 0.0 <= y <= 1.0:
        raise ValueError(f"target must lie in [0, 1], got {y}")
    if state.n_observations:
        if x.shape[0] != state.n_features:
            raise ValueError(f"dimension mismatch: {x.shape[0]} vs {state.n_features}")
        X = np.vstack([state.inputs, x])
        Y = np.append(state.targets, y)
    else:
        X = x[None, :]
        Y = np.array([float(y)])
    return gp_fit(state.params, X, Y)


def gp_posterior_batch(state: GPState, X) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and latent variance at each row of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    sv = state.params.signal_variance
    if state.n_observations == 0:
        return np.zeros(len(X)), np.full(len(X), sv)
    Ks = kernel_matrix(X, state.inputs, state.params)
    mean = Ks @ state.alpha
    v = solve_triangular(state.chol, Ks.T, lower=True)
    var = sv - (v * v).sum(0)
    return mean, np.maximum(var, 0.0)


def gp_posterior(state: GPState, x) -> Posterior:
    x = np.asarray(x, dtype=float).ravel()
    if state.n_observations and x.shape[0] != state.n_features:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {state.n_features}")
    mean, var = gp_posterior_batch(state, x[None, :])
    return Posterior(float(mean[0]), float(var[0]))


def log_marginal_likelihood(state: GPState) -> float:
    """log p(y | X) under the state's kernel; 0 for an empty state."""
    n = state.n_observations
    if n == 0:
        return 0.0
    return float(-0.5 * state.targets @ state.alpha - np.log(np.diag(state.chol)).sum()
                 - 0.5 * n * np.log(2 * np.pi))


def refit_lengthscale(state: GPState, bounds=(1e-2, 1e2)) -> GPState:
    """Refit the shared lengthscale by maximizing the log marginal likelihood.

    Signal and noise variance are kept.  Lengthscales whose Gram matrix
    cannot be factored are skipped; if all fail, ``state`` is returned as is.
    """
    if state.n_observations < 2:
        return state
    p = state.params

    def neg_lml(log_ls):
        try:
            s = gp_fit(KernelParams(float(np.exp(log_ls)), p.signal_variance, p.noise_variance),
                       state.inputs, state.targets)
        except ConditioningError:
            return np.inf
        return -log_marginal_likelihood(s)

    res = minimize_scalar(neg_lml, bounds=np.log(bounds), method="bounded", options={"xatol": 1e-3})
    if not np.isfinite(res.fun) or res.fun > neg_lml(np.log(np.mean(p.scales(state.n_features)))):
        return state
    return gp_fit(KernelParams(float(np.exp(res.x)), p.signal_variance, p.noise_variance),
                  state.inputs, state.targets)


class Orientation(str, Enum):
    PAPER_LITERAL = "paper-literal"
    MINIMIZATION = "minimization-consistent"


@dataclass(frozen=True)
class AcquisitionConfig:
    """UCB settings.

    ``paper-literal`` scores mu + kappa*sigma; ``minimization-consistent``
    scores kappa*sigma - mu.  Either way the inner optimizer maximizes.
    """

    kappa: float = 2.0
    orientation: Orientation = Orientation.MINIMIZATION

    def __post_init__(self):
        if not self.kappa >= 0:
            raise ValueError("kappa must be nonnegative")
        object.__setattr__(self, "orientation", Orientation(self.orientation))


def ucb_score(mean, std, cfg: AcquisitionConfig):
    if cfg.orientation is Orientation.PAPER_LITERAL:
        return mean + cfg.kappa * std
    return cfg.kappa * std - mean


def acquisition_batch(state: GPState, X, cfg: AcquisitionConfig) -> np.ndarray:
    mean, var = gp_posterior_batch(state, X)
    return ucb_score(mean, np.sqrt(var), cfg)


def acquisition(state: GPState, x, cfg: AcquisitionConfig) -> float:
    post = gp_posterior(state, x)
    return float(ucb_score(post.mean, post.std, cfg))


class GaussianProcessSurrogate(RegressorMixin, BaseEstimator):
    """Zero-mean GP regressor with a fixed squared-exponential kernel.

    Parameters
    ----------
    lengthscale : float or None
        Shared lengthscale; ``None`` means ``0.5 * sqrt(n_features)``.
    signal_variance, noise_variance : float
        Kernel amplitude and observation noise.
    kappa : float
        Exploration weight used by :meth:`acquisition`.
    orientation : str
        ``"minimization-consistent"`` or ``"paper-literal"``.
    """

    def __init__(
        self,
        lengthscale=None,
        signal_variance=1.0,
        noise_variance=1e-4,
        kappa=2.0,
        orientation="minimization-consistent",
    ):
        self.lengthscale = lengthscale
        self.signal_variance = signal_variance
        self.noise_variance = noise_variance
        self.kappa = kappa
        self.orientation = orientation

    def _kernel_params(self, n_features):
        ls = 0.5 * np.sqrt(n_features) if self.lengthscale is None else self.lengthscale
        return KernelParams(ls, self.signal_variance, self.noise_variance)

    def fit(self, X, y):
        X = check_matrix(X, "X")
        self.n_features_in_ = X.shape[1]
        self.state_ = gp_fit(self._kernel_params(X.shape[1]), X, y)
        return self

    def partial_fit(self, x, y):
        """Append one observation, initializing the state if needed."""
        x = np.asarray(x, dtype=float).ravel()
        if not hasattr(self, "state_"):
            self.n_features_in_ = x.shape[0]
            self.state_ = GPState(params=self._kernel_params(x.shape[0]))
        self.state_ = gp_update(self.state_, x, float(y))
        return self

    def predict(self, X, return_std=False):
        check_is_fitted(self, "state_")
        mean, var = gp_posterior_batch(self.state_, check_matrix(X, "X", n_features=self.n_features_in_))
        if return_std:
            return mean, np.sqrt(var)
        return mean

    def acquisition(self, X):
        check_is_fitted(self, "state_")
        cfg = AcquisitionConfig(self.kappa, self.orientation)
        return acquisition_batch(self.state_, check_matrix(X, "X", n_features=self.n_features_in_), cfg)
