"""Platt scaling: sigmoid calibration of raw classifier scores.

Fits ``p(y=1 | s) = 1 / (1 + exp(A*s + B))`` by regularized maximum likelihood
with smoothed targets, using Newton's method with backtracking line search.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_binary_labels, check_is_fitted, check_vector

log = logging.getLogger(__name__)


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class PlattParams:
    A: float
    B: float

    def __call__(self, scores):
        return platt_sigmoid(scores, self.A, self.B)


def platt_sigmoid(scores, A, B):
    """Numerically stable ``1 / (1 + exp(A*s + B))``."""
    z = A * np.asarray(scores, dtype=float) + B
    out = np.empty_like(z)
    pos = z >= 0
    ez = np.exp(-z[pos])
    out[pos] = ez / (1.0 + ez)
    out[~pos] = 1.0 / (1.0 + np.exp(z[~pos]))
    return out


def _nll(z, t):
    # -[t log p + (1-t) log(1-p)] with p = 1/(1+exp(z)), written to avoid overflow.
    return np.sum(np.where(z >= 0, t * z + np.log1p(np.exp(-np.abs(z))), (t - 1) * z + np.log1p(np.exp(-np.abs(z)))))


def platt_newton(scores, labels, max_iter=100, min_step=1e-10, sigma=1e-12, eps=1e-5):
    """Run the Newton fit; returns ``(A, B, nll_path)`` with one entry per accepted step."""
    s = check_vector(scores, "scores")
    y = check_binary_labels(labels)
    if len(y) != len(s):
        raise ValueError("scores and labels differ in length")
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    t = np.where(y == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))

    A, B = 0.0, float(np.log((n_neg + 1.0) / (n_pos + 1.0)))
    fval = _nll(A * s + B, t)
    path = [fval]
    for it in range(max_iter):
        p = platt_sigmoid(s, A, B)
        d1 = t - p
        d2 = p * (1.0 - p)
        g1, g2 = float(s @ d1), float(d1.sum())
        if abs(g1) < eps and abs(g2) < eps:
            return A, B, path
        h11 = float(s * s @ d2) + sigma
        h22 = float(d2.sum()) + sigma
        h21 = float(s @ d2)
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= min_step:
            nA, nB = A + step * dA, B + step * dB
            nf = _nll(nA * s + nB, t)
            if nf < fval + 1e-4 * step * gd:
                A, B, fval = nA, nB, nf
                path.append(fval)
                break
            step /= 2.0
        else:
            log.warning("Platt line search failed at iteration %d (|g|=%.3g, %.3g)", it, g1, g2)
            return A, B, path
    raise CalibrationError(
        f"Platt fit did not converge in {max_iter} iterations (A={A:.6g}, B={B:.6g}, nll={fval:.6g})"
    )


def platt_calibrate(scores, labels, **kwargs) -> PlattParams:
    A, B, _ = platt_newton(scores, labels, **kwargs)
    return PlattParams(A, B)


class PlattScaler(TransformerMixin, BaseEstimator):
    """Maps decision scores to class-1 probabilities."""

    def __init__(self, max_iter=100):
        self.max_iter = max_iter

    def fit(self, scores, y):
        self.A_, self.B_, self.nll_path_ = platt_newton(scores, y, max_iter=self.max_iter)
        return self

    def transform(self, scores):
        check_is_fitted(self, "A_")
        return platt_sigmoid(scores, self.A_, self.B_)

    @property
    def params_(self) -> PlattParams:
        check_is_fitted(self, "A_")
        return PlattParams(self.A_, self.B_)
