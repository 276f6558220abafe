"""Target classifiers (linear SVM, RBF SVM, one-hidden-layer ANN).

All three are scikit-learn style binary classifiers over min-max normalized
features with labels in {0, 1} (1 = spam).  The SVMs hold out a calibration
split and fit a :class:`~qlattack.calibration.PlattScaler` on it so that
``predict_proba`` returns calibrated probabilities; the ANN's sigmoid output
is used directly.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.model_selection import train_test_split

from ._validation import check_binary_labels, check_is_fitted, check_matrix
from .calibration import PlattScaler, platt_sigmoid


class _ProbabilisticBinary(ClassifierMixin, BaseEstimator):
    """Shared predict/predict_proba on top of a ``decision_function``."""

    classes_ = np.array([0, 1])

    def _check_X(self, X):
        check_is_fitted(self, "n_features_in_")
        return check_matrix(np.atleast_2d(X), "X", n_features=self.n_features_in_)

    def predict_proba(self, X):
        p1 = self._proba1(self._check_X(X))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        # p == 0.5 goes to class 1
        return (self._proba1(self._check_X(X)) >= 0.5).astype(int)

    def _proba1(self, X):
        return platt_sigmoid(self._decision(X), self.platt_A_, self.platt_B_)

    def decision_function(self, X):
        return self._decision(self._check_X(X))

    def _split_and_calibrate(self, X, y, train_fn):
        X = check_matrix(X, "X", allow_empty=False)
        y = check_binary_labels(y)
        self.n_features_in_ = X.shape[1]
        if self.calibration_fraction > 0:
            X_fit, X_cal, y_fit, y_cal = train_test_split(
                X, y, test_size=self.calibration_fraction, random_state=self.random_state, stratify=y
            )
        else:
            X_fit, X_cal, y_fit, y_cal = X, X, y, y
        train_fn(X_fit, check_binary_labels(y_fit))
        platt = PlattScaler().fit(self._decision(X_cal), y_cal)
        self.platt_A_, self.platt_B_ = platt.A_, platt.B_
        return self


class LinearSVM(_ProbabilisticBinary):
    """Hinge-loss linear SVM trained with Pegasos (stochastic subgradient).

    The bias is learned as the weight of an appended constant feature.  The
    returned weights are the average of the final epoch's iterates.
    """

    def __init__(self, lam=1e-4, n_epochs=50, calibration_fraction=0.2, random_state=0):
        self.lam = lam
        self.n_epochs = n_epochs
        self.calibration_fraction = calibration_fraction
        self.random_state = random_state

    def fit(self, X, y):
        return self._split_and_calibrate(X, y, self._pegasos)

    def _pegasos(self, X, y):
        rng = np.random.default_rng(self.random_state)
        Xa = np.hstack([X, np.ones((len(X), 1))])
        ys = 2.0 * y - 1.0
        n, d = Xa.shape
        w = np.zeros(d)
        w_avg = np.zeros(d)
        radius = 1.0 / np.sqrt(self.lam)
        t = 0
        for epoch in range(self.n_epochs):
            last = epoch == self.n_epochs - 1
            for i in rng.permutation(n):
                t += 1
                eta = 1.0 / (self.lam * t)
                margin = ys[i] * (Xa[i] @ w)
                w *= 1.0 - eta * self.lam
                if margin < 1.0:
                    w += eta * ys[i] * Xa[i]
                norm = np.linalg.norm(w)
                if norm > radius:
                    w *= radius / norm
                if last:
                    w_avg += w
        w_avg /= n
        self.coef_ = w_avg[:-1]
        self.intercept_ = float(w_avg[-1])

    def _decision(self, X):
        return X @ self.coef_ + self.intercept_


def rbf_kernel(A, B, gamma):
    sq = (A**2).sum(1)[:, None] + (B**2).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


class RBFSVM(_ProbabilisticBinary):
    """Kernel SVM with the RBF kernel, trained by dual coordinate ascent.

    Solves the hinge-loss dual with box constraint ``0 <= alpha_i <= C``; the
    bias is absorbed by adding 1 to the kernel.  Only support vectors
    (``alpha_i > 0``) are kept after training.

    Parameters
    ----------
    gamma : float or None
        Kernel width; ``None`` means ``1 / n_features``.
    C : float
        Box constraint of the dual.
    """

    def __init__(self, gamma=None, C=10.0, max_epochs=200, tol=1e-3, calibration_fraction=0.2, random_state=0):
        self.gamma = gamma
        self.C = C
        self.max_epochs = max_epochs
        self.tol = tol
        self.calibration_fraction = calibration_fraction
        self.random_state = random_state

    def fit(self, X, y):
        return self._split_and_calibrate(X, y, self._dual_cd)

    def _dual_cd(self, X, y):
        rng = np.random.default_rng(self.random_state)
        self.gamma_ = 1.0 / X.shape[1] if self.gamma is None else float(self.gamma)
        ys = 2.0 * y - 1.0
        Q = rbf_kernel(X, X, self.gamma_) + 1.0
        n = len(X)
        alpha = np.zeros(n)
        f = np.zeros(n)  # f = Q @ (alpha * ys)
        diag = np.diag(Q).copy()
        for epoch in range(self.max_epochs):
            pg_max, pg_min = -np.inf, np.inf
            for i in rng.permutation(n):
                g = ys[i] * f[i] - 1.0
                if alpha[i] == 0.0:
                    pg = min(g, 0.0)
                elif alpha[i] == self.C:
                    pg = max(g, 0.0)
                else:
                    pg = g
                pg_max = max(pg_max, pg)
                pg_min = min(pg_min, pg)
                if pg == 0.0:
                    continue
                new = min(max(alpha[i] - g / diag[i], 0.0), self.C)
                delta = new - alpha[i]
                if delta != 0.0:
                    alpha[i] = new
                    f += (delta * ys[i]) * Q[:, i]
            if pg_max - pg_min < self.tol:
                break
        self.n_epochs_ = epoch + 1
        sv = alpha > 0
        self.support_vectors_ = X[sv]
        self.dual_coef_ = (alpha * ys)[sv]

    def _decision(self, X):
        if len(self.dual_coef_) == 0:
            return np.zeros(len(X))
        return (rbf_kernel(X, self.support_vectors_, self.gamma_) + 1.0) @ self.dual_coef_


def _sigmoid(z):
    return platt_sigmoid(z, -1.0, 0.0)


def ann_forward(params, X):
    W1, b1, w2, b2 = params
    H = np.tanh(X @ W1 + b1)
    z = H @ w2 + b2
    return H, z


def ann_loss_and_grad(params, X, y):
    """Mean binary cross-entropy and its gradient w.r.t. ``(W1, b1, w2, b2)``."""
    W1, b1, w2, b2 = params
    H, z = ann_forward(params, X)
    n = len(y)
    # BCE with logits, stable form
    loss = float(np.mean(np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))))
    dz = (_sigmoid(z) - y) / n
    gw2 = H.T @ dz
    gb2 = dz.sum()
    dH = np.outer(dz, w2) * (1.0 - H**2)
    gW1 = X.T @ dH
    gb1 = dH.sum(0)
    return loss, (gW1, gb1, gw2, gb2)


class ANNClassifier(_ProbabilisticBinary):
    """One hidden tanh layer and a sigmoid output giving p(class 1).

    Trained by mini-batch gradient descent with momentum on cross-entropy.
    """

    def __init__(self, n_hidden=20, learning_rate=0.05, n_epochs=200, batch_size=32, momentum=0.9,
                 random_state=0):
        self.n_hidden = n_hidden
        self.learning_rate = learning_rate
        self.n_epochs = n_epochs
        self.batch_size = batch_size
        self.momentum = momentum
        self.random_state = random_state

    def fit(self, X, y):
        X = check_matrix(X, "X", allow_empty=False)
        y = check_binary_labels(y).astype(float)
        self.n_features_in_ = X.shape[1]
        rng = np.random.default_rng(self.random_state)
        d, h = X.shape[1], self.n_hidden
        lim = np.sqrt(6.0 / (d + h))
        lim2 = np.sqrt(6.0 / (h + 1))
        params = [rng.uniform(-lim, lim, (d, h)), np.zeros(h), rng.uniform(-lim2, lim2, h), 0.0]
        velocity = [np.zeros_like(p) for p in params[:3]] + [0.0]
        n = len(X)
        self.loss_curve_ = []
        for _ in range(self.n_epochs):
            perm = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                idx = perm[start:start + self.batch_size]
                _, grads = ann_loss_and_grad(params, X[idx], y[idx])
                for k in range(4):
                    velocity[k] = self.momentum * velocity[k] - self.learning_rate * grads[k]
                    params[k] = params[k] + velocity[k]
            self.loss_curve_.append(ann_loss_and_grad(params, X, y)[0])
        self.W1_, self.b1_, self.w2_, self.b2_ = params[0], params[1], params[2], float(params[3])
        return self

    @property
    def params_(self):
        return (self.W1_, self.b1_, self.w2_, self.b2_)

    def _decision(self, X):
        return ann_forward(self.params_, X)[1]

    def _proba1(self, X):
        return _sigmoid(self._decision(X))
