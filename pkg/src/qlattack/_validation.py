"""Small input-validation helpers shared by the estimators."""

import numpy as np
from sklearn.exceptions import NotFittedError


def check_matrix(X, name="X", n_features=None, allow_empty=True):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1 and X.size == 0 and allow_empty:
        return X.reshape(0, 0 if n_features is None else n_features)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {X.shape}")
    if not allow_empty and X.shape[0] == 0:
        raise ValueError(f"{name} is empty")
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"{name} has {X.shape[1]} features, expected {n_features}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains NaN or inf")
    return X


def check_vector(v, name="y", n=None):
    v = np.asarray(v, dtype=float).ravel()
    if n is not None and v.shape[0] != n:
        raise ValueError(f"{name} has {v.shape[0]} entries, expected {n}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains NaN or inf")
    return v


def check_binary_labels(y):
    """Return labels as an int array of {0, 1}; both classes must be present."""
    y = np.asarray(y).ravel()
    classes = np.unique(y)
    if len(classes) < 2:
        raise ValueError(f"training data has a single class ({classes.tolist()}); need both 0 and 1")
    if not np.all(np.isin(classes, (0, 1))):
        raise ValueError(f"labels must be 0/1, got {classes.tolist()}")
    return y.astype(int)


def check_is_fitted(est, attr):
    if not hasattr(est, attr):
        raise NotFittedError(f"{type(est).__name__} is not fitted yet; call fit first")
