"""Black-box query interface to a trained target model, plus model files.

A :class:`TargetModel` bundles a fitted classifier with the min-max scaling
learned on its training data.  Attacks only ever see a
:class:`CountingOracle`, which returns ``(label, confidence)`` for a
normalized feature vector and counts every call.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.preprocessing import MinMaxScaler

from .models import ANNClassifier, LinearSVM, RBFSVM

FORMAT_NAME = "qlattack-model"
FORMAT_VERSION = 1

KINDS = {"linear-svm": LinearSVM, "rbf-svm": RBFSVM, "ann": ANNClassifier}


@dataclass(frozen=True)
class OracleResponse:
    label: int
    confidence: float  # probability of ``label``


@dataclass
class TargetModel:
    kind: str
    classifier: object
    scaler: MinMaxScaler
    # Upper corner of the attack space per feature; None means the unit cube
    # (min-max normalized inputs).  Raw-scale models carry training maxima.
    domain_upper: np.ndarray | None = None

    @property
    def n_features(self) -> int:
        return int(self.classifier.n_features_in_)

    def normalize(self, X_raw):
        return self.scaler.transform(np.atleast_2d(X_raw))

    def denormalize(self, X):
        return self.scaler.inverse_transform(np.atleast_2d(X))


def predict(model: TargetModel, x) -> OracleResponse:
    """Label and confidence for one normalized feature vector (p = 0.5 -> class 1)."""
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != model.n_features:
        raise ValueError(f"dimension mismatch: got {x.shape[0]}, model expects {model.n_features}")
    p1 = float(model.classifier.predict_proba(x[None, :])[0, 1])
    if p1 >= 0.5:
        return OracleResponse(1, p1)
    return OracleResponse(0, 1.0 - p1)


class QueryCounter:
    def __init__(self):
        self.count = 0
        self._lock = threading.Lock()

    def increment(self):
        with self._lock:
            self.count += 1

    def reset(self):
        with self._lock:
            self.count = 0


class CountingOracle:
    """Callable ``x -> OracleResponse`` that increments ``counter`` on every call.

    ``model`` is a :class:`TargetModel` or any callable returning an
    :class:`OracleResponse` (synthetic oracles in tests).
    """

    def __init__(self, model, counter: QueryCounter | None = None):
        self.model = model
        self.counter = QueryCounter() if counter is None else counter

    def __call__(self, x) -> OracleResponse:
        self.counter.increment()
        if isinstance(self.model, TargetModel):
            return predict(self.model, x)
        return self.model(x)

    @property
    def count(self) -> int:
        return self.counter.count


def counting_oracle(model, counter: QueryCounter | None = None) -> CountingOracle:
    return CountingOracle(model, counter)


# -- model files --------------------------------------------------------------
# JSON with shortest round-trip float repr, so stored reals reload bit-exactly.

def _arr(a):
    return np.asarray(a, dtype=float).tolist()


def _classifier_state(clf) -> dict:
    params = clf.get_params()
    if isinstance(clf, LinearSVM):
        state = {"coef": _arr(clf.coef_), "intercept": clf.intercept_}
    elif isinstance(clf, RBFSVM):
        state = {"gamma": clf.gamma_, "support_vectors": _arr(clf.support_vectors_),
                 "dual_coef": _arr(clf.dual_coef_)}
    elif isinstance(clf, ANNClassifier):
        state = {"W1": _arr(clf.W1_), "b1": _arr(clf.b1_), "w2": _arr(clf.w2_), "b2": clf.b2_}
    else:
        raise TypeError(f"unsupported classifier {type(clf).__name__}")
    if hasattr(clf, "platt_A_"):
        state["platt"] = {"A": clf.platt_A_, "B": clf.platt_B_}
    return {"hyperparameters": params, "state": state}


def _restore_classifier(kind, blob, n_features):
    clf = KINDS[kind](**blob["hyperparameters"])
    s = blob["state"]
    clf.n_features_in_ = n_features
    if kind == "linear-svm":
        clf.coef_ = np.array(s["coef"], dtype=float)
        clf.intercept_ = float(s["intercept"])
    elif kind == "rbf-svm":
        clf.gamma_ = float(s["gamma"])
        clf.support_vectors_ = np.array(s["support_vectors"], dtype=float).reshape(-1, n_features)
        clf.dual_coef_ = np.array(s["dual_coef"], dtype=float)
    else:
        clf.W1_ = np.array(s["W1"], dtype=float).reshape(n_features, -1)
        clf.b1_ = np.array(s["b1"], dtype=float)
        clf.w2_ = np.array(s["w2"], dtype=float)
        clf.b2_ = float(s["b2"])
    if "platt" in s:
        clf.platt_A_, clf.platt_B_ = float(s["platt"]["A"]), float(s["platt"]["B"])
    return clf


def scaler_from_bounds(data_min, data_max) -> MinMaxScaler:
    """Rebuild a fitted MinMaxScaler from its per-feature min and max."""
    return MinMaxScaler().fit(np.vstack([data_min, data_max]))


def model_to_dict(model: TargetModel) -> dict:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "kind": model.kind,
        "n_features": model.n_features,
        "scaling": {"min": _arr(model.scaler.data_min_), "max": _arr(model.scaler.data_max_)},
        "classifier": _classifier_state(model.classifier),
        "domain_upper": None if model.domain_upper is None else _arr(model.domain_upper),
    }


def model_from_dict(blob: dict) -> TargetModel:
    if blob.get("format") != FORMAT_NAME:
        raise ValueError("not a qlattack model file")
    if blob.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {blob.get('version')}")
    kind = blob["kind"]
    if kind not in KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    n = int(blob["n_features"])
    scaler = scaler_from_bounds(np.array(blob["scaling"]["min"]), np.array(blob["scaling"]["max"]))
    upper = blob.get("domain_upper")
    return TargetModel(kind, _restore_classifier(kind, blob["classifier"], n), scaler,
                       None if upper is None else np.array(upper, dtype=float))


def save_model(model: TargetModel, path):
    Path(path).write_text(json.dumps(model_to_dict(model)))


def load_model(path) -> TargetModel:
    return model_from_dict(json.loads(Path(path).read_text()))
