"""Spambase loading, train/test split and target-model training."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.preprocessing import MinMaxScaler

from .models import ANNClassifier, LinearSVM, RBFSVM
from .oracle import TargetModel

log = logging.getLogger(__name__)

N_RAW_FEATURES = 57
# capital_run_length_longest and capital_run_length_total are integer-valued.
DROPPED_COLUMNS = (55, 56)
N_FEATURES = N_RAW_FEATURES - len(DROPPED_COLUMNS)
SPAM, HAM = 1, 0
MODEL_KINDS = ("linear-svm", "rbf-svm", "ann")


class DataError(ValueError):
    """Malformed or unusable dataset file."""


class TrainingError(RuntimeError):
    def __init__(self, kind, cause):
        super().__init__(f"training {kind} failed: {cause}")
        self.kind = kind


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    source: str

    def __len__(self):
        return len(self.y)

    @property
    def n_features(self):
        return self.X.shape[1]


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_spambase(path) -> Dataset:
    """Read a spambase-format CSV (57 features then a 0/1 label per row).

    A leading header row is skipped if present.  The two integer-valued
    run-length columns are dropped, leaving 55 features.
    """
    path = Path(path)
    rows, labels = [], []
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not f.strip() for f in rec):
                continue
            if lineno == 1 and not _is_number(rec[0]):
                continue
            if len(rec) != N_RAW_FEATURES + 1:
                raise DataError(f"{path}: row {lineno} has {len(rec)} columns, expected {N_RAW_FEATURES + 1}")
            vals = []
            for col, field in enumerate(rec):
                try:
                    vals.append(float(field))
                except ValueError:
                    raise DataError(f"{path}: row {lineno}, column {col + 1}: cannot parse {field!r}") from None
            if vals[-1] not in (0.0, 1.0):
                raise DataError(f"{path}: row {lineno}: label must be 0 or 1, got {rec[-1]!r}")
            rows.append(vals[:-1])
            labels.append(int(vals[-1]))
    if not rows:
        raise DataError(f"{path}: no records")
    X = np.delete(np.array(rows), DROPPED_COLUMNS, axis=1)
    return Dataset(X, np.array(labels), f"{path} ({len(rows)} rows)")


def default_models(random_state=0) -> dict:
    """Untrained classifiers with the frozen default hyperparameters."""
    return {
        "linear-svm": LinearSVM(lam=1e-4, n_epochs=50, random_state=random_state),
        "rbf-svm": RBFSVM(gamma=1.0, C=100.0, random_state=random_state),
        "ann": ANNClassifier(n_hidden=20, learning_rate=0.05, n_epochs=200, random_state=random_state),
    }


@dataclass
class TrainedSplit:
    models: dict
    train_idx: np.ndarray
    test_idx: np.ndarray
    X_test: np.ndarray  # normalized
    y_test: np.ndarray
    seed_pool: np.ndarray  # positions in the test set labelled spam
    accuracies: dict


def split_and_train(dataset: Dataset, rng_seed: int = 0, n_train: int = 3500, kinds=MODEL_KINDS,
                    models: dict | None = None, normalize: bool = True) -> TrainedSplit:
    """Seeded split, scaling fitted on the training rows, then model training.

    With ``normalize=False`` features keep their raw scale (identity scaler)
    and budgets are measured in raw units; each model then records the
    training maxima as the upper corner of its attack space.
    """
    if n_train >= len(dataset):
        raise DataError(f"need more than {n_train} records, dataset has {len(dataset)}")
    rng = np.random.default_rng(rng_seed)
    perm = rng.permutation(len(dataset))
    train_idx, test_idx = np.sort(perm[:n_train]), np.sort(perm[n_train:])
    if normalize:
        scaler, upper = MinMaxScaler().fit(dataset.X[train_idx]), None
    else:
        d = dataset.n_features
        scaler = MinMaxScaler().fit(np.vstack([np.zeros(d), np.ones(d)]))
        upper = dataset.X[train_idx].max(0)
    X_train = scaler.transform(dataset.X[train_idx])
    X_test = scaler.transform(dataset.X[test_idx])
    y_train, y_test = dataset.y[train_idx], dataset.y[test_idx]

    estimators = default_models(rng_seed) if models is None else models
    trained, acc = {}, {}
    for kind in kinds:
        try:
            clf = estimators[kind].fit(X_train, y_train)
        except Exception as exc:
            raise TrainingError(kind, exc) from exc
        trained[kind] = TargetModel(kind, clf, scaler, upper)
        acc[kind] = float(clf.score(X_test, y_test))
        log.info("%s test accuracy %.4f", kind, acc[kind])
    return TrainedSplit(trained, train_idx, test_idx, X_test, y_test,
                        np.flatnonzero(y_test == SPAM), acc)
