"""Query-limited black-box attacks on binary classifiers.

A Gaussian-process UCB surrogate, maximized by a DIRECT search confined to the
L1 budget around the seed, chooses each model query; a random L1-annulus
search serves as the baseline.
"""

from .attack import (AttackOutcome, AttackProblem, BayesianOptimizationAttack, BOConfig, DirectConfig,
                     RandomSearchAttack, RandomSearchConfig, bo_attack, random_search_attack)
from .gp import GaussianProcessSurrogate
from .models import ANNClassifier, LinearSVM, RBFSVM
from .oracle import CountingOracle, OracleResponse, TargetModel, load_model, save_model

__all__ = [
    "ANNClassifier", "AttackOutcome", "AttackProblem", "BOConfig", "BayesianOptimizationAttack",
    "CountingOracle", "DirectConfig", "GaussianProcessSurrogate", "LinearSVM", "OracleResponse",
    "RBFSVM", "RandomSearchAttack", "RandomSearchConfig", "TargetModel", "bo_attack", "load_model",
    "random_search_attack", "save_model",
]
