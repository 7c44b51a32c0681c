"""Classification scores, the decision rule, and empirical error measurement.

Three quadratic rules share one decision convention: a positive score assigns
class 0, anything else (ties included) assigns class 1. Scores come in a
single-observation form returning a tagged Score and a batch form returning a
plain value vector.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .errors import InsufficientSamplesError, NotSpdError
from .estimation import FittedStats, PooledStats
from .model import MixtureModel

__all__ = [
    "RULE_TRUE_QDA",
    "RULE_STANDARD_RQDA",
    "RULE_IMPROVED_RQDA",
    "RULE_RLDA",
    "Score",
    "ErrorReport",
    "qda_score_true",
    "qda_scores_true",
    "rqda_score",
    "rqda_scores",
    "improved_score",
    "improved_scores",
    "rlda_score",
    "rlda_scores",
    "classify",
    "classify_values",
    "empirical_error",
    "conditional_score_moments",
]

RULE_TRUE_QDA = "true-qda"
RULE_STANDARD_RQDA = "standard-rqda"
RULE_IMPROVED_RQDA = "improved-rqda"
RULE_RLDA = "rlda"

_RULE_KINDS = (RULE_TRUE_QDA, RULE_STANDARD_RQDA, RULE_IMPROVED_RQDA, RULE_RLDA)


@dataclass(frozen=True)
class Score:
    """A finite discriminant value tagged with the rule that produced it."""

    value: float
    rule_kind: str

    def __post_init__(self):
        if self.rule_kind not in _RULE_KINDS:
            raise ValueError("unknown rule kind %r" % (self.rule_kind,))
        if not math.isfinite(self.value):
            raise ValueError("score must be finite, got %r" % (self.value,))


@dataclass(frozen=True)
class ErrorReport:
    """Per-class and prior-weighted misclassification rates on a test set."""

    eps0: float
    eps1: float
    total: float
    n_test0: int
    n_test1: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "eps0": self.eps0,
                "eps1": self.eps1,
                "total": self.total,
                "n_test0": self.n_test0,
                "n_test1": self.n_test1,
            },
            sort_keys=True,
        )


def _rows(X: np.ndarray, p: int) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != p:
        raise ValueError("observations have %d columns, expected %d" % (X.shape[1], p))
    return X


def _logdet_spd(matrix: np.ndarray) -> float:
    """log det of an SPD matrix from Cholesky diagonals; no determinant products."""
    try:
        chol = np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError as exc:
        raise NotSpdError("log-determinant of a non-SPD matrix: %s" % exc) from exc
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def _quad_rows(diff: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """Row-wise quadratic forms d^T M d."""
    return np.einsum("ij,ij->i", diff @ matrix, diff)


def qda_scores_true(X: np.ndarray, model: MixtureModel) -> np.ndarray:
    """Oracle quadratic rule evaluated with the true class statistics."""
    p = model.dim
    X = _rows(X, p)
    try:
        f0 = sla.cho_factor(model.class0.covariance, lower=True, check_finite=False)
        f1 = sla.cho_factor(model.class1.covariance, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotSpdError("true covariance is singular: %s" % exc) from exc
    logdet0 = 2.0 * float(np.sum(np.log(np.diag(f0[0]))))
    logdet1 = 2.0 * float(np.sum(np.log(np.diag(f1[0]))))
    d0 = X - model.class0.mean
    d1 = X - model.class1.mean
    q0 = np.einsum("ij,ij->i", d0, sla.cho_solve(f0, d0.T, check_finite=False).T)
    q1 = np.einsum("ij,ij->i", d1, sla.cho_solve(f1, d1.T, check_finite=False).T)
    const = 0.5 * (logdet1 - logdet0) - math.log(model.prior1 / model.prior0)
    return const - 0.5 * q0 + 0.5 * q1


def qda_score_true(x: np.ndarray, model: MixtureModel) -> Score:
    return Score(float(qda_scores_true(x, model)[0]), RULE_TRUE_QDA)


def _require_shared_gamma(fit: FittedStats) -> float:
    if fit.gamma0 != fit.gamma1:
        raise ValueError(
            "the standard rule uses one shared shrinkage parameter; "
            "fit has gamma0=%r, gamma1=%r" % (fit.gamma0, fit.gamma1)
        )
    return fit.gamma0


def _logdet_ratio(fit: FittedStats) -> float:
    """log det H0 - log det H1, from the factorizations of the shifted covariances."""
    p = fit.p
    shifted0 = np.eye(p) + fit.gamma0 * fit.sigma_hat0
    shifted1 = np.eye(p) + fit.gamma1 * fit.sigma_hat1
    return _logdet_spd(shifted1) - _logdet_spd(shifted0)


def rqda_scores(X: np.ndarray, fit: FittedStats, priors: tuple[float, float]) -> np.ndarray:
    """Standard plug-in rule: shared shrinkage, log-det and prior offsets."""
    _require_shared_gamma(fit)
    X = _rows(X, fit.p)
    q0 = _quad_rows(X - fit.mu_hat0, fit.H0)
    q1 = _quad_rows(X - fit.mu_hat1, fit.H1)
    const = 0.5 * _logdet_ratio(fit) - math.log(priors[1] / priors[0])
    return const - 0.5 * q0 + 0.5 * q1


def rqda_score(x: np.ndarray, fit: FittedStats, priors: tuple[float, float]) -> Score:
    return Score(float(rqda_scores(x, fit, priors)[0]), RULE_STANDARD_RQDA)


def improved_scores(X: np.ndarray, fit: FittedStats, theta: float) -> np.ndarray:
    """Two-shrinkage rule with an explicit bias replacing log-det and priors."""
    X = _rows(X, fit.p)
    q0 = _quad_rows(X - fit.mu_hat0, fit.H0)
    q1 = _quad_rows(X - fit.mu_hat1, fit.H1)
    return -0.5 * theta * math.sqrt(fit.p) - 0.5 * q0 + 0.5 * q1


def improved_score(x: np.ndarray, fit: FittedStats, theta: float) -> Score:
    return Score(float(improved_scores(x, fit, theta)[0]), RULE_IMPROVED_RQDA)


def rlda_scores(X: np.ndarray, pooled: PooledStats, priors: tuple[float, float]) -> np.ndarray:
    """Linear baseline on the pooled shrunken covariance."""
    p = pooled.mu_hat0.shape[0]
    X = _rows(X, p)
    direction = pooled.H @ (pooled.mu_hat0 - pooled.mu_hat1)
    midpoint = 0.5 * (pooled.mu_hat0 + pooled.mu_hat1)
    return (X - midpoint) @ direction - math.log(priors[1] / priors[0])


def rlda_score(x: np.ndarray, pooled: PooledStats, priors: tuple[float, float]) -> Score:
    return Score(float(rlda_scores(x, pooled, priors)[0]), RULE_RLDA)


def classify_values(values: np.ndarray) -> np.ndarray:
    """Label 0 where the score is strictly positive, label 1 otherwise."""
    return np.where(np.asarray(values) > 0.0, 0, 1)


def classify(score: Score) -> int:
    return int(classify_values(np.asarray([score.value]))[0])


def empirical_error(
    scores0: np.ndarray, scores1: np.ndarray, priors: tuple[float, float]
) -> ErrorReport:
    """Misclassification rates from per-true-class score vectors."""
    scores0 = np.asarray(scores0, dtype=float).reshape(-1)
    scores1 = np.asarray(scores1, dtype=float).reshape(-1)
    if scores0.size == 0 or scores1.size == 0:
        raise InsufficientSamplesError(
            "need at least one test score per class, got %d and %d"
            % (scores0.size, scores1.size)
        )
    eps0 = float(np.mean(classify_values(scores0) != 0))
    eps1 = float(np.mean(classify_values(scores1) != 1))
    total = priors[0] * eps0 + priors[1] * eps1
    return ErrorReport(
        eps0=eps0, eps1=eps1, total=total, n_test0=scores0.size, n_test1=scores1.size
    )


def conditional_score_moments(
    fit: FittedStats,
    model: MixtureModel,
    theta: float = 0.0,
    rule_kind: str = RULE_IMPROVED_RQDA,
) -> tuple[np.ndarray, np.ndarray]:
    """Exact per-class mean and variance of the normalized score.

    Conditions on the training data (through ``fit``) and averages over a test
    observation drawn from the true class distribution in ``model``. For the
    improved rule the score is normalized by 2/sqrt(p); for the standard rule
    by 1/sqrt(p), with the prior offset taken from the model. ``theta`` only
    enters the improved rule.

    Diagnostic use only: the true statistics are never available in training.
    """
    p = fit.p
    sqrt_p = math.sqrt(p)
    if rule_kind == RULE_IMPROVED_RQDA:
        mean_scale, var_scale = 2.0 / sqrt_p, 4.0 / p
        const = -theta
    elif rule_kind == RULE_STANDARD_RQDA:
        _require_shared_gamma(fit)
        mean_scale, var_scale = 1.0 / sqrt_p, 1.0 / p
        const = mean_scale * (
            0.5 * _logdet_ratio(fit) - math.log(model.prior1 / model.prior0)
        )
    else:
        raise ValueError("conditional moments are defined for the quadratic plug-in rules only")

    gap = fit.H1 - fit.H0
    means = np.empty(2)
    variances = np.empty(2)
    for i, stats in enumerate((model.class0, model.class1)):
        d0 = stats.mean - fit.mu_hat0
        d1 = stats.mean - fit.mu_hat1
        sigma = stats.covariance
        trace_gap = float(np.sum(sigma * fit.H1) - np.sum(sigma * fit.H0))
        quad_gap = float(d1 @ fit.H1 @ d1 - d0 @ fit.H0 @ d0)
        means[i] = const + 0.5 * mean_scale * (trace_gap + quad_gap)
        mixed = gap @ sigma
        linear = fit.H1 @ d1 - fit.H0 @ d0
        variances[i] = 0.5 * var_scale * float(np.sum(mixed * mixed.T)) + var_scale * float(
            linear @ sigma @ linear
        )
    return means, variances
