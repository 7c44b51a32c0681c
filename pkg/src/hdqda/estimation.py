"""Sample statistics and the shrunken resolvents every classifier builds on.

The resolvent of a sample covariance at shrinkage gamma is (I + gamma * S)^{-1},
always SPD for gamma >= 0, computed by a symmetric factorization rather than an
explicit inverse formula.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .errors import InsufficientSamplesError, NotSpdError

__all__ = [
    "TrainingSet",
    "FittedStats",
    "PooledStats",
    "sample_moments",
    "regularized_resolvent",
    "fit",
    "fit_pooled",
]


@dataclass(frozen=True)
class TrainingSet:
    """Labeled training data as one row-block per class."""

    X0: np.ndarray
    X1: np.ndarray

    def __post_init__(self):
        x0 = np.asarray(self.X0, dtype=float)
        x1 = np.asarray(self.X1, dtype=float)
        if x0.ndim != 2 or x1.ndim != 2:
            raise ValueError("class blocks must be 2-D row matrices")
        if x0.shape[1] != x1.shape[1]:
            raise ValueError(
                "class blocks disagree on dimension: %d vs %d" % (x0.shape[1], x1.shape[1])
            )
        if x0.shape[0] < 2 or x1.shape[0] < 2:
            raise InsufficientSamplesError(
                "need at least 2 rows per class, got %d and %d" % (x0.shape[0], x1.shape[0])
            )
        object.__setattr__(self, "X0", x0)
        object.__setattr__(self, "X1", x1)

    @property
    def n0(self) -> int:
        return self.X0.shape[0]

    @property
    def n1(self) -> int:
        return self.X1.shape[0]

    @property
    def n(self) -> int:
        return self.n0 + self.n1

    @property
    def p(self) -> int:
        return self.X0.shape[1]

    def swapped(self) -> "TrainingSet":
        return TrainingSet(self.X1, self.X0)


def sample_moments(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column mean and unbiased (n-1 normalized) sample covariance."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("expected a 2-D row matrix, got shape %s" % (X.shape,))
    n = X.shape[0]
    if n < 2:
        raise InsufficientSamplesError("covariance needs n >= 2 rows, got %d" % n)
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (n - 1)
    cov = 0.5 * (cov + cov.T)
    return mean, cov


def regularized_resolvent(sigma_hat: np.ndarray, gamma: float) -> np.ndarray:
    """(I + gamma * sigma_hat)^{-1} via Cholesky; eigenvalues lie in (0, 1]."""
    sigma_hat = np.asarray(sigma_hat, dtype=float)
    if gamma < 0.0:
        raise ValueError("shrinkage parameter must be >= 0, got %r" % gamma)
    p = sigma_hat.shape[0]
    if gamma == 0.0:
        return np.eye(p)
    shifted = np.eye(p) + gamma * sigma_hat
    try:
        factor = sla.cho_factor(shifted, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        cond = float(np.linalg.cond(shifted))
        raise NotSpdError(
            "resolvent factorization failed (condition estimate %.3e): %s" % (cond, exc)
        ) from exc
    resolvent = sla.cho_solve(factor, np.eye(p), check_finite=False)
    return 0.5 * (resolvent + resolvent.T)


@dataclass(frozen=True)
class FittedStats:
    """Per-class sample moments, shrinkage parameters, and resolvents."""

    mu_hat0: np.ndarray
    mu_hat1: np.ndarray
    sigma_hat0: np.ndarray
    sigma_hat1: np.ndarray
    gamma0: float
    gamma1: float
    H0: np.ndarray
    H1: np.ndarray
    n0: int
    n1: int

    @property
    def p(self) -> int:
        return self.mu_hat0.shape[0]

    def resolvent_residual(self) -> tuple[float, float]:
        """Max-abs residuals of H_i (I + gamma_i S_i) - I, one per class."""
        p = self.p
        r0 = self.H0 @ (np.eye(p) + self.gamma0 * self.sigma_hat0) - np.eye(p)
        r1 = self.H1 @ (np.eye(p) + self.gamma1 * self.sigma_hat1) - np.eye(p)
        return float(np.max(np.abs(r0))), float(np.max(np.abs(r1)))


def fit(train: TrainingSet, gamma0: float, gamma1: float) -> FittedStats:
    """Sample moments for both classes plus their shrunken resolvents."""
    mu0, sig0 = sample_moments(train.X0)
    mu1, sig1 = sample_moments(train.X1)
    return FittedStats(
        mu_hat0=mu0,
        mu_hat1=mu1,
        sigma_hat0=sig0,
        sigma_hat1=sig1,
        gamma0=float(gamma0),
        gamma1=float(gamma1),
        H0=regularized_resolvent(sig0, gamma0),
        H1=regularized_resolvent(sig1, gamma1),
        n0=train.n0,
        n1=train.n1,
    )


@dataclass(frozen=True)
class PooledStats:
    """Class means plus a pooled covariance resolvent for the linear baseline."""

    mu_hat0: np.ndarray
    mu_hat1: np.ndarray
    sigma_hat: np.ndarray
    gamma: float
    H: np.ndarray


def fit_pooled(train: TrainingSet, gamma: float) -> PooledStats:
    """Pool the class covariances with n - 2 normalization."""
    mu0, sig0 = sample_moments(train.X0)
    mu1, sig1 = sample_moments(train.X1)
    pooled = ((train.n0 - 1) * sig0 + (train.n1 - 1) * sig1) / (train.n - 2)
    return PooledStats(
        mu_hat0=mu0,
        mu_hat1=mu1,
        sigma_hat=pooled,
        gamma=float(gamma),
        H=regularized_resolvent(pooled, gamma),
    )
