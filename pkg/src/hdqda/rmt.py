"""Deterministic equivalents and asymptotic error prediction.

In the proportional regime (dimension and sample counts growing together) the
resolvent of each shrunken sample covariance concentrates around a
deterministic matrix driven by a scalar fixed point. This module computes
those limits by two independent routes (a damped dense fixed-point iteration
and a scalar root-find on the spectrum), turns them into per-class error
predictions, and derives the matched shrinkage and bias for the two-parameter
rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla
from scipy import optimize
from scipy.special import ndtr

from .errors import (
    ConvergenceError,
    DegenerateDesignError,
    InvalidRegularizerError,
    NotSpdError,
    StabilityError,
)
from .model import MixtureModel

__all__ = [
    "DeterministicEquivalents",
    "AsymptoticPrediction",
    "ThetaDesign",
    "solve_delta",
    "eigen_delta_solver",
    "asymptotic_error",
    "gamma1_theoretical",
    "theta_star_theoretical",
]


@dataclass(frozen=True)
class DeterministicEquivalents:
    """Scalar fixed point and resolvent limit for one class.

    ``delta`` solves delta = (1/n) Tr[sigma (I + gamma/(1+gamma*delta) sigma)^-1]
    and ``T`` is the matrix inverse evaluated at the solution. ``phi`` is the
    second spectral moment (1/n) Tr[sigma^2 T^2] and ``phi_tilde`` the squared
    shrinkage of the fixed-point denominator. ``residual`` records the fixed
    point gap measured at acceptance.
    """

    delta: float
    T: np.ndarray
    phi: float
    phi_tilde: float
    gamma: float
    n: int
    residual: float = 0.0
    iterations: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("sample count must be positive, got %d" % (self.n,))
        if self.gamma < 0.0:
            raise InvalidRegularizerError("shrinkage must be nonnegative, got %r" % (self.gamma,))
        if self.delta < 0.0 or not math.isfinite(self.delta):
            raise StabilityError("fixed point must be finite and nonnegative, got %r" % (self.delta,))
        if not 0.0 < self.phi_tilde <= 1.0:
            raise StabilityError("shrinkage factor out of (0, 1]: %r" % (self.phi_tilde,))
        if self.stability_margin() <= 0.0:
            raise StabilityError(
                "spectral stability margin is %r; the fixed point is not admissible"
                % (self.stability_margin(),)
            )

    def stability_margin(self) -> float:
        """1 - gamma^2 phi phi_tilde; must stay strictly positive."""
        return 1.0 - self.gamma**2 * self.phi * self.phi_tilde


@dataclass(frozen=True)
class AsymptoticPrediction:
    """Per-class limiting error rates with their building blocks.

    Arrays are indexed by class. ``mean_shift`` is the centering of the
    normalized score, ``trace_gap`` the resolvent-trace asymmetry, and the two
    variance fields split the limiting fluctuation into the quadratic-form
    part and the estimated-mean part.
    """

    eps0: float
    eps1: float
    total: float
    mean_shift: np.ndarray
    trace_gap: np.ndarray
    quad_variance: np.ndarray
    offset_variance: np.ndarray
    delta: np.ndarray
    phi: np.ndarray
    phi_tilde: np.ndarray
    method: str


@dataclass(frozen=True)
class ThetaDesign:
    """Error-minimizing bias together with the class margins it balances."""

    theta_star: float
    beta0: float
    beta1: float
    alpha: float


def _check_solver_args(n: int, gamma: float) -> None:
    if n < 1:
        raise ValueError("sample count must be positive, got %d" % (n,))
    if gamma < 0.0:
        raise InvalidRegularizerError("shrinkage must be nonnegative, got %r" % (gamma,))


def _shifted_cholesky(sigma: np.ndarray, scale: float) -> np.ndarray:
    shifted = np.eye(sigma.shape[0]) + scale * sigma
    try:
        return np.linalg.cholesky(shifted)
    except np.linalg.LinAlgError as exc:
        raise NotSpdError(
            "shifted covariance is not positive definite at scale %r" % (scale,)
        ) from exc


def solve_delta(
    sigma: np.ndarray,
    n: int,
    gamma: float,
    *,
    tol: float = 1e-9,
    max_iter: int = 10000,
    omega: float = 0.5,
    initial: float | None = None,
) -> DeterministicEquivalents:
    """Damped fixed-point iteration on the dense covariance.

    Each sweep refactorizes the shifted covariance and evaluates the trace of
    the resolvent through the identity
    Tr[sigma (I + a sigma)^-1] = (p - Tr[(I + a sigma)^-1]) / a, so the route
    never touches the spectrum explicitly.

    Parameters
    ----------
    sigma : ndarray of shape (p, p)
        Class covariance, symmetric positive semidefinite.
    n : int
        Training sample count for the class.
    gamma : float
        Shrinkage parameter, nonnegative.
    tol : float
        Acceptance threshold on the fixed-point gap, relative to max(1, delta).
    max_iter : int
        Iteration cap; exceeding it raises ConvergenceError.
    omega : float
        Damping weight in (0, 1] on the fixed-point update.
    initial : float, optional
        Starting value; defaults to Tr[sigma]/n, which upper-bounds the root.
    """
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValueError("covariance must be square, got shape %r" % (sigma.shape,))
    _check_solver_args(n, gamma)
    if not 0.0 < omega <= 1.0:
        raise ValueError("damping weight must lie in (0, 1], got %r" % (omega,))
    p = sigma.shape[0]
    upper = float(np.trace(sigma)) / n

    if gamma == 0.0 or upper == 0.0:
        phi = float(np.sum(sigma * sigma)) / n if gamma == 0.0 else 0.0
        return DeterministicEquivalents(
            delta=upper, T=np.eye(p), phi=phi, phi_tilde=1.0, gamma=gamma, n=n
        )

    delta = upper if initial is None else float(initial)
    if delta < 0.0:
        raise ValueError("initial value must be nonnegative, got %r" % (initial,))

    residuals: list[float] = []
    chol = None
    for iteration in range(1, max_iter + 1):
        scale = gamma / (1.0 + gamma * delta)
        chol = _shifted_cholesky(sigma, scale)
        inv_chol = sla.solve_triangular(
            chol, np.eye(p), lower=True, check_finite=False
        )
        inverse_trace = float(np.sum(inv_chol * inv_chol))
        mapped = (p - inverse_trace) / (n * scale)
        residual = abs(mapped - delta)
        residuals.append(residual)
        if residual <= tol * max(1.0, abs(mapped)):
            delta = mapped
            break
        delta = (1.0 - omega) * delta + omega * mapped
    else:
        raise ConvergenceError(
            "fixed point did not settle within %d sweeps" % (max_iter,),
            residuals=residuals[-10:],
        )

    scale = gamma / (1.0 + gamma * delta)
    chol = _shifted_cholesky(sigma, scale)
    inv_chol = sla.solve_triangular(chol, np.eye(p), lower=True, check_finite=False)
    T = inv_chol.T @ inv_chol
    T = 0.5 * (T + T.T)
    product = sigma @ T
    phi = float(np.sum(product * product)) / n
    phi_tilde = 1.0 / (1.0 + gamma * delta) ** 2
    return DeterministicEquivalents(
        delta=float(delta),
        T=T,
        phi=phi,
        phi_tilde=phi_tilde,
        gamma=gamma,
        n=n,
        residual=residuals[-1],
        iterations=len(residuals),
    )


def eigen_delta_solver(
    eigenvalues: np.ndarray, n: int, gamma: float, *, xtol: float = 1e-14
) -> float:
    """Scalar root-find for the fixed point on a known spectrum.

    Independent of :func:`solve_delta`: brackets the root between zero and the
    spectral mean and lets a derivative-free root finder close in. The two
    routes agreeing is a meaningful cross-check, not a redundancy.
    """
    eig = np.asarray(eigenvalues, dtype=float).reshape(-1)
    if eig.size == 0:
        raise ValueError("need at least one eigenvalue")
    floor = -1e-12 * max(1.0, float(np.max(np.abs(eig), initial=0.0)))
    if np.any(eig < floor):
        raise NotSpdError("covariance spectrum has negative entries")
    eig = np.clip(eig, 0.0, None)
    _check_solver_args(n, gamma)
    upper = float(np.sum(eig)) / n
    if gamma == 0.0 or upper == 0.0:
        return upper

    def gap(delta: float) -> float:
        scale = gamma / (1.0 + gamma * delta)
        return delta - float(np.sum(eig / (1.0 + scale * eig))) / n

    if gap(upper) <= 0.0:
        return upper
    return float(optimize.brentq(gap, 0.0, upper, xtol=xtol))


def _scalar_resolvent(
    eig: np.ndarray, n: int, gamma: float
) -> tuple[float, np.ndarray, float, float]:
    """Fixed point, per-eigenvalue resolvent weights, phi, phi_tilde."""
    delta = eigen_delta_solver(eig, n, gamma)
    scale = gamma / (1.0 + gamma * delta) if gamma > 0.0 else 0.0
    weights = 1.0 / (1.0 + scale * eig)
    phi = float(np.sum(eig**2 * weights**2)) / n
    phi_tilde = 1.0 / (1.0 + gamma * delta) ** 2
    return delta, weights, phi, phi_tilde


@dataclass(frozen=True)
class _Functionals:
    """Scalar spectral functionals shared by both computation routes.

    Indexing convention: ``mean_quad[j]`` contracts the mean gap against the
    class-j resolvent limit; every other tuple is indexed by the class of the
    test observation.
    """

    delta: tuple[float, float]
    phi: tuple[float, float]
    phi_tilde: tuple[float, float]
    mean_quad: tuple[float, float]
    trace_gap: tuple[float, float]
    cross_sq: tuple[float, float]
    mixed_sq: tuple[float, float]
    sandwich: tuple[float, float]
    offset_quad: tuple[float, float]


def _dense_functionals(
    model: MixtureModel, n0: int, n1: int, gamma0: float, gamma1: float
) -> _Functionals:
    sigmas = (model.class0.covariance, model.class1.covariance)
    counts = (n0, n1)
    gammas = (gamma0, gamma1)
    eqs = [solve_delta(sigmas[i], counts[i], gammas[i]) for i in (0, 1)]
    mu = model.class1.mean - model.class0.mean
    T = (eqs[0].T, eqs[1].T)
    sandwiched = tuple(T[j] @ sigmas[j] @ T[j] for j in (0, 1))

    mean_quad = tuple(float(mu @ T[j] @ mu) for j in (0, 1))
    trace_gap = tuple(float(np.sum(sigmas[i] * (T[1] - T[0]))) for i in (0, 1))
    cross_sq = tuple(
        float(np.sum((sigmas[i] @ T[1 - i]) ** 2)) for i in (0, 1)
    )
    mixed_sq = tuple(
        float(np.sum((sigmas[i] @ T[1]) * (sigmas[i] @ T[0]).T)) for i in (0, 1)
    )
    sandwich = tuple(float(np.sum(sigmas[i] * sandwiched[1 - i])) for i in (0, 1))
    offset_quad = tuple(float(mu @ sandwiched[1 - i] @ mu) for i in (0, 1))
    return _Functionals(
        delta=(eqs[0].delta, eqs[1].delta),
        phi=(eqs[0].phi, eqs[1].phi),
        phi_tilde=(eqs[0].phi_tilde, eqs[1].phi_tilde),
        mean_quad=mean_quad,
        trace_gap=trace_gap,
        cross_sq=cross_sq,
        mixed_sq=mixed_sq,
        sandwich=sandwich,
        offset_quad=offset_quad,
    )


def _simultaneous_spectra(
    model: MixtureModel, tol: float = 1e-10
) -> tuple[np.ndarray, np.ndarray, np.ndarray] | None:
    """Joint eigenbasis of the two covariances, or None if they do not share one."""
    sigma0 = model.class0.covariance
    sigma1 = model.class1.covariance
    _, basis = np.linalg.eigh(sigma0 + sigma1)
    rotated0 = basis.T @ sigma0 @ basis
    rotated1 = basis.T @ sigma1 @ basis
    for rotated in (rotated0, rotated1):
        diag_scale = max(1.0, float(np.max(np.abs(np.diag(rotated)))))
        off = rotated - np.diag(np.diag(rotated))
        if float(np.max(np.abs(off))) > tol * diag_scale:
            return None
    eig0 = np.clip(np.diag(rotated0), 0.0, None)
    eig1 = np.clip(np.diag(rotated1), 0.0, None)
    mu = basis.T @ (model.class1.mean - model.class0.mean)
    return eig0, eig1, mu


def _eigen_functionals(
    eig0: np.ndarray,
    eig1: np.ndarray,
    mu: np.ndarray,
    n0: int,
    n1: int,
    gamma0: float,
    gamma1: float,
) -> _Functionals:
    counts = (n0, n1)
    gammas = (gamma0, gamma1)
    spectra = (eig0, eig1)
    solved = [_scalar_resolvent(spectra[j], counts[j], gammas[j]) for j in (0, 1)]
    weights = (solved[0][1], solved[1][1])
    mu_sq = mu**2

    mean_quad = tuple(float(np.sum(mu_sq * weights[j])) for j in (0, 1))
    trace_gap = tuple(
        float(np.sum(spectra[i] * (weights[1] - weights[0]))) for i in (0, 1)
    )
    cross_sq = tuple(
        float(np.sum(spectra[i] ** 2 * weights[1 - i] ** 2)) for i in (0, 1)
    )
    mixed_sq = tuple(
        float(np.sum(spectra[i] ** 2 * weights[1] * weights[0])) for i in (0, 1)
    )
    sandwich = tuple(
        float(np.sum(spectra[i] * spectra[1 - i] * weights[1 - i] ** 2))
        for i in (0, 1)
    )
    offset_quad = tuple(
        float(np.sum(mu_sq * spectra[1 - i] * weights[1 - i] ** 2)) for i in (0, 1)
    )
    return _Functionals(
        delta=(solved[0][0], solved[1][0]),
        phi=(solved[0][2], solved[1][2]),
        phi_tilde=(solved[0][3], solved[1][3]),
        mean_quad=mean_quad,
        trace_gap=trace_gap,
        cross_sq=cross_sq,
        mixed_sq=mixed_sq,
        sandwich=sandwich,
        offset_quad=offset_quad,
    )


def _functionals(
    model: MixtureModel,
    n0: int,
    n1: int,
    gamma0: float,
    gamma1: float,
    method: str,
) -> tuple[_Functionals, str]:
    if method not in ("auto", "dense", "eigen"):
        raise ValueError("unknown method %r" % (method,))
    if method in ("auto", "eigen"):
        spectra = _simultaneous_spectra(model)
        if spectra is not None:
            return (
                _eigen_functionals(*spectra, n0, n1, gamma0, gamma1),
                "eigen",
            )
        if method == "eigen":
            raise ValueError(
                "eigen route needs covariances sharing an eigenbasis; use dense"
            )
    return _dense_functionals(model, n0, n1, gamma0, gamma1), "dense"


def _stability(value: float) -> float:
    if value <= 0.0:
        raise StabilityError("spectral stability margin is %r" % (value,))
    return value


def asymptotic_error(
    model: MixtureModel,
    n0: int,
    n1: int,
    gamma0: float,
    gamma1: float,
    theta: float,
    *,
    method: str = "auto",
) -> AsymptoticPrediction:
    """Limiting per-class error of the two-shrinkage rule with bias ``theta``.

    Uses the non-simplified variance, keeping the estimated-mean fluctuation
    term; the simplified large-p forms are noticeably less accurate at
    moderate dimension.
    """
    _check_solver_args(n0, gamma0)
    _check_solver_args(n1, gamma1)
    f, route = _functionals(model, n0, n1, gamma0, gamma1, method)
    p = model.dim
    sqrt_p = math.sqrt(p)
    counts = (n0, n1)
    gammas = (gamma0, gamma1)

    mean_shift = np.empty(2)
    trace_gap = np.empty(2)
    quad_variance = np.empty(2)
    offset_variance = np.empty(2)
    eps = np.empty(2)
    for i in (0, 1):
        j = 1 - i
        margin_i = _stability(1.0 - gammas[i] ** 2 * f.phi[i] * f.phi_tilde[i])
        margin_j = _stability(1.0 - gammas[j] ** 2 * f.phi[j] * f.phi_tilde[j])
        sign = -1.0 if i == 0 else 1.0
        mean_shift[i] = theta + sign * f.mean_quad[j] / sqrt_p
        trace_gap[i] = f.trace_gap[i] / sqrt_p
        # The sandwich-squared fluctuation is sourced by the resolvent's own
        # Wishart noise, so it scales with the opposite class's sample count.
        quad_variance[i] = (
            counts[i] / p * f.phi[i] / margin_i
            + f.cross_sq[i] / p
            - 2.0 * f.mixed_sq[i] / p
            + (gammas[j] ** 2 * f.phi_tilde[j] / margin_j)
            * f.sandwich[i] ** 2
            / (counts[j] * p)
        )
        offset_variance[i] = f.offset_quad[i] / p / margin_j
        spread = 2.0 * quad_variance[i] + 4.0 * offset_variance[i]
        if spread <= 0.0:
            raise StabilityError("limiting score variance is %r" % (spread,))
        orientation = 1.0 if i == 0 else -1.0
        eps[i] = float(ndtr(orientation * (mean_shift[i] - trace_gap[i]) / math.sqrt(spread)))

    total = model.prior0 * eps[0] + model.prior1 * eps[1]
    return AsymptoticPrediction(
        eps0=float(eps[0]),
        eps1=float(eps[1]),
        total=float(total),
        mean_shift=mean_shift,
        trace_gap=trace_gap,
        quad_variance=quad_variance,
        offset_variance=offset_variance,
        delta=np.asarray(f.delta),
        phi=np.asarray(f.phi),
        phi_tilde=np.asarray(f.phi_tilde),
        method=route,
    )


def gamma1_theoretical(
    sigma0: np.ndarray,
    n0: int,
    n1: int,
    gamma0: float,
    *,
    delta0: float | None = None,
) -> float:
    """Majority-class shrinkage matched to the minority-class choice.

    Balances the resolvent traces of the two classes so the trace asymmetry of
    the score stays bounded as the dimension grows. Requires the class-1 count
    to be at least the class-0 count (canonical orientation); equal counts
    return ``gamma0`` exactly.
    """
    if n1 < n0:
        raise ValueError(
            "expected the minority class first: n0=%d exceeds n1=%d" % (n0, n1)
        )
    _check_solver_args(n0, gamma0)
    if delta0 is None:
        delta0 = solve_delta(sigma0, n0, gamma0).delta
    trace0 = n0 * delta0
    denominator = 1.0 - (1.0 / n1 - 1.0 / n0) * gamma0 * trace0
    if denominator <= 0.0:
        raise DegenerateDesignError(
            "matched shrinkage denominator is %r" % (denominator,)
        )
    return gamma0 / denominator


def theta_star_theoretical(
    model: MixtureModel,
    n0: int,
    n1: int,
    gamma0: float,
    gamma1: float,
    *,
    method: str = "auto",
) -> ThetaDesign:
    """Bias minimizing the limiting total error at the given shrinkage pair.

    With equal priors the bias centers the two class margins exactly; with
    unequal priors a log-odds correction scaled by the common variance is
    subtracted, which requires the margins not to cancel.
    """
    f, _ = _functionals(model, n0, n1, gamma0, gamma1, method)
    p = model.dim
    sqrt_p = math.sqrt(p)
    beta0 = -f.mean_quad[1] / sqrt_p - f.trace_gap[0] / sqrt_p
    beta1 = -f.mean_quad[0] / sqrt_p + f.trace_gap[1] / sqrt_p

    margin0 = _stability(1.0 - gamma0**2 * f.phi[0] * f.phi_tilde[0])
    margin1 = _stability(1.0 - gamma1**2 * f.phi[1] * f.phi_tilde[1])
    quad_var0 = (
        n0 / p * f.phi[0] / margin0
        + f.cross_sq[0] / p
        - 2.0 * f.mixed_sq[0] / p
        + (gamma1**2 * f.phi_tilde[1] / margin1) * f.sandwich[0] ** 2 / (n1 * p)
    )
    if quad_var0 <= 0.0:
        raise StabilityError("limiting score variance is %r" % (quad_var0,))
    alpha = math.sqrt(2.0 * quad_var0)

    log_odds = math.log(model.prior1 / model.prior0)
    theta = (beta1 - beta0) / 2.0
    if log_odds != 0.0:
        balance = beta1 + beta0
        if abs(balance) <= 1e-12 * max(1.0, abs(beta0), abs(beta1)):
            raise DegenerateDesignError(
                "class margins cancel; prior correction is undefined"
            )
        theta -= 2.0 * alpha**2 / balance * log_odds
    return ThetaDesign(theta_star=theta, beta0=beta0, beta1=beta1, alpha=alpha)
