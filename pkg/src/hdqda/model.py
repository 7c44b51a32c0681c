"""Ground-truth two-class Gaussian mixture: scenario construction and sampling.

A class is a Gaussian with mean vector and SPD covariance; a mixture is two such
classes with priors. Synthetic benchmark scenarios use an isotropic base
covariance for class 0 and a low-rank spiked perturbation of it for class 1,
with a mean shift that keeps the squared distance constant in the dimension.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import NotSpdError

__all__ = [
    "ClassStatistics",
    "MixtureModel",
    "ScenarioConfig",
    "ScenarioData",
    "AssumptionReport",
    "make_spiked_covariance",
    "validate_assumptions",
    "sample_class",
    "build_mixture",
    "sample_scenario",
    "stream",
]

_SYM_RTOL = 1e-12


def _as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotSpdError("covariance must be a square matrix, got shape %s" % (m.shape,))
    return m


@dataclass(frozen=True)
class ClassStatistics:
    """Mean and SPD covariance of one Gaussian class."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = _as_matrix(self.covariance)
        if mean.shape[0] != cov.shape[0]:
            raise ValueError(
                "mean length %d does not match covariance dimension %d"
                % (mean.shape[0], cov.shape[0])
            )
        scale = float(np.max(np.abs(cov))) if cov.size else 0.0
        if float(np.max(np.abs(cov - cov.T), initial=0.0)) > _SYM_RTOL * max(scale, 1.0):
            raise NotSpdError("covariance is not symmetric within tolerance")
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise NotSpdError("covariance is not positive definite: %s" % exc) from exc
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class MixtureModel:
    """Two Gaussian classes with prior probabilities summing to one."""

    class0: ClassStatistics
    class1: ClassStatistics
    prior0: float
    prior1: float

    def __post_init__(self):
        if self.class0.dim != self.class1.dim:
            raise ValueError(
                "classes live in different dimensions: %d vs %d"
                % (self.class0.dim, self.class1.dim)
            )
        if not (0.0 < self.prior0 < 1.0 and 0.0 < self.prior1 < 1.0):
            raise ValueError("priors must lie strictly inside (0, 1)")
        if abs(self.prior0 + self.prior1 - 1.0) > 1e-12:
            raise ValueError("priors must sum to 1, got %r" % (self.prior0 + self.prior1))

    @property
    def dim(self) -> int:
        return self.class0.dim

    def swapped(self) -> "MixtureModel":
        """The same mixture with the class roles exchanged."""
        return MixtureModel(self.class1, self.class0, self.prior1, self.prior0)


_CONFIG_FIELDS = (
    "p",
    "n0",
    "n1",
    "test0",
    "test1",
    "base_scale",
    "spike_strength",
    "spike_rank",
    "mean_offset",
    "prior0",
    "seed",
)


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete description of a synthetic benchmark scenario.

    Class 0 has covariance ``base_scale * I``; class 1 adds a rank-
    ``spike_rank`` perturbation of magnitude ``spike_strength``. The class-1
    mean is offset by ``mean_offset / sqrt(p)`` in every coordinate.
    """

    p: int
    n0: int
    n1: int
    test0: int
    test1: int
    base_scale: float = 4.0
    spike_strength: float = 3.0
    spike_rank: int | None = None
    mean_offset: float = 3.0
    prior0: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("dimension p must be >= 1")
        if self.n0 < 2 or self.n1 < 2:
            raise ValueError("training counts n0, n1 must each be >= 2")
        if self.test0 < 1 or self.test1 < 1:
            raise ValueError("test counts must each be >= 1")
        if self.spike_rank is None:
            object.__setattr__(self, "spike_rank", math.isqrt(self.p - 1) + 1 if self.p > 1 else 1)

    def to_json(self) -> str:
        return json.dumps({k: getattr(self, k) for k in _CONFIG_FIELDS}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ValueError("scenario config must be a JSON object")
        unknown = sorted(set(data) - set(_CONFIG_FIELDS))
        if unknown:
            raise ValueError("unknown scenario config fields: %s" % ", ".join(unknown))
        missing = sorted(set(_CONFIG_FIELDS) - set(data))
        if missing:
            raise ValueError("missing scenario config fields: %s" % ", ".join(missing))
        return cls(**data)


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for (seed, key) with a fixed spawn path.

    The same (seed, key) always yields the same stream, and distinct keys give
    statistically independent streams, so worker scheduling never changes what
    any one task draws.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def make_spiked_covariance(
    base_scale: float,
    spike_strength: float,
    spike_rank: int,
    p: int,
    seed: int,
) -> np.ndarray:
    """Isotropic covariance plus a random low-rank symmetric perturbation.

    Returns ``base_scale * I + spike_strength * Q Q^T`` where Q has
    ``spike_rank`` orthonormal columns drawn Haar-uniformly. The eigenvalue
    multiset is exactly ``spike_rank`` copies of ``base_scale + spike_strength``
    and ``p - spike_rank`` copies of ``base_scale``.
    """
    if not 0 <= spike_rank <= p:
        raise ValueError("spike_rank must lie in [0, %d], got %d" % (p, spike_rank))
    if base_scale <= 0.0 or base_scale + min(0.0, spike_strength) <= 0.0:
        raise NotSpdError(
            "scales base_scale=%r, spike_strength=%r do not yield a positive definite matrix"
            % (base_scale, spike_strength)
        )
    sigma = base_scale * np.eye(p)
    if spike_rank == 0 or spike_strength == 0.0:
        return sigma
    rng = stream(seed, 0)
    g = rng.standard_normal((p, spike_rank))
    q, r = np.linalg.qr(g)
    # Sign correction makes Q Haar-distributed and deterministic given the draw.
    q = q * np.sign(np.diag(r))
    bump = spike_strength * (q @ q.T)
    sigma += 0.5 * (bump + bump.T)
    return sigma


@dataclass(frozen=True)
class AssumptionReport:
    """Scalar diagnostics for the asymptotic working regime. Advisory only."""

    dim_to_samples: float
    class_ratio: float
    mean_gap_sq: float
    mean_gap_sq_scaled: float
    spectral_norm0: float
    spectral_norm1: float
    covariance_gap_eigencount: int
    eigenvalue_threshold: float


def validate_assumptions(
    model: MixtureModel, n0: int, n1: int, *, eigenvalue_threshold: float = 0.5
) -> AssumptionReport:
    """Report how a mixture and its training counts sit in the working regime.

    Never rejects; the caller decides what to do with the numbers. The
    eigencount counts eigenvalues of ``cov0 - cov1`` with magnitude above the
    threshold, which for the synthetic scenarios equals the spike rank.
    """
    p = model.dim
    mu_gap = model.class1.mean - model.class0.mean
    gap = model.class0.covariance - model.class1.covariance
    gap_eigs = np.linalg.eigvalsh(gap)
    return AssumptionReport(
        dim_to_samples=p / float(n0 + n1),
        class_ratio=n0 / float(n1),
        mean_gap_sq=float(mu_gap @ mu_gap),
        mean_gap_sq_scaled=float(mu_gap @ mu_gap) / math.sqrt(p),
        spectral_norm0=float(np.linalg.norm(model.class0.covariance, 2)),
        spectral_norm1=float(np.linalg.norm(model.class1.covariance, 2)),
        covariance_gap_eigencount=int(np.sum(np.abs(gap_eigs) > eigenvalue_threshold)),
        eigenvalue_threshold=eigenvalue_threshold,
    )


def sample_class(stats: ClassStatistics, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n rows from the class distribution via a Cholesky factor.

    Any L with L L^T equal to the covariance yields the same law; the Cholesky
    factor is the cheapest such choice.
    """
    if n < 1:
        raise ValueError("need at least one sample, got n=%d" % n)
    try:
        chol = np.linalg.cholesky(stats.covariance)
    except np.linalg.LinAlgError as exc:
        raise NotSpdError("covariance factorization failed: %s" % exc) from exc
    z = rng.standard_normal((n, stats.dim))
    return stats.mean + z @ chol.T


def build_mixture(config: ScenarioConfig) -> MixtureModel:
    """Materialize the ground-truth mixture a scenario config describes."""
    p = config.p
    cov0 = config.base_scale * np.eye(p)
    cov1 = make_spiked_covariance(
        config.base_scale, config.spike_strength, config.spike_rank, p, config.seed
    )
    mu0 = np.zeros(p)
    mu1 = np.full(p, config.mean_offset / math.sqrt(p))
    return MixtureModel(
        class0=ClassStatistics(mu0, cov0),
        class1=ClassStatistics(mu1, cov1),
        prior0=config.prior0,
        prior1=1.0 - config.prior0,
    )


@dataclass(frozen=True)
class ScenarioData:
    """One sampled realization of a scenario: raw train and test blocks."""

    model: MixtureModel
    train0: np.ndarray
    train1: np.ndarray
    test0: np.ndarray
    test1: np.ndarray


def sample_scenario(
    config: ScenarioConfig,
    *,
    model: MixtureModel | None = None,
    replicate: int = 0,
) -> ScenarioData:
    """Draw the train/test blocks of one scenario replicate.

    The ground-truth model is fixed by the config (spawn key 0 feeds the spiked
    basis); replicate r draws its four blocks from spawn keys (1..4, r), so
    replicates are independent and reproducible in any execution order.
    """
    if model is None:
        model = build_mixture(config)
    return ScenarioData(
        model=model,
        train0=sample_class(model.class0, config.n0, stream(config.seed, 1, replicate)),
        train1=sample_class(model.class1, config.n1, stream(config.seed, 2, replicate)),
        test0=sample_class(model.class0, config.test0, stream(config.seed, 3, replicate)),
        test1=sample_class(model.class1, config.test1, stream(config.seed, 4, replicate)),
    )


def config_as_dict(config: ScenarioConfig) -> dict:
    """Plain dict view with the serialization field set."""
    return {k: getattr(config, k) for k in _CONFIG_FIELDS}
