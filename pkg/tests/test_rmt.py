import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdqda.errors import (
    ConvergenceError,
    InvalidRegularizerError,
    NotSpdError,
    StabilityError,
)
from hdqda.model import ClassStatistics, MixtureModel, build_mixture
from hdqda.rmt import (
    asymptotic_error,
    eigen_delta_solver,
    gamma1_theoretical,
    solve_delta,
    theta_star_theoretical,
)

from conftest import random_spd, small_config


def _isotropic_delta(sigma: float, gamma: float, c: float) -> float:
    """Positive root of the scalar fixed-point equation for sigma * I.

    gamma d^2 + d (1 + gamma sigma - c gamma sigma) - c sigma = 0, c = p / n.
    """
    b = 1.0 + gamma * sigma - c * gamma * sigma
    return (-b + math.sqrt(b * b + 4.0 * gamma * c * sigma)) / (2.0 * gamma)


def test_dense_route_satisfies_its_own_fixed_point():
    rng = np.random.default_rng(2)
    sigma = random_spd(40, rng)
    eq = solve_delta(sigma, 60, 1.3)
    scale = 1.3 / (1.0 + 1.3 * eq.delta)
    T_direct = np.linalg.inv(np.eye(40) + scale * sigma)
    np.testing.assert_allclose(eq.T, T_direct, atol=1e-9)
    assert eq.delta == pytest.approx(np.trace(sigma @ eq.T) / 60, abs=1e-8)
    assert eq.stability_margin() > 0.0


def test_both_routes_agree_on_a_generic_spectrum():
    rng = np.random.default_rng(3)
    sigma = random_spd(50, rng)
    eigs = np.linalg.eigvalsh(sigma)
    for n, gamma in ((25, 0.2), (50, 1.0), (100, 8.0)):
        dense = solve_delta(sigma, n, gamma).delta
        scalar = eigen_delta_solver(eigs, n, gamma)
        assert dense == pytest.approx(scalar, abs=1e-8)


def test_isotropic_fixed_point_matches_the_closed_form():
    p, n = 80, 40
    delta = solve_delta(3.0 * np.eye(p), n, 2.0, tol=1e-13).delta
    assert delta == pytest.approx(_isotropic_delta(3.0, 2.0, p / n), abs=1e-9)


def test_zero_shrinkage_short_circuits():
    sigma = np.diag(np.array([1.0, 2.0, 3.0]))
    eq = solve_delta(sigma, 6, 0.0)
    assert eq.delta == pytest.approx(1.0)
    np.testing.assert_array_equal(eq.T, np.eye(3))
    assert eigen_delta_solver(np.array([1.0, 2.0, 3.0]), 6, 0.0) == pytest.approx(1.0)


def test_solver_argument_validation():
    sigma = np.eye(3)
    with pytest.raises(ValueError):
        solve_delta(np.zeros((2, 3)), 5, 1.0)
    with pytest.raises(ValueError):
        solve_delta(sigma, 0, 1.0)
    with pytest.raises(InvalidRegularizerError):
        solve_delta(sigma, 5, -1.0)
    with pytest.raises(ValueError):
        solve_delta(sigma, 5, 1.0, omega=0.0)
    with pytest.raises(ConvergenceError):
        solve_delta(random_spd(30, np.random.default_rng(0)), 10, 5.0, max_iter=2)
    with pytest.raises(NotSpdError):
        eigen_delta_solver(np.array([1.0, -2.0]), 5, 1.0)


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    n=st.integers(5, 120),
    gamma=st.floats(1e-3, 50.0),
    scale=st.floats(0.1, 10.0),
)
def test_route_agreement_property(seed, n, gamma, scale):
    """The dense iteration and the spectrum root-find locate the same point."""
    rng = np.random.default_rng(seed)
    eigs = scale * rng.uniform(0.2, 3.0, size=16)
    dense = solve_delta(np.diag(eigs), n, gamma, tol=1e-12).delta
    scalar = eigen_delta_solver(eigs, n, gamma)
    assert dense >= 0.0
    assert abs(dense - scalar) <= 1e-8 * max(1.0, scalar)


def _commuting_model(p=48, seed=0):
    config = small_config(p=p, seed=seed, spike_rank=5, spike_strength=6.0)
    return build_mixture(config)


def test_asymptotic_error_routes_agree_and_auto_detects_the_basis():
    model = _commuting_model()
    args = (60, 90, 0.7, 1.1, 0.4)
    eig = asymptotic_error(model, *args, method="eigen")
    dense = asymptotic_error(model, *args, method="dense")
    auto = asymptotic_error(model, *args)
    assert auto.method == "eigen" and dense.method == "dense"
    for field in ("eps0", "eps1", "total"):
        assert getattr(eig, field) == pytest.approx(getattr(dense, field), abs=1e-8)
    np.testing.assert_allclose(eig.quad_variance, dense.quad_variance, atol=1e-8)
    np.testing.assert_allclose(eig.trace_gap, dense.trace_gap, atol=1e-8)
    np.testing.assert_allclose(eig.delta, dense.delta, atol=1e-8)


def test_asymptotic_error_noncommuting_falls_back_to_dense():
    rng = np.random.default_rng(9)
    model = MixtureModel(
        class0=ClassStatistics(np.zeros(12), random_spd(12, rng)),
        class1=ClassStatistics(np.ones(12) * 0.2, random_spd(12, rng)),
        prior0=0.4,
        prior1=0.6,
    )
    auto = asymptotic_error(model, 30, 40, 1.0, 1.0, 0.0)
    assert auto.method == "dense"
    with pytest.raises(ValueError, match="eigen route"):
        asymptotic_error(model, 30, 40, 1.0, 1.0, 0.0, method="eigen")
    with pytest.raises(ValueError, match="unknown method"):
        asymptotic_error(model, 30, 40, 1.0, 1.0, 0.0, method="fast")


def test_prediction_is_a_proper_error_pair():
    model = _commuting_model(seed=4)
    pred = asymptotic_error(model, 50, 100, 0.5, 0.9, 0.2)
    assert 0.0 < pred.eps0 < 1.0 and 0.0 < pred.eps1 < 1.0
    assert pred.total == pytest.approx(
        model.prior0 * pred.eps0 + model.prior1 * pred.eps1, abs=1e-14
    )


def test_bias_trades_the_two_class_errors_monotonically():
    model = _commuting_model(seed=5)
    thetas = np.linspace(-3.0, 3.0, 7)
    preds = [asymptotic_error(model, 50, 100, 0.5, 0.9, t) for t in thetas]
    eps0 = [pr.eps0 for pr in preds]
    eps1 = [pr.eps1 for pr in preds]
    assert all(a <= b + 1e-12 for a, b in zip(eps0, eps0[1:]))
    assert all(a >= b - 1e-12 for a, b in zip(eps1, eps1[1:]))


def test_matched_shrinkage_equals_gamma0_for_balanced_counts():
    sigma = random_spd(30, np.random.default_rng(6))
    assert gamma1_theoretical(sigma, 40, 40, 1.7) == 1.7


def test_matched_shrinkage_closed_form_and_orientation_guard():
    sigma = random_spd(30, np.random.default_rng(7))
    n0, n1, gamma0 = 35, 70, 0.8
    delta0 = solve_delta(sigma, n0, gamma0).delta
    expected = gamma0 / (1.0 - (1.0 / n1 - 1.0 / n0) * gamma0 * n0 * delta0)
    assert gamma1_theoretical(sigma, n0, n1, gamma0) == pytest.approx(
        expected, rel=1e-10
    )
    with pytest.raises(ValueError, match="minority class first"):
        gamma1_theoretical(sigma, 70, 35, gamma0)


def test_design_centers_margins_at_equal_priors():
    config = small_config(p=60, prior0=0.5, seed=8)
    model = build_mixture(config)
    gamma1 = gamma1_theoretical(model.class0.covariance, 60, 120, 0.9)
    design = theta_star_theoretical(model, 60, 120, 0.9, gamma1)
    assert design.alpha > 0.0
    assert design.theta_star == pytest.approx(
        (design.beta1 - design.beta0) / 2.0, abs=1e-14
    )


def test_design_satisfies_the_stationarity_identity_at_unequal_priors():
    config = small_config(p=60, prior0=0.3, seed=8)
    model = build_mixture(config)
    gamma1 = gamma1_theoretical(model.class0.covariance, 60, 120, 0.9)
    design = theta_star_theoretical(model, 60, 120, 0.9, gamma1)
    identity = (
        math.log(model.prior0 / model.prior1)
        + ((design.beta1 - design.theta_star) / (2.0 * design.alpha)) ** 2
        - ((design.beta0 + design.theta_star) / (2.0 * design.alpha)) ** 2
    )
    assert abs(identity) <= 1e-9


def test_inadmissible_fixed_point_records_are_rejected():
    # Genuine solver output always has a positive margin; the record type
    # still refuses forged values so downstream code can trust the fields.
    from hdqda.rmt import DeterministicEquivalents

    with pytest.raises(StabilityError):
        DeterministicEquivalents(
            delta=1.0, T=np.eye(2), phi=10.0, phi_tilde=1.0, gamma=1.0, n=4
        )
    with pytest.raises(StabilityError):
        DeterministicEquivalents(
            delta=-0.5, T=np.eye(2), phi=0.1, phi_tilde=1.0, gamma=1.0, n=4
        )
    with pytest.raises(InvalidRegularizerError):
        DeterministicEquivalents(
            delta=0.5, T=np.eye(2), phi=0.1, phi_tilde=1.0, gamma=-1.0, n=4
        )
