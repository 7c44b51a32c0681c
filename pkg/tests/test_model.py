import numpy as np
import pytest

from hdqda.errors import NotSpdError
from hdqda.model import (
    ClassStatistics,
    MixtureModel,
    ScenarioConfig,
    build_mixture,
    make_spiked_covariance,
    sample_class,
    sample_scenario,
    stream,
    validate_assumptions,
)

from conftest import small_config


def test_scenario_config_rejects_bad_sizes():
    with pytest.raises(ValueError):
        small_config(p=0)
    with pytest.raises(ValueError):
        small_config(n0=1)
    with pytest.raises(ValueError):
        small_config(n1=1)
    with pytest.raises(ValueError):
        small_config(test0=0)


def test_scenario_config_default_spike_rank_scales_with_sqrt_p():
    assert small_config(p=100).spike_rank == 10
    assert small_config(p=101).spike_rank == 11
    assert small_config(p=1).spike_rank == 1


def test_scenario_config_json_round_trip():
    config = small_config(seed=9, spike_rank=3)
    again = ScenarioConfig.from_json(config.to_json())
    assert again == config


def test_scenario_config_from_json_rejects_unknown_and_missing_fields():
    config = small_config()
    import json

    payload = json.loads(config.to_json())
    payload["bogus"] = 1
    with pytest.raises(ValueError, match="unknown"):
        ScenarioConfig.from_json(json.dumps(payload))
    del payload["bogus"]
    del payload["p"]
    with pytest.raises(ValueError, match="missing"):
        ScenarioConfig.from_json(json.dumps(payload))


def test_spiked_covariance_eigenvalues_are_exactly_two_levels():
    p, rank = 30, 4
    sigma = make_spiked_covariance(2.0, 5.0, rank, p, seed=1)
    eigs = np.sort(np.linalg.eigvalsh(sigma))
    np.testing.assert_allclose(eigs[: p - rank], 2.0, atol=1e-10)
    np.testing.assert_allclose(eigs[p - rank :], 7.0, atol=1e-10)
    np.testing.assert_allclose(sigma, sigma.T, atol=0)


def test_spiked_covariance_deterministic_in_seed():
    a = make_spiked_covariance(1.0, 3.0, 5, 40, seed=7)
    b = make_spiked_covariance(1.0, 3.0, 5, 40, seed=7)
    c = make_spiked_covariance(1.0, 3.0, 5, 40, seed=8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_spiked_covariance_zero_rank_is_isotropic():
    sigma = make_spiked_covariance(3.0, 5.0, 0, 12, seed=0)
    np.testing.assert_array_equal(sigma, 3.0 * np.eye(12))


def test_spiked_covariance_rejects_indefinite_scales():
    with pytest.raises(NotSpdError):
        make_spiked_covariance(1.0, -2.0, 3, 10, seed=0)
    with pytest.raises(ValueError):
        make_spiked_covariance(1.0, 1.0, 11, 10, seed=0)


def test_class_statistics_validation():
    with pytest.raises(NotSpdError):
        ClassStatistics(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(NotSpdError):
        ClassStatistics(np.zeros(2), -np.eye(2))
    with pytest.raises(ValueError):
        ClassStatistics(np.zeros(3), np.eye(2))


def test_mixture_model_validation_and_swap():
    stats2 = ClassStatistics(np.zeros(2), np.eye(2))
    stats3 = ClassStatistics(np.zeros(3), np.eye(3))
    with pytest.raises(ValueError):
        MixtureModel(stats2, stats3, 0.5, 0.5)
    with pytest.raises(ValueError):
        MixtureModel(stats2, stats2, 0.7, 0.7)
    model = MixtureModel(stats2, ClassStatistics(np.ones(2), 2.0 * np.eye(2)), 0.25, 0.75)
    back = model.swapped().swapped()
    assert back.prior0 == model.prior0
    assert np.array_equal(back.class0.mean, model.class0.mean)
    assert model.swapped().prior0 == 0.75


def test_build_mixture_places_means_and_priors():
    config = small_config(p=16, mean_offset=2.0, prior0=0.3)
    model = build_mixture(config)
    assert model.prior1 == pytest.approx(0.7)
    np.testing.assert_array_equal(model.class0.mean, np.zeros(16))
    np.testing.assert_allclose(model.class1.mean, 0.5 * np.ones(16))
    np.testing.assert_array_equal(model.class0.covariance, 4.0 * np.eye(16))


def test_stream_reproducible_and_key_separated():
    a = stream(5, 1, 2).standard_normal(4)
    b = stream(5, 1, 2).standard_normal(4)
    c = stream(5, 1, 3).standard_normal(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sample_class_shape_and_law():
    stats = ClassStatistics(np.array([1.0, -2.0]), np.array([[2.0, 0.6], [0.6, 1.0]]))
    X = sample_class(stats, 200_000, stream(0, 0))
    assert X.shape == (200_000, 2)
    np.testing.assert_allclose(X.mean(axis=0), stats.mean, atol=0.02)
    np.testing.assert_allclose(np.cov(X, rowvar=False), stats.covariance, atol=0.03)


def test_sample_scenario_replicates_are_reproducible_and_distinct():
    config = small_config(seed=3)
    model = build_mixture(config)
    a = sample_scenario(config, model=model, replicate=2)
    b = sample_scenario(config, model=model, replicate=2)
    c = sample_scenario(config, model=model, replicate=3)
    np.testing.assert_array_equal(a.train0, b.train0)
    np.testing.assert_array_equal(a.test1, b.test1)
    assert not np.array_equal(a.train0, c.train0)
    assert a.train0.shape == (config.n0, config.p)
    assert a.test1.shape == (config.test1, config.p)


def test_validate_assumptions_counts_spike_rank():
    config = small_config(p=64, spike_rank=6, spike_strength=5.0)
    model = build_mixture(config)
    report = validate_assumptions(model, config.n0, config.n1)
    assert report.covariance_gap_eigencount == 6
    assert report.dim_to_samples == pytest.approx(64 / 60)
    assert report.class_ratio == pytest.approx(2.0)
