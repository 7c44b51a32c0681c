import numpy as np
import pytest

from hdqda.errors import DegenerateEstimateError, TuningError
from hdqda.estimation import TrainingSet
from hdqda.gestim import theta_hat
from hdqda.model import build_mixture, sample_scenario
from hdqda.pipeline import (
    ImprovedModel,
    default_grid,
    fit_improved,
    tune_gamma0,
)

from conftest import small_config


@pytest.fixture
def majority_first_train():
    config = small_config(p=20, n0=40, n1=20, seed=1)
    data = sample_scenario(config, model=build_mixture(config))
    return TrainingSet(X0=data.train0, X1=data.train1), data


def test_default_grid_shape():
    grid = default_grid()
    assert grid.shape == (25,)
    assert grid[0] == pytest.approx(1e-2) and grid[-1] == pytest.approx(1e2)


def test_fit_improved_reorients_the_majority_class(majority_first_train):
    train, _ = majority_first_train
    model = fit_improved(train, 1.0, priors=(2.0 / 3.0, 1.0 / 3.0))
    assert model.label_map == (1, 0)
    assert model.fit.n0 == train.n1 and model.fit.n1 == train.n0
    # Caller priors follow the caller's labels, so they swap with the data.
    assert model.priors == (1.0 / 3.0, 2.0 / 3.0)
    assert model.trace == ()
    predictions = np.unique(model.predict(train.X0))
    assert set(predictions).issubset({0, 1})


def test_fit_improved_keeps_canonical_input_as_is(majority_first_train):
    train, _ = majority_first_train
    model = fit_improved(train.swapped(), 1.0, priors=(1.0 / 3.0, 2.0 / 3.0))
    assert model.label_map == (0, 1)
    assert model.fit.n0 == train.n1


def test_fit_improved_predicts_in_caller_labels(majority_first_train):
    train, data = majority_first_train
    flipped = fit_improved(train, 0.8, priors=(2.0 / 3.0, 1.0 / 3.0))
    straight = fit_improved(train.swapped(), 0.8, priors=(1.0 / 3.0, 2.0 / 3.0))
    # Same data under both labelings: predictions must agree after relabeling.
    np.testing.assert_array_equal(
        flipped.predict(data.test0), 1 - straight.predict(data.test0)
    )


def test_fit_improved_uses_matched_shrinkage_and_estimated_bias(majority_first_train):
    train, _ = majority_first_train
    model = fit_improved(train, 1.2, priors=(2.0 / 3.0, 1.0 / 3.0))
    assert model.fit.gamma0 == 1.2
    assert 0.0 < model.fit.gamma1 <= 1.2
    bias = theta_hat(model.fit, model.priors)
    assert model.theta == bias.theta_hat


def test_fit_improved_rejects_nonpositive_shrinkage(majority_first_train):
    train, _ = majority_first_train
    with pytest.raises(ValueError):
        fit_improved(train, 0.0)
    with pytest.raises(ValueError):
        fit_improved(train, 1.0, priors=(0.0, 1.0))


def test_tuning_picks_the_estimated_minimum(majority_first_train):
    train, _ = majority_first_train
    canonical = train.swapped()
    grid = np.logspace(-1, 1, 7)
    result = tune_gamma0(canonical, grid=grid)
    assert len(result.entries) == 7
    successes = [e for e in result.entries if e.failure is None]
    assert successes
    best = min(successes, key=lambda e: e.total_hat)
    assert result.gamma0 == best.gamma0
    chosen = [e for e in result.entries if e.gamma0 == result.gamma0][0]
    assert chosen.total_hat == best.total_hat


def test_tuning_requires_canonical_orientation(majority_first_train):
    train, _ = majority_first_train
    with pytest.raises(ValueError, match="minority class first"):
        tune_gamma0(train)


def test_tuning_grid_validation(majority_first_train):
    train, _ = majority_first_train
    canonical = train.swapped()
    with pytest.raises(ValueError):
        tune_gamma0(canonical, grid=np.array([]))
    with pytest.raises(ValueError):
        tune_gamma0(canonical, grid=np.array([0.5, -1.0]))


def test_tuning_failure_entries_record_the_reason(majority_first_train, monkeypatch):
    train, _ = majority_first_train
    canonical = train.swapped()
    calls = {"count": 0}
    import hdqda.pipeline as pipeline_module

    real = pipeline_module.theta_hat

    def flaky(fit, priors):
        calls["count"] += 1
        if calls["count"] == 1:
            raise DegenerateEstimateError("synthetic failure for the first candidate")
        return real(fit, priors)

    monkeypatch.setattr(pipeline_module, "theta_hat", flaky)
    result = tune_gamma0(canonical, grid=np.array([0.5, 1.0, 2.0]))
    assert result.entries[0].failure is not None
    assert "synthetic failure" in result.entries[0].failure
    assert result.entries[0].total_hat is None
    assert all(e.failure is None for e in result.entries[1:])


def test_tuning_raises_when_every_candidate_fails(majority_first_train, monkeypatch):
    train, _ = majority_first_train
    canonical = train.swapped()
    import hdqda.pipeline as pipeline_module

    def broken(fit, priors):
        raise DegenerateEstimateError("every candidate is bad")

    monkeypatch.setattr(pipeline_module, "theta_hat", broken)
    with pytest.raises(TuningError):
        tune_gamma0(canonical, grid=np.array([0.5, 1.0]))


def test_fit_improved_tunes_when_no_shrinkage_given(majority_first_train):
    train, _ = majority_first_train
    grid = np.logspace(-1, 1, 5)
    model = fit_improved(train, None, grid=grid)
    assert model.trace and len(model.trace) == 5
    assert model.fit.gamma0 in grid


def test_model_json_round_trip_preserves_predictions(majority_first_train):
    train, data = majority_first_train
    model = fit_improved(train, 1.0, priors=(2.0 / 3.0, 1.0 / 3.0))
    clone = ImprovedModel.from_json(model.to_json())
    np.testing.assert_array_equal(
        model.predict(data.test0), clone.predict(data.test0)
    )
    np.testing.assert_allclose(
        model.decision_values(data.test1), clone.decision_values(data.test1), atol=1e-10
    )
    assert clone.label_map == model.label_map
    assert clone.fit.gamma1 == model.fit.gamma1


def test_model_json_rejects_other_format_versions(majority_first_train):
    train, _ = majority_first_train
    model = fit_improved(train, 1.0)
    import json

    payload = json.loads(model.to_json())
    payload["format_version"] = 99
    with pytest.raises(ValueError, match="format"):
        ImprovedModel.from_json(json.dumps(payload))
