import numpy as np
import pytest

from hdqda.estimation import TrainingSet
from hdqda.model import ScenarioConfig, build_mixture, sample_scenario


def small_config(**overrides) -> ScenarioConfig:
    """Fast desk scenario; override any field for a variant."""
    values = dict(
        p=24,
        n0=40,
        n1=20,
        test0=50,
        test1=25,
        base_scale=4.0,
        spike_strength=3.0,
        spike_rank=None,
        mean_offset=3.0,
        prior0=2.0 / 3.0,
        seed=0,
    )
    values.update(overrides)
    return ScenarioConfig(**values)


@pytest.fixture
def small_scenario():
    config = small_config()
    model = build_mixture(config)
    data = sample_scenario(config, model=model)
    return config, model, data


@pytest.fixture
def small_train(small_scenario):
    _, _, data = small_scenario
    return TrainingSet(X0=data.train0, X1=data.train1)


def random_spd(p: int, rng: np.random.Generator) -> np.ndarray:
    """Random SPD matrix with eigenvalues bounded away from zero."""
    g = rng.standard_normal((p, p))
    q, _ = np.linalg.qr(g)
    eigs = rng.uniform(0.5, 5.0, size=p)
    return (q * eigs) @ q.T
