import importlib.resources

import pytest

from catlplus.scenario import ScenarioConfig, load_config


def _bundled(name: str) -> str:
    return (importlib.resources.files("catlplus") / "data" / name).read_text()


@pytest.fixture()
def toy_config() -> ScenarioConfig:
    return load_config(_bundled("toy.json"))


@pytest.fixture()
def earthquake_config() -> ScenarioConfig:
    return load_config(_bundled("earthquake.json"))


@pytest.fixture()
def fast_toy_config(toy_config) -> ScenarioConfig:
    cfg = toy_config.model_copy(deep=True)
    cfg.synthesis.cmaes.population = 12
    cfg.synthesis.cmaes.generations = 15
    cfg.synthesis.local.max_iterations = 25
    return cfg
