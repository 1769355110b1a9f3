import pytest

from critique_rl.data import GeneratorConfig, generate_environment


@pytest.fixture(scope="session")
def small_env():
    return generate_environment(GeneratorConfig(universe_size=4, n_samples=24), seed=3)
