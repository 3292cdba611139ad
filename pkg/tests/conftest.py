import pytest

from randpower.alloc import normal_quantile_covariate
from randpower.sim import calibrated_threshold


@pytest.fixture(scope="session")
def x26():
    return normal_quantile_covariate(26)


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    return str(tmp_path_factory.mktemp("cache"))


@pytest.fixture(scope="session")
def threshold26(cache_dir):
    # 10^6-draw calibration, computed once per test session and disk-cached
    return calibrated_threshold(26, seed=0, cache_dir=cache_dir)
