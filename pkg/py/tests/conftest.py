import pytest

from jcdm.config import ModelParams
from jcdm.spectra import solve


@pytest.fixture(scope="session")
def strong() -> ModelParams:
    """Deep separatrix regime, J/g' = 1/4."""
    return ModelParams.from_ratio(N=100, J=1.0, J_over_gprime=0.25)


@pytest.fixture(scope="session")
def strong_solution(strong):
    return solve(strong)


@pytest.fixture(scope="session")
def portrait() -> ModelParams:
    return ModelParams.from_ratio(N=100, J=1.0, J_over_gprime=1.0 / 3.0)


@pytest.fixture(scope="session")
def portrait_solution(portrait):
    return solve(portrait)


@pytest.fixture
def clean_env(monkeypatch, tmp_path):
    """No stray .env or JCDM_* variables; quiet command log."""
    for name in ("JCDM_THREADS", "JCDM_LOG_LEVEL", "JCDM_COMMAND_LOG"):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.setenv("JCDM_COMMAND_LOG", "0")
    monkeypatch.chdir(tmp_path)
    return tmp_path
