import json
import math

import pytest
from pydantic import ValidationError

from jcdm.config import LabSettings, ModelParams, RunConfig
from jcdm.errors import ConfigError


def test_scaled_and_ratio_constructors():
    p = ModelParams.from_scaled(N=400, J=1.0, g_over_Jsqrt2N=2.0)
    assert p.gprime / p.J == pytest.approx(2.0)
    q = ModelParams.from_ratio(N=100, J=0.5, J_over_gprime=0.25)
    assert q.J_over_gprime == pytest.approx(0.25)
    assert q.h == pytest.approx(0.01)


def test_with_N_keeps_scaled_coupling():
    p = ModelParams.from_ratio(N=100, J=1.0, J_over_gprime=1.0 / 3.0)
    q = p.with_N(20)
    assert q.N == 20
    assert q.gprime == pytest.approx(p.gprime)


def test_params_are_frozen_and_validated():
    p = ModelParams(N=2, g=1.0, J=1.0)
    with pytest.raises(ValidationError):
        p.N = 3
    with pytest.raises(ValidationError):
        ModelParams(N=0, g=1.0, J=1.0)
    with pytest.raises(ValidationError):
        ModelParams(N=2, g=-1.0, J=1.0)
    with pytest.raises(ValidationError):
        ModelParams(N=2, g=math.inf, J=1.0)


def test_ratio_must_be_positive():
    with pytest.raises(ConfigError):
        ModelParams.from_ratio(N=10, J=1.0, J_over_gprime=0.0)


def test_zero_coupling_ratio_is_infinite():
    assert ModelParams(N=4, g=0.0, J=1.0).J_over_gprime == math.inf


def test_settings_from_environment(clean_env, monkeypatch):
    monkeypatch.setenv("JCDM_THREADS", "4")
    monkeypatch.setenv("JCDM_COMMAND_LOG", "0")
    settings = LabSettings.from_env()
    assert settings.threads == 4
    assert settings.command_log is False


def test_settings_from_dotenv(clean_env, monkeypatch):
    monkeypatch.delenv("JCDM_COMMAND_LOG")
    (clean_env / ".env").write_text("JCDM_THREADS=3\nJCDM_LOG_LEVEL=INFO\n")
    settings = LabSettings.from_env()
    assert settings.threads == 3
    assert settings.log_level == "INFO"


def test_invalid_settings_raise_config_error(clean_env, monkeypatch):
    monkeypatch.setenv("JCDM_THREADS", "0")
    with pytest.raises(ConfigError):
        LabSettings.from_env()


def test_manifest_round_trip(tmp_path):
    config = RunConfig(command="dos", params=ModelParams(N=8, g=1.5, J=0.5),
                       options={"bins": 20}, out=str(tmp_path / "o"), threads=2)
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"config": config.to_manifest()}))
    assert RunConfig.from_manifest(path) == config


def test_manifest_errors(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.from_manifest(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"versions": {}}))
    with pytest.raises(ConfigError):
        RunConfig.from_manifest(bad)
    invalid = tmp_path / "invalid.json"
    invalid.write_text(json.dumps({"config": {"command": "dos", "threads": 0}}))
    with pytest.raises(ConfigError):
        RunConfig.from_manifest(invalid)


def test_manifest_rejects_unknown_fields(tmp_path):
    stale = tmp_path / "stale.json"
    stale.write_text(json.dumps({"config": {"command": "dos", "seed": 7}}))
    with pytest.raises(ConfigError):
        RunConfig.from_manifest(stale)
    assert "seed" not in RunConfig(command="dos").to_manifest()
