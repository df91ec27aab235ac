"""Tests for run settings loading."""

import pytest

import config
from errors import ConfigError


def _write(tmp_path, text):
    path = tmp_path / "etroll.yaml"
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_defaults_without_a_file(monkeypatch):
    monkeypatch.delenv(config.CONFIG_ENV_VAR, raising=False)
    assert config.load_settings() == config.Settings()


def test_yaml_overrides_single_keys(tmp_path):
    settings = config.load_settings(_write(tmp_path, "procedure:\n  finger_speed_deg_s: 12.0\nsensor:\n  active: [1, 11]\n"))
    assert settings.procedure.finger_speed_deg_s == 12.0
    assert settings.procedure.sample_rate == config.SAMPLE_RATE_HZ
    assert settings.sensor.active == (1, 11)
    assert settings.sensor == config.SensorSettings()


def test_environment_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv(config.CONFIG_ENV_VAR, _write(tmp_path, "controller:\n  gain: 0.5\n"))
    assert config.load_settings().controller.gain == 0.5


@pytest.mark.parametrize("text", [
    "procedure:\n  warp_speed: 9\n",
    "telemetry:\n  enabled: true\n",
    "procedure: 12\n",
    "- just\n- a list\n",
    "procedure: [unclosed\n",
])
def test_bad_config_files(tmp_path, text):
    with pytest.raises(ConfigError):
        config.load_settings(_write(tmp_path, text))


def test_missing_file():
    with pytest.raises(ConfigError):
        config.load_settings("/nonexistent/etroll.yaml")


def test_hash_tracks_settings(tmp_path):
    default = config.Settings()
    assert default.config_hash() == config.Settings().config_hash()
    assert config.load_settings(_write(tmp_path, "sensor:\n  active: [1, 11]\n")).config_hash() == default.config_hash()
    changed = config.load_settings(_write(tmp_path, "sensor:\n  noise_sigma: 0.02\n"))
    assert changed.config_hash() != default.config_hash()
