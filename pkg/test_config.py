"""
Unit tests for configuration loading.

Validates:
- Defaults when no YAML file exists
- YAML values and environment overrides (environment wins)
- Validation of grid densities, levels and thread counts
- ordered_map keeps input order on any pool size
"""

import logging
import threading

import pytest
import yaml
from pydantic import ValidationError

from config import CcmConfig, ConfigLoader, GridConfig, RuntimeConfig, get_config, ordered_map, reset_config

logger = logging.getLogger(__name__)


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ConfigLoader.ENV_OVERRIDES:
        monkeypatch.delenv(name, raising=False)
    monkeypatch.delenv("CCM_CONFIG_PATH", raising=False)
    reset_config()
    yield
    reset_config()


@pytest.fixture
def yaml_file(tmp_path):
    path = tmp_path / "ccm.yaml"
    path.write_text(yaml.safe_dump({
        "grids": {"alpha_steps": 301, "dmc_grid_steps": 8},
        "runtime": {"threads": 2, "log_level": "debug"},
        "acceptance": {"oracle_draws": 50},
    }))
    return path


class TestLoading:
    """Source priority."""

    def test_defaults_without_file(self, tmp_path):
        config = ConfigLoader(str(tmp_path / "missing.yaml"), load_env_file=False).get()
        assert config.grids.alpha_steps == 1001
        assert config.acceptance.gap_bound_bits == 1.87
        assert config.acceptance.seed == 20110501
        assert config.runtime.threads == 1

    def test_yaml_values(self, yaml_file):
        config = ConfigLoader(str(yaml_file), load_env_file=False).get()
        assert config.grids.alpha_steps == 301
        assert config.grids.tau_steps == 1001
        assert config.runtime.log_level == "DEBUG"
        assert config.acceptance.oracle_draws == 50

    def test_env_overrides_yaml(self, yaml_file, monkeypatch):
        monkeypatch.setenv("CCM_THREADS", "6")
        monkeypatch.setenv("CCM_ALPHA_STEPS", "51")
        config = ConfigLoader(str(yaml_file), load_env_file=False).get()
        assert config.runtime.threads == 6
        assert config.grids.alpha_steps == 51
        assert config.grids.dmc_grid_steps == 8
        logger.info("✅ Environment overrides YAML")

    def test_bad_env_value(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CCM_THREADS", "many")
        with pytest.raises(ValueError, match="CCM_THREADS"):
            ConfigLoader(str(tmp_path / "missing.yaml"), load_env_file=False)

    def test_config_path_from_env(self, yaml_file, monkeypatch):
        monkeypatch.setenv("CCM_CONFIG_PATH", str(yaml_file))
        assert get_config().grids.alpha_steps == 301

    def test_singleton_and_reset(self, yaml_file, tmp_path):
        first = get_config(str(yaml_file))
        assert get_config() is first
        reset_config()
        assert get_config(str(tmp_path / "missing.yaml")).grids.alpha_steps == 1001


class TestValidation:
    """Model-level checks."""

    def test_grid_density_floor(self):
        with pytest.raises(ValidationError, match="at least 2"):
            GridConfig(alpha_steps=1)

    def test_unknown_level(self):
        with pytest.raises(ValidationError, match="Unknown log level"):
            RuntimeConfig(log_level="loud")

    def test_threads_positive(self):
        with pytest.raises(ValidationError):
            RuntimeConfig(threads=0)

    def test_log_format(self):
        assert RuntimeConfig(log_format="json").log_format == "json"
        with pytest.raises(ValidationError):
            RuntimeConfig(log_format="xml")

    def test_assignment_validated(self):
        config = CcmConfig()
        with pytest.raises(ValidationError):
            config.grids.tau_steps = 0


class TestOrderedMap:
    """Thread pool helper."""

    @pytest.mark.parametrize("threads", [1, 2, 8])
    def test_order_preserved(self, threads):
        assert ordered_map(lambda x: x * x, list(range(50)), threads) == [x * x for x in range(50)]

    def test_single_thread_runs_inline(self):
        seen = set()
        lock = threading.Lock()

        def record(x):
            with lock:
                seen.add(threading.get_ident())
            return x

        assert ordered_map(record, list(range(4)), threads=1) == [0, 1, 2, 3]
        assert seen == {threading.get_ident()}

    def test_empty(self):
        assert ordered_map(lambda x: x, [], threads=4) == []
