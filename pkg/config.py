"""
Configuration loader for the CIFC-CCM capacity toolkit.

Loads configuration from:
1. Environment variables (highest priority)
2. .env file (via python-dotenv)
3. YAML config file (fallback)
4. Hardcoded defaults (lowest priority)

Grid densities and tolerances live here so sweeps, tests and the CLI
agree on the same numbers.
"""

import os
import sys
import logging
from pathlib import Path
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Sequence, TypeVar

import yaml
import colorlog
from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator, ConfigDict
from pythonjsonlogger import jsonlogger


logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(name)s %(levelname)s %(message)s"

T = TypeVar("T")
Item = TypeVar("Item")


class GridConfig(BaseModel):
    """Grid densities used to approximate unions over continuous parameters."""
    model_config = ConfigDict(validate_assignment=True)

    alpha_steps: int = Field(default=1001, description="Points on the power-split grid")
    tau_steps: int = Field(default=1001, description="Points on the time-division grid")
    dmc_grid_steps: int = Field(default=16, description="Simplex grid denominator for DMC inputs")
    max_grid_points: int = Field(default=10**7, description="Enumeration guard for simplex grids")
    frontier_resolution: int = Field(default=101, description="Samples per emitted frontier")

    @field_validator("alpha_steps", "tau_steps", "frontier_resolution", "dmc_grid_steps")
    @classmethod
    def validate_density(cls, v):
        if v < 2:
            raise ValueError("Grid densities must be at least 2")
        return v


class ToleranceConfig(BaseModel):
    """Numerical tolerances, in bits unless stated otherwise."""
    containment: float = 1e-9
    gap_accuracy: float = 1e-6
    identity: float = 1e-12
    psd: float = 1e-9

    @field_validator("containment", "gap_accuracy", "identity", "psd")
    @classmethod
    def validate_nonnegative(cls, v):
        if v < 0.0:
            raise ValueError("Tolerances must be nonnegative")
        return v


class RuntimeConfig(BaseModel):
    """Process-level settings: logging, parallelism, output location."""
    model_config = ConfigDict(validate_assignment=True)

    environment: str = "development"
    log_level: str = "INFO"
    log_format: str = "color"
    log_file: Optional[str] = None
    threads: int = 1
    output_dir: str = "."

    @field_validator("log_level")
    @classmethod
    def validate_level(cls, v):
        v = v.upper()
        if v not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"Unknown log level {v}")
        return v

    @field_validator("log_format")
    @classmethod
    def validate_format(cls, v):
        if v not in ("color", "json"):
            raise ValueError("log_format must be 'color' or 'json'")
        return v

    @field_validator("threads")
    @classmethod
    def validate_threads(cls, v):
        if v < 1:
            raise ValueError("threads must be at least 1")
        return v


class AcceptanceConfig(BaseModel):
    """Bounds and randomized-suite sizes for the acceptance run."""
    gap_bound_bits: float = 1.87
    ratio_bound: float = 2.0
    ratio_slack: float = 1e-6
    regime_gap_bits: float = 1e-3
    oracle_draws: int = 1000
    pdc_draws: int = 500
    vsi_draws: int = 500
    semidet_channels: int = 20
    seed: int = 20110501


class CcmConfig(BaseModel):
    """Main toolkit configuration model."""
    model_config = ConfigDict(validate_assignment=True)

    grids: GridConfig = Field(default_factory=GridConfig)
    tolerances: ToleranceConfig = Field(default_factory=ToleranceConfig)
    runtime: RuntimeConfig = Field(default_factory=RuntimeConfig)
    acceptance: AcceptanceConfig = Field(default_factory=AcceptanceConfig)


class ConfigLoader:
    """
    Loads and manages toolkit configuration.

    Priority order:
    1. Environment variables (CCM_THREADS, CCM_LOG_LEVEL, etc.)
    2. .env file (via python-dotenv)
    3. YAML config file (ccm_config.yaml)
    4. Hardcoded defaults
    """

    ENV_OVERRIDES = {
        "CCM_ENVIRONMENT": ("runtime", "environment", str),
        "CCM_LOG_LEVEL": ("runtime", "log_level", str),
        "CCM_LOG_FORMAT": ("runtime", "log_format", str),
        "CCM_LOG_FILE": ("runtime", "log_file", str),
        "CCM_THREADS": ("runtime", "threads", int),
        "CCM_OUTPUT_DIR": ("runtime", "output_dir", str),
        "CCM_ALPHA_STEPS": ("grids", "alpha_steps", int),
        "CCM_TAU_STEPS": ("grids", "tau_steps", int),
        "CCM_DMC_GRID_STEPS": ("grids", "dmc_grid_steps", int),
    }

    def __init__(self, config_path: Optional[str] = None, load_env_file: bool = True):
        """
        Initialize config loader.

        Args:
            config_path: Path to YAML config file. Defaults to ./ccm_config.yaml
            load_env_file: Read a .env file into the environment first
        """
        if load_env_file:
            load_dotenv(override=False)
        self.config_path = config_path or os.getenv("CCM_CONFIG_PATH", "./ccm_config.yaml")
        self.config: Optional[CcmConfig] = None
        self._load()

    def _load(self) -> None:
        """Load configuration from all sources."""
        yaml_config = self._load_yaml()
        env_config = self._load_env_overrides(yaml_config)

        try:
            self.config = CcmConfig(**env_config)
            logger.debug(f"Configuration loaded from {self.config_path}")
        except Exception as e:
            logger.error(f"Failed to load configuration: {e}")
            raise

    def _load_yaml(self) -> Dict[str, Any]:
        """Load YAML configuration file."""
        config_file = Path(self.config_path)

        if not config_file.exists():
            logger.debug(f"Config file not found at {self.config_path}, using defaults")
            return self._get_defaults()

        with open(config_file, "r") as f:
            config = yaml.safe_load(f) or {}
        logger.debug(f"Loaded YAML config from {config_file}")
        return config

    def _load_env_overrides(self, base_config: Dict[str, Any]) -> Dict[str, Any]:
        """Override configuration with environment variables."""
        config = {section: dict(values or {}) for section, values in base_config.items()}

        for env_var, (section, field, cast) in self.ENV_OVERRIDES.items():
            raw = os.getenv(env_var)
            if raw is None or raw == "":
                continue
            try:
                value = cast(raw)
            except ValueError:
                raise ValueError(f"{env_var}={raw!r} is not a valid {cast.__name__}")
            config.setdefault(section, {})[field] = value

        return config

    def _get_defaults(self) -> Dict[str, Any]:
        """Return default configuration."""
        return {"grids": {}, "tolerances": {}, "runtime": {}, "acceptance": {}}

    def get(self) -> CcmConfig:
        """Get the loaded configuration."""
        if not self.config:
            raise RuntimeError("Configuration not loaded")
        return self.config


_logging_configured = False


def setup_logging(config: Optional[CcmConfig] = None, level: Optional[str] = None) -> None:
    """
    Set up logging based on configuration.

    Console output is colored by default; ``log_format: json`` switches
    the console to JSON lines. ``log_file`` always receives JSON lines.

    Args:
        config: CcmConfig object. If None, uses defaults.
        level: Explicit level overriding the configured one.
    """
    global _logging_configured
    runtime = config.runtime if config else RuntimeConfig()
    log_level = (level or runtime.log_level).upper()

    root = logging.getLogger()
    root.setLevel(getattr(logging, log_level))
    if _logging_configured:
        return

    console = logging.StreamHandler(sys.stderr)
    if runtime.log_format == "json":
        console.setFormatter(jsonlogger.JsonFormatter(LOG_FORMAT))
    else:
        console.setFormatter(colorlog.ColoredFormatter(
            "%(log_color)s%(asctime)s %(levelname)-8s%(reset)s %(name)s: %(message)s"
        ))
    root.addHandler(console)

    if runtime.log_file:
        file_handler = logging.FileHandler(runtime.log_file)
        file_handler.setFormatter(jsonlogger.JsonFormatter(LOG_FORMAT))
        root.addHandler(file_handler)

    _logging_configured = True


# Singleton instance
_config_loader: Optional[ConfigLoader] = None


def get_config(config_path: Optional[str] = None) -> CcmConfig:
    """Get or create the global config loader."""
    global _config_loader
    if _config_loader is None:
        _config_loader = ConfigLoader(config_path)
    return _config_loader.get()


def reset_config() -> None:
    """Drop the cached configuration so the next get_config() reloads it."""
    global _config_loader
    _config_loader = None


def ordered_map(fn: Callable[[Item], T], items: Sequence[Item], threads: Optional[int] = None) -> List[T]:
    """Apply fn to every item on a thread pool of runtime.threads workers; results keep input order."""
    workers = threads if threads is not None else get_config().runtime.threads
    if workers <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


if __name__ == "__main__":
    loader = ConfigLoader()
    config = loader.get()
    print("Configuration loaded successfully!")
    print(f"Alpha grid: {config.grids.alpha_steps} points")
    print(f"Threads: {config.runtime.threads}")
    print(f"Gap bound: {config.acceptance.gap_bound_bits} bits")
