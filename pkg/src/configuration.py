"""Configuration management for Foldwise."""

import logging
import os
from typing import Any, Dict

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

DEFAULTS: Dict[str, Any] = {
    'seed': 42,
    'kind': 'f64',
    'workers': 4,
    'parallel_threshold': 10_000,
    'bench_size': 1000,
    'bench_repeats': 100,
    'bench_warmup': 10,
    'output_dir': 'bench/results',
    'log_level': 'INFO',
}

# key -> (environment variable, parser)
_ENV_KEYS = {
    'seed': ('FOLDWISE_SEED', int),
    'kind': ('FOLDWISE_KIND', str),
    'workers': ('FOLDWISE_WORKERS', int),
    'parallel_threshold': ('FOLDWISE_PARALLEL_THRESHOLD', int),
    'bench_size': ('BENCH_SIZE', int),
    'bench_repeats': ('BENCH_REPEATS', int),
    'bench_warmup': ('BENCH_WARMUP', int),
    'output_dir': ('BENCH_OUTPUT_DIR', str),
    'log_level': ('FOLDWISE_LOG_LEVEL', str),
}


class Configuration:
    """Handles configuration loading from environment variables or a .env file."""

    def __init__(self, load_method: str = "auto", dotenv_path: str = None):
        """
        Initialize configuration.

        Args:
            load_method: "auto", "env", or "defaults"
            dotenv_path: explicit .env file; the default search is used when None
        """
        self.config = dict(DEFAULTS)
        self.load_method = load_method
        self.dotenv_path = dotenv_path
        self._load_configuration()
        self._validate()

    def _load_configuration(self):
        """Load configuration based on the specified method."""
        if self.load_method == "auto":
            self._auto_detect_and_load()
        elif self.load_method == "env":
            self._load_from_env()
        elif self.load_method == "defaults":
            logger.debug("Using built-in configuration defaults")
        else:
            raise ValueError("load_method must be 'auto', 'env', or 'defaults'")

    def _auto_detect_and_load(self):
        """Load from the environment when any known variable or a .env file is present."""
        found_dotenv = load_dotenv(self.dotenv_path)
        if found_dotenv or any(env in os.environ for env, _ in _ENV_KEYS.values()):
            self._load_from_env(already_loaded=True)
        else:
            logger.debug("No environment configuration found; using defaults")

    def _load_from_env(self, already_loaded: bool = False):
        """Load configuration from the process environment (and .env file)."""
        if not already_loaded:
            load_dotenv(self.dotenv_path)

        for key, (env_name, parse) in _ENV_KEYS.items():
            raw = os.getenv(env_name)
            if raw is None or raw == '':
                continue
            try:
                self.config[key] = parse(raw)
            except ValueError:
                raise ValueError(f"{env_name} must be {parse.__name__}, got {raw!r}")

        logger.debug("Configuration loaded from environment")

    def _validate(self):
        if self.config['kind'] not in ('f32', 'f64'):
            raise ValueError(f"kind must be 'f32' or 'f64', got {self.config['kind']!r}")
        if self.config['workers'] < 1:
            raise ValueError("workers must be >= 1")
        if self.config['parallel_threshold'] < 0:
            raise ValueError("parallel_threshold must be >= 0")
        if self.config['bench_size'] < 1:
            raise ValueError("bench_size must be >= 1")
        if not self.config['bench_repeats'] > self.config['bench_warmup'] >= 0:
            raise ValueError("bench_repeats must exceed bench_warmup, which must be >= 0")

    def get(self, key: str, default: Any = None) -> Any:
        """Get a configuration value."""
        return self.config.get(key, default)

    def get_bench_config(self) -> Dict[str, Any]:
        """Get benchmark configuration."""
        return {
            'size': self.config['bench_size'],
            'repeats': self.config['bench_repeats'],
            'warmup': self.config['bench_warmup'],
            'seed': self.config['seed'],
            'output_dir': self.config['output_dir'],
        }

    def get_engine_config(self) -> Dict[str, Any]:
        """Get parallel engine configuration."""
        return {
            'workers': self.config['workers'],
            'threshold': self.config['parallel_threshold'],
        }

    def update_config(self, key: str, value: Any):
        """Update a configuration value."""
        self.config[key] = value
        self._validate()
        logger.debug("Updated %s in configuration", key)

    def get_all_config(self) -> Dict[str, Any]:
        """Get a copy of the entire configuration dictionary."""
        return self.config.copy()

    def print_config_summary(self):
        """Print a summary of the current configuration."""
        print("\n📋 Configuration Summary:")
        print("=" * 40)
        for key, value in self.config.items():
            print(f"  {key}: {value}")
        print("=" * 40)

    def __str__(self) -> str:
        return (f"Configuration(kind={self.config['kind']}, seed={self.config['seed']}, "
                f"workers={self.config['workers']})")
