"""
Logging for the KCR toolkit.

Loggers are configured from ``src/config/logging_config.yaml``, which holds
one YAML document per environment (dev, test, prod). Each library area
(geometry, assignment, losses, evaluation, dataio, simulator, cli) has a
module section that can override the global level and handler list.

Console output always goes to stderr so JSON written by the CLI on stdout
stays clean.
"""

import logging
import logging.handlers
import sys
import threading
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from src.core.exceptions import ConfigError


# =============================================================================
# ENVIRONMENT AND CONFIGURATION
# =============================================================================

class Environment(Enum):
    """Supported logging environments."""
    DEV = "dev"
    TEST = "test"
    PROD = "prod"


class LoggingConfig:
    """Loads and caches the per-environment logging configuration."""

    DEFAULT_CONFIG_DIR = Path(__file__).resolve().parent.parent / "config"
    CONFIG_FILE_NAME = "logging_config.yaml"

    _config_cache: Dict[str, Dict[str, Any]] = {}
    _cache_lock = threading.Lock()

    @classmethod
    def load_config(cls, environment: Environment, config_dir: Optional[str] = None) -> Dict[str, Any]:
        """
        Load logging configuration for an environment.

        Args:
            environment: Target environment
            config_dir: Directory holding logging_config.yaml (package config dir if None)

        Returns:
            The environment's configuration dictionary

        Raises:
            ConfigError: If the file is missing, not valid YAML, or lacks required sections
        """
        config_path = Path(config_dir) if config_dir else cls.DEFAULT_CONFIG_DIR
        config_path = config_path / cls.CONFIG_FILE_NAME
        config_key = f"{environment.value}_{config_path}"

        with cls._cache_lock:
            if config_key in cls._config_cache:
                return cls._config_cache[config_key]

        try:
            with open(config_path, "r", encoding="utf-8") as f:
                all_configs = [doc for doc in yaml.safe_load_all(f) if doc]
        except FileNotFoundError:
            raise ConfigError(f"Logging configuration file not found: {config_path}")
        except yaml.YAMLError as e:
            raise ConfigError(f"Invalid YAML in logging configuration: {e}")

        config = cls._find_environment_config(all_configs, environment)
        cls._validate_config(config)

        with cls._cache_lock:
            cls._config_cache[config_key] = config
        return config

    @classmethod
    def _find_environment_config(cls, all_configs: List[Dict[str, Any]], environment: Environment) -> Dict[str, Any]:
        if not all_configs:
            raise ConfigError("No configuration found in logging YAML file")

        for config_doc in all_configs:
            if environment.value in config_doc:
                return config_doc[environment.value]

        available = [key for doc in all_configs for key in doc.keys()]
        raise ConfigError(
            f"Environment '{environment.value}' not found in logging configuration. Available: {available}"
        )

    @classmethod
    def _validate_config(cls, config: Dict[str, Any]) -> None:
        if "logging" not in config:
            raise ConfigError("Logging configuration must contain a 'logging' section")
        for section in ("global", "handlers"):
            if section not in config["logging"]:
                raise ConfigError(f"Logging configuration must contain a '{section}' section")

    @classmethod
    def get_module_config(cls, config: Dict[str, Any], module_name: str) -> Dict[str, Any]:
        return config.get("logging", {}).get("modules", {}).get(module_name, {}) or {}


# =============================================================================
# CONFIGURED LOGGER
# =============================================================================

class StderrHandler(logging.StreamHandler):
    """Console handler that writes to whatever sys.stderr is when a record is emitted."""

    @property
    def stream(self):
        return sys.stderr

    @stream.setter
    def stream(self, value):
        pass


class KcrLogger:
    """
    Thin wrapper over ``logging.Logger`` configured from the YAML sections.

    Args:
        name: Logger name (component or class name)
        module_name: Module section used for overrides
        environment: Target environment
        config_dir: Configuration directory
        level_override: Forces the logger and console handler level (``-v``)
    """

    def __init__(self,
                 name: str,
                 module_name: str,
                 environment: Environment = Environment.PROD,
                 config_dir: Optional[str] = None,
                 level_override: Optional[int] = None):
        self.name = name
        self.module_name = module_name
        self.environment = environment
        self.level_override = level_override
        self.config = LoggingConfig.load_config(environment, config_dir)

        self._logger = logging.getLogger(f"kcr.{module_name}.{name}")
        self._configure_logger()

    def _configure_logger(self) -> None:
        # Reconfiguring after an environment switch must not stack handlers
        for handler in list(self._logger.handlers):
            self._logger.removeHandler(handler)
            handler.close()

        global_config = self.config["logging"]["global"]
        module_config = LoggingConfig.get_module_config(self.config, self.module_name)
        effective = {**global_config, **module_config}

        level = self._parse_log_level(effective.get("level", "INFO"))
        if self.level_override is not None:
            level = min(level, self.level_override)
        self._logger.setLevel(level)

        for handler_name in effective.get("handlers", ["console"]):
            handler = self._create_handler(handler_name)
            if handler:
                self._logger.addHandler(handler)

        self._logger.propagate = False

    @staticmethod
    def _parse_log_level(level_str: str) -> int:
        level_map = {
            "DEBUG": logging.DEBUG,
            "INFO": logging.INFO,
            "WARNING": logging.WARNING,
            "ERROR": logging.ERROR,
            "CRITICAL": logging.CRITICAL,
        }
        return level_map.get(str(level_str).upper(), logging.INFO)

    def _create_handler(self, handler_name: str) -> Optional[logging.Handler]:
        handler_config = self.config["logging"].get("handlers", {}).get(handler_name, {}) or {}
        if not handler_config.get("enabled", False):
            return None

        if handler_name == "console":
            handler: logging.Handler = StderrHandler()
        else:
            handler = self._create_file_handler(handler_config)

        level = self._parse_log_level(handler_config.get("level", "INFO"))
        if handler_name == "console" and self.level_override is not None:
            level = min(level, self.level_override)
        handler.setLevel(level)

        format_str = handler_config.get("format", "%(name)s - %(levelname)s - %(message)s")
        date_format = handler_config.get("date_format", "%Y-%m-%d %H:%M:%S")
        handler.setFormatter(logging.Formatter(format_str, date_format))
        return handler

    def _create_file_handler(self, handler_config: Dict[str, Any]) -> logging.Handler:
        log_path = Path(handler_config.get("path", "logs/kcr.log"))
        log_path.parent.mkdir(parents=True, exist_ok=True)
        return logging.handlers.RotatingFileHandler(
            log_path,
            maxBytes=parse_file_size(handler_config.get("max_size", "10MB")),
            backupCount=handler_config.get("backup_count", 5),
            encoding="utf-8",
        )

    def isEnabledFor(self, level: int) -> bool:
        return self._logger.isEnabledFor(level)

    def debug(self, message: str, *args, **kwargs) -> None:
        self._logger.debug(message, *args, **kwargs)

    def info(self, message: str, *args, **kwargs) -> None:
        self._logger.info(message, *args, **kwargs)

    def warning(self, message: str, *args, **kwargs) -> None:
        self._logger.warning(message, *args, **kwargs)

    def error(self, message: str, *args, **kwargs) -> None:
        self._logger.error(message, *args, **kwargs)

    def exception(self, message: str, *args, **kwargs) -> None:
        self._logger.exception(message, *args, **kwargs)


def parse_file_size(size_str: str) -> int:
    """
    Parse a size such as '10MB' or '512' (bytes) into bytes.

    Examples:
        >>> parse_file_size("1KB")
        1024
    """
    text = str(size_str).upper().strip()
    for suffix, multiplier in (("GB", 1024 ** 3), ("MB", 1024 ** 2), ("KB", 1024), ("B", 1)):
        if text.endswith(suffix):
            text = text[:-len(suffix)].strip()
            break
    else:
        multiplier = 1
    try:
        return int(float(text) * multiplier)
    except ValueError:
        raise ConfigError(f"Invalid size format: '{size_str}'. Expected '<number><unit>' such as '10MB'")


# =============================================================================
# LOGGER FACTORY
# =============================================================================

class LoggerFactory:
    """Creates and caches loggers for the current global environment."""

    _current_environment = Environment.PROD
    _config_dir: Optional[str] = None
    _level_override: Optional[int] = None
    _logger_cache: Dict[str, KcrLogger] = {}
    _cache_lock = threading.Lock()

    @classmethod
    def set_environment(cls, environment: Environment) -> None:
        cls._current_environment = environment
        cls._reconfigure_cached()

    @classmethod
    def set_config_directory(cls, config_dir: Optional[str]) -> None:
        cls._config_dir = config_dir
        cls._reconfigure_cached()

    @classmethod
    def set_verbosity(cls, verbose: int) -> None:
        """Map ``-v`` counts to a level override: 0 none, 1 INFO, 2+ DEBUG."""
        if verbose <= 0:
            cls._level_override = None
        elif verbose == 1:
            cls._level_override = logging.INFO
        else:
            cls._level_override = logging.DEBUG
        cls._reconfigure_cached()

    @classmethod
    def create_logger(cls, name: str, module_name: str) -> KcrLogger:
        """
        Create (or fetch) the logger for a component.

        Args:
            name: Logger name, usually the class or function name
            module_name: Module section in logging_config.yaml

        Returns:
            Configured KcrLogger
        """
        cache_key = f"{module_name}.{name}"
        with cls._cache_lock:
            if cache_key in cls._logger_cache:
                return cls._logger_cache[cache_key]

        logger = KcrLogger(
            name=name,
            module_name=module_name,
            environment=cls._current_environment,
            config_dir=cls._config_dir,
            level_override=cls._level_override,
        )
        with cls._cache_lock:
            cls._logger_cache[cache_key] = logger
        return logger

    @classmethod
    def _reconfigure_cached(cls) -> None:
        # Module-level loggers are created at import time, so they are
        # reconfigured in place rather than dropped from the cache
        with cls._cache_lock:
            loggers = list(cls._logger_cache.values())
        for logger in loggers:
            logger.environment = cls._current_environment
            logger.level_override = cls._level_override
            logger.config = LoggingConfig.load_config(cls._current_environment, cls._config_dir)
            logger._configure_logger()

    @classmethod
    def configure_for_testing(cls) -> None:
        cls.set_environment(Environment.TEST)


# =============================================================================
# CONVENIENCE FUNCTIONS
# =============================================================================

def get_logger(name: str, module_name: str) -> KcrLogger:
    """
    Convenience function to create a logger.

    Args:
        name: Logger name
        module_name: Module section for configuration

    Examples:
        >>> log = get_logger(__name__, module_name="geometry")
        >>> log.debug("clipped %d vertices", 6)
    """
    return LoggerFactory.create_logger(name, module_name=module_name)


def set_global_environment(environment: str) -> None:
    """Set the global logging environment from its name ('dev', 'test' or 'prod')."""
    try:
        env = Environment(environment.lower())
    except ValueError:
        raise ConfigError(f"Unknown environment: {environment}. Supported: {[e.value for e in Environment]}")
    LoggerFactory.set_environment(env)
