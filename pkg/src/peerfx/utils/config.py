"""
Layered configuration loading for peerfx
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from ..models.config import ConfigPaths, RunConfig
from .error_handling import ConfigurationError

logger = logging.getLogger(__name__)


class ConfigManager:
    """Builds a RunConfig from default.yaml, user config.yaml, local.yaml, an explicit file and overrides.

    Every layer deep-merges over the previous one. A layer that cannot be read or
    parsed is an error; a run never falls back to defaults silently.
    """

    def __init__(self, config_dir: Optional[Path] = None, config_file: Optional[Path] = None,
                 default_file: Optional[Path] = None):
        self.config_paths = ConfigPaths(config_dir)
        self.config_file = Path(config_file) if config_file else None
        self.default_file = Path(default_file) if default_file else self._get_default_config_file()
        self.loaded_layers: List[str] = []

    def _get_default_config_file(self) -> Path:
        """Packaged config/default.yaml next to the src directory"""
        return Path(__file__).resolve().parent.parent.parent.parent / "config" / "default.yaml"

    def _read_layer(self, path: Path, required: bool = False) -> Dict[str, Any]:
        if not path.exists():
            if required:
                raise ConfigurationError(f"Configuration file not found: {path}")
            return {}
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigurationError(f"YAML syntax error in {path}: {e}") from None
        except OSError as e:
            raise ConfigurationError(f"Could not read {path}: {e}") from None
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigurationError(f"Configuration in {path} must be a mapping")
        self.loaded_layers.append(str(path))
        logger.debug("Loaded configuration layer %s", path)
        return data

    def _deep_merge(self, base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
        """Deep merge two dictionaries"""
        result = base.copy()

        for key, value in override.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                result[key] = self._deep_merge(result[key], value)
            else:
                result[key] = value

        return result

    def merged_data(self, overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        self.loaded_layers = []
        merged = self._read_layer(self.default_file)
        merged = self._deep_merge(merged, self._read_layer(self.config_paths.user_config_file))
        merged = self._deep_merge(merged, self._read_layer(self.config_paths.local_config_file))
        if self.config_file is not None:
            merged = self._deep_merge(merged, self._read_layer(self.config_file, required=True))
        if overrides:
            merged = self._deep_merge(merged, {k: v for k, v in overrides.items() if v is not None})
        return merged

    def load(self, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
        """Resolve every layer into a validated RunConfig"""
        return RunConfig.from_dict(self.merged_data(overrides))

    def validate_config_file(self, file_path: Path) -> Optional[str]:
        """None when the file parses into a valid configuration, otherwise the error message"""
        try:
            RunConfig.from_dict(self._read_layer(Path(file_path), required=True))
        except ConfigurationError as e:
            return str(e)
        return None
