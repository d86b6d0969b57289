#!/usr/bin/env python3
"""
Configuration Manager for the FOSI optimizer lab
Loads experiment spec files, merges them over defaults and validates them
"""

import copy
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

from pydantic import ValidationError

from core.exceptions import InvalidArgumentsError
from models.experiment_models import ExperimentSpec


class ConfigManager:
    """Experiment spec loading with default merging and validation"""

    def __init__(self, config_file: Optional[Union[str, Path]] = None,
                 data: Optional[Dict[str, Any]] = None):
        self.config_file = Path(config_file) if config_file is not None else None
        self.logger = logging.getLogger(__name__)
        self._default_config = self._get_default_config()
        self._config_data: Dict[str, Any] = {}

        if data is not None:
            self._config_data = self._merge_configs(self._default_config, data)
        else:
            self.load_config()

    def _get_default_config(self) -> Dict[str, Any]:
        """Get default configuration"""
        return {
            "name": "experiment",
            "output": {
                "directory": "results",
                "record_every": 1,
                "record_timing": False,
                "max_workers": None,
                "plot": False,
            },
            "summary": {
                "threshold": "baseline_best",
                "baseline": None,
            },
        }

    def load_config(self):
        """Load configuration from file"""
        if self.config_file is None:
            raise InvalidArgumentsError("No spec file given")
        try:
            with open(self.config_file, 'r', encoding='utf-8') as f:
                file_config = json.load(f)
        except FileNotFoundError as e:
            raise InvalidArgumentsError(f"Spec file not found: {self.config_file}") from e
        except json.JSONDecodeError as e:
            self.logger.error(f"Error loading spec {self.config_file}: {e}")
            raise InvalidArgumentsError(f"Spec file {self.config_file} is not valid JSON: {e}") from e

        if not isinstance(file_config, dict):
            raise InvalidArgumentsError(f"Spec file {self.config_file} must hold a JSON object")

        # Merge with defaults
        self._config_data = self._merge_configs(self._default_config, file_config)
        self.logger.debug(f"Loaded spec {self.config_file}")

    def _merge_configs(self, default: Dict, user: Dict) -> Dict:
        """Merge user config with default config"""
        result = copy.deepcopy(default)

        for key, value in user.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                result[key] = self._merge_configs(result[key], value)
            else:
                result[key] = value

        return result

    def validate_config(self) -> Dict[str, str]:
        """Validate current configuration and return errors keyed by dotted field path"""
        errors = {}
        try:
            ExperimentSpec.model_validate(self._config_data)
        except ValidationError as e:
            for error in e.errors():
                path = ".".join(str(part) for part in error["loc"]) or "spec"
                errors[path] = error["msg"]
        return errors

    def to_experiment_spec(self) -> ExperimentSpec:
        """Validated experiment spec; raises InvalidArgumentsError listing every problem"""
        errors = self.validate_config()
        if errors:
            details = "; ".join(f"{path}: {msg}" for path, msg in errors.items())
            source = self.config_file or "inline spec"
            self.logger.error(f"Invalid spec {source}: {details}")
            raise InvalidArgumentsError(f"Invalid spec {source}: {details}")
        return ExperimentSpec.model_validate(self._config_data)
