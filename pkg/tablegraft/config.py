from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from pydantic import ValidationError

from tablegraft.dto.config import PipelineConfig
from tablegraft.errors import ConfigError
from tablegraft.utils import deserialize


logger = logging.getLogger(__name__)

# flag name -> dotted config path
FLAG_PATHS = {
    "seed": "seed",
    "out": "output_dir",
    "dataset": "dataset.path",
    "alpha": "scoring.alpha",
    "beta": "scoring.beta",
    "ell": "subtables.ell",
    "method": "subtables.method",
    "topk": "similarity.k",
    "theta": "similarity.theta",
}


def _set_path(data: Dict[str, Any], path: str, value: Any) -> None:
    *parents, leaf = path.split(".")
    node = data
    for name in parents:
        node = node.setdefault(name, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot override {path}: {name} is not a section")
    node[leaf] = value


def _validate(data: Mapping[str, Any]) -> PipelineConfig:
    try:
        return PipelineConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(str(e), errors=e.errors()) from None


def load_config(path: Optional[Union[str, Path]] = None) -> PipelineConfig:
    """
    Read a JSON config file; without a path every default applies.

    :param path: Config file.
    :type path: Optional[Union[str, Path]]
    :raises ConfigError: The file is missing, is not JSON or does not validate.
    :return: The validated config.
    :rtype: PipelineConfig
    """
    if path is None:
        return PipelineConfig()

    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    try:
        data = deserialize(path.read_bytes())
    except ValueError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    return _validate(data)


def apply_overrides(config: PipelineConfig, **flags: Any) -> PipelineConfig:
    """
    Apply command-line flags on top of a config; flags left as None are ignored. When
    --topk is given the similarity mode switches to topk, and --theta switches it to
    threshold.
    """
    data = config.model_dump(mode="json")
    for flag, value in flags.items():
        if value is None:
            continue
        if flag not in FLAG_PATHS:
            raise ConfigError(f"unknown override {flag!r}")
        _set_path(data, FLAG_PATHS[flag], value)
        logger.debug("override %s = %r", FLAG_PATHS[flag], value)

    if flags.get("topk") is not None:
        data["similarity"]["mode"] = "topk"
    elif flags.get("theta") is not None:
        data["similarity"]["mode"] = "threshold"
    return _validate(data)
