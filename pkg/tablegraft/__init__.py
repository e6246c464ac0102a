# ruff: noqa
from tablegraft.version import __version__
from tablegraft.dto.config import PipelineConfig
from tablegraft.pipeline import Pipeline

__all__ = (
    "__version__",
    "Pipeline",
    "PipelineConfig",
)
