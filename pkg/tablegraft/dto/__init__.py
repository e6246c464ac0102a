from tablegraft.dto.base import ArtifactStamp, BaseSchema
from tablegraft.dto.config import DatasetConfig, ExperimentConfig, PipelineConfig
from tablegraft.dto.dataset import LoadReport, SchemaDescriptor, TableSpec, TaskSpec
from tablegraft.dto.graph import GraphMeta, SimilarityConfig, SplitConfig
from tablegraft.dto.joinplan import DirectedJoinGraph, MetaPath, MetaPathManifest
from tablegraft.dto.linker import Coreset, CoresetConfig, LabeledTuple
from tablegraft.dto.metrics import (
    AblationReport,
    Evaluation,
    FeatureReport,
    MetricSet,
    SweepReport,
)
from tablegraft.dto.subtables import SplitManifest, SubTableConfig, SubTableManifest
from tablegraft.dto.synthetic import SyntheticManifest, SyntheticSpec
from tablegraft.dto.training import Stage1Config, Stage1Report, Stage2Config, Stage2Report


__all__ = (
    "ArtifactStamp",
    "BaseSchema",
    "DatasetConfig",
    "ExperimentConfig",
    "PipelineConfig",
    "LoadReport",
    "SchemaDescriptor",
    "TableSpec",
    "TaskSpec",
    "GraphMeta",
    "SimilarityConfig",
    "SplitConfig",
    "DirectedJoinGraph",
    "MetaPath",
    "MetaPathManifest",
    "Coreset",
    "CoresetConfig",
    "LabeledTuple",
    "AblationReport",
    "Evaluation",
    "FeatureReport",
    "MetricSet",
    "SweepReport",
    "SplitManifest",
    "SubTableConfig",
    "SubTableManifest",
    "SyntheticManifest",
    "SyntheticSpec",
    "Stage1Config",
    "Stage1Report",
    "Stage2Config",
    "Stage2Report",
)
