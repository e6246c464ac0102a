from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field
from typing_extensions import Annotated

from tablegraft.dto.base import ArtifactStamp, BaseSchema
from tablegraft.types import BaselineVariant, GroupingMethod, MiningArm, Relation, TaskType


class MetricSet(BaseModel):
    model_config = ConfigDict(frozen=True)

    task: Annotated[TaskType, Field(title="Task")]
    count: Annotated[int, Field(title="Evaluated Tuples", ge=0)]
    accuracy: Annotated[Optional[float], Field(None, title="Accuracy", ge=0.0, le=1.0)]
    auc_roc: Annotated[Optional[float], Field(None, title="AUC-ROC", ge=0.0, le=1.0)]
    f1: Annotated[Optional[float], Field(None, title="F1", ge=0.0, le=1.0)]
    average_precision: Annotated[
        Optional[float], Field(None, title="Average Precision", ge=0.0, le=1.0)
    ]
    mae: Annotated[Optional[float], Field(None, title="Mean Absolute Error", ge=0.0)]
    mse: Annotated[Optional[float], Field(None, title="Mean Squared Error", ge=0.0)]

    def values(self) -> Dict[str, Optional[float]]:
        names = (
            ("accuracy", "auc_roc", "f1", "average_precision")
            if self.task == "classification"
            else ("mae", "mse")
        )
        return {name: getattr(self, name) for name in names}


class Evaluation(BaseSchema):
    __artifact__ = "metrics.json"
    __stage__ = "evaluate"

    stamp: Annotated[Optional[ArtifactStamp], Field(None, title="Stamp")]
    split: Annotated[str, Field(title="Evaluated Split")]
    metrics: Annotated[MetricSet, Field(title="Metrics")]


class SubTableImportance(BaseModel):
    rank: Annotated[int, Field(title="Rank", ge=1)]
    node_type: Annotated[str, Field(title="Node Type")]
    table: Annotated[str, Field(title="Source Table")]
    attributes: Annotated[List[str], Field(title="Attributes")]
    importance: Annotated[float, Field(title="Mean Edge Importance Into Base Nodes")]
    edges: Annotated[int, Field(title="Edges Into Base Nodes")]
    selected: Annotated[bool, Field(False, title="Selected")]


class EdgeTypeImportance(BaseModel):
    src_type: Annotated[str, Field(title="Source Node Type")]
    relation: Annotated[Relation, Field(title="Relation")]
    dst_type: Annotated[str, Field(title="Destination Node Type")]
    edges: Annotated[int, Field(title="Edges")]
    mean: Annotated[float, Field(title="Mean Importance")]
    total: Annotated[float, Field(title="Summed Importance")]


class FeatureReport(BaseSchema):
    __artifact__ = "feature_report.json"
    __stage__ = "train-stage2"

    stamp: Annotated[Optional[ArtifactStamp], Field(None, title="Stamp")]
    ranking: Annotated[List[SubTableImportance], Field(title="Sub-Tables By Importance")]
    edge_types: Annotated[List[EdgeTypeImportance], Field(title="Per Edge Type Aggregates")]
    similarity_share: Annotated[
        float, Field(title="Share Of Base-Node Importance On Similarity Edges", ge=0.0, le=1.0)
    ]
    select_top: Annotated[int, Field(title="Selection Size")]

    @property
    def selected(self) -> List[SubTableImportance]:
        return [entry for entry in self.ranking if entry.selected]


class MetricSummary(BaseModel):
    mean: Annotated[Optional[float], Field(None, title="Mean")]
    stddev: Annotated[Optional[float], Field(None, title="Population Standard Deviation")]
    runs: Annotated[int, Field(title="Runs With A Value")]


class AblationRun(BaseModel):
    edge_weights: Annotated[bool, Field(title="Learned Edge Weights")]
    similarity: Annotated[bool, Field(title="Similarity Edges")]
    mining: Annotated[MiningArm, Field(title="Mining Arm")]
    seed: Annotated[int, Field(title="Seed")]
    metrics: Annotated[MetricSet, Field(title="Test Metrics")]


class AblationArm(BaseModel):
    edge_weights: Annotated[bool, Field(title="Learned Edge Weights")]
    similarity: Annotated[bool, Field(title="Similarity Edges")]
    mining: Annotated[MiningArm, Field(title="Mining Arm")]
    summary: Annotated[Dict[str, MetricSummary], Field(title="Metric Summaries")]


class AblationReport(BaseSchema):
    __artifact__ = "ablation.json"
    __stage__ = "ablate"

    stamp: Annotated[Optional[ArtifactStamp], Field(None, title="Stamp")]
    seeds: Annotated[List[int], Field(title="Paired Seeds")]
    no_mining_variant: Annotated[str, Field(title="No-Mining Variant")]
    runs: Annotated[List[AblationRun], Field(title="Runs")]
    arms: Annotated[List[AblationArm], Field(title="Per-Configuration Summaries")]
    deltas: Annotated[Dict[str, Optional[float]], Field({}, title="Mean Primary-Metric Deltas")]


class BaselineResult(BaseModel):
    variant: Annotated[BaselineVariant, Field(title="Baseline")]
    k: Annotated[Optional[int], Field(None, title="Random Attributes Kept")]
    seed: Annotated[int, Field(title="Seed")]
    metrics: Annotated[MetricSet, Field(title="Test Metrics")]


class SweepPoint(BaseModel):
    method: Annotated[GroupingMethod, Field(title="Grouping Method")]
    ell: Annotated[float, Field(title="ell")]
    groups: Annotated[int, Field(title="Sub-Tables Across Tables")]
    unsplit_tables: Annotated[int, Field(title="Tables Left Unsplit")]
    metrics: Annotated[MetricSet, Field(title="Test Metrics")]


class SweepReport(BaseSchema):
    __artifact__ = "sweep.json"
    __stage__ = "sweep"

    stamp: Annotated[Optional[ArtifactStamp], Field(None, title="Stamp")]
    points: Annotated[List[SweepPoint], Field(title="Curve Points")]
    fallback_at_one: Annotated[bool, Field(title="Every Table Unsplit At ell = 1")]
    baselines: Annotated[List[BaselineResult], Field([], title="Baselines")]
