from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing_extensions import Annotated

from tablegraft.dto.base import ArtifactStamp, BaseSchema
from tablegraft.dto.dataset import TaskSpec
from tablegraft.types import SimilarityMode


class SimilarityConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    enabled: Annotated[bool, Field(True, title="Build Similarity Edges")]
    mode: Annotated[SimilarityMode, Field("topk", title="Mode")]
    theta: Annotated[float, Field(0.9, title="Cosine Threshold (threshold mode)", ge=-1.0, le=1.0)]
    k: Annotated[int, Field(10, title="Neighbours Per Node (topk mode)", ge=1)]
    metric: Annotated[Literal["cosine"], Field("cosine", title="Metric")]


class SplitConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    train: Annotated[float, Field(0.7, title="Train Fraction", gt=0.0, lt=1.0)]
    val: Annotated[float, Field(0.15, title="Validation Fraction", ge=0.0, lt=1.0)]
    test: Annotated[float, Field(0.15, title="Test Fraction", ge=0.0, lt=1.0)]
    strata: Annotated[int, Field(10, title="Quantile Strata For Regression", ge=1)]

    @model_validator(mode="after")
    def _fractions_sum_to_one(self) -> "SplitConfig":
        if abs(self.train + self.val + self.test - 1.0) > 1e-9:
            raise ValueError("train + val + test must equal 1")
        return self


class NodeTypeInfo(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: Annotated[str, Field(title="Node Type")]
    table: Annotated[str, Field(title="Source Table")]
    attributes: Annotated[List[str], Field(title="Feature Attributes, In Layout Order")]
    count: Annotated[int, Field(title="Nodes")]
    width: Annotated[int, Field(title="Feature Width")]


class EdgeTypeInfo(BaseModel):
    model_config = ConfigDict(frozen=True)

    src_type: Annotated[str, Field(title="Source Node Type")]
    relation: Annotated[Literal["join", "similarity"], Field(title="Relation")]
    dst_type: Annotated[str, Field(title="Destination Node Type")]
    count: Annotated[int, Field(title="Directed Edges")]

    @property
    def key(self) -> str:
        return f"{self.src_type}__{self.relation}__{self.dst_type}"


class GraphMeta(BaseSchema):
    __artifact__ = "graph/graph.json"
    __stage__ = "build-graph"

    stamp: Annotated[Optional[ArtifactStamp], Field(None, title="Stamp")]
    task: Annotated[TaskSpec, Field(title="Task")]
    class_labels: Annotated[Optional[List[str]], Field(None, title="Class Labels")]
    base_type: Annotated[str, Field(title="Base Node Type")]
    node_types: Annotated[List[NodeTypeInfo], Field(title="Node Types, Base First")]
    edge_types: Annotated[List[EdgeTypeInfo], Field(title="Edge Types")]
    similarity: Annotated[SimilarityConfig, Field(title="Similarity Config")]
    split: Annotated[SplitConfig, Field(title="Split Config")]
    split_counts: Annotated[Dict[str, int], Field({}, title="Base Nodes Per Split")]
