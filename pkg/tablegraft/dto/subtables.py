from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field
from typing_extensions import Annotated

from tablegraft.dto.base import ArtifactStamp, BaseSchema
from tablegraft.types import GroupingMethod


class SubTableConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    ell: Annotated[float, Field(0.8, title="Significance Threshold", ge=0.0, le=1.0)]
    method: Annotated[GroupingMethod, Field("maximal_clique", title="Grouping Method")]
    keep_singletons: Annotated[bool, Field(False, title="Keep Isolated Attributes As Groups")]
    top_pairs: Annotated[int, Field(5, title="Pairs Listed Per Table In The Report", ge=0)]


class CumulativeAttention(BaseModel):
    model_config = ConfigDict(frozen=True)

    table: Annotated[str, Field(title="Auxiliary Table")]
    nodes: Annotated[List[str], Field(title="Attributes")]
    records: Annotated[int, Field(title="Accumulated Matrices")]
    a_sum: Annotated[List[List[float]], Field(title="Summed Attention")]
    a_norm: Annotated[List[List[float]], Field(title="Off-Diagonal Min-Max Normalized")]

    def symmetric(self, u: int, v: int) -> float:
        return (self.a_norm[u][v] + self.a_norm[v][u]) / 2.0


class SignificantEdgeSet(BaseModel):
    model_config = ConfigDict(frozen=True)

    table: Annotated[str, Field(title="Auxiliary Table")]
    threshold: Annotated[float, Field(title="ell", ge=0.0, le=1.0)]
    nodes: Annotated[List[str], Field(title="Attributes")]
    edges: Annotated[List[Tuple[str, str]], Field(title="Significant Attribute Pairs")]


class SubTableManifest(BaseModel):
    model_config = ConfigDict(frozen=True)

    table: Annotated[str, Field(title="Auxiliary Table")]
    method: Annotated[GroupingMethod, Field(title="Grouping Method")]
    threshold: Annotated[Optional[float], Field(None, title="ell")]
    groups: Annotated[List[List[str]], Field([], title="Attribute Groups")]

    @property
    def unsplit(self) -> bool:
        return not self.groups

    def node_type(self, index: int) -> str:
        return f"{self.table}#{index}"


class SplitManifest(BaseSchema):
    __artifact__ = "subtables.json"
    __stage__ = "split"

    stamp: Annotated[Optional[ArtifactStamp], Field(None, title="Stamp")]
    config: Annotated[SubTableConfig, Field(title="Sub-Table Config")]
    manifests: Annotated[Dict[str, SubTableManifest], Field(title="Manifest Per Table")]
    cumulative: Annotated[
        Dict[str, CumulativeAttention], Field({}, title="Cumulative Attention Per Table")
    ]
