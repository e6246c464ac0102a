from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing_extensions import Annotated

from tablegraft.dto.base import ArtifactStamp, BaseSchema
from tablegraft.types import LinkType


class JoinEdge(BaseModel):
    model_config = ConfigDict(frozen=True)

    src_table: Annotated[str, Field(title="Source Table")]
    dst_table: Annotated[str, Field(title="Destination Table")]
    via: Annotated[Tuple[str, str], Field(title="(FK Column, PK Column)")]
    link_type: Annotated[LinkType, Field(title="Link Type")]
    avg_fanout: Annotated[float, Field(title="Average Fan-Out", ge=0.0)]
    fk_on_source: Annotated[bool, Field(title="Source Table Holds The FK")]

    @model_validator(mode="after")
    def _fanout_matches_link(self) -> "JoinEdge":
        if self.avg_fanout <= 1.0 and self.link_type == "one_to_many":
            raise ValueError("an edge with avg_fanout <= 1 cannot be one_to_many")
        if self.fk_on_source and self.link_type == "one_to_many":
            raise ValueError("FK-side -> PK-side traversal cannot be one_to_many")
        return self

    @property
    def fk_column(self) -> str:
        return self.via[0]

    @property
    def pk_column(self) -> str:
        return self.via[1]

    @property
    def fk_table(self) -> str:
        return self.src_table if self.fk_on_source else self.dst_table

    def describe(self) -> str:
        return f"{self.src_table}-[{self.fk_column}:{self.link_type}]->{self.dst_table}"


class DirectedJoinGraph(BaseModel):
    model_config = ConfigDict(frozen=True)

    base_table: Annotated[str, Field(title="Base Table")]
    nodes: Annotated[List[str], Field(title="Tables")]
    edges: Annotated[List[JoinEdge], Field(title="Directed Join Edges")]

    def out_edges(self, table: str) -> List[JoinEdge]:
        return [e for e in self.edges if e.src_table == table]


class PathScoringConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: Annotated[float, Field(0.5, title="Length Weight", ge=0.0)]
    beta: Annotated[float, Field(0.5, title="Direction Weight", ge=0.0)]

    @model_validator(mode="after")
    def _positive_total(self) -> "PathScoringConfig":
        if self.alpha + self.beta <= 0:
            raise ValueError("alpha + beta must be positive")
        return self


class MetaPath(BaseModel):
    model_config = ConfigDict(frozen=True)

    target_table: Annotated[str, Field(title="Auxiliary Table")]
    hops: Annotated[List[JoinEdge], Field(title="Hops From The Base Table")]
    length_score: Annotated[float, Field(title="S_L")]
    direction_score: Annotated[float, Field(title="S_N")]
    score: Annotated[float, Field(title="S_path")]

    @property
    def length(self) -> int:
        return len(self.hops)

    @property
    def tables(self) -> List[str]:
        if not self.hops:
            return [self.target_table]
        return [self.hops[0].src_table, *(h.dst_table for h in self.hops)]


class MetaPathManifest(BaseSchema):
    __artifact__ = "meta_paths.json"
    __stage__ = "plan"

    stamp: Annotated[Optional[ArtifactStamp], Field(None, title="Stamp")]
    config: Annotated[PathScoringConfig, Field(title="Scoring Weights")]
    graph: Annotated[DirectedJoinGraph, Field(title="Directed Join Graph")]
    paths: Annotated[Dict[str, MetaPath], Field(title="Meta-Path Per Auxiliary Table")]
    unreachable: Annotated[List[str], Field([], title="Unreachable Tables")]
