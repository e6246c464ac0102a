from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator
from typing_extensions import Annotated

from tablegraft.dto.graph import SimilarityConfig, SplitConfig
from tablegraft.dto.joinplan import PathScoringConfig
from tablegraft.dto.linker import CoresetConfig
from tablegraft.dto.subtables import SubTableConfig
from tablegraft.dto.synthetic import SyntheticSpec
from tablegraft.dto.training import EncoderConfig, Stage1Config, Stage2Config
from tablegraft.types import BaselineVariant, GroupingMethod, NoMiningVariant
from tablegraft.utils import derive_seed, digest, serialize


class DatasetConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    path: Annotated[str, Field("data", title="Dataset Directory")]
    descriptor: Annotated[str, Field("schema.json", title="Schema Descriptor File")]
    synthetic: Annotated[
        Optional[SyntheticSpec], Field(None, title="Generator Spec Used By `synth`")
    ]


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    seeds: Annotated[List[int], Field([0, 1, 2, 3, 4], title="Paired Seeds", min_length=1)]
    no_mining_variant: Annotated[
        NoMiningVariant, Field("no_mining_whole_tuple", title="No-Mining Arm Reading")
    ]
    ells: Annotated[
        List[float],
        Field([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9], title="Sweep Thresholds"),
    ]
    sweep_methods: Annotated[
        List[GroupingMethod],
        Field(["maximal_clique", "girvan_newman"], title="Sweep Grouping Methods"),
    ]
    baselines: Annotated[
        List[BaselineVariant],
        Field(["base_only", "all_join", "random_k"], title="Baselines Run With The Sweep"),
    ]
    random_k: Annotated[int, Field(4, title="Attributes Kept By random_k", ge=0)]
    workers: Annotated[int, Field(1, title="Runs Executed In Parallel", ge=1)]

    @field_validator("ells")
    @classmethod
    def _ells_in_unit_interval(cls, value: List[float]) -> List[float]:
        if any(not 0.0 <= ell <= 1.0 for ell in value):
            raise ValueError("sweep thresholds must lie in [0, 1]")
        return value


class PipelineConfig(BaseModel):
    """
    Every hyperparameter of a run. Unknown keys are rejected.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    schema_version: Annotated[Literal[1], Field(1, title="Config Schema Version")]
    seed: Annotated[int, Field(0, title="Root Seed", ge=0)]
    output_dir: Annotated[str, Field("runs/default", title="Artifact Directory")]
    dataset: Annotated[DatasetConfig, Field(DatasetConfig(), title="Dataset")]
    scoring: Annotated[PathScoringConfig, Field(PathScoringConfig(), title="Path Scoring")]
    coreset: Annotated[CoresetConfig, Field(CoresetConfig(), title="Coreset")]
    encoder: Annotated[EncoderConfig, Field(EncoderConfig(), title="Encoders")]
    stage1: Annotated[Stage1Config, Field(Stage1Config(), title="Stage-1 Training")]
    subtables: Annotated[SubTableConfig, Field(SubTableConfig(), title="Sub-Table Mining")]
    similarity: Annotated[SimilarityConfig, Field(SimilarityConfig(), title="Similarity Edges")]
    split: Annotated[SplitConfig, Field(SplitConfig(), title="Train/Val/Test Split")]
    stage2: Annotated[Stage2Config, Field(Stage2Config(), title="Stage-2 Training")]
    experiments: Annotated[ExperimentConfig, Field(ExperimentConfig(), title="Experiments")]

    def stage_seed(self, stage: str) -> int:
        return derive_seed(self.seed, stage)

    def with_seed(self, seed: int) -> "PipelineConfig":
        return self.model_copy(update={"seed": seed})

    @property
    def digest(self) -> str:
        # output_dir names where a run goes, not what it computes
        return digest(serialize(self.model_dump(mode="json", exclude={"output_dir"})))
