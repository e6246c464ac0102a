from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field
from typing_extensions import Annotated

from tablegraft.dto.base import ArtifactStamp, BaseSchema
from tablegraft.types import SamplingMode


class EncoderConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    d_num: Annotated[int, Field(8, title="Numerical Embedding Width", ge=1)]
    d_cat: Annotated[int, Field(16, title="Categorical Embedding Width", ge=1)]
    d_text: Annotated[int, Field(32, title="Text Hashing Width", ge=1)]
    d_out: Annotated[int, Field(32, title="Shared Projection Width", ge=1)]
    overflow_buckets: Annotated[int, Field(64, title="Unseen-Token Buckets Per Column", ge=1)]


class Stage1Config(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    d_h: Annotated[int, Field(32, title="Attention Width", ge=1)]
    batch_size: Annotated[int, Field(64, title="Tuple Graphs Per Batch", ge=1)]
    epochs: Annotated[int, Field(50, title="Epochs", ge=1)]
    learning_rate: Annotated[float, Field(1e-3, title="Adam Learning Rate", gt=0.0)]
    leaky_slope: Annotated[float, Field(0.2, title="LeakyReLU Negative Slope", ge=0.0)]


class Stage2Config(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    d_model: Annotated[int, Field(64, title="Hidden Width", ge=1)]
    layers: Annotated[int, Field(2, title="Message-Passing Layers", ge=1)]
    epochs: Annotated[int, Field(200, title="Epochs", ge=1)]
    learning_rate: Annotated[float, Field(1e-3, title="Adam Learning Rate", gt=0.0)]
    leaky_slope: Annotated[float, Field(0.2, title="LeakyReLU Negative Slope", ge=0.0)]
    edge_weights: Annotated[bool, Field(True, title="Learn Edge Attention And Weights")]
    sampling: Annotated[SamplingMode, Field("full_graph", title="Training Mode")]
    batch_size: Annotated[int, Field(256, title="Training Nodes Per Step (neighbor mode)", ge=1)]
    fanout: Annotated[int, Field(10, title="Incoming Edges Kept Per Node (neighbor mode)", ge=1)]
    select_top: Annotated[int, Field(3, title="Sub-Tables Marked Selected", ge=0)]


class TrainingCurve(BaseModel):
    epochs: Annotated[List[int], Field([], title="Epoch")]
    losses: Annotated[List[float], Field([], title="Training Loss")]
    val_losses: Annotated[Optional[List[float]], Field(None, title="Validation Loss")]

    @property
    def first(self) -> Optional[float]:
        return self.losses[0] if self.losses else None

    @property
    def last(self) -> Optional[float]:
        return self.losses[-1] if self.losses else None


class Stage1TableReport(BaseModel):
    table: Annotated[str, Field(title="Auxiliary Table")]
    nodes: Annotated[List[str], Field(title="Tuple-Graph Nodes")]
    graphs: Annotated[int, Field(title="Training Tuple Graphs")]
    first_loss: Annotated[float, Field(title="First-Epoch Loss")]
    last_loss: Annotated[float, Field(title="Last-Epoch Loss")]
    parameter_stamp: Annotated[str, Field(title="Final Parameter Digest")]


class Stage1Report(BaseSchema):
    __artifact__ = "stage1_report.json"
    __stage__ = "train-stage1"

    stamp: Annotated[Optional[ArtifactStamp], Field(None, title="Stamp")]
    config: Annotated[Stage1Config, Field(title="Stage-1 Config")]
    encoder: Annotated[EncoderConfig, Field(title="Encoder Config")]
    tables: Annotated[Dict[str, Stage1TableReport], Field({}, title="Trained Tables")]
    skipped: Annotated[Dict[str, str], Field({}, title="Skipped Tables And Reason")]


class Stage2Report(BaseSchema):
    __artifact__ = "stage2_report.json"
    __stage__ = "train-stage2"

    stamp: Annotated[Optional[ArtifactStamp], Field(None, title="Stamp")]
    config: Annotated[Stage2Config, Field(title="Stage-2 Config")]
    best_epoch: Annotated[int, Field(title="Checkpoint Epoch")]
    best_val_loss: Annotated[float, Field(title="Checkpoint Validation Loss")]
    first_loss: Annotated[float, Field(title="First-Epoch Loss")]
    last_loss: Annotated[float, Field(title="Last-Epoch Loss")]
    parameter_stamp: Annotated[str, Field(title="Checkpoint Parameter Digest")]
