from __future__ import annotations

import math
from typing import Any, Dict, Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from pydantic import BaseModel, ConfigDict, Field
from torch import nn
from typing_extensions import Annotated

from tablegraft.errors import TrainingDivergedError
from tablegraft.types import Label
from tablegraft.utils import digest


EPSILON = 1e-8


class TargetScaler(BaseModel):
    """
    Standardizes regression targets for training; predictions are mapped back with
    `inverse`. The identity scaler is used for classification.
    """
    model_config = ConfigDict(frozen=True)

    mean: Annotated[float, Field(0.0, title="Mean")]
    scale: Annotated[float, Field(1.0, title="Standard Deviation", gt=0.0)]

    @classmethod
    def fit(cls, values: Sequence[float]) -> "TargetScaler":
        array = np.asarray(values, dtype=np.float64)
        if array.size == 0:
            return cls()
        std = float(array.std())
        return cls(mean=float(array.mean()), scale=std if std > EPSILON else 1.0)

    def transform(self, values: torch.Tensor) -> torch.Tensor:
        return (values - self.mean) / self.scale

    def inverse(self, values: torch.Tensor) -> torch.Tensor:
        return values * self.scale + self.mean


def label_tensor(labels: Sequence[Label], classification: bool) -> torch.Tensor:
    if classification:
        return torch.as_tensor([int(v) for v in labels], dtype=torch.long)
    return torch.as_tensor([float(v) for v in labels], dtype=torch.float32)


def prediction_loss(
    output: torch.Tensor, target: torch.Tensor, classification: bool, reduction: str = "sum"
) -> torch.Tensor:
    """
    Cross entropy over class logits or squared error over a scalar output, summed over
    the batch unless `reduction` says otherwise.
    """
    if classification:
        return F.cross_entropy(output, target, reduction=reduction)
    return F.mse_loss(output.reshape(-1), target.to(output.dtype), reduction=reduction)


def check_finite(
    loss: torch.Tensor, stage: str, epoch: int, context: Optional[Dict[str, Any]] = None
) -> float:
    value = float(loss.detach())
    if not math.isfinite(value):
        raise TrainingDivergedError(stage, epoch, value, context)
    return value


def make_generator(seed: int) -> torch.Generator:
    return torch.Generator().manual_seed(seed)


def uniform_(tensor: torch.Tensor, fan: int, generator: torch.Generator) -> torch.Tensor:
    bound = 1.0 / math.sqrt(max(fan, 1))
    with torch.no_grad():
        return tensor.uniform_(-bound, bound, generator=generator)


def reset_uniform(module: nn.Module, generator: torch.Generator) -> None:
    """
    Initialize every parameter of `module` with uniform(-1/sqrt(d), 1/sqrt(d)), `d` being
    the parameter's trailing dimension, in registration order.
    """
    for parameter in module.parameters():
        uniform_(parameter, parameter.shape[-1] if parameter.dim() else 1, generator)


def parameter_stamp(module: nn.Module) -> str:
    parts = []
    for name, tensor in module.state_dict().items():
        parts.append(name)
        parts.append(tensor.detach().cpu().contiguous().numpy().tobytes())
    return digest(*parts)
