from typing import Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator
from typing_extensions import Annotated

from tablegraft.dto.base import ArtifactStamp, BaseSchema


class LabeledTuple(BaseModel):
    model_config = ConfigDict(frozen=True)

    table: Annotated[str, Field(title="Auxiliary Table")]
    key: Annotated[str, Field(title="Auxiliary Primary Key")]
    label: Annotated[Union[int, float], Field(title="Class Index Or Target Value")]
    base_key: Annotated[str, Field(title="Linking Base Tuple Key")]

    @property
    def tuple_ref(self) -> Tuple[str, str]:
        return (self.table, self.key)


class CoresetConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    base_sample_size: Annotated[
        Union[int, float],
        Field(2000, title="Base Sample Size (count, or fraction in (0, 1])", gt=0),
    ]
    per_tuple_label_cap: Annotated[int, Field(5, title="Links Kept Per Auxiliary Tuple", ge=1)]
    strata: Annotated[int, Field(10, title="Quantile Strata For Regression", ge=1)]
    workers: Annotated[int, Field(1, title="Tables Linked In Parallel", ge=1)]
    seed: Annotated[Optional[int], Field(None, title="Seed (derived from the root seed if unset)")]

    @field_validator("base_sample_size")
    @classmethod
    def _fraction_at_most_one(cls, value: Union[int, float]) -> Union[int, float]:
        if isinstance(value, float) and not value.is_integer() and value > 1.0:
            raise ValueError("a fractional base_sample_size must lie in (0, 1]")
        if isinstance(value, float) and value > 1.0:
            return int(value)
        return value


class Coreset(BaseSchema):
    __artifact__ = "coreset.json"
    __stage__ = "link"

    stamp: Annotated[Optional[ArtifactStamp], Field(None, title="Stamp")]
    config: Annotated[CoresetConfig, Field(title="Coreset Config")]
    base_keys: Annotated[List[str], Field(title="Sampled Base Keys")]
    link_counts: Annotated[Dict[str, int], Field(title="Links Per Table Before Sampling")]
    links: Annotated[Dict[str, List[LabeledTuple]], Field(title="Coreset Links Per Table")]

    @property
    def coreset_counts(self) -> Dict[str, int]:
        return {table: len(links) for table, links in self.links.items()}
