import re
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing_extensions import Annotated

from tablegraft.dto.base import ArtifactStamp, BaseSchema


class SyntheticSpec(BaseModel):
    """
    A base table of orders whose label is a function of two attributes of the planted
    table it references. The base table's own attributes are independent noise; the
    remaining auxiliary tables carry noise attributes only.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    base_tuples: Annotated[int, Field(2000, title="Base Tuples", ge=10)]
    customer_tuples: Annotated[int, Field(400, title="Planted Table Tuples", ge=4)]
    auxiliary_tables: Annotated[
        int, Field(3, title="Auxiliary Tables, Planted Table Included", ge=1)
    ]
    auxiliary_tuples: Annotated[int, Field(300, title="Tuples Per Noise Table", ge=1)]
    noise_attributes: Annotated[int, Field(3, title="Noise Attributes Per Table", ge=1)]
    label_rule: Annotated[Literal["xor", "product"], Field("xor", title="Label Rule")]
    label_noise: Annotated[float, Field(0.05, title="Label Noise Rate", ge=0.0, le=1.0)]
    seed: Annotated[int, Field(0, title="Seed")]
    planted_table: Annotated[str, Field("customers", title="Planted Table", min_length=1)]
    planted_attributes: Annotated[
        Tuple[str, str], Field(("a", "b"), title="Planted Attribute Pair")
    ]

    @model_validator(mode="after")
    def _noise_below_half(self) -> "SyntheticSpec":
        if self.label_rule == "xor" and self.label_noise >= 0.5:
            raise ValueError("xor label noise must stay below 0.5")
        return self

    @model_validator(mode="after")
    def _planted_names_are_free(self) -> "SyntheticSpec":
        table = self.planted_table
        if table == "orders" or re.fullmatch(r"aux\d+", table):
            raise ValueError(f"planted table name {table!r} is taken by a generated table")
        first, second = self.planted_attributes
        if first == second:
            raise ValueError("the planted attributes must differ")
        for name in self.planted_attributes:
            if name in ("segment", self.planted_key) or re.fullmatch(r"x\d+", name):
                raise ValueError(f"planted attribute name {name!r} is taken by a noise column")
        return self

    @property
    def planted_key(self) -> str:
        """
        Primary key column of the planted table, e.g. customer_id for customers.
        """
        table = self.planted_table
        stem = table[:-1] if table.endswith("s") and len(table) > 1 else table
        return f"{stem}_id"

    @property
    def task(self) -> Literal["classification", "regression"]:
        return "classification" if self.label_rule == "xor" else "regression"


class SyntheticManifest(BaseSchema):
    __artifact__ = "synthetic.json"
    __stage__ = "synth"

    stamp: Annotated[Optional[ArtifactStamp], Field(None, title="Stamp")]
    spec: Annotated[SyntheticSpec, Field(title="Generator Spec")]
    tables: Annotated[List[str], Field(title="Generated Tables")]
    planted_table: Annotated[str, Field(title="Planted Table")]
    planted_attributes: Annotated[List[str], Field(title="Planted Attributes")]
