from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing_extensions import Annotated

from tablegraft.dto.base import ArtifactStamp, BaseSchema
from tablegraft.types import ColumnKind, TaskType


class ForeignKeyTarget(BaseModel):
    model_config = ConfigDict(frozen=True)

    table: Annotated[str, Field(title="Referenced Table")]
    column: Annotated[str, Field(title="Referenced Primary Key")]


class ColumnSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: Annotated[str, Field(title="Column Name", min_length=1)]
    kind: Annotated[ColumnKind, Field(title="Column Kind")]
    fk_target: Annotated[Optional[ForeignKeyTarget], Field(None, title="Foreign Key Target")]

    @field_validator("fk_target", mode="before")
    @classmethod
    def _pair_to_target(cls, value: Any) -> Any:
        if isinstance(value, (list, tuple)) and len(value) == 2:
            return {"table": value[0], "column": value[1]}
        return value

    @model_validator(mode="after")
    def _fk_has_target(self) -> "ColumnSpec":
        if self.kind == "foreign_key" and self.fk_target is None:
            raise ValueError(f"foreign key column {self.name!r} needs an fk_target")
        if self.kind != "foreign_key" and self.fk_target is not None:
            raise ValueError(f"column {self.name!r} is not a foreign key but has an fk_target")
        return self

    @property
    def is_key(self) -> bool:
        return self.kind in ("primary_key", "foreign_key")


class TableSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: Annotated[str, Field(title="Table Name", min_length=1)]
    file: Annotated[str, Field(title="CSV File")]
    columns: Annotated[List[ColumnSpec], Field(title="Columns", min_length=1)]

    @model_validator(mode="after")
    def _one_primary_key(self) -> "TableSpec":
        primary = [c.name for c in self.columns if c.kind == "primary_key"]
        if len(primary) != 1:
            raise ValueError(f"table {self.name!r} needs exactly one primary_key, got {primary}")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError(f"table {self.name!r} repeats a column name")
        return self

    @property
    def primary_key(self) -> str:
        return next(c.name for c in self.columns if c.kind == "primary_key")


class TaskSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    base_table: Annotated[str, Field(title="Base Table")]
    target_column: Annotated[str, Field(title="Target Column")]
    task: Annotated[TaskType, Field(title="Task")]
    class_count: Annotated[Optional[int], Field(None, title="Class Count", ge=2)]

    @property
    def is_classification(self) -> bool:
        return self.task == "classification"

    @property
    def output_dim(self) -> int:
        return (self.class_count or 2) if self.is_classification else 1


class SchemaDescriptor(BaseModel):
    """
    The `schema.json` descriptor of a dataset directory.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    tables: Annotated[List[TableSpec], Field(title="Tables", min_length=1)]
    base_table: Annotated[str, Field(title="Base Table")]
    target_column: Annotated[str, Field(title="Target Column")]
    task: Annotated[TaskType, Field(title="Task")]
    class_count: Annotated[Optional[int], Field(None, title="Class Count", ge=2)]

    @model_validator(mode="after")
    def _references_resolve(self) -> "SchemaDescriptor":
        by_name = {t.name: t for t in self.tables}
        if len(by_name) != len(self.tables):
            raise ValueError("table names must be unique")
        if self.base_table not in by_name:
            raise ValueError(f"base table {self.base_table!r} is not described")

        base = by_name[self.base_table]
        target = next((c for c in base.columns if c.name == self.target_column), None)
        if target is None:
            raise ValueError(f"target column {self.target_column!r} not in {self.base_table!r}")
        if target.is_key:
            raise ValueError("the target column cannot be a key")

        for table in self.tables:
            for column in table.columns:
                if column.fk_target is None:
                    continue
                referenced = by_name.get(column.fk_target.table)
                if referenced is None or referenced.primary_key != column.fk_target.column:
                    raise ValueError(
                        f"{table.name}.{column.name} must reference an existing primary key, "
                        f"got {column.fk_target.table}.{column.fk_target.column}"
                    )
        return self

    @property
    def task_spec(self) -> TaskSpec:
        return TaskSpec(
            base_table=self.base_table,
            target_column=self.target_column,
            task=self.task,
            class_count=self.class_count,
        )


class ColumnStats(BaseModel):
    model_config = ConfigDict(frozen=True)

    column: Annotated[str, Field(title="Column")]
    kind: Annotated[ColumnKind, Field(title="Column Kind")]
    count: Annotated[int, Field(title="Non-Null Count")]
    nulls: Annotated[int, Field(title="Null Count")]
    min: Annotated[Optional[float], Field(None, title="Minimum")]
    max: Annotated[Optional[float], Field(None, title="Maximum")]
    mean: Annotated[Optional[float], Field(None, title="Mean")]
    stddev: Annotated[Optional[float], Field(None, title="Population Standard Deviation")]
    distinct: Annotated[Optional[int], Field(None, title="Distinct Count")]


class LoadReport(BaseSchema):
    __artifact__ = "load_report.json"
    __stage__ = "ingest"

    stamp: Annotated[Optional[ArtifactStamp], Field(None, title="Stamp")]
    table_count: Annotated[int, Field(title="Table Count")]
    tuple_counts: Annotated[Dict[str, int], Field(title="Tuples Per Table")]
    dangling_fks: Annotated[Dict[str, int], Field(title="Dangling FKs Per table.column")]
    nonfinite_nulled: Annotated[Dict[str, int], Field(title="Non-Finite Numerics Nulled")]
    class_labels: Annotated[Optional[List[str]], Field(None, title="Class Labels")]

    @property
    def dangling_total(self) -> int:
        return sum(self.dangling_fks.values())
