from __future__ import annotations

import logging
import math
import warnings
from pathlib import Path
from typing import Dict, Iterator, List, NamedTuple, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from tablegraft.dto.dataset import ColumnSpec, ColumnStats, LoadReport, SchemaDescriptor, TableSpec
from tablegraft.errors import (
    ColumnMismatchError,
    ColumnNotFoundError,
    ColumnTypeError,
    DataQualityWarning,
    DescriptorError,
    DuplicatePrimaryKeyError,
    EmptyBaseTableError,
    MissingFileError,
    UnknownColumnKindError,
)
from tablegraft.types import CellValue, ColumnKind, Label
from tablegraft.utils import deserialize, serialize


logger = logging.getLogger(__name__)

DEFAULT_DESCRIPTOR = "schema.json"
COLUMN_KINDS = ("numerical", "categorical", "text", "primary_key", "foreign_key")


class Row(NamedTuple):
    table: str
    key: str
    values: Tuple[CellValue, ...]


class Table:
    """
    One typed relational table. Immutable after load.
    """
    def __init__(self, spec: TableSpec, tuples: List[Row], is_base: bool = False) -> None:
        self.spec = spec
        self.name = spec.name
        self.columns: List[ColumnSpec] = list(spec.columns)
        self.tuples = tuples
        self.is_base = is_base
        self.column_index = {c.name: i for i, c in enumerate(self.columns)}
        self.index: Dict[str, Row] = {row.key: row for row in tuples}

    def __len__(self) -> int:
        return len(self.tuples)

    def __iter__(self) -> Iterator[Row]:
        return iter(self.tuples)

    def __repr__(self) -> str:
        return f"Table({self.name!r}, columns={len(self.columns)}, tuples={len(self.tuples)})"

    @property
    def primary_key(self) -> str:
        return self.spec.primary_key

    @property
    def foreign_keys(self) -> List[ColumnSpec]:
        return [c for c in self.columns if c.kind == "foreign_key"]

    def column(self, name: str) -> ColumnSpec:
        try:
            return self.columns[self.column_index[name]]
        except KeyError:
            raise ColumnNotFoundError(f"{self.name}.{name}") from None

    def attributes(self, exclude: Tuple[str, ...] = ()) -> List[ColumnSpec]:
        """
        The non-key columns of the table, in schema order.
        """
        return [c for c in self.columns if not c.is_key and c.name not in exclude]

    def value(self, row: Row, column: str) -> CellValue:
        return row.values[self.column_index[column]]

    def values(self, column: str) -> List[CellValue]:
        position = self.column_index.get(column)
        if position is None:
            raise ColumnNotFoundError(f"{self.name}.{column}")
        return [row.values[position] for row in self.tuples]


class RelationalDataset:
    """
    A base table plus its auxiliary tables, typed and linked by PK/FK.
    """
    def __init__(
        self,
        descriptor: SchemaDescriptor,
        tables: Dict[str, Table],
        class_labels: Optional[List[str]] = None,
        root: Optional[Path] = None,
        nonfinite_nulled: Optional[Dict[str, int]] = None,
    ) -> None:
        self.descriptor = descriptor
        self.tables = tables
        self.root = root
        self.nonfinite_nulled = nonfinite_nulled or {}

        task = descriptor.task_spec
        if task.is_classification:
            class_labels = class_labels or []
            task = task.model_copy(update={"class_count": task.class_count or len(class_labels)})
        self.task = task
        self.class_labels = class_labels if task.is_classification else None
        self.labels = self._resolve_labels()
        self.dangling_fks = self._count_dangling()

    def __repr__(self) -> str:
        return f"RelationalDataset(base={self.task.base_table!r}, tables={list(self.tables)})"

    @property
    def base(self) -> Table:
        return self.tables[self.task.base_table]

    @property
    def auxiliary(self) -> List[Table]:
        return [t for name, t in sorted(self.tables.items()) if name != self.task.base_table]

    def table(self, name: str) -> Table:
        try:
            return self.tables[name]
        except KeyError:
            raise ColumnNotFoundError(f"unknown table {name!r}") from None

    def foreign_keys(self) -> List[Tuple[Table, ColumnSpec]]:
        return [(table, column) for table in self.tables.values() for column in table.foreign_keys]

    def base_attributes(self) -> List[ColumnSpec]:
        return self.base.attributes(exclude=(self.task.target_column,))

    def label_of(self, base_key: str) -> Optional[Label]:
        return self.labels.get(base_key)

    def _resolve_labels(self) -> Dict[str, Label]:
        base = self.base
        labels: Dict[str, Label] = {}
        lookup = {token: i for i, token in enumerate(self.class_labels or [])}
        for row in base:
            value = base.value(row, self.task.target_column)
            if value is None:
                continue
            if self.task.is_classification:
                labels[row.key] = lookup[label_token(value)]
            else:
                labels[row.key] = float(value)
        return labels

    def _count_dangling(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for table, column in self.foreign_keys():
            assert column.fk_target is not None
            targets = self.tables[column.fk_target.table].index
            values = table.values(column.name)
            counts[f"{table.name}.{column.name}"] = sum(
                1 for v in values if v is not None and v not in targets
            )
        return counts


def label_token(value: CellValue) -> str:
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


def _class_sort_key(token: str) -> Tuple[int, float, str]:
    try:
        return (0, float(token), token)
    except ValueError:
        return (1, 0.0, token)


def _parse_cell(
    raw: str, column: ColumnSpec, table: str, nonfinite: Dict[str, int]
) -> CellValue:
    if raw == "":
        if column.kind == "primary_key":
            raise ColumnTypeError(f"{table}.{column.name} has an empty primary key")
        return None

    if column.kind == "numerical":
        try:
            number = float(raw)
        except ValueError:
            raise ColumnTypeError(f"{table}.{column.name}: {raw!r} is not a number") from None
        if not math.isfinite(number):
            key = f"{table}.{column.name}"
            nonfinite[key] = nonfinite.get(key, 0) + 1
            return None
        return number
    return raw


def _read_descriptor(path: Path) -> SchemaDescriptor:
    if not path.is_file():
        raise MissingFileError(f"descriptor {path} does not exist")

    try:
        raw = deserialize(path.read_bytes())
    except ValueError as e:
        raise DescriptorError(f"{path} is not valid JSON: {e}") from None

    for table in raw.get("tables", []):
        for column in table.get("columns", []):
            if column.get("kind") not in COLUMN_KINDS:
                raise UnknownColumnKindError(
                    f"{table.get('name')}.{column.get('name')}: {column.get('kind')!r}"
                )

    try:
        return SchemaDescriptor.model_validate(raw)
    except ValidationError as e:
        raise DescriptorError(str(e)) from None


def _read_table(
    root: Path, spec: TableSpec, is_base: bool, nonfinite: Dict[str, int]
) -> Table:
    path = root / spec.file
    if not path.is_file():
        raise MissingFileError(f"table {spec.name!r}: {path} does not exist")

    frame = pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False, encoding="utf-8")
    described = [c.name for c in spec.columns]
    if sorted(frame.columns) != sorted(described):
        raise ColumnMismatchError(
            f"table {spec.name!r}: descriptor has {described}, CSV has {list(frame.columns)}"
        )

    frame = frame[described]
    pk_position = described.index(spec.primary_key)
    tuples: List[Row] = []
    seen = set()
    for record in frame.itertuples(index=False, name=None):
        values = tuple(
            _parse_cell(raw, column, spec.name, nonfinite)
            for raw, column in zip(record, spec.columns)
        )
        key = str(values[pk_position])
        if key in seen:
            raise DuplicatePrimaryKeyError(spec.name, key)
        seen.add(key)
        tuples.append(Row(spec.name, key, values))

    return Table(spec, tuples, is_base=is_base)


def load_dataset(
    root_path: Union[str, Path], descriptor: Union[str, Path] = DEFAULT_DESCRIPTOR
) -> RelationalDataset:
    """
    Load and type a relational dataset from a directory of CSV files and its schema
    descriptor.

    :param root_path: Dataset directory.
    :type root_path: Union[str, Path]
    :param descriptor: Descriptor file, relative to `root_path` unless absolute.
    :type descriptor: Union[str, Path]
    :return: The typed dataset; dangling foreign keys are kept and counted.
    :rtype: RelationalDataset
    """
    root = Path(root_path)
    schema = _read_descriptor(root / descriptor)

    nonfinite: Dict[str, int] = {}
    tables = {
        spec.name: _read_table(root, spec, spec.name == schema.base_table, nonfinite)
        for spec in schema.tables
    }
    if not tables[schema.base_table].tuples:
        raise EmptyBaseTableError(f"base table {schema.base_table!r} is empty")

    for column, count in sorted(nonfinite.items()):
        warnings.warn(
            f"{count} non-finite values in {column} were loaded as null", DataQualityWarning
        )

    class_labels = None
    if schema.task == "classification":
        base = tables[schema.base_table]
        tokens = {label_token(v) for v in base.values(schema.target_column) if v is not None}
        class_labels = sorted(tokens, key=_class_sort_key)
        class_count = schema.class_count or len(class_labels)
        if class_count < 2 or len(class_labels) > class_count:
            raise DescriptorError(
                f"classification needs 2 <= distinct labels ({len(class_labels)}) "
                f"<= class_count ({class_count})"
            )

    dataset = RelationalDataset(schema, tables, class_labels, root, nonfinite)
    for column, count in sorted(dataset.dangling_fks.items()):
        if count:
            warnings.warn(f"{count} dangling foreign keys in {column}", DataQualityWarning)

    logger.info(
        "loaded %d tables (%s) from %s",
        len(tables),
        ", ".join(f"{n}={len(t)}" for n, t in tables.items()),
        root,
    )
    return dataset


def _format_cell(value: CellValue) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def write_dataset(dataset: RelationalDataset, root_path: Union[str, Path]) -> Path:
    """
    Write every table back to CSV together with the descriptor. Reloading the directory
    yields identical typed values.
    """
    root = Path(root_path)
    root.mkdir(parents=True, exist_ok=True)
    for spec in dataset.descriptor.tables:
        table = dataset.tables[spec.name]
        frame = pd.DataFrame(
            [[_format_cell(v) for v in row.values] for row in table.tuples],
            columns=[c.name for c in spec.columns],
            dtype=object,
        )
        frame.to_csv(root / spec.file, index=False, lineterminator="\n")

    path = root / DEFAULT_DESCRIPTOR
    path.write_bytes(serialize(dataset.descriptor.model_dump(mode="json", exclude_none=True)))
    return path


def column_statistics(table: Table, column: str) -> ColumnStats:
    """
    Summary statistics of one column, ignoring nulls. Numerical columns report
    min/max/mean/population stddev; every other kind reports a distinct count.
    """
    spec = table.column(column)
    values = table.values(column)
    present = [v for v in values if v is not None]
    kind: ColumnKind = spec.kind

    if kind != "numerical":
        return ColumnStats(
            column=column,
            kind=kind,
            count=len(present),
            nulls=len(values) - len(present),
            distinct=len(set(present)),
        )

    if not present:
        return ColumnStats(column=column, kind=kind, count=0, nulls=len(values))

    array = np.asarray(present, dtype=np.float64)
    constant = bool(np.ptp(array) == 0.0)
    return ColumnStats(
        column=column,
        kind=kind,
        count=len(present),
        nulls=len(values) - len(present),
        min=float(array.min()),
        max=float(array.max()),
        mean=float(array[0]) if constant else float(array.mean()),
        stddev=0.0 if constant else float(array.std()),
        distinct=len(set(present)),
    )


def load_report(dataset: RelationalDataset) -> LoadReport:
    return LoadReport(
        table_count=len(dataset.tables),
        tuple_counts={name: len(t) for name, t in dataset.tables.items()},
        dangling_fks=dataset.dangling_fks,
        nonfinite_nulled=dataset.nonfinite_nulled,
        class_labels=dataset.class_labels,
    )
