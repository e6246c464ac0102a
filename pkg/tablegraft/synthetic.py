from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from tablegraft.dataset import RelationalDataset, Row, Table, load_dataset, write_dataset
from tablegraft.dto.dataset import ColumnSpec, SchemaDescriptor, TableSpec
from tablegraft.dto.synthetic import SyntheticManifest, SyntheticSpec
from tablegraft.types import CellValue
from tablegraft.utils import derive_seed


logger = logging.getLogger(__name__)

BASE_TABLE = "orders"
TARGET = "label"
CHANNELS = ("web", "store", "phone")
SEGMENTS = ("retail", "business", "public")
KINDS = ("red", "green", "blue", "grey")
WORDS = (
    "fast", "slow", "blue", "crate", "stone", "steel", "north", "south", "fresh", "plain",
    "large", "small", "spare", "green", "label", "frame",
)


def _pk(name: str) -> ColumnSpec:
    return ColumnSpec(name=name, kind="primary_key")


def _fk(name: str, table: str, column: str) -> ColumnSpec:
    return ColumnSpec(name=name, kind="foreign_key", fk_target=(table, column))


def _num(value: float) -> float:
    return round(float(value), 6)


def _noise_table_names(spec: SyntheticSpec) -> List[Tuple[str, bool]]:
    """
    (name, referenced_by_base) for the noise tables: odd ones are referenced by the
    base table, even ones reference the planted table.
    """
    return [(f"aux{i}", i % 2 == 1) for i in range(1, spec.auxiliary_tables)]


def _owner_key(spec: SyntheticSpec, index: int) -> str:
    return f"{spec.planted_table[0]}{index:05d}"


def _planted(spec: SyntheticSpec) -> Tuple[Table, np.ndarray, np.ndarray]:
    table = spec.planted_table
    first, second = spec.planted_attributes
    rng = np.random.default_rng(derive_seed(spec.seed, "synthetic", table))
    n = spec.customer_tuples
    a = rng.standard_normal(n)
    b = rng.standard_normal(n)
    noise = rng.standard_normal((n, spec.noise_attributes))
    segments = rng.choice(len(SEGMENTS), size=n)

    columns = [_pk(spec.planted_key), ColumnSpec(name=first, kind="numerical")]
    columns.append(ColumnSpec(name=second, kind="numerical"))
    columns.extend(ColumnSpec(name=f"x{j}", kind="numerical") for j in range(spec.noise_attributes))
    columns.append(ColumnSpec(name="segment", kind="categorical"))

    rows = []
    for i in range(n):
        key = _owner_key(spec, i)
        values: List[CellValue] = [key, _num(a[i]), _num(b[i])]
        values.extend(_num(v) for v in noise[i])
        values.append(SEGMENTS[segments[i]])
        rows.append(Row(table, key, tuple(values)))

    table_spec = TableSpec(name=table, file=f"{table}.csv", columns=columns)
    return Table(table_spec, rows), np.round(a, 6), np.round(b, 6)


def _noise_table(spec: SyntheticSpec, name: str, references_planted: bool) -> Table:
    rng = np.random.default_rng(derive_seed(spec.seed, "synthetic", name))
    n = spec.auxiliary_tuples
    noise = rng.standard_normal((n, spec.noise_attributes))
    kinds = rng.choice(len(KINDS), size=n)
    words = rng.choice(len(WORDS), size=(n, 3))
    owners = rng.integers(0, spec.customer_tuples, size=n)

    columns = [_pk(f"{name}_id")]
    if references_planted:
        key = spec.planted_key
        columns.append(_fk(key, spec.planted_table, key))
    columns.extend(ColumnSpec(name=f"n{j}", kind="numerical") for j in range(spec.noise_attributes))
    columns.append(ColumnSpec(name="kind", kind="categorical"))
    columns.append(ColumnSpec(name="note", kind="text"))

    rows = []
    for i in range(n):
        key = f"{name}-{i:05d}"
        values: List[CellValue] = [key]
        if references_planted:
            values.append(_owner_key(spec, owners[i]))
        values.extend(_num(v) for v in noise[i])
        values.append(KINDS[kinds[i]])
        values.append(" ".join(WORDS[w] for w in words[i]))
        rows.append(Row(name, key, tuple(values)))

    table_spec = TableSpec(name=name, file=f"{name}.csv", columns=columns)
    return Table(table_spec, rows)


def planted_label(spec: SyntheticSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    The noise-free label of the planted rule: xor of the signs of a and b, or a * b.
    """
    if spec.label_rule == "xor":
        return ((a > 0) != (b > 0)).astype(int)
    return a * b


def _orders(
    spec: SyntheticSpec, a: np.ndarray, b: np.ndarray, referenced: Sequence[str]
) -> Table:
    rng = np.random.default_rng(derive_seed(spec.seed, "synthetic", BASE_TABLE))
    n = spec.base_tuples
    owners = rng.integers(0, spec.customer_tuples, size=n)
    links = {name: rng.integers(0, spec.auxiliary_tuples, size=n) for name in referenced}
    amount = rng.lognormal(3.0, 0.5, size=n)
    channels = rng.choice(len(CHANNELS), size=n)
    noise = rng.standard_normal((n, spec.noise_attributes))

    clean = planted_label(spec, a[owners], b[owners])
    if spec.label_rule == "xor":
        flips = rng.random(n) < spec.label_noise
        labels: List[CellValue] = [str(int(v)) for v in np.where(flips, 1 - clean, clean)]
        target = ColumnSpec(name=TARGET, kind="categorical")
    else:
        noisy = clean + spec.label_noise * rng.standard_normal(n)
        labels = [_num(v) for v in noisy]
        target = ColumnSpec(name=TARGET, kind="numerical")

    columns = [_pk("order_id"), _fk(spec.planted_key, spec.planted_table, spec.planted_key)]
    columns.extend(_fk(f"{name}_id", name, f"{name}_id") for name in referenced)
    columns.append(ColumnSpec(name="amount", kind="numerical"))
    columns.append(ColumnSpec(name="channel", kind="categorical"))
    columns.extend(ColumnSpec(name=f"z{j}", kind="numerical") for j in range(spec.noise_attributes))
    columns.append(target)

    rows = []
    for i in range(n):
        key = f"o{i:06d}"
        values: List[CellValue] = [key, _owner_key(spec, owners[i])]
        values.extend(f"{name}-{links[name][i]:05d}" for name in referenced)
        values.append(_num(amount[i]))
        values.append(CHANNELS[channels[i]])
        values.extend(_num(v) for v in noise[i])
        values.append(labels[i])
        rows.append(Row(BASE_TABLE, key, tuple(values)))

    table_spec = TableSpec(name=BASE_TABLE, file=f"{BASE_TABLE}.csv", columns=columns)
    return Table(table_spec, rows, is_base=True)


def generate_synthetic(
    spec: SyntheticSpec, root_path: Union[str, Path]
) -> Tuple[RelationalDataset, SyntheticManifest]:
    """
    Write a planted-signal relational dataset to `root_path` and load it back.

    :param spec: Generator settings.
    :type spec: SyntheticSpec
    :param root_path: Output directory.
    :type root_path: Union[str, Path]
    :return: The loaded dataset and a manifest naming the planted table and attributes.
    :rtype: Tuple[RelationalDataset, SyntheticManifest]
    """
    planted, a, b = _planted(spec)
    noise_tables = _noise_table_names(spec)
    tables: Dict[str, Table] = {spec.planted_table: planted}
    for name, referenced_by_base in noise_tables:
        tables[name] = _noise_table(spec, name, not referenced_by_base)
    referenced = [name for name, referenced_by_base in noise_tables if referenced_by_base]
    tables[BASE_TABLE] = _orders(spec, a, b, referenced)

    ordered = [BASE_TABLE] + sorted(name for name in tables if name != BASE_TABLE)
    descriptor = SchemaDescriptor(
        tables=[tables[name].spec for name in ordered],
        base_table=BASE_TABLE,
        target_column=TARGET,
        task=spec.task,
        class_count=2 if spec.task == "classification" else None,
    )
    write_dataset(RelationalDataset(descriptor, tables, ["0", "1"]), root_path)
    dataset = load_dataset(root_path)

    logger.info(
        "synthetic %s dataset with %d tables written to %s", spec.label_rule, len(tables), root_path
    )
    manifest = SyntheticManifest(
        spec=spec,
        tables=ordered,
        planted_table=spec.planted_table,
        planted_attributes=list(spec.planted_attributes),
    )
    return dataset, manifest
