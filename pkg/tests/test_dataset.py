import copy

import orjson
import pytest

from tablegraft.dataset import column_statistics, load_dataset, load_report, write_dataset
from tablegraft.errors import (
    ColumnMismatchError,
    ColumnNotFoundError,
    DataQualityWarning,
    DescriptorError,
    DuplicatePrimaryKeyError,
    MissingFileError,
    UnknownColumnKindError,
)

from .conftest import SHOP_SCHEMA, SHOP_TABLES, write_dataset_dir


def test_load_dataset(shop):
    assert sorted(shop.tables) == ["cities", "customers", "orders", "reviews", "tags"]
    assert shop.base.name == "orders"
    assert len(shop.base) == 12
    assert shop.class_labels == ["0", "1"]
    assert shop.task.class_count == 2
    assert shop.labels["o1"] == 0
    assert shop.labels["o2"] == 1
    assert sum(shop.dangling_fks.values()) == 0

    customers = shop.tables["customers"]
    assert customers.value(customers.index["c2"], "age") == 51.0
    assert customers.value(customers.index["c2"], "tier") == "silver"
    assert [c.name for c in customers.attributes()] == ["age", "tier", "bio"]
    assert [c.name for c in shop.base_attributes()] == ["amount", "channel"]


def test_two_table_schema(tmp_path):
    schema = copy.deepcopy(SHOP_SCHEMA)
    schema["tables"] = [schema["tables"][0], schema["tables"][1]]
    customers = schema["tables"][1]
    customers["columns"] = [c for c in customers["columns"] if c["name"] != "city_id"]
    tables = {
        "orders": SHOP_TABLES["orders"],
        "customers": [[row[0], *row[2:]] for row in SHOP_TABLES["customers"]],
    }
    dataset = load_dataset(write_dataset_dir(tmp_path / "two", schema, tables))

    assert len(dataset.tables) == 2
    assert load_report(dataset).dangling_total == 0


def test_duplicate_primary_key(tmp_path):
    tables = copy.deepcopy(SHOP_TABLES)
    tables["cities"].append(["k1", "5", "west"])
    root = write_dataset_dir(tmp_path / "dup", SHOP_SCHEMA, tables)

    with pytest.raises(DuplicatePrimaryKeyError) as e:
        load_dataset(root)

    assert e.value.table == "cities"
    assert e.value.key == "k1"


def test_dangling_foreign_key_is_counted(tmp_path):
    tables = copy.deepcopy(SHOP_TABLES)
    tables["reviews"].append(["r9", "o99", "3", "lost order", "no"])
    root = write_dataset_dir(tmp_path / "dangling", SHOP_SCHEMA, tables)

    with pytest.warns(DataQualityWarning, match="dangling"):
        dataset = load_dataset(root)

    report = load_report(dataset)
    assert report.dangling_fks["reviews.order_id"] == 1
    assert report.dangling_total == 1
    assert len(dataset.tables["reviews"]) == 9


def test_missing_table_file(shop_dir):
    (shop_dir / "cities.csv").unlink()

    with pytest.raises(MissingFileError):
        load_dataset(shop_dir)


def test_column_mismatch(tmp_path):
    schema = copy.deepcopy(SHOP_SCHEMA)
    schema["tables"][2]["columns"].append({"name": "area", "kind": "numerical"})
    root = write_dataset_dir(tmp_path / "mismatch", SHOP_SCHEMA, SHOP_TABLES)
    (root / "schema.json").write_bytes(orjson.dumps(schema))

    with pytest.raises(ColumnMismatchError):
        load_dataset(root)


def test_unknown_column_kind(tmp_path):
    schema = copy.deepcopy(SHOP_SCHEMA)
    schema["tables"][2]["columns"][1]["kind"] = "timestamp"
    root = write_dataset_dir(tmp_path / "kind", schema, SHOP_TABLES)

    with pytest.raises(UnknownColumnKindError):
        load_dataset(root)


def test_descriptor_must_resolve_foreign_keys(tmp_path):
    schema = copy.deepcopy(SHOP_SCHEMA)
    schema["tables"][1]["columns"][1]["fk_target"] = ["regions", "region_id"]
    root = write_dataset_dir(tmp_path / "fk", schema, SHOP_TABLES)

    with pytest.raises(DescriptorError):
        load_dataset(root)


def test_non_finite_numbers_load_as_null(tmp_path):
    tables = copy.deepcopy(SHOP_TABLES)
    tables["cities"][0][1] = "inf"
    root = write_dataset_dir(tmp_path / "inf", SHOP_SCHEMA, tables)

    with pytest.warns(DataQualityWarning, match="non-finite"):
        dataset = load_dataset(root)

    cities = dataset.tables["cities"]
    assert cities.value(cities.index["k1"], "population") is None
    assert dataset.nonfinite_nulled == {"cities.population": 1}


def test_write_and_reload_keeps_typed_values(shop, tmp_path):
    write_dataset(shop, tmp_path / "copy")
    reloaded = load_dataset(tmp_path / "copy")

    for name, table in shop.tables.items():
        assert [row.values for row in reloaded.tables[name]] == [row.values for row in table]
    assert reloaded.labels == shop.labels


@pytest.mark.parametrize(
    "values, expected",
    [
        (["1", "2", "3"], {"min": 1.0, "max": 3.0, "mean": 2.0}),
        (["5", "5", "5"], {"stddev": 0.0, "mean": 5.0}),
        (["1", "", "3"], {"mean": 2.0, "nulls": 1, "count": 2}),
    ],
)
def test_column_statistics(tmp_path, values, expected):
    schema = copy.deepcopy(SHOP_SCHEMA)
    tables = copy.deepcopy(SHOP_TABLES)
    tables["cities"] = [[f"k{i}", v, "north"] for i, v in enumerate(values)]
    tables["customers"] = [[row[0], "k0", *row[2:]] for row in tables["customers"]]
    dataset = load_dataset(write_dataset_dir(tmp_path / "stats", schema, tables))

    stats = column_statistics(dataset.tables["cities"], "population")

    for field, value in expected.items():
        assert getattr(stats, field) == pytest.approx(value)


def test_column_statistics_categorical(shop):
    stats = column_statistics(shop.tables["customers"], "tier")

    assert stats.distinct == 3
    assert stats.mean is None

    with pytest.raises(ColumnNotFoundError):
        column_statistics(shop.tables["customers"], "height")
