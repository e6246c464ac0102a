from pathlib import Path
from typing import Dict, List

import orjson
import pandas as pd
import pytest

from tablegraft.dataset import RelationalDataset, load_dataset
from tablegraft.dto.config import DatasetConfig, ExperimentConfig, PipelineConfig
from tablegraft.dto.graph import SimilarityConfig
from tablegraft.dto.linker import CoresetConfig
from tablegraft.dto.synthetic import SyntheticSpec
from tablegraft.dto.training import EncoderConfig, Stage1Config, Stage2Config
from tablegraft.synthetic import generate_synthetic


def _pk(name):
    return {"name": name, "kind": "primary_key"}


def _fk(name, table, column):
    return {"name": name, "kind": "foreign_key", "fk_target": [table, column]}


SHOP_SCHEMA = {
    "base_table": "orders",
    "target_column": "label",
    "task": "classification",
    "tables": [
        {
            "name": "orders",
            "file": "orders.csv",
            "columns": [
                _pk("order_id"),
                _fk("customer_id", "customers", "customer_id"),
                {"name": "amount", "kind": "numerical"},
                {"name": "channel", "kind": "categorical"},
                {"name": "label", "kind": "categorical"},
            ],
        },
        {
            "name": "customers",
            "file": "customers.csv",
            "columns": [
                _pk("customer_id"),
                _fk("city_id", "cities", "city_id"),
                {"name": "age", "kind": "numerical"},
                {"name": "tier", "kind": "categorical"},
                {"name": "bio", "kind": "text"},
            ],
        },
        {
            "name": "cities",
            "file": "cities.csv",
            "columns": [
                _pk("city_id"),
                {"name": "population", "kind": "numerical"},
                {"name": "region", "kind": "categorical"},
            ],
        },
        {
            "name": "reviews",
            "file": "reviews.csv",
            "columns": [
                _pk("review_id"),
                _fk("order_id", "orders", "order_id"),
                {"name": "stars", "kind": "numerical"},
                {"name": "comment", "kind": "text"},
                {"name": "verified", "kind": "categorical"},
            ],
        },
        {
            "name": "tags",
            "file": "tags.csv",
            "columns": [_pk("tag_id"), {"name": "name", "kind": "categorical"}],
        },
    ],
}

SHOP_TABLES: Dict[str, List[List[str]]] = {
    "orders": [
        ["o1", "c1", "10.5", "web", "0"],
        ["o2", "c1", "3.0", "store", "1"],
        ["o3", "c2", "7.25", "web", "0"],
        ["o4", "c2", "1.0", "phone", "1"],
        ["o5", "c3", "12.0", "web", "0"],
        ["o6", "c3", "8.0", "store", "1"],
        ["o7", "c4", "4.5", "web", "0"],
        ["o8", "c4", "6.0", "phone", "1"],
        ["o9", "c1", "9.0", "store", "0"],
        ["o10", "c2", "2.5", "web", "1"],
        ["o11", "c3", "5.5", "phone", "0"],
        ["o12", "c4", "11.0", "web", "1"],
    ],
    "customers": [
        ["c1", "k1", "34", "gold", "likes fast shipping"],
        ["c2", "k1", "51", "silver", "prefers the store"],
        ["c3", "k2", "27", "gold", "orders late at night"],
        ["c4", "k2", "45", "bronze", "rarely returns items"],
    ],
    "cities": [
        ["k1", "120000", "north"],
        ["k2", "80000", "south"],
    ],
    "reviews": [
        ["r1", "o1", "5", "great", "yes"],
        ["r2", "o1", "4", "good enough", "no"],
        ["r3", "o2", "2", "late delivery", "yes"],
        ["r4", "o3", "5", "perfect", "yes"],
        ["r5", "o5", "3", "fine", "no"],
        ["r6", "o6", "1", "broken box", "yes"],
        ["r7", "o8", "4", "quick", "yes"],
        ["r8", "o9", "5", "great again", "no"],
    ],
    "tags": [["t1", "promo"], ["t2", "clearance"]],
}

SMALL_SPEC = SyntheticSpec(
    base_tuples=120,
    customer_tuples=24,
    auxiliary_tables=3,
    auxiliary_tuples=20,
    noise_attributes=2,
    label_noise=0.0,
    seed=0,
)


def write_dataset_dir(root: Path, schema: dict, tables: Dict[str, List[List[str]]]) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    for spec in schema["tables"]:
        columns = [c["name"] for c in spec["columns"]]
        frame = pd.DataFrame(tables[spec["name"]], columns=columns, dtype=str)
        frame.to_csv(root / spec["file"], index=False)
    (root / "schema.json").write_bytes(orjson.dumps(schema))
    return root


@pytest.fixture
def shop_dir(tmp_path: Path) -> Path:
    return write_dataset_dir(tmp_path / "shop", SHOP_SCHEMA, SHOP_TABLES)


@pytest.fixture
def shop(shop_dir: Path) -> RelationalDataset:
    return load_dataset(shop_dir)


@pytest.fixture(scope="session")
def synthetic_dir(tmp_path_factory: pytest.TempPathFactory) -> Path:
    root = tmp_path_factory.mktemp("synthetic")
    generate_synthetic(SMALL_SPEC, root)
    return root


@pytest.fixture
def synthetic(synthetic_dir: Path) -> RelationalDataset:
    return load_dataset(synthetic_dir)


@pytest.fixture
def fast_config(tmp_path: Path, synthetic_dir: Path) -> PipelineConfig:
    return PipelineConfig(
        output_dir=str(tmp_path / "run"),
        dataset=DatasetConfig(path=str(synthetic_dir)),
        coreset=CoresetConfig(base_sample_size=1.0),
        encoder=EncoderConfig(d_num=4, d_cat=4, d_text=8, d_out=8, overflow_buckets=4),
        stage1=Stage1Config(d_h=8, epochs=3, batch_size=32),
        stage2=Stage2Config(d_model=8, epochs=5),
        similarity=SimilarityConfig(k=3),
        experiments=ExperimentConfig(
            seeds=[0],
            ells=[0.5],
            sweep_methods=["maximal_clique"],
            baselines=["base_only"],
            random_k=2,
        ),
    )
