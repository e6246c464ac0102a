import numpy as np
import pytest
import torch
from torch.func import functional_call

from tablegraft.dataset import Row, Table
from tablegraft.dto.dataset import ColumnSpec, TableSpec
from tablegraft.dto.training import EncoderConfig
from tablegraft.encoders import TableEncoder, encode_text
from tablegraft.errors import DimensionMismatchError, UnknownAttributeError


CONFIG = EncoderConfig(d_num=3, d_cat=4, d_text=16, d_out=5, overflow_buckets=4)


@pytest.fixture
def customers(shop):
    return TableEncoder.from_table(shop.tables["customers"], CONFIG, seed=1)


@pytest.fixture
def constant_table():
    spec = TableSpec(
        name="gauges",
        file="gauges.csv",
        columns=[
            ColumnSpec(name="gauge_id", kind="primary_key"),
            ColumnSpec(name="level", kind="numerical"),
            ColumnSpec(name="reading", kind="numerical"),
        ],
    )
    rows = [Row("gauges", f"g{i}", (f"g{i}", 5.0, float(i))) for i in range(4)]
    return Table(spec, rows)


def test_from_table_excludes_keys(customers):
    assert customers.attribute_names == ["age", "tier", "bio"]
    assert customers.vocabularies["tier"] == ["bronze", "gold", "silver"]


def test_mean_value_encodes_to_bias(customers):
    mean = customers.stats["age"].mean
    with torch.no_grad():
        customers.num_bias.zero_()

    out = customers.encode_numerical("age", [mean])

    assert torch.allclose(out[0], torch.zeros(CONFIG.d_num))


def test_constant_column_standardizes_to_zero(constant_table):
    encoder = TableEncoder.from_table(constant_table, CONFIG)

    out = encoder.encode_numerical("level", [5.0, 5.0])

    slot = encoder.slots["level"]
    assert torch.allclose(out, encoder.num_bias[slot].expand(2, -1))


def test_zero_variance_column_stays_continuous(constant_table):
    encoder = TableEncoder.from_table(constant_table, CONFIG)

    out = encoder.encode_numerical("level", [5.0, 5.5, 6.0]).detach()

    slot = encoder.slots["level"]
    assert not torch.allclose(out[1], encoder.num_bias[slot])
    assert torch.allclose(out[2] - out[1], out[1] - out[0], rtol=1e-4)


def test_distinct_numbers_give_distinct_vectors(customers):
    out = customers.encode_numerical("age", [20.0, 60.0])

    assert not torch.allclose(out[0], out[1])


def test_null_maps_to_learned_vector(customers):
    out = customers.encode_numerical("age", [None, 34.0])
    slot = customers.slots["age"]

    assert torch.equal(out[0], customers.nulls["numerical"][slot])


def test_categorical_tokens(customers):
    out = customers.encode_categorical("tier", ["gold", "gold", "silver", "platinum", "platinum"])

    assert torch.equal(out[0], out[1])
    assert not torch.equal(out[0], out[2])
    assert torch.equal(out[3], out[4])
    assert customers.token_index("tier", "platinum") >= len(customers.vocabularies["tier"])
    assert customers.token_index("tier", "gold") == 1


def test_encode_text():
    vectors = encode_text(
        ["the quick brown fox", "the quick brown fox", "the quick brown fax", "zq vw", ""], 256
    )

    assert np.array_equal(vectors[0], vectors[1])
    assert np.linalg.norm(vectors[0]) == pytest.approx(1.0)
    assert not vectors[4].any()
    assert vectors[0] @ vectors[2] > vectors[0] @ vectors[3]


def test_text_hashes_ngrams_across_word_boundaries():
    vectors = encode_text(["ab cd", "cd ab"], 256)

    assert not np.allclose(vectors[0], vectors[1])


def test_text_encoder_is_frozen(customers):
    out = customers.encode_text("bio", ["likes fast shipping"])

    assert not out.requires_grad


def test_project_is_linear(customers):
    e = torch.randn(2, CONFIG.d_cat, generator=torch.Generator().manual_seed(0))

    doubled = customers.project(2 * e, "categorical")

    assert torch.allclose(doubled, 2 * customers.project(e, "categorical"))
    assert not customers.project(torch.zeros(1, CONFIG.d_cat), "categorical").any()


def test_project_identity():
    config = EncoderConfig(d_num=4, d_cat=4, d_text=4, d_out=4)
    spec = TableSpec(
        name="t",
        file="t.csv",
        columns=[ColumnSpec(name="id", kind="primary_key"), ColumnSpec(name="x", kind="numerical")],
    )
    encoder = TableEncoder.from_table(Table(spec, [Row("t", "1", ("1", 1.0))]), config)
    with torch.no_grad():
        encoder.projection["numerical"].copy_(torch.eye(4))
    e = torch.arange(4, dtype=torch.float32)[None, :]

    assert torch.equal(encoder.project(e, "numerical"), e)


def test_project_rejects_wrong_width(customers):
    with pytest.raises(DimensionMismatchError):
        customers.project(torch.zeros(1, CONFIG.d_num + 1), "numerical")


def test_unknown_attribute(customers):
    with pytest.raises(UnknownAttributeError):
        customers.encode_column("city_id", ["k1"])
    with pytest.raises(UnknownAttributeError):
        customers.encode_numerical("tier", ["gold"])


def test_forward_shape_and_determinism(shop, customers):
    rows = shop.tables["customers"].tuples

    first = customers(rows)

    assert first.shape == (4, 3, CONFIG.d_out)
    assert torch.equal(first, customers(rows))
    assert customers(rows, ["tier"]).shape == (4, 1, CONFIG.d_out)


def test_checkpoint_restores_encoder(shop, customers):
    restored = TableEncoder.from_checkpoint(customers.checkpoint())
    rows = shop.tables["customers"].tuples

    assert torch.equal(restored(rows), customers(rows))


def test_gradients_match_finite_differences(shop, customers):
    customers = customers.double()
    rows = shop.tables["customers"].tuples
    names = [name for name, _ in customers.named_parameters()]
    params = tuple(p.detach().clone().requires_grad_() for p in customers.parameters())

    def loss(*values):
        out = functional_call(customers, dict(zip(names, values)), (rows,))
        weights = torch.linspace(-1.0, 1.0, out.numel(), dtype=out.dtype)
        return (out * weights.reshape(out.shape)).sum()

    assert torch.autograd.gradcheck(loss, params, eps=1e-6, atol=1e-6, rtol=1e-4)
