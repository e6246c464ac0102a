import numpy as np
import pytest
import torch
import torch.nn.functional as F
from torch.func import functional_call

from tablegraft.dto.dataset import TaskSpec
from tablegraft.dto.graph import (
    EdgeTypeInfo,
    GraphMeta,
    NodeTypeInfo,
    SimilarityConfig,
    SplitConfig,
)
from tablegraft.dto.training import Stage2Config
from tablegraft.errors import NotABaseNodeError
from tablegraft.hetgraph import HeteroGraph, NodeSet
from tablegraft.hgnn import (
    EdgeImportance,
    HeteroGNN,
    feature_selection_report,
    predict,
    prediction_frame,
    render_feature_report,
    sample_edges,
    segment_softmax,
    stage2_train,
)


def pairs(*edges):
    return torch.as_tensor(list(edges), dtype=torch.long).t().reshape(2, -1)


def make_graph(base, edges, aux=None, splits=None, tables=None):
    """
    A classification graph over base node type "b" plus the given auxiliary node types.
    """
    features = {"b": base, **(aux or {})}
    tables = tables or {}
    node_sets = [
        NodeSet(
            NodeTypeInfo(
                name=name,
                table=tables.get(name, name),
                attributes=[f"{name}_x"],
                count=x.shape[0],
                width=x.shape[1],
            ),
            [f"{name}{i}" for i in range(x.shape[0])],
            x,
        )
        for name, x in features.items()
    ]
    n = base.shape[0]
    splits = splits or ["train"] * n
    meta = GraphMeta(
        task=TaskSpec(base_table="b", target_column="y", task="classification", class_count=2),
        class_labels=["no", "yes"],
        base_type="b",
        node_types=[ns.info for ns in node_sets],
        edge_types=[
            EdgeTypeInfo(src_type=s, relation=r, dst_type=d, count=int(p.shape[1]))
            for (s, r, d), p in sorted(edges.items())
        ],
        similarity=SimilarityConfig(),
        split=SplitConfig(),
        split_counts={},
    )
    return HeteroGraph(node_sets, edges, [i % 2 for i in range(n)], splits, meta)


def randn(*shape, seed=0):
    return torch.randn(*shape, generator=torch.Generator().manual_seed(seed))


@pytest.fixture
def small_graph():
    base = randn(10, 3)
    aux = {"a": randn(4, 2, seed=1)}
    edges = {
        ("a", "join", "b"): pairs(*[(i % 4, i) for i in range(10)]),
        ("b", "join", "a"): pairs(*[(i, i % 4) for i in range(10)]),
        ("b", "similarity", "b"): pairs((0, 1), (1, 0), (2, 3), (3, 2), (4, 5), (5, 4)),
    }
    splits = ["train"] * 6 + ["val"] * 2 + ["test"] * 2
    return make_graph(base, edges, aux, splits)


def test_segment_softmax():
    score = torch.tensor([1.0, 1.0, 5.0, 0.0, 2.0])
    index = torch.tensor([0, 0, 1, 2, 2])

    att = segment_softmax(score, index, 3)

    assert torch.allclose(att[:2], torch.tensor([0.5, 0.5]))
    assert att[2] == pytest.approx(1.0)
    assert att[3] + att[4] == pytest.approx(1.0)
    assert att[4] > att[3]


def test_isolated_node_keeps_self_transform():
    graph = make_graph(randn(2, 3), {("a", "join", "b"): pairs((0, 0))}, {"a": randn(1, 3)})
    model = HeteroGNN.for_graph(graph, Stage2Config(d_model=4, layers=1))
    h = {"b": randn(2, 4, seed=2), "a": randn(1, 4, seed=3)}

    updated, attention, _ = model.message_pass(h, graph.edges, 0)

    self_loop = model.layers[0].self_loop[model._node_key["b"]]
    assert torch.allclose(updated["b"][1], F.elu(self_loop(h["b"][1])))
    assert attention[("a", "join", "b")].tolist() == [1.0]


def test_identical_neighbours_split_attention():
    graph = make_graph(
        randn(1, 3),
        {("a", "join", "b"): pairs((0, 0), (1, 0))},
        {"a": randn(1, 3).expand(2, -1).clone()},
    )
    model = HeteroGNN.for_graph(graph, Stage2Config(d_model=4, layers=1))
    row = randn(1, 4, seed=5)
    h = {"b": randn(1, 4, seed=4), "a": row.expand(2, -1)}

    _, attention, coefficients = model.message_pass(h, graph.edges, 0)

    assert torch.allclose(attention[("a", "join", "b")], torch.tensor([0.5, 0.5]))
    assert torch.allclose(coefficients[("a", "join", "b")], torch.tensor([0.5, 0.5]))


def test_uniform_attention_without_edge_weights():
    graph = make_graph(
        randn(2, 3),
        {("a", "join", "b"): pairs((0, 0), (1, 0), (2, 0), (2, 1))},
        {"a": randn(3, 3, seed=1)},
    )
    model = HeteroGNN.for_graph(graph, Stage2Config(d_model=4, layers=1, edge_weights=False))

    result = model(graph)

    att = result.attention[0][("a", "join", "b")]
    assert torch.allclose(att, torch.tensor([1 / 3, 1 / 3, 1 / 3, 1.0]))
    assert not model.edge_weights_of(("a", "join", "b")).requires_grad


def test_two_layers_see_two_hops():
    chain = {("b", "similarity", "b"): pairs((0, 1), (1, 2), (2, 3))}
    base = randn(4, 3)
    moved = base.clone()
    moved[0] += 10.0
    model = HeteroGNN.for_graph(make_graph(base, chain), Stage2Config(d_model=4, layers=2))

    with torch.no_grad():
        before = model(make_graph(base, chain)).output
        after = model(make_graph(moved, chain)).output

    assert torch.allclose(before[3], after[3])
    assert not torch.allclose(before[2], after[2])


def test_gradients_match_finite_differences(small_graph):
    model = HeteroGNN.for_graph(small_graph, Stage2Config(d_model=3, layers=2)).double()
    target = small_graph.label_tensor()
    names = [name for name, _ in model.named_parameters()]
    params = tuple(p.detach().clone().requires_grad_() for p in model.parameters())

    def loss(*values):
        output = functional_call(model, dict(zip(names, values)), (small_graph,)).output
        return F.cross_entropy(output, target, reduction="sum")

    assert torch.autograd.gradcheck(loss, params, eps=1e-6, atol=1e-5, rtol=1e-4)


def test_predict(small_graph):
    model = HeteroGNN.for_graph(small_graph, Stage2Config(d_model=4), seed=2)

    probabilities = predict(small_graph, model, [0, 3, 9])

    assert probabilities.shape == (3, 2)
    assert np.allclose(probabilities.sum(axis=1), 1.0)
    assert np.array_equal(probabilities, predict(small_graph, model, [0, 3, 9]))
    with pytest.raises(NotABaseNodeError):
        predict(small_graph, model, [10])
    with pytest.raises(NotABaseNodeError):
        predict(small_graph, model, [-1])


def test_prediction_frame(small_graph):
    model = HeteroGNN.for_graph(small_graph, Stage2Config(d_model=4))

    frame = prediction_frame(small_graph, model)

    assert list(frame.columns) == ["key", "split", "prediction", "prob_no", "prob_yes"]
    assert len(frame) == 10
    assert set(frame["prediction"]) <= {"no", "yes"}
    assert np.allclose(frame["prob_no"] + frame["prob_yes"], 1.0)


def test_sample_edges_caps_fanout(small_graph):
    subset = sample_edges(small_graph, 1, torch.Generator().manual_seed(0))

    for edge_type, kept in subset.items():
        destinations = small_graph.edges[edge_type][1][kept].tolist()
        assert len(destinations) == len(set(destinations))
        assert len(set(destinations)) == len(set(small_graph.edges[edge_type][1].tolist()))


@pytest.mark.parametrize("sampling", ["full_graph", "neighbor"])
def test_stage2_train(small_graph, sampling):
    config = Stage2Config(d_model=4, epochs=6, sampling=sampling, batch_size=4, fanout=2)
    model = HeteroGNN.for_graph(small_graph, config, seed=1)

    result = stage2_train(small_graph, model, seed=1)

    assert result.curve.epochs == list(range(1, 7))
    assert len(result.curve.val_losses) == 6
    assert 1 <= result.best_epoch <= 6
    assert result.best_val_loss == pytest.approx(min(result.curve.val_losses))
    for edge_type, values in result.importance.per_edge.items():
        assert values.shape == (small_graph.edges[edge_type].shape[1],)
        assert (values >= 0).all()


def test_edge_importance_stays_non_negative(small_graph):
    config = Stage2Config(d_model=4, epochs=30, learning_rate=0.2)
    model = HeteroGNN.for_graph(small_graph, config, seed=2)

    result = stage2_train(small_graph, model, seed=2)

    for edge_type in model.edge_types:
        assert (result.model.edge_weights_of(edge_type).detach() > 0).all()
        assert (result.importance.per_edge[edge_type] >= 0).all()
    report = feature_selection_report(result.importance, small_graph)
    assert 0.0 <= report.similarity_share <= 1.0
    assert all(entry.importance >= 0.0 for entry in report.ranking)


def test_edge_weights_start_at_one(small_graph):
    model = HeteroGNN.for_graph(small_graph, Stage2Config(d_model=4), seed=0)

    for edge_type in model.edge_types:
        weights = model.edge_weights_of(edge_type)
        assert torch.equal(weights, torch.ones(model.edge_counts[edge_type]))


def test_stage2_train_is_reproducible(small_graph):
    config = Stage2Config(d_model=4, epochs=4)

    first = stage2_train(small_graph, HeteroGNN.for_graph(small_graph, config, seed=3), seed=3)
    second = stage2_train(small_graph, HeteroGNN.for_graph(small_graph, config, seed=3), seed=3)

    assert first.stamp == second.stamp


def test_checkpoint_restores_predictions(small_graph):
    model = stage2_train(
        small_graph, HeteroGNN.for_graph(small_graph, Stage2Config(d_model=4, epochs=3))
    ).model

    restored = HeteroGNN.from_checkpoint(model.checkpoint())

    expected = predict(small_graph, model, range(10))
    assert np.allclose(predict(small_graph, restored, range(10)), expected)


def test_feature_selection_report():
    aux = {"a#0": randn(2, 2), "a#1": randn(1, 2), "c": randn(1, 2)}
    graph = make_graph(randn(3, 2), {}, aux, tables={"a#0": "a", "a#1": "a"})
    importance = EdgeImportance(
        per_edge={
            ("a#0", "join", "b"): np.array([0.2, 0.4]),
            ("a#1", "join", "b"): np.array([0.9]),
            ("b", "similarity", "b"): np.array([0.5, 0.5]),
            ("b", "join", "a#0"): np.array([5.0]),
        },
        edges={},
    )

    report = feature_selection_report(importance, graph, select_top=2)

    assert [entry.node_type for entry in report.ranking] == ["a#1", "a#0", "c"]
    assert [entry.importance for entry in report.ranking] == pytest.approx([0.9, 0.3, 0.0])
    assert [entry.selected for entry in report.ranking] == [True, True, False]
    assert report.ranking[0].table == "a"
    assert report.ranking[2].edges == 0
    assert report.similarity_share == pytest.approx(0.4)
    assert len(report.edge_types) == 4
    assert "a#1" in render_feature_report(report)
