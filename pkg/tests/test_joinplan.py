from typing import List

import pytest

from tablegraft.dto.joinplan import DirectedJoinGraph, JoinEdge, PathScoringConfig
from tablegraft.errors import UnreachableTableWarning
from tablegraft.joinplan import (
    build_join_graph,
    find_meta_paths,
    join_direction_score,
    path_length_score,
    plan_meta_paths,
    render_meta_paths,
    score_path,
)


def edge(src, dst, link_type="many_to_one", fanout=1.0, column=None):
    return JoinEdge(
        src_table=src,
        dst_table=dst,
        via=(column or f"{dst}_id", f"{dst}_id"),
        link_type=link_type,
        avg_fanout=fanout,
        fk_on_source=link_type != "one_to_many",
    )


def simple_paths(graph: DirectedJoinGraph, target: str) -> List[List[JoinEdge]]:
    paths = []

    def walk(table, visited, hops):
        if table == target:
            paths.append(list(hops))
            return
        for e in graph.out_edges(table):
            if e.dst_table not in visited:
                walk(e.dst_table, visited | {e.dst_table}, [*hops, e])

    walk(graph.base_table, {graph.base_table}, [])
    return paths


@pytest.mark.parametrize("length, expected", [(0, 1.0), (2, 1 / 3), (9, 0.1)])
def test_path_length_score(length, expected):
    assert path_length_score(length) == pytest.approx(expected)


def test_path_length_score_rejects_negative():
    with pytest.raises(ValueError):
        path_length_score(-1)


def test_join_direction_score():
    assert join_direction_score([]) == 1.0
    assert join_direction_score([edge("a", "b", "one_to_many", 2.0)]) == pytest.approx(1 / 3)
    assert join_direction_score(
        [edge("a", "b", "one_to_many", 1.0 + 1e-9), edge("b", "c", "one_to_many", 1.0 + 1e-9)]
    ) == pytest.approx(1 / 3)
    assert join_direction_score([edge("a", "b", "many_to_one", 7.0)]) == 1.0


def test_score_path():
    config = PathScoringConfig(alpha=0.5, beta=0.5)

    assert score_path([], config) == 1.0
    hops = [edge("a", "b", "one_to_many", 2.0), edge("b", "c")]
    assert score_path(hops, config) == pytest.approx(0.5 / 3 + 0.5 / 3)

    pure_length = PathScoringConfig(alpha=1.0, beta=0.0)
    assert score_path(hops, pure_length) == pytest.approx(path_length_score(2))


def test_scoring_weights_must_not_both_be_zero():
    with pytest.raises(ValueError):
        PathScoringConfig(alpha=0.0, beta=0.0)


def test_build_join_graph(shop):
    graph = build_join_graph(shop)
    by_pair = {(e.src_table, e.dst_table): e for e in graph.edges}

    assert len(graph.edges) == 6
    forward = by_pair[("orders", "customers")]
    assert forward.link_type == "many_to_one"
    assert forward.fk_on_source
    assert forward.avg_fanout == pytest.approx(1.0)

    backward = by_pair[("customers", "orders")]
    assert backward.link_type == "one_to_many"
    assert backward.avg_fanout == pytest.approx(3.0)

    reviews = by_pair[("orders", "reviews")]
    assert reviews.link_type == "one_to_one"
    assert reviews.avg_fanout == pytest.approx(8 / 12)


def test_plan_meta_paths(shop):
    with pytest.warns(UnreachableTableWarning, match="tags"):
        manifest = plan_meta_paths(shop)

    assert sorted(manifest.paths) == ["cities", "customers", "reviews"]
    assert manifest.unreachable == ["tags"]

    cities = manifest.paths["cities"]
    assert cities.tables == ["orders", "customers", "cities"]
    assert cities.length == 2
    assert cities.score == pytest.approx(0.5 / 3 + 0.5)
    assert manifest.paths["customers"].score == pytest.approx(0.75)
    assert "customers" in render_meta_paths(manifest.paths)


def test_chain_schema():
    graph = DirectedJoinGraph(
        base_table="t0",
        nodes=["t0", "t1", "t2"],
        edges=[edge("t0", "t1"), edge("t1", "t2")],
    )

    paths = find_meta_paths(graph)

    assert [(h.src_table, h.dst_table) for h in paths["t2"].hops] == [("t0", "t1"), ("t1", "t2")]
    assert paths["t2"].length == 2


def test_diamond_prefers_many_to_one_detour():
    config = PathScoringConfig(alpha=0.5, beta=0.5)
    direct = edge("b", "a", "one_to_many", 10.0, column="b_id")
    graph = DirectedJoinGraph(
        base_table="b",
        nodes=["a", "b", "m"],
        edges=[direct, edge("b", "m"), edge("m", "a")],
    )

    paths = find_meta_paths(graph, config)

    chosen = paths["a"]
    assert [h.src_table for h in chosen.hops] == ["b", "m"]
    assert chosen.score == pytest.approx(score_path(chosen.hops, config))
    assert chosen.score == pytest.approx(0.5 / 3 + 0.5)
    assert score_path([direct], config) == pytest.approx(0.25 + 0.5 / 11)


@pytest.mark.parametrize(
    "edges",
    [
        [edge("t0", "t1"), edge("t1", "t2"), edge("t0", "t3"), edge("t3", "t2")],
        [
            edge("t0", "t1", "one_to_many", 4.0, column="t0_id"),
            edge("t0", "t2"),
            edge("t2", "t1"),
            edge("t1", "t3"),
            edge("t2", "t4", "one_to_many", 2.0, column="t2_id"),
        ],
        [edge("t0", "t1"), edge("t1", "t2"), edge("t2", "t3"), edge("t0", "t3")],
    ],
)
def test_greedy_paths_against_enumeration(edges):
    config = PathScoringConfig()
    nodes = sorted({e.src_table for e in edges} | {e.dst_table for e in edges})
    graph = DirectedJoinGraph(base_table="t0", nodes=nodes, edges=edges)

    paths = find_meta_paths(graph, config)

    for target in nodes[1:]:
        candidates = simple_paths(graph, target)
        best = max(score_path(hops, config) for hops in candidates)
        assert paths[target].score == pytest.approx(best)
