from __future__ import annotations

import logging
import warnings
from collections import Counter
from typing import Dict, List, Optional, Sequence, Tuple

from tablegraft.dataset import RelationalDataset
from tablegraft.dto.joinplan import (
    DirectedJoinGraph,
    JoinEdge,
    MetaPath,
    MetaPathManifest,
    PathScoringConfig,
)
from tablegraft.errors import UnreachableTableWarning
from tablegraft.utils import render_table


logger = logging.getLogger(__name__)


def build_join_graph(dataset: RelationalDataset) -> DirectedJoinGraph:
    """
    Build the Directed Join Graph: one node per table and, for every schema foreign key,
    both traversal directions annotated with link type and average fan-out measured on
    the data.
    """
    edges: List[JoinEdge] = []
    for table, column in dataset.foreign_keys():
        assert column.fk_target is not None
        referenced = dataset.tables[column.fk_target.table]
        via = (column.name, column.fk_target.column)

        matches = Counter(
            v for v in table.values(column.name) if v is not None and v in referenced.index
        )
        matched_fk_tuples = sum(matches.values())
        pk_fanout = matched_fk_tuples / len(referenced) if len(referenced) else 0.0
        fk_fanout = matched_fk_tuples / len(table) if len(table) else 0.0
        many = pk_fanout > 1.0

        edges.append(
            JoinEdge(
                src_table=table.name,
                dst_table=referenced.name,
                via=via,
                link_type="many_to_one" if many else "one_to_one",
                avg_fanout=fk_fanout,
                fk_on_source=True,
            )
        )
        edges.append(
            JoinEdge(
                src_table=referenced.name,
                dst_table=table.name,
                via=via,
                link_type="one_to_many" if many else "one_to_one",
                avg_fanout=pk_fanout,
                fk_on_source=False,
            )
        )

    return DirectedJoinGraph(
        base_table=dataset.task.base_table,
        nodes=sorted(dataset.tables),
        edges=edges,
    )


def path_length_score(length: int) -> float:
    if length < 0:
        raise ValueError(f"path length must be non-negative, got {length}")
    return 1.0 / (1.0 + length)


def join_direction_score(hops: Sequence[JoinEdge]) -> float:
    penalty = sum(hop.avg_fanout for hop in hops if hop.link_type == "one_to_many")
    return 1.0 / (1.0 + penalty)


def score_path(hops: Sequence[JoinEdge], config: PathScoringConfig) -> float:
    return config.alpha * path_length_score(len(hops)) + config.beta * join_direction_score(hops)


def make_meta_path(target: str, hops: Sequence[JoinEdge], config: PathScoringConfig) -> MetaPath:
    return MetaPath(
        target_table=target,
        hops=list(hops),
        length_score=path_length_score(len(hops)),
        direction_score=join_direction_score(hops),
        score=score_path(hops, config),
    )


def find_meta_paths(
    graph: DirectedJoinGraph, config: Optional[PathScoringConfig] = None
) -> Dict[str, MetaPath]:
    """
    Greedy frontier expansion from the base table. Each step scores every one-step
    extension of every path found so far by the total score of the extended path and
    commits only the best one (ties: destination table, then FK column, then source
    table, lexicographically). Tables are never revisited, so paths are cycle-free and
    the search ends after at most one step per table. Not guaranteed globally optimal.

    :return: Meta-path per reachable auxiliary table.
    :rtype: Dict[str, MetaPath]
    """
    config = config or PathScoringConfig()
    found: Dict[str, List[JoinEdge]] = {graph.base_table: []}

    while True:
        best: Optional[Tuple[Tuple[float, str, str, str], List[JoinEdge]]] = None
        for table in sorted(found):
            for edge in graph.out_edges(table):
                if edge.dst_table in found:
                    continue
                hops = [*found[table], edge]
                key = (-score_path(hops, config), edge.dst_table, edge.fk_column, table)
                if best is None or key < best[0]:
                    best = (key, hops)

        if best is None:
            break
        hops = best[1]
        found[hops[-1].dst_table] = hops
        logger.debug("meta-path to %s: %s", hops[-1].dst_table, [h.describe() for h in hops])

    return {
        table: make_meta_path(table, hops, config)
        for table, hops in sorted(found.items())
        if table != graph.base_table
    }


def plan_meta_paths(
    dataset: RelationalDataset, config: Optional[PathScoringConfig] = None
) -> MetaPathManifest:
    config = config or PathScoringConfig()
    graph = build_join_graph(dataset)
    paths = find_meta_paths(graph, config)

    unreachable = sorted(t.name for t in dataset.auxiliary if t.name not in paths)
    for table in unreachable:
        warnings.warn(
            f"auxiliary table {table!r} is not reachable from the base table",
            UnreachableTableWarning,
        )

    logger.info("planned %d meta-paths, %d unreachable tables", len(paths), len(unreachable))
    return MetaPathManifest(config=config, graph=graph, paths=paths, unreachable=unreachable)


def render_meta_paths(paths: Dict[str, MetaPath]) -> str:
    return render_table(
        ["target", "hops", "L", "S_L", "S_N", "S_path"],
        [
            (
                target,
                " ".join(h.describe() for h in path.hops),
                path.length,
                path.length_score,
                path.direction_score,
                path.score,
            )
            for target, path in sorted(paths.items())
        ],
    )
