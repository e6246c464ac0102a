from __future__ import annotations

import logging
import warnings
from typing import Dict, List, Mapping, Optional, Sequence

import networkx as nx
import numpy as np

from tablegraft.dataset import RelationalDataset, Row, Table
from tablegraft.dto.dataset import TableSpec
from tablegraft.dto.subtables import (
    CumulativeAttention,
    SignificantEdgeSet,
    SubTableConfig,
    SubTableManifest,
)
from tablegraft.errors import DegenerateInputWarning, NodeSetMismatchError, UnknownAttributeError
from tablegraft.gat import AttentionRecord
from tablegraft.types import GroupingMethod
from tablegraft.utils import derive_seed, render_table


logger = logging.getLogger(__name__)


def normalize_off_diagonal(a_sum: np.ndarray, table: str = "") -> np.ndarray:
    """
    Min-max normalize the off-diagonal entries into [0, 1]; the diagonal is zeroed. A
    matrix whose off-diagonal entries are all equal normalizes to all zeros.
    """
    size = a_sum.shape[0]
    mask = ~np.eye(size, dtype=bool)
    a_norm = np.zeros_like(a_sum, dtype=np.float64)
    if size < 2:
        return a_norm

    low = float(a_sum[mask].min())
    high = float(a_sum[mask].max())
    if high == low:
        warnings.warn(
            f"cumulative attention of {table or 'table'} is constant; no significant pairs",
            DegenerateInputWarning,
        )
        return a_norm

    a_norm[mask] = (a_sum[mask] - low) / (high - low)
    return a_norm


def accumulate(records: Sequence[AttentionRecord]) -> CumulativeAttention:
    if not records:
        raise ValueError("no attention records to accumulate")

    table, nodes = records[0].table, list(records[0].nodes)
    for record in records[1:]:
        if list(record.nodes) != nodes or record.table != table:
            raise NodeSetMismatchError(
                f"record {record.table}:{record.key} has nodes {list(record.nodes)}, "
                f"expected {table}: {nodes}"
            )

    a_sum = np.sum([np.asarray(r.matrix, dtype=np.float64) for r in records], axis=0)
    return CumulativeAttention(
        table=table,
        nodes=nodes,
        records=len(records),
        a_sum=a_sum.tolist(),
        a_norm=normalize_off_diagonal(a_sum, table).tolist(),
    )


def select_edges(cumulative: CumulativeAttention, ell: float) -> SignificantEdgeSet:
    """
    Keep the attribute pairs whose symmetrized normalized weight is strictly greater
    than `ell`.
    """
    if not 0.0 <= ell <= 1.0:
        raise ValueError(f"ell must lie in [0, 1], got {ell}")

    a_norm = np.asarray(cumulative.a_norm, dtype=np.float64)
    sym = (a_norm + a_norm.T) / 2.0
    nodes = cumulative.nodes
    edges = [
        (nodes[u], nodes[v])
        for u in range(len(nodes))
        for v in range(u + 1, len(nodes))
        if sym[u, v] > ell
    ]
    return SignificantEdgeSet(table=cumulative.table, threshold=ell, nodes=nodes, edges=edges)


def _sorted_groups(groups: Sequence[Sequence[str]]) -> List[List[str]]:
    return sorted(sorted(group) for group in groups)


def significant_graph(edges: SignificantEdgeSet) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(edges.nodes)
    graph.add_edges_from(edges.edges)
    return graph


def extract_cliques(edges: SignificantEdgeSet, keep_singletons: bool = False) -> SubTableManifest:
    """
    Every maximal clique of the significant-edge graph becomes one (possibly
    overlapping) attribute group.

    :param edges: Significant attribute pairs of one table.
    :type edges: SignificantEdgeSet
    :param keep_singletons: Keep isolated attributes as one-attribute groups.
    :type keep_singletons: bool
    :return: Groups sorted lexicographically.
    :rtype: SubTableManifest
    """
    graph = significant_graph(edges)
    cliques = [c for c in nx.find_cliques(graph) if len(c) >= 2 or keep_singletons]
    return SubTableManifest(
        table=edges.table,
        method="maximal_clique",
        threshold=edges.threshold,
        groups=_sorted_groups(cliques),
    )


def extract_communities_gn(edges: SignificantEdgeSet) -> SubTableManifest:
    """
    Girvan-Newman communities of the significant-edge graph: the partition of the
    attributes that carry at least one edge with the highest modularity along the
    edge-removal sequence (the unsplit components included).
    """
    graph = nx.Graph()
    graph.add_edges_from(edges.edges)
    groups: List[List[str]] = []

    if graph.number_of_edges():
        partitions = [tuple(nx.connected_components(graph))]
        partitions.extend(nx.community.girvan_newman(graph))
        scores = [nx.community.modularity(graph, p) for p in partitions]
        best = int(np.argmax(scores))
        groups = _sorted_groups(partitions[best])
        logger.debug("%s: girvan-newman picks %d communities", edges.table, len(groups))

    return SubTableManifest(
        table=edges.table, method="girvan_newman", threshold=edges.threshold, groups=groups
    )


def random_pairs(table: str, attributes: Sequence[str], seed: int = 0) -> SubTableManifest:
    """
    Partition the attributes uniformly at random into pairs; an odd attribute out forms
    its own group.
    """
    rng = np.random.default_rng(derive_seed(seed, "random-pairs", table))
    shuffled = [attributes[i] for i in rng.permutation(len(attributes))]
    groups = [shuffled[i:i + 2] for i in range(0, len(shuffled), 2)]
    return SubTableManifest(table=table, method="random_pairs", groups=_sorted_groups(groups))


def per_attribute(table: str, attributes: Sequence[str]) -> SubTableManifest:
    return SubTableManifest(
        table=table, method="per_attribute", groups=[[a] for a in sorted(attributes)]
    )


def projection(table: str, attributes: Sequence[str]) -> SubTableManifest:
    groups = [sorted(attributes)] if attributes else []
    return SubTableManifest(table=table, method="projection", groups=groups)


def unsplit(table: str) -> SubTableManifest:
    return SubTableManifest(table=table, method="unsplit")


def group_table(
    cumulative: CumulativeAttention, config: SubTableConfig, seed: int = 0
) -> SubTableManifest:
    method = config.method
    if method == "maximal_clique":
        return extract_cliques(select_edges(cumulative, config.ell), config.keep_singletons)
    if method == "girvan_newman":
        return extract_communities_gn(select_edges(cumulative, config.ell))
    return group_without_attention(cumulative.table, cumulative.nodes, method, seed)


def group_without_attention(
    table: str, attributes: Sequence[str], method: GroupingMethod, seed: int = 0
) -> SubTableManifest:
    if method == "random_pairs":
        return random_pairs(table, attributes, seed)
    if method == "per_attribute":
        return per_attribute(table, attributes)
    if method == "projection":
        return projection(table, attributes)
    if method == "unsplit":
        return unsplit(table)
    raise ValueError(f"grouping method {method!r} needs cumulative attention")


def build_manifests(
    dataset: RelationalDataset,
    tables: Sequence[str],
    cumulative: Mapping[str, CumulativeAttention],
    config: Optional[SubTableConfig] = None,
    seed: int = 0,
) -> Dict[str, SubTableManifest]:
    """
    One manifest per auxiliary table in `tables`. Tables without cumulative attention
    (skipped by stage 1) stay unsplit for the attention-based methods.
    """
    config = config or SubTableConfig()
    manifests: Dict[str, SubTableManifest] = {}
    for table in sorted(tables):
        if table in cumulative:
            manifest = group_table(cumulative[table], config, seed)
        elif config.method in ("maximal_clique", "girvan_newman"):
            manifest = unsplit(table)
        else:
            names = [c.name for c in dataset.tables[table].attributes()]
            manifest = group_without_attention(table, names, config.method, seed)
        manifests[table] = manifest
        logger.info(
            "%s: %s -> %s",
            table,
            manifest.method,
            "unsplit" if manifest.unsplit else manifest.groups,
        )
    return manifests


def materialize_subtables(dataset: RelationalDataset, manifest: SubTableManifest) -> List[Table]:
    """
    Project the auxiliary table onto each group, keeping its primary and foreign keys.
    Every sub-table keeps all tuples of the parent table, in order.
    """
    parent = dataset.tables[manifest.table]
    known = {c.name for c in parent.attributes()}
    keys = [c for c in parent.columns if c.is_key]

    subtables: List[Table] = []
    for index, group in enumerate(manifest.groups):
        unknown = sorted(set(group) - known)
        if unknown:
            raise UnknownAttributeError(f"{manifest.table} has no attributes {unknown}")

        columns = keys + [parent.column(name) for name in group]
        spec = TableSpec(name=manifest.node_type(index), file=parent.spec.file, columns=columns)
        positions = [parent.column_index[c.name] for c in columns]
        tuples = [
            Row(spec.name, row.key, tuple(row.values[p] for p in positions)) for row in parent
        ]
        subtables.append(Table(spec, tuples))
    return subtables


def render_report(
    cumulative: Mapping[str, CumulativeAttention],
    manifests: Mapping[str, SubTableManifest],
    top: int = 5,
) -> str:
    """
    Text report: the highest symmetrized normalized attribute pairs of each table
    followed by the groups chosen for it.
    """
    rows = []
    for table in sorted(cumulative):
        ca = cumulative[table]
        pairs = sorted(
            (
                (-ca.symmetric(u, v), ca.nodes[u], ca.nodes[v])
                for u in range(len(ca.nodes))
                for v in range(u + 1, len(ca.nodes))
            )
        )
        rows.extend((table, f"{u} ~ {v}", -weight) for weight, u, v in pairs[:top])

    lines = [render_table(["table", "pair", "weight"], rows)]
    for table, manifest in sorted(manifests.items()):
        groups = "; ".join("{" + ", ".join(g) + "}" for g in manifest.groups) or "unsplit"
        lines.append(f"{table} [{manifest.method}]: {groups}")
    return "\n".join(lines) + "\n"
