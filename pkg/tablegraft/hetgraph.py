from __future__ import annotations

import logging
import warnings
from collections import defaultdict
from pathlib import Path
from typing import (
    Dict,
    Iterator,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    Set,
    Tuple,
    Union,
)

import numpy as np
import pandas as pd
import torch

from tablegraft.dataset import RelationalDataset
from tablegraft.dto.dataset import TaskSpec
from tablegraft.dto.graph import (
    EdgeTypeInfo,
    GraphMeta,
    NodeTypeInfo,
    SimilarityConfig,
    SplitConfig,
)
from tablegraft.dto.subtables import SubTableManifest
from tablegraft.dto.training import EncoderConfig
from tablegraft.encoders import TableEncoder
from tablegraft.errors import ClampWarning, EmptyBaseTableError
from tablegraft.subtables import materialize_subtables
from tablegraft.types import EdgeTypeKey, Label, SplitName
from tablegraft.utils import derive_seed, deserialize, serialize


logger = logging.getLogger(__name__)

SPLITS: Tuple[SplitName, ...] = ("train", "val", "test", "unlabeled")


class NodeSet(NamedTuple):
    info: NodeTypeInfo
    keys: List[str]
    features: torch.Tensor


class HeteroNode(NamedTuple):
    node_id: int
    node_type: str
    key: str
    features: torch.Tensor
    label: Optional[Label] = None
    split: Optional[SplitName] = None


class HeteroEdge(NamedTuple):
    src: int
    dst: int
    edge_type: EdgeTypeKey
    weight: float = 1.0


def edge_key(edge_type: EdgeTypeKey) -> str:
    return "__".join(edge_type)


class HeteroGraph:
    """
    Typed nodes with per-type feature matrices, typed directed edges stored as local
    (source index, destination index) pairs, and the labels and split of the base nodes.
    Base nodes come first in the global node numbering.
    """
    def __init__(
        self,
        node_sets: Sequence[NodeSet],
        edges: Mapping[EdgeTypeKey, torch.Tensor],
        labels: Sequence[Optional[Label]],
        splits: Sequence[SplitName],
        meta: GraphMeta,
    ) -> None:
        self.node_sets = {ns.info.name: ns for ns in node_sets}
        self.node_types = [ns.info.name for ns in node_sets]
        self.edges = {et: edges[et] for et in sorted(edges)}
        self.labels = list(labels)
        self.splits = list(splits)
        self.meta = meta

        self.offsets: Dict[str, int] = {}
        offset = 0
        for name in self.node_types:
            self.offsets[name] = offset
            offset += len(self.node_sets[name].keys)
        self.num_nodes = offset

    def __repr__(self) -> str:
        return (
            f"HeteroGraph(nodes={self.num_nodes}, types={len(self.node_types)}, "
            f"edges={sum(int(e.shape[1]) for e in self.edges.values())})"
        )

    @property
    def task(self) -> TaskSpec:
        return self.meta.task

    @property
    def base_type(self) -> str:
        return self.meta.base_type

    @property
    def base_count(self) -> int:
        return len(self.node_sets[self.base_type].keys)

    @property
    def base_keys(self) -> List[str]:
        return self.node_sets[self.base_type].keys

    @property
    def edge_types(self) -> List[EdgeTypeKey]:
        return list(self.edges)

    @property
    def features(self) -> Dict[str, torch.Tensor]:
        return {name: ns.features for name, ns in self.node_sets.items()}

    def count(self, node_type: str) -> int:
        return len(self.node_sets[node_type].keys)

    def global_id(self, node_type: str, index: int) -> int:
        return self.offsets[node_type] + index

    def split_index(self, split: SplitName) -> torch.Tensor:
        index = [i for i, s in enumerate(self.splits) if s == split]
        return torch.as_tensor(index, dtype=torch.long)

    def label_tensor(self) -> torch.Tensor:
        if self.task.is_classification:
            return torch.as_tensor([int(v) if v is not None else 0 for v in self.labels])
        return torch.as_tensor(
            [float(v) if v is not None else 0.0 for v in self.labels], dtype=torch.float32
        )

    def nodes(self) -> Iterator[HeteroNode]:
        for name in self.node_types:
            ns = self.node_sets[name]
            for index, key in enumerate(ns.keys):
                node = HeteroNode(self.global_id(name, index), name, key, ns.features[index])
                if name == self.base_type:
                    node = node._replace(label=self.labels[index], split=self.splits[index])
                yield node

    def hetero_edges(self) -> List[HeteroEdge]:
        out = []
        for (src_type, relation, dst_type), pairs in self.edges.items():
            for s, d in pairs.t().tolist():
                out.append(
                    HeteroEdge(
                        self.global_id(src_type, s),
                        self.global_id(dst_type, d),
                        (src_type, relation, dst_type),
                    )
                )
        return out


def node_groups(
    dataset: RelationalDataset, manifest: SubTableManifest
) -> List[Tuple[str, List[str]]]:
    """
    (node type, attributes) per sub-table of a table; an unsplit table is one node type
    named after the table carrying all its non-key attributes.
    """
    if manifest.unsplit:
        return [(manifest.table, [c.name for c in dataset.tables[manifest.table].attributes()])]
    subtables = materialize_subtables(dataset, manifest)
    return [(sub.name, [c.name for c in sub.attributes()]) for sub in subtables]


def _node_set(
    name: str, table: str, keys: List[str], attributes: List[str], features: torch.Tensor
) -> NodeSet:
    flat = features.reshape(len(keys), -1).detach().to(torch.float32)
    if flat.shape[1] == 0:
        flat = torch.ones(len(keys), 1)
    info = NodeTypeInfo(
        name=name, table=table, attributes=attributes, count=len(keys), width=flat.shape[1]
    )
    return NodeSet(info, keys, flat)


def build_nodes(
    dataset: RelationalDataset,
    manifests: Mapping[str, SubTableManifest],
    encoders: Optional[Mapping[str, TableEncoder]] = None,
    encoder_config: Optional[EncoderConfig] = None,
    seed: int = 0,
) -> List[NodeSet]:
    """
    One node per base tuple and one node per sub-table tuple: a tuple of a table split
    into m groups yields m nodes. Features concatenate the projected embeddings of the
    node's attributes; tables without a trained encoder get a fresh seeded one. The
    target column never enters the base features.

    :return: Node sets, base first, then auxiliary node types in table order.
    :rtype: List[NodeSet]
    """
    encoders = dict(encoders or {})
    base = dataset.base
    if not base.tuples:
        raise EmptyBaseTableError(f"base table {base.name!r} is empty")

    def _encoder(table: str) -> TableEncoder:
        if table not in encoders:
            exclude = (dataset.task.target_column,) if table == base.name else ()
            encoders[table] = TableEncoder.from_table(
                dataset.tables[table], encoder_config, derive_seed(seed, "encoder", table), exclude
            )
        return encoders[table]

    node_sets: List[NodeSet] = []
    with torch.no_grad():
        encoder = _encoder(base.name)
        attributes = encoder.attribute_names
        node_sets.append(
            _node_set(base.name, base.name, [r.key for r in base], attributes, encoder(base.tuples))
        )
        for table in sorted(manifests):
            if table == base.name:
                continue
            encoder = _encoder(table)
            rows = dataset.tables[table].tuples
            keys = [r.key for r in rows]
            for name, attributes in node_groups(dataset, manifests[table]):
                features = encoder(rows, attributes)
                node_sets.append(_node_set(name, table, keys, attributes, features))

    logger.info(
        "built %d node types: %s",
        len(node_sets),
        ", ".join(f"{ns.info.name}={ns.info.count}" for ns in node_sets),
    )
    return node_sets


def build_join_edges(
    dataset: RelationalDataset, node_sets: Sequence[NodeSet]
) -> Dict[EdgeTypeKey, torch.Tensor]:
    """
    For every schema foreign-key match (t', t) emit an edge between every node of t' and
    every node of t, in both directions. Dangling foreign keys produce no edge.
    """
    types_of: Dict[str, List[str]] = defaultdict(list)
    for ns in node_sets:
        types_of[ns.info.table].append(ns.info.name)

    collected: Dict[EdgeTypeKey, List[Tuple[int, int]]] = defaultdict(list)
    for table, column in dataset.foreign_keys():
        assert column.fk_target is not None
        referenced = dataset.tables[column.fk_target.table]
        if table.name not in types_of or referenced.name not in types_of:
            continue

        position = {row.key: i for i, row in enumerate(referenced)}
        matches = [
            (i, position[value])
            for i, value in enumerate(table.values(column.name))
            if value is not None and value in position
        ]
        for fk_type in types_of[table.name]:
            for pk_type in types_of[referenced.name]:
                collected[(fk_type, "join", pk_type)].extend(matches)
                collected[(pk_type, "join", fk_type)].extend((p, f) for f, p in matches)

    return {
        edge_type: torch.as_tensor(pairs, dtype=torch.long).t().reshape(2, -1)
        for edge_type, pairs in collected.items()
    }


def cosine_similarity(features: Union[torch.Tensor, np.ndarray]) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    unit = x / np.where(norms > 0, norms, 1.0)
    return unit @ unit.T


def build_similarity_edges(
    features: Union[torch.Tensor, np.ndarray], config: Optional[SimilarityConfig] = None
) -> torch.Tensor:
    """
    Implicit edges among base nodes by cosine similarity of their raw features, as
    directed pairs in both directions, without self-edges.

    :param features: Base node features, one row per node.
    :type features: Union[torch.Tensor, np.ndarray]
    :param config: Threshold mode keeps pairs with similarity > theta; topk mode links
        each node to its k most similar nodes (ties by node id) and symmetrizes the union.
    :type config: Optional[SimilarityConfig]
    :return: Local index pairs of shape (2, E), sorted by source then destination.
    :rtype: torch.Tensor
    """
    config = config or SimilarityConfig()
    sim = cosine_similarity(features)
    n = sim.shape[0]
    mask = np.zeros((n, n), dtype=bool)

    if config.mode == "threshold":
        mask = sim > config.theta
    else:
        k = config.k
        if k >= n:
            warnings.warn(f"similarity k={k} clamped to {n - 1} for {n} base nodes", ClampWarning)
            k = n - 1
        if k > 0:
            scores = sim.copy()
            np.fill_diagonal(scores, -np.inf)
            nearest = np.argsort(-scores, axis=1, kind="stable")[:, :k]
            mask[np.repeat(np.arange(n), k), nearest.reshape(-1)] = True
            mask |= mask.T

    np.fill_diagonal(mask, False)
    src, dst = np.nonzero(mask)
    return torch.as_tensor(np.stack([src, dst]), dtype=torch.long).reshape(2, -1)


def assign_splits(
    keys: Sequence[str],
    labels: Mapping[str, Label],
    classification: bool,
    config: Optional[SplitConfig] = None,
    seed: int = 0,
) -> List[SplitName]:
    """
    Stratified train/val/test assignment of the labeled base tuples (by class, or by
    target quantile bins for regression); unlabeled tuples get "unlabeled".
    """
    config = config or SplitConfig()
    splits: List[SplitName] = ["unlabeled"] * len(keys)
    labeled = [i for i, key in enumerate(keys) if key in labels]

    if classification:
        by_class: Dict[int, List[int]] = defaultdict(list)
        for i in labeled:
            by_class[int(labels[keys[i]])].append(i)
        strata = [by_class[c] for c in sorted(by_class)]
    else:
        ranked = sorted(labeled, key=lambda i: (float(labels[keys[i]]), i))
        chunks = np.array_split(np.asarray(ranked, dtype=int), config.strata)
        strata = [chunk.tolist() for chunk in chunks]

    rng = np.random.default_rng(derive_seed(seed, "split"))
    for stratum in strata:
        if not stratum:
            continue
        order = [stratum[i] for i in rng.permutation(len(stratum))]
        n_train = int(round(len(order) * config.train))
        n_val = min(int(round(len(order) * config.val)), len(order) - n_train)
        for position, index in enumerate(order):
            if position < n_train:
                splits[index] = "train"
            elif position < n_train + n_val:
                splits[index] = "val"
            else:
                splits[index] = "test"
    return splits


def training_keys(
    dataset: RelationalDataset, config: Optional[SplitConfig] = None, seed: int = 0
) -> Set[str]:
    """
    Base keys that `assemble` will place in the train split under the same seed.
    """
    keys = [row.key for row in dataset.base]
    splits = assign_splits(keys, dataset.labels, dataset.task.is_classification, config, seed)
    return {key for key, split in zip(keys, splits) if split == "train"}


def assemble(
    dataset: RelationalDataset,
    node_sets: Sequence[NodeSet],
    edges: Mapping[EdgeTypeKey, torch.Tensor],
    similarity: Optional[SimilarityConfig] = None,
    split: Optional[SplitConfig] = None,
    seed: int = 0,
) -> HeteroGraph:
    similarity = similarity or SimilarityConfig()
    split = split or SplitConfig()
    base = node_sets[0]
    if not base.keys:
        raise EmptyBaseTableError(f"base table {base.info.name!r} is empty")

    labels = [dataset.labels.get(key) for key in base.keys]
    splits = assign_splits(base.keys, dataset.labels, dataset.task.is_classification, split, seed)
    meta = GraphMeta(
        task=dataset.task,
        class_labels=dataset.class_labels,
        base_type=base.info.name,
        node_types=[ns.info for ns in node_sets],
        edge_types=[
            EdgeTypeInfo(src_type=s, relation=r, dst_type=d, count=int(edges[(s, r, d)].shape[1]))
            for s, r, d in sorted(edges)
        ],
        similarity=similarity,
        split=split,
        split_counts={name: splits.count(name) for name in SPLITS},
    )
    graph = HeteroGraph(node_sets, edges, labels, splits, meta)
    logger.info("assembled %r, splits %s", graph, meta.split_counts)
    return graph


def build_graph(
    dataset: RelationalDataset,
    manifests: Mapping[str, SubTableManifest],
    encoders: Optional[Mapping[str, TableEncoder]] = None,
    encoder_config: Optional[EncoderConfig] = None,
    similarity: Optional[SimilarityConfig] = None,
    split: Optional[SplitConfig] = None,
    seed: int = 0,
) -> HeteroGraph:
    similarity = similarity or SimilarityConfig()
    node_sets = build_nodes(dataset, manifests, encoders, encoder_config, seed)
    edges = build_join_edges(dataset, node_sets)
    if similarity.enabled:
        base = node_sets[0]
        edges[(base.info.name, "similarity", base.info.name)] = build_similarity_edges(
            base.features, similarity
        )
    return assemble(dataset, node_sets, edges, similarity, split, seed)


def _label_cell(label: Optional[Label]) -> str:
    if label is None:
        return ""
    return str(label) if isinstance(label, int) else repr(float(label))


def save_graph(graph: HeteroGraph, directory: Union[str, Path]) -> Path:
    """
    Dump the graph as nodes.csv, edges.csv, features.pt and graph.json.
    """
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)

    records = []
    for node in graph.nodes():
        is_base = node.node_type == graph.base_type
        records.append(
            (
                node.node_id,
                node.node_type,
                node.key,
                node.split or "",
                _label_cell(node.label) if is_base else "",
            )
        )
    pd.DataFrame(records, columns=["id", "type", "key", "split", "label"]).to_csv(
        root / "nodes.csv", index=False, lineterminator="\n"
    )
    pd.DataFrame(
        [(e.src, e.dst, *e.edge_type) for e in graph.hetero_edges()],
        columns=["src", "dst", "src_type", "relation", "dst_type"],
    ).to_csv(root / "edges.csv", index=False, lineterminator="\n")
    torch.save(graph.features, root / "features.pt")
    (root / "graph.json").write_bytes(serialize(graph.meta.model_dump(mode="json")))
    return root


def load_graph(directory: Union[str, Path]) -> HeteroGraph:
    root = Path(directory)
    meta = GraphMeta.model_validate(deserialize((root / "graph.json").read_bytes()))
    features = torch.load(root / "features.pt")

    nodes = pd.read_csv(root / "nodes.csv", dtype=str, keep_default_na=False, na_filter=False)
    node_sets = []
    for info in meta.node_types:
        keys = nodes.loc[nodes["type"] == info.name, "key"].tolist()
        node_sets.append(NodeSet(info, keys, features[info.name]))

    base = nodes[nodes["type"] == meta.base_type]
    parse = int if meta.task.is_classification else float
    labels = [parse(v) if v != "" else None for v in base["label"]]
    splits = list(base["split"])

    offsets: Dict[str, int] = {}
    offset = 0
    for info in meta.node_types:
        offsets[info.name] = offset
        offset += info.count

    frame = pd.read_csv(
        root / "edges.csv", dtype={"src_type": str, "relation": str, "dst_type": str}
    )
    edges: Dict[EdgeTypeKey, torch.Tensor] = {}
    for info in meta.edge_types:
        rows = frame[
            (frame["src_type"] == info.src_type)
            & (frame["relation"] == info.relation)
            & (frame["dst_type"] == info.dst_type)
        ]
        pairs = np.stack(
            [
                rows["src"].to_numpy(dtype=np.int64) - offsets[info.src_type],
                rows["dst"].to_numpy(dtype=np.int64) - offsets[info.dst_type],
            ]
        )
        edges[(info.src_type, info.relation, info.dst_type)] = torch.as_tensor(pairs).reshape(2, -1)

    return HeteroGraph(node_sets, edges, labels, splits, meta)
