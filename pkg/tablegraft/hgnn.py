from __future__ import annotations

import copy
import logging
import math
from typing import Any, Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import torch
import torch.nn.functional as F
from torch import nn

from tablegraft.dataset import RelationalDataset, _format_cell
from tablegraft.dto.metrics import EdgeTypeImportance, FeatureReport, SubTableImportance
from tablegraft.dto.training import Stage2Config, TrainingCurve
from tablegraft.errors import NotABaseNodeError
from tablegraft.hetgraph import HeteroGraph
from tablegraft.training import (
    TargetScaler,
    check_finite,
    make_generator,
    parameter_stamp,
    prediction_loss,
    reset_uniform,
)
from tablegraft.types import EdgeTypeKey
from tablegraft.utils import derive_seed, render_table


logger = logging.getLogger(__name__)

EdgeTensors = Dict[EdgeTypeKey, torch.Tensor]
EdgeSubset = EdgeTensors


class ForwardResult(NamedTuple):
    output: torch.Tensor
    states: Dict[str, torch.Tensor]
    attention: List[Dict[EdgeTypeKey, torch.Tensor]]
    coefficients: List[Dict[EdgeTypeKey, torch.Tensor]]


class EdgeImportance(NamedTuple):
    per_edge: Dict[EdgeTypeKey, np.ndarray]
    edges: Dict[EdgeTypeKey, np.ndarray]


class Stage2Result(NamedTuple):
    model: "HeteroGNN"
    importance: EdgeImportance
    curve: TrainingCurve
    best_epoch: int
    best_val_loss: float
    stamp: str


def segment_softmax(score: torch.Tensor, index: torch.Tensor, size: int) -> torch.Tensor:
    """
    Softmax of `score` within each group of entries sharing the same `index`.
    """
    maxes = score.new_full((size,), -math.inf).scatter_reduce(
        0, index, score.detach(), reduce="amax", include_self=True
    )
    exp = torch.exp(score - maxes[index])
    denom = score.new_zeros(size).index_add(0, index, exp)
    return exp / denom[index]


def in_degree(index: torch.Tensor, size: int, dtype: torch.dtype) -> torch.Tensor:
    ones = torch.ones(index.shape[0], dtype=dtype)
    return torch.zeros(size, dtype=dtype).index_add(0, index, ones)


class HeteroLayer(nn.Module):
    def __init__(self, node_keys: Sequence[str], edge_keys: Sequence[str], d_model: int) -> None:
        super().__init__()
        self.message = nn.ModuleDict(
            {k: nn.Linear(d_model, d_model, bias=False) for k in edge_keys}
        )
        self.scorer = nn.ParameterDict(
            {k: nn.Parameter(torch.empty(2 * d_model)) for k in edge_keys}
        )
        self.self_loop = nn.ModuleDict(
            {k: nn.Linear(d_model, d_model, bias=False) for k in node_keys}
        )


class HeteroGNN(nn.Module):
    """
    Heterogeneous message passing with one message transform and one attention scorer
    per edge type. Incoming messages of each edge type are attention-weighted (softmax
    over a node's neighbours of that type) and scaled by a learnable per-edge weight;
    the update sums the self transform and all per-type messages before an ELU.
    """
    def __init__(
        self,
        input_widths: Mapping[str, int],
        edge_counts: Mapping[EdgeTypeKey, int],
        base_type: str,
        output_dim: int,
        config: Optional[Stage2Config] = None,
        seed: int = 0,
    ) -> None:
        super().__init__()
        self.config = config or Stage2Config()
        self.seed = seed
        self.base_type = base_type
        self.output_dim = output_dim
        self.node_types = list(input_widths)
        self.edge_types = sorted(edge_counts)
        self.input_widths = dict(input_widths)
        self.edge_counts = {et: int(edge_counts[et]) for et in self.edge_types}
        self.scaler = TargetScaler()

        self._node_key = {t: f"t{i}" for i, t in enumerate(self.node_types)}
        self._edge_key = {et: f"e{i}" for i, et in enumerate(self.edge_types)}
        d = self.config.d_model

        self.inputs = nn.ModuleDict(
            {self._node_key[t]: nn.Linear(w, d) for t, w in self.input_widths.items()}
        )
        self.layers = nn.ModuleList(
            HeteroLayer(list(self._node_key.values()), list(self._edge_key.values()), d)
            for _ in range(self.config.layers)
        )
        self.head = nn.Linear(d, output_dim)
        reset_uniform(self, make_generator(seed))

        # weights are exp(log_weight): positive, 1.0 at init
        self.edge_log_weight = nn.ParameterDict(
            {
                self._edge_key[et]: nn.Parameter(
                    torch.zeros(count), requires_grad=self.config.edge_weights
                )
                for et, count in self.edge_counts.items()
            }
        )

    @classmethod
    def for_graph(
        cls, graph: HeteroGraph, config: Optional[Stage2Config] = None, seed: int = 0
    ) -> "HeteroGNN":
        return cls(
            {t: int(graph.node_sets[t].features.shape[1]) for t in graph.node_types},
            {et: int(pairs.shape[1]) for et, pairs in graph.edges.items()},
            graph.base_type,
            graph.task.output_dim,
            config,
            seed,
        )

    def edge_weights_of(self, edge_type: EdgeTypeKey) -> torch.Tensor:
        return self.edge_log_weight[self._edge_key[edge_type]].exp()

    def message_pass(
        self,
        h: Dict[str, torch.Tensor],
        edges: Mapping[EdgeTypeKey, torch.Tensor],
        layer: int,
        subset: Optional[EdgeSubset] = None,
    ) -> Tuple[Dict[str, torch.Tensor], EdgeTensors, EdgeTensors]:
        """
        One message-passing layer.

        :param h: Node states per node type.
        :type h: Dict[str, torch.Tensor]
        :param edges: Local (source, destination) index pairs per edge type.
        :type edges: Mapping[EdgeTypeKey, torch.Tensor]
        :param layer: Layer index.
        :type layer: int
        :param subset: Edge positions to use per edge type (neighbour sampling).
        :type subset: Optional[EdgeSubset]
        :return: New node states, attention and coefficients (attention x edge weight)
            of the used edges per edge type.
        :rtype: Tuple[Dict, Dict, Dict]
        """
        block = self.layers[layer]
        d = self.config.d_model
        aggregated = {t: torch.zeros_like(state) for t, state in h.items()}
        attention: Dict[EdgeTypeKey, torch.Tensor] = {}
        coefficients: Dict[EdgeTypeKey, torch.Tensor] = {}

        for edge_type in self.edge_types:
            pairs = edges[edge_type]
            weight = self.edge_weights_of(edge_type)
            if subset is not None:
                pairs, weight = pairs[:, subset[edge_type]], weight[subset[edge_type]]
            if pairs.shape[1] == 0:
                attention[edge_type] = coefficients[edge_type] = h[self.base_type].new_zeros(0)
                continue

            src_type, _, dst_type = edge_type
            src, dst = pairs[0], pairs[1]
            size = h[dst_type].shape[0]
            key = self._edge_key[edge_type]

            if self.config.edge_weights:
                a = block.scorer[key]
                score = F.leaky_relu(
                    h[src_type][src] @ a[:d] + h[dst_type][dst] @ a[d:],
                    negative_slope=self.config.leaky_slope,
                )
                att = segment_softmax(score, dst, size)
            else:
                att = 1.0 / in_degree(dst, size, h[dst_type].dtype)[dst]

            coefficient = att * weight
            messages = coefficient[:, None] * block.message[key](h[src_type])[src]
            aggregated[dst_type] = aggregated[dst_type].index_add(0, dst, messages)
            attention[edge_type] = att
            coefficients[edge_type] = coefficient

        updated = {
            t: F.elu(block.self_loop[self._node_key[t]](state) + aggregated[t])
            for t, state in h.items()
        }
        return updated, attention, coefficients

    def forward(self, graph: HeteroGraph, subset: Optional[EdgeSubset] = None) -> ForwardResult:
        dtype = self.head.weight.dtype
        h = {
            t: self.inputs[self._node_key[t]](graph.node_sets[t].features.to(dtype))
            for t in self.node_types
        }
        attention, coefficients = [], []
        for layer in range(len(self.layers)):
            h, att, coef = self.message_pass(h, graph.edges, layer, subset)
            attention.append(att)
            coefficients.append(coef)
        return ForwardResult(self.head(h[self.base_type]), h, attention, coefficients)

    def checkpoint(self) -> Dict[str, Any]:
        return {
            "config": self.config.model_dump(),
            "seed": self.seed,
            "input_widths": self.input_widths,
            "edge_counts": [[list(et), count] for et, count in self.edge_counts.items()],
            "base_type": self.base_type,
            "output_dim": self.output_dim,
            "scaler": self.scaler.model_dump(),
            "state": self.state_dict(),
        }

    @classmethod
    def from_checkpoint(cls, data: Mapping[str, Any]) -> "HeteroGNN":
        model = cls(
            data["input_widths"],
            {tuple(et): count for et, count in data["edge_counts"]},
            data["base_type"],
            data["output_dim"],
            Stage2Config.model_validate(data["config"]),
            data["seed"],
        )
        model.load_state_dict(data["state"])
        model.scaler = TargetScaler.model_validate(data["scaler"])
        return model


def sample_edges(
    graph: HeteroGraph, fanout: int, generator: torch.Generator
) -> EdgeSubset:
    """
    Keep at most `fanout` uniformly chosen incoming edges per destination node and edge
    type.
    """
    subset: EdgeSubset = {}
    for edge_type, pairs in graph.edges.items():
        count = pairs.shape[1]
        if count == 0:
            subset[edge_type] = torch.zeros(0, dtype=torch.long)
            continue
        perm = torch.randperm(count, generator=generator)
        dst = pairs[1][perm]
        order = torch.argsort(dst, stable=True)
        grouped = dst[order]
        sizes = torch.bincount(grouped, minlength=graph.count(edge_type[2]))
        starts = torch.cumsum(sizes, 0) - sizes
        rank = torch.arange(count) - starts[grouped]
        subset[edge_type] = torch.sort(perm[order][rank < fanout]).values
    return subset


def edge_importance(model: HeteroGNN, graph: HeteroGraph) -> EdgeImportance:
    """
    Learned importance of every edge: attention x edge weight, averaged over layers.
    """
    with torch.no_grad():
        result = model(graph)
    per_edge = {
        et: torch.stack([layer[et] for layer in result.coefficients]).mean(0).double().numpy()
        for et in model.edge_types
    }
    edges = {et: graph.edges[et].numpy() for et in model.edge_types}
    return EdgeImportance(per_edge, edges)


def _targets(graph: HeteroGraph, scaler: TargetScaler) -> torch.Tensor:
    labels = graph.label_tensor()
    if graph.task.is_classification:
        return labels
    return scaler.transform(labels)


def stage2_train(
    graph: HeteroGraph,
    model: HeteroGNN,
    seed: int = 0,
) -> Stage2Result:
    """
    Train on the train-split base nodes (summed loss), keep the parameters with the
    lowest validation loss and compute edge importances under them.
    """
    config = model.config
    classification = graph.task.is_classification
    train = graph.split_index("train")
    val = graph.split_index("val")
    if len(train) == 0:
        raise ValueError("no labeled base nodes in the train split")
    if len(val) == 0:
        val = train

    if not classification:
        model.scaler = TargetScaler.fit(graph.label_tensor()[train].tolist())
    target = _targets(graph, model.scaler)
    if not classification:
        target = target.to(model.head.weight.dtype)

    optimizer = torch.optim.Adam(
        [p for p in model.parameters() if p.requires_grad], lr=config.learning_rate
    )
    generator = make_generator(derive_seed(seed, "stage2-batches"))
    curve = TrainingCurve(val_losses=[])
    best_state = copy.deepcopy(model.state_dict())
    best_val, best_epoch = math.inf, 0

    for epoch in range(1, config.epochs + 1):
        model.train()
        if config.sampling == "neighbor":
            total = 0.0
            order = train[torch.randperm(len(train), generator=generator)]
            for start in range(0, len(order), config.batch_size):
                batch = order[start:start + config.batch_size]
                subset = sample_edges(graph, config.fanout, generator)
                output = model(graph, subset).output
                loss = prediction_loss(output[batch], target[batch], classification)
                total += check_finite(loss, "stage2", epoch, {"batch_start": start})
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
        else:
            output = model(graph).output
            loss = prediction_loss(output[train], target[train], classification)
            total = check_finite(loss, "stage2", epoch)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()

        model.eval()
        with torch.no_grad():
            output = model(graph).output
            val_loss = float(prediction_loss(output[val], target[val], classification, "mean"))
        check_finite(torch.tensor(val_loss), "stage2", epoch, {"split": "val"})

        curve.epochs.append(epoch)
        curve.losses.append(total / len(train))
        assert curve.val_losses is not None
        curve.val_losses.append(val_loss)
        if val_loss < best_val:
            best_val, best_epoch = val_loss, epoch
            best_state = copy.deepcopy(model.state_dict())
        logger.debug("stage2 epoch %d loss %.6f val %.6f", epoch, curve.losses[-1], val_loss)

    model.load_state_dict(best_state)
    model.eval()
    logger.info(
        "stage2: %d epochs, best val loss %.4f at epoch %d", config.epochs, best_val, best_epoch
    )
    return Stage2Result(
        model, edge_importance(model, graph), curve, best_epoch, best_val, parameter_stamp(model)
    )


def predict(graph: HeteroGraph, model: HeteroGNN, node_ids: Sequence[int]) -> np.ndarray:
    """
    Class probabilities (n, classes) or unscaled regression values (n,) for base nodes
    given by global node id.
    """
    for node_id in node_ids:
        if not 0 <= int(node_id) < graph.base_count:
            raise NotABaseNodeError(
                f"node {node_id} is not one of the {graph.base_count} base nodes"
            )

    index = torch.as_tensor([int(i) for i in node_ids], dtype=torch.long)
    model.eval()
    with torch.no_grad():
        output = model(graph).output[index]
    if graph.task.is_classification:
        return torch.softmax(output, dim=-1).double().numpy()
    return model.scaler.inverse(output.reshape(-1)).double().numpy()


def prediction_frame(graph: HeteroGraph, model: HeteroGNN) -> pd.DataFrame:
    """
    One row per base tuple: key, split, prediction and, for classification, the
    probability of each class.
    """
    values = predict(graph, model, range(graph.base_count))
    frame = pd.DataFrame({"key": graph.base_keys, "split": graph.splits})
    if graph.task.is_classification:
        labels = graph.meta.class_labels or [str(i) for i in range(values.shape[1])]
        frame["prediction"] = [labels[i] for i in values.argmax(axis=1)]
        for i, label in enumerate(labels):
            frame[f"prob_{label}"] = values[:, i]
    else:
        frame["prediction"] = values
    return frame


def augment_table(graph: HeteroGraph, model: HeteroGNN, dataset: RelationalDataset) -> pd.DataFrame:
    """
    The base table with the final relational embedding of each tuple appended as
    `emb_0 .. emb_{d-1}`.
    """
    base = dataset.base
    model.eval()
    with torch.no_grad():
        states = model(graph).states[graph.base_type].double().numpy()

    position = {key: i for i, key in enumerate(graph.base_keys)}
    frame = pd.DataFrame(
        [[_format_cell(v) for v in row.values] for row in base],
        columns=[c.name for c in base.columns],
        dtype=object,
    )
    embedding = states[[position[row.key] for row in base]]
    for i in range(embedding.shape[1]):
        frame[f"emb_{i}"] = embedding[:, i]
    return frame


def feature_selection_report(
    importance: EdgeImportance, graph: HeteroGraph, select_top: int = 3
) -> FeatureReport:
    """
    Rank every non-base node type by the mean importance of its edges into base nodes;
    node types without such edges rank last with importance 0. Also aggregates
    importance per edge type and the share carried by similarity edges.
    """
    base = graph.base_type
    into_base: Dict[str, List[float]] = {t: [] for t in graph.node_types if t != base}
    similarity_total, base_total = 0.0, 0.0
    edge_types = []

    for et in sorted(importance.per_edge):
        values = importance.per_edge[et]
        src_type, relation, dst_type = et
        edge_types.append(
            EdgeTypeImportance(
                src_type=src_type,
                relation=relation,
                dst_type=dst_type,
                edges=len(values),
                mean=float(values.mean()) if len(values) else 0.0,
                total=float(values.sum()),
            )
        )
        if dst_type != base:
            continue
        base_total += float(values.sum())
        if relation == "similarity":
            similarity_total += float(values.sum())
        elif src_type in into_base:
            into_base[src_type].extend(values.tolist())

    infos = {info.name: info for info in graph.meta.node_types}
    ordered = sorted(
        into_base.items(),
        key=lambda item: (not item[1], -float(np.mean(item[1])) if item[1] else 0.0, item[0]),
    )
    ranking = []
    for rank, (node_type, values) in enumerate(ordered, start=1):
        score = float(np.mean(values)) if values else 0.0
        ranking.append(
            SubTableImportance(
                rank=rank,
                node_type=node_type,
                table=infos[node_type].table,
                attributes=infos[node_type].attributes,
                importance=score,
                edges=len(values),
                selected=rank <= select_top and score > 0.0,
            )
        )

    return FeatureReport(
        ranking=ranking,
        edge_types=edge_types,
        similarity_share=similarity_total / base_total if base_total > 0 else 0.0,
        select_top=select_top,
    )


def render_feature_report(report: FeatureReport) -> str:
    lines = [
        render_table(
            ["rank", "node type", "importance", "edges", "selected", "attributes"],
            [
                (
                    entry.rank,
                    entry.node_type,
                    entry.importance,
                    entry.edges,
                    "*" if entry.selected else "",
                    ", ".join(entry.attributes),
                )
                for entry in report.ranking
            ],
        ),
        render_table(
            ["edge type", "edges", "mean", "total"],
            [
                (f"{e.src_type} -{e.relation}-> {e.dst_type}", e.edges, e.mean, e.total)
                for e in report.edge_types
            ],
        ),
        f"similarity share of base-node importance: {report.similarity_share:.4f}",
    ]
    return "\n".join(lines) + "\n"
