from __future__ import annotations

import logging
from typing import Any, Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from tablegraft.dataset import RelationalDataset
from tablegraft.dto.linker import LabeledTuple
from tablegraft.dto.training import EncoderConfig, Stage1Config, TrainingCurve
from tablegraft.encoders import TableEncoder
from tablegraft.errors import InsufficientAttributesError
from tablegraft.training import (
    TargetScaler,
    check_finite,
    label_tensor,
    make_generator,
    parameter_stamp,
    prediction_loss,
    uniform_,
)
from tablegraft.types import Label
from tablegraft.utils import derive_seed


logger = logging.getLogger(__name__)


class TupleGraph(NamedTuple):
    table: str
    key: str
    nodes: List[str]
    features: torch.Tensor
    label: Label


class AttentionRecord(NamedTuple):
    table: str
    key: str
    nodes: List[str]
    matrix: np.ndarray


class Stage1Result(NamedTuple):
    model: "TupleGraphAttention"
    records: List[AttentionRecord]
    curve: TrainingCurve
    stamp: str


class TupleGraphAttention(nn.Module):
    """
    One graph-attention layer shared by the complete graphs of every tuple of a table,
    followed by mean pooling and a prediction head. The table's encoder is part of the
    model so its parameters train jointly.
    """
    def __init__(
        self,
        encoder: TableEncoder,
        output_dim: int,
        config: Optional[Stage1Config] = None,
        seed: int = 0,
    ) -> None:
        super().__init__()
        if len(encoder.attributes) < 2:
            raise InsufficientAttributesError(
                f"{encoder.table} has {len(encoder.attributes)} non-key attributes"
            )
        self.config = config or Stage1Config()
        self.encoder = encoder
        self.output_dim = output_dim
        d_h = self.config.d_h

        self.W = nn.Parameter(torch.empty(encoder.d_out, d_h))
        self.a = nn.Parameter(torch.empty(2 * d_h))
        self.W_prime = nn.Parameter(torch.empty(d_h, d_h))
        self.head = nn.Linear(d_h, output_dim)

        generator = make_generator(seed)
        for parameter in (self.W, self.a, self.W_prime, *self.head.parameters()):
            uniform_(parameter, parameter.shape[-1], generator)

    @property
    def nodes(self) -> List[str]:
        return self.encoder.attribute_names

    def attention_forward(self, X: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """
        :param X: Node features, shape (batch, |V|, d_out).
        :type X: torch.Tensor
        :return: Updated node embeddings (batch, |V|, d_h) and row-stochastic attention
            matrices (batch, |V|, |V|).
        :rtype: Tuple[torch.Tensor, torch.Tensor]
        """
        d_h = self.config.d_h
        h = X @ self.W
        e = F.leaky_relu(
            (h @ self.a[:d_h])[:, :, None] + (h @ self.a[d_h:])[:, None, :],
            negative_slope=self.config.leaky_slope,
        )
        A = torch.softmax(e, dim=-1)
        updated = F.elu(torch.einsum("buv,bud->bvd", A, h @ self.W_prime))
        return updated, A

    def pool_and_predict(self, h: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        g = h.mean(dim=1)
        return g, self.head(g)

    def forward(self, X: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        h, A = self.attention_forward(X)
        _, output = self.pool_and_predict(h)
        return output, A

    def checkpoint(self, scaler: Optional[TargetScaler] = None) -> Dict[str, Any]:
        return {
            "encoder": self.encoder.checkpoint(),
            "config": self.config.model_dump(),
            "output_dim": self.output_dim,
            "scaler": (scaler or TargetScaler()).model_dump(),
            "state": self.state_dict(),
        }

    @classmethod
    def from_checkpoint(cls, data: Mapping[str, Any]) -> "TupleGraphAttention":
        model = cls(
            TableEncoder.from_checkpoint(data["encoder"]),
            data["output_dim"],
            Stage1Config.model_validate(data["config"]),
        )
        model.load_state_dict(data["state"])
        return model


def build_tuple_graph(
    link: LabeledTuple, dataset: RelationalDataset, encoder: TableEncoder
) -> TupleGraph:
    if len(encoder.attributes) < 2:
        raise InsufficientAttributesError(
            f"{link.table} has {len(encoder.attributes)} non-key attributes"
        )
    row = dataset.tables[link.table].index[link.key]
    return TupleGraph(
        table=link.table,
        key=link.key,
        nodes=encoder.attribute_names,
        features=encoder([row])[0],
        label=link.label,
    )


def build_model(
    dataset: RelationalDataset,
    table: str,
    encoder_config: Optional[EncoderConfig] = None,
    config: Optional[Stage1Config] = None,
    seed: int = 0,
) -> TupleGraphAttention:
    encoder = TableEncoder.from_table(
        dataset.tables[table], encoder_config, derive_seed(seed, "encoder", table)
    )
    return TupleGraphAttention(
        encoder, dataset.task.output_dim, config, derive_seed(seed, "stage1", table)
    )


def collect_attention(
    model: TupleGraphAttention,
    dataset: RelationalDataset,
    links: Sequence[LabeledTuple],
    batch_size: int = 256,
) -> List[AttentionRecord]:
    records: List[AttentionRecord] = []
    if not links:
        return records
    table = dataset.tables[links[0].table]
    with torch.no_grad():
        for start in range(0, len(links), batch_size):
            chunk = links[start:start + batch_size]
            _, A = model(model.encoder([table.index[link.key] for link in chunk]))
            records.extend(
                AttentionRecord(link.table, link.key, model.nodes, matrix)
                for link, matrix in zip(chunk, A.double().numpy())
            )
    return records


def stage1_train(
    model: TupleGraphAttention,
    links: Sequence[LabeledTuple],
    dataset: RelationalDataset,
    seed: int = 0,
) -> Stage1Result:
    """
    Train the shared attention layer on the tuple graphs of one auxiliary table by
    mini-batch Adam on the summed per-graph loss, then export the attention matrices of
    every graph under the final parameters.

    :param model: Freshly built model for the table.
    :type model: TupleGraphAttention
    :param links: Labeled tuples of the table, one tuple graph each.
    :type links: Sequence[LabeledTuple]
    :param dataset: The loaded dataset.
    :type dataset: RelationalDataset
    :param seed: Mini-batch shuffling seed.
    :type seed: int
    :return: The trained model, attention records, loss curve and parameter stamp.
    :rtype: Stage1Result
    """
    if not links:
        raise ValueError("stage 1 needs at least one labeled tuple")

    config = model.config
    table = dataset.tables[links[0].table]
    rows = [table.index[link.key] for link in links]
    classification = dataset.task.is_classification
    target = label_tensor([link.label for link in links], classification)
    if not classification:
        target = TargetScaler.fit(target.tolist()).transform(target).to(model.encoder.dtype)

    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    generator = make_generator(derive_seed(seed, "stage1-batches", table.name))
    curve = TrainingCurve()

    model.train()
    for epoch in range(1, config.epochs + 1):
        order = torch.randperm(len(rows), generator=generator)
        total = 0.0
        for start in range(0, len(rows), config.batch_size):
            batch = order[start:start + config.batch_size]
            output, _ = model(model.encoder([rows[i] for i in batch]))
            loss = prediction_loss(output, target[batch], classification)
            total += check_finite(
                loss, "stage1", epoch, {"table": table.name, "batch_start": start}
            )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()

        curve.epochs.append(epoch)
        curve.losses.append(total / len(rows))
        logger.debug("stage1 %s epoch %d loss %.6f", table.name, epoch, curve.losses[-1])

    model.eval()
    records = collect_attention(model, dataset, links, config.batch_size)
    stamp = parameter_stamp(model)
    logger.info(
        "stage1 %s: %d graphs, loss %.4f -> %.4f",
        table.name,
        len(rows),
        curve.first,
        curve.last,
    )
    return Stage1Result(model, records, curve, stamp)


def attention_arrays(records: Sequence[AttentionRecord], stamp: str) -> Dict[str, np.ndarray]:
    """
    Arrays of an attention dump: tuple keys, node ids, stacked matrices and the stamp of
    the parameters that produced them.
    """
    nodes = records[0].nodes if records else []
    return {
        "keys": np.asarray([r.key for r in records], dtype=str),
        "nodes": np.asarray(nodes, dtype=str),
        "matrices": (
            np.stack([r.matrix for r in records])
            if records
            else np.zeros((0, len(nodes), len(nodes)))
        ),
        "stamp": np.asarray(stamp),
    }


def records_from_arrays(table: str, arrays: Mapping[str, np.ndarray]) -> List[AttentionRecord]:
    nodes = [str(n) for n in arrays["nodes"]]
    return [
        AttentionRecord(table, str(key), nodes, np.asarray(matrix, dtype=np.float64))
        for key, matrix in zip(arrays["keys"], arrays["matrices"])
    ]


def stage1_all(
    dataset: RelationalDataset,
    links: Mapping[str, Sequence[LabeledTuple]],
    encoder_config: Optional[EncoderConfig] = None,
    config: Optional[Stage1Config] = None,
    seed: int = 0,
) -> Tuple[Dict[str, Stage1Result], Dict[str, str]]:
    """
    Train one stage-1 model per auxiliary table with linked tuples. Tables with fewer
    than two non-key attributes or no links are skipped with a reason.
    """
    results: Dict[str, Stage1Result] = {}
    skipped: Dict[str, str] = {}
    for table in sorted(links):
        if not links[table]:
            skipped[table] = "no labeled tuples linked"
            continue
        try:
            model = build_model(dataset, table, encoder_config, config, seed)
        except InsufficientAttributesError as e:
            skipped[table] = e.detail
            logger.info("stage1 skips %s: %s", table, e.detail)
            continue
        results[table] = stage1_train(model, links[table], dataset, seed)
    return results, skipped
