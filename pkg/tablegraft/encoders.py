from __future__ import annotations

import logging
import math
import warnings
from functools import lru_cache
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
import torch
from sklearn.feature_extraction.text import HashingVectorizer
from torch import nn

from tablegraft.dataset import Row, Table, column_statistics
from tablegraft.dto.dataset import ColumnSpec, ColumnStats
from tablegraft.dto.training import EncoderConfig
from tablegraft.errors import DataQualityWarning, DimensionMismatchError, UnknownAttributeError
from tablegraft.training import EPSILON, make_generator, reset_uniform
from tablegraft.types import MODALITY_OF_KIND, CellValue, Modality
from tablegraft.utils import stable_bucket


logger = logging.getLogger(__name__)


@lru_cache(maxsize=8)
def _vectorizer(d_text: int) -> HashingVectorizer:
    return HashingVectorizer(
        analyzer="char",
        ngram_range=(3, 3),
        n_features=d_text,
        alternate_sign=True,
        norm="l2",
        lowercase=False,
    )


def encode_text(texts: Sequence[str], d_text: int) -> np.ndarray:
    """
    Frozen text embedding: signed feature hashing of the character 3-grams of the whole
    string, spaces included, into `d_text` buckets, L2-normalized. The empty string maps
    to the zero vector.

    :param texts: Strings to embed.
    :type texts: Sequence[str]
    :param d_text: Output width.
    :type d_text: int
    :return: Array of shape (len(texts), d_text).
    :rtype: np.ndarray
    """
    if not texts:
        return np.zeros((0, d_text), dtype=np.float64)
    return _vectorizer(d_text).transform(list(texts)).toarray()


class TableEncoder(nn.Module):
    """
    Typed cell encoders and per-modality projections for the non-key attributes of one
    table. Numerical cells are standardized with the column statistics and passed
    through a learned per-column affine map, categorical cells look up a per-column
    embedding table (unseen tokens hash into shared overflow rows), text cells use the
    frozen hashing embedding. Every null maps to a learned per-column vector.
    """
    def __init__(
        self,
        table: str,
        attributes: Sequence[ColumnSpec],
        positions: Mapping[str, int],
        stats: Mapping[str, ColumnStats],
        vocabularies: Mapping[str, List[str]],
        config: Optional[EncoderConfig] = None,
        seed: int = 0,
    ) -> None:
        super().__init__()
        self.table = table
        self.config = config or EncoderConfig()
        self.seed = seed
        self.attributes = list(attributes)
        self.positions = dict(positions)
        self.stats = dict(stats)
        self.vocabularies = {column: list(tokens) for column, tokens in vocabularies.items()}
        self.modality: Dict[str, Modality] = {
            c.name: MODALITY_OF_KIND[c.kind] for c in self.attributes  # type: ignore[misc]
        }

        self.slots: Dict[str, int] = {}
        counts = {"numerical": 0, "categorical": 0, "text": 0}
        for column in self.attributes:
            modality = self.modality[column.name]
            self.slots[column.name] = counts[modality]
            counts[modality] += 1

        cfg = self.config
        self.num_weight = nn.Parameter(torch.empty(counts["numerical"], cfg.d_num))
        self.num_bias = nn.Parameter(torch.empty(counts["numerical"], cfg.d_num))
        self.embeddings = nn.ModuleList(
            nn.Embedding(len(self.vocabularies[c.name]) + cfg.overflow_buckets, cfg.d_cat)
            for c in self.attributes
            if self.modality[c.name] == "categorical"
        )
        self.nulls = nn.ParameterDict(
            {
                "numerical": nn.Parameter(torch.empty(counts["numerical"], cfg.d_num)),
                "categorical": nn.Parameter(torch.empty(counts["categorical"], cfg.d_cat)),
                "text": nn.Parameter(torch.empty(counts["text"], cfg.d_text)),
            }
        )
        self.projection = nn.ParameterDict(
            {
                "numerical": nn.Parameter(torch.empty(cfg.d_num, cfg.d_out)),
                "categorical": nn.Parameter(torch.empty(cfg.d_cat, cfg.d_out)),
                "text": nn.Parameter(torch.empty(cfg.d_text, cfg.d_out)),
            }
        )
        reset_uniform(self, make_generator(seed))

        self._token_index = {
            column: {token: i for i, token in enumerate(tokens)}
            for column, tokens in self.vocabularies.items()
        }

    @classmethod
    def from_table(
        cls,
        table: Table,
        config: Optional[EncoderConfig] = None,
        seed: int = 0,
        exclude: Sequence[str] = (),
    ) -> "TableEncoder":
        attributes = table.attributes(exclude=tuple(exclude))
        stats = {c.name: column_statistics(table, c.name) for c in attributes}
        vocabularies = {
            c.name: sorted({str(v) for v in table.values(c.name) if v is not None})
            for c in attributes
            if c.kind == "categorical"
        }
        return cls(table.name, attributes, table.column_index, stats, vocabularies, config, seed)

    @property
    def attribute_names(self) -> List[str]:
        return [c.name for c in self.attributes]

    @property
    def d_out(self) -> int:
        return self.config.d_out

    @property
    def dtype(self) -> torch.dtype:
        return self.projection["numerical"].dtype

    def _slot(self, column: str, modality: Modality) -> int:
        if self.modality.get(column) != modality:
            raise UnknownAttributeError(f"{self.table}.{column} is not a {modality} attribute")
        return self.slots[column]

    def encode_numerical(self, column: str, values: Sequence[CellValue]) -> torch.Tensor:
        slot = self._slot(column, "numerical")
        stats = self.stats[column]
        mean = stats.mean if stats.mean is not None else 0.0
        std = stats.stddev or 0.0

        raw = [float(v) if v is not None else math.nan for v in values]
        nonfinite = sum(1 for v in values if v is not None and not math.isfinite(float(v)))
        if nonfinite:
            warnings.warn(
                f"{nonfinite} non-finite values in {self.table}.{column} encoded as null",
                DataQualityWarning,
            )

        x = torch.as_tensor(raw, dtype=self.dtype)
        present = torch.isfinite(x)
        filled = torch.where(present, x, torch.full_like(x, mean))
        z = (filled - mean) / max(std, EPSILON)

        out = z[:, None] * self.num_weight[slot] + self.num_bias[slot]
        return torch.where(present[:, None], out, self.nulls["numerical"][slot].expand_as(out))

    def token_index(self, column: str, token: str) -> int:
        known = self._token_index[column]
        if token in known:
            return known[token]
        return len(known) + stable_bucket(token, self.config.overflow_buckets)

    def encode_categorical(self, column: str, tokens: Sequence[CellValue]) -> torch.Tensor:
        slot = self._slot(column, "categorical")
        present = torch.as_tensor([t is not None for t in tokens], dtype=torch.bool)
        index = torch.as_tensor(
            [self.token_index(column, str(t)) if t is not None else 0 for t in tokens],
            dtype=torch.long,
        )
        out = self.embeddings[slot](index)
        return torch.where(present[:, None], out, self.nulls["categorical"][slot].expand_as(out))

    def encode_text(self, column: str, texts: Sequence[CellValue]) -> torch.Tensor:
        slot = self._slot(column, "text")
        present = torch.as_tensor([t is not None for t in texts], dtype=torch.bool)
        hashed = encode_text([str(t) if t is not None else "" for t in texts], self.config.d_text)
        out = torch.as_tensor(hashed, dtype=self.dtype)
        return torch.where(present[:, None], out, self.nulls["text"][slot].expand_as(out))

    def project(self, e: torch.Tensor, modality: Modality) -> torch.Tensor:
        weight = self.projection[modality]
        if e.shape[-1] != weight.shape[0]:
            raise DimensionMismatchError(
                f"{modality} embedding has width {e.shape[-1]}, projection expects "
                f"{weight.shape[0]}"
            )
        return e @ weight

    def encode_column(self, column: str, values: Sequence[CellValue]) -> torch.Tensor:
        modality = self.modality.get(column)
        if modality is None:
            raise UnknownAttributeError(f"{self.table}.{column}")
        if modality == "numerical":
            e = self.encode_numerical(column, values)
        elif modality == "categorical":
            e = self.encode_categorical(column, values)
        else:
            e = self.encode_text(column, values)
        return self.project(e, modality)

    def forward(
        self, rows: Sequence[Row], attributes: Optional[Sequence[str]] = None
    ) -> torch.Tensor:
        """
        Encode and project the given attributes of each row.

        :return: Tensor of shape (len(rows), len(attributes), d_out).
        :rtype: torch.Tensor
        """
        names = list(attributes) if attributes is not None else self.attribute_names
        if not names:
            return torch.zeros(len(rows), 0, self.d_out, dtype=self.dtype)
        columns = [
            self.encode_column(name, [row.values[self.positions[name]] for row in rows])
            for name in names
        ]
        return torch.stack(columns, dim=1)

    def checkpoint(self) -> Dict[str, Any]:
        return {
            "table": self.table,
            "config": self.config.model_dump(),
            "seed": self.seed,
            "attributes": [c.model_dump(mode="json") for c in self.attributes],
            "positions": self.positions,
            "stats": {k: v.model_dump(mode="json") for k, v in self.stats.items()},
            "vocabularies": self.vocabularies,
            "state": self.state_dict(),
        }

    @classmethod
    def from_checkpoint(cls, data: Mapping[str, Any]) -> "TableEncoder":
        encoder = cls(
            data["table"],
            [ColumnSpec.model_validate(c) for c in data["attributes"]],
            data["positions"],
            {k: ColumnStats.model_validate(v) for k, v in data["stats"].items()},
            data["vocabularies"],
            EncoderConfig.model_validate(data["config"]),
            data["seed"],
        )
        encoder.load_state_dict(data["state"])
        return encoder
