from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Type, TypeVar, Union

import numpy as np
import pandas as pd
import torch

from tablegraft.dataset import RelationalDataset, load_dataset
from tablegraft.dto.base import ArtifactStamp, BaseSchema
from tablegraft.dto.config import PipelineConfig
from tablegraft.errors import MissingArtifactError
from tablegraft.utils import deserialize, serialize
from tablegraft.version import __version__


logger = logging.getLogger(__name__)

SchemaT = TypeVar("SchemaT", bound=BaseSchema)


class ArtifactStore:
    """
    Owns the output directory of a run: every stage reads its inputs and writes its
    outputs through this object.

    :param config: Run configuration; its output directory, seed and digest are used.
    :type config: PipelineConfig
    :param output_dir: Overrides the configured output directory.
    :type output_dir: Optional[Union[str, Path]]
    """

    def __init__(
        self, config: PipelineConfig, output_dir: Optional[Union[str, Path]] = None
    ) -> None:
        self.config = config
        self.root = Path(output_dir or config.output_dir)
        self.root.mkdir(parents=True, exist_ok=True)
        self._dataset: Optional[RelationalDataset] = None

    def __repr__(self) -> str:
        return f"ArtifactStore({str(self.root)!r})"

    @property
    def dataset(self) -> RelationalDataset:
        """
        The configured dataset, loaded once per store.
        """
        if self._dataset is None:
            self._dataset = load_dataset(self.config.dataset.path, self.config.dataset.descriptor)
        return self._dataset

    def use_dataset(self, dataset: RelationalDataset) -> None:
        self._dataset = dataset

    def path(self, name: str) -> Path:
        return self.root / name

    def exists(self, name: str) -> bool:
        return self.path(name).exists()

    def stamp(self, stage: str) -> ArtifactStamp:
        return ArtifactStamp(
            stage=stage,
            version=__version__,
            seed=self.config.seed,
            config_digest=self.config.digest,
        )

    def _target(self, name: str) -> Path:
        path = self.path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def require_path(self, name: str, stage: str) -> Path:
        path = self.path(name)
        if not path.exists():
            raise MissingArtifactError(stage, path)
        return path

    def write_json(self, name: str, data: Any) -> Path:
        path = self._target(name)
        path.write_bytes(serialize(data))
        return path

    def read_json(self, name: str, stage: str) -> Any:
        return deserialize(self.require_path(name, stage).read_bytes())

    def write_text(self, name: str, text: str) -> Path:
        path = self._target(name)
        path.write_text(text, encoding="utf-8")
        return path

    def write_model(self, model: SchemaT) -> Path:
        """
        Stamp and write a manifest under its artifact name.

        :param model: The manifest to persist.
        :type model: BaseSchema
        :return: Path written.
        :rtype: Path
        """
        stamped = model.model_copy(update={"stamp": self.stamp(model.__stage__)})
        path = self.write_json(model.__artifact__, stamped.model_dump(mode="json"))
        logger.info("wrote %s", path)
        return path

    def require(self, schema: Type[SchemaT]) -> SchemaT:
        """
        Read a manifest written by an earlier stage.

        :param schema: Manifest class; its artifact name and producing stage locate it.
        :type schema: Type[BaseSchema]
        :raises MissingArtifactError: The artifact has not been produced yet.
        :return: The validated manifest.
        :rtype: BaseSchema
        """
        model = schema.model_validate(self.read_json(schema.__artifact__, schema.__stage__))
        stamp = getattr(model, "stamp", None)
        if stamp is not None and stamp.config_digest != self.config.digest:
            logger.info(
                "%s was produced by `%s` under a different config", schema.__artifact__, stamp.stage
            )
        return model

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        path = self._target(name)
        frame.to_csv(path, index=False, lineterminator="\n", float_format="%.10g")
        return path

    def read_csv(self, name: str, stage: str) -> pd.DataFrame:
        return pd.read_csv(self.require_path(name, stage), keep_default_na=False)

    def write_torch(self, name: str, data: Any) -> Path:
        path = self._target(name)
        torch.save(data, path)
        return path

    def read_torch(self, name: str, stage: str) -> Any:
        return torch.load(self.require_path(name, stage))

    def write_arrays(self, name: str, arrays: Mapping[str, np.ndarray]) -> Path:
        path = self._target(name)
        with path.open("wb") as handle:
            np.savez(handle, **arrays)
        return path

    def read_arrays(self, name: str, stage: str) -> Dict[str, np.ndarray]:
        with np.load(self.require_path(name, stage), allow_pickle=False) as data:
            return {key: data[key] for key in data.files}
