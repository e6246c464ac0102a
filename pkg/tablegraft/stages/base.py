from tablegraft.dataset import RelationalDataset
from tablegraft.dto.config import PipelineConfig
from tablegraft.store import ArtifactStore


class BaseStages:
    def __init__(self, store: ArtifactStore) -> None:
        self.store = store

    @property
    def config(self) -> PipelineConfig:
        return self.store.config

    @property
    def dataset(self) -> RelationalDataset:
        return self.store.dataset

    @property
    def seed(self) -> int:
        return self.store.config.seed
