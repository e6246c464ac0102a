from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional, Union

from tablegraft.dto.config import PipelineConfig
from tablegraft.dto.metrics import Evaluation
from tablegraft.stages import AugmentStages, ExperimentStages, MiningStages, RelationalStages
from tablegraft.store import ArtifactStore


logger = logging.getLogger(__name__)


class Pipeline:
    """
    Relational feature augmentation, one stage at a time or end to end.

    Usage:

    ```python
    >>> pipeline = Pipeline(PipelineConfig(output_dir="runs/demo"))
    >>> pipeline.relational.plan()
    >>> evaluation = pipeline.run_all()
    ```

    :param config: Run configuration.
    :type config: PipelineConfig
    :param output_dir: Overrides the configured output directory.
    :type output_dir: Optional[Union[str, Path]]
    """

    def __init__(
        self, config: Optional[PipelineConfig] = None, output_dir: Optional[Union[str, Path]] = None
    ) -> None:
        self.config = config or PipelineConfig()
        self.store = ArtifactStore(self.config, output_dir)

        self.relational = RelationalStages(self.store)
        self.mining = MiningStages(self.store)
        self.augment = AugmentStages(self.store)
        self.experiments = ExperimentStages(self.store)

    def __repr__(self) -> str:
        return f"Pipeline({self.store!r}, seed={self.config.seed})"

    def run_all(self) -> Evaluation:
        """
        Run every stage in order, from ingestion to test-split evaluation.

        :return: Test-split metrics.
        :rtype: Evaluation
        """
        self.relational.ingest()
        self.relational.plan()
        self.relational.link()
        self.mining.train_stage1()
        self.mining.split()
        self.augment.build_graph()
        self.augment.train_stage2()
        self.augment.predict()
        evaluation = self.augment.evaluate()
        logger.info("run-all finished in %s", self.store.root)
        return evaluation
