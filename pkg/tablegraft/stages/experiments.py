import logging
from typing import Optional, Sequence

from tablegraft.dto.metrics import AblationReport, SweepReport
from tablegraft.dto.synthetic import SyntheticManifest, SyntheticSpec
from tablegraft.harness import (
    ablation_frame,
    render_ablation,
    run_ablations,
    run_ell_sweep,
    sweep_frame,
)
from tablegraft.stages.base import BaseStages
from tablegraft.synthetic import generate_synthetic
from tablegraft.types import GroupingMethod


logger = logging.getLogger(__name__)


class ExperimentStages(BaseStages):
    """
    Synthetic data generation and the ablation and threshold-sensitivity experiments.
    """

    def synth(self, spec: Optional[SyntheticSpec] = None) -> SyntheticManifest:
        """
        Write a planted-signal dataset to the configured dataset directory.

        :param spec: Generator settings; defaults to the configured spec, or the default
            spec under the root seed.
        :type spec: Optional[SyntheticSpec]
        :return: The generator manifest naming the planted table and attributes.
        :rtype: SyntheticManifest
        """
        spec = spec or self.config.dataset.synthetic or SyntheticSpec(seed=self.seed)
        dataset, manifest = generate_synthetic(spec, self.config.dataset.path)
        self.store.use_dataset(dataset)
        self.store.write_model(manifest)
        return manifest

    def ablate(self) -> AblationReport:
        report = run_ablations(self.dataset, self.config)
        self.store.write_model(report)
        self.store.write_csv("ablation.csv", ablation_frame(report))
        self.store.write_text("ablation.txt", render_ablation(report))
        return report

    def sweep(
        self,
        ells: Optional[Sequence[float]] = None,
        methods: Optional[Sequence[GroupingMethod]] = None,
    ) -> SweepReport:
        report = run_ell_sweep(self.dataset, self.config, ells, methods)
        self.store.write_model(report)
        self.store.write_csv("sweep.csv", sweep_frame(report))
        if not report.fallback_at_one:
            logger.warning("some table was still split at ell = 1")
        return report
