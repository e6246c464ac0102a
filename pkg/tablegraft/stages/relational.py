import logging

from tablegraft.dataset import load_report
from tablegraft.dto.dataset import LoadReport
from tablegraft.dto.joinplan import MetaPathManifest
from tablegraft.dto.linker import Coreset
from tablegraft.hetgraph import training_keys
from tablegraft.joinplan import plan_meta_paths, render_meta_paths
from tablegraft.linker import build_coreset, link_all
from tablegraft.stages.base import BaseStages


logger = logging.getLogger(__name__)


class RelationalStages(BaseStages):
    """
    Loading, join planning and task-relevant tuple linking.
    """

    def ingest(self) -> LoadReport:
        """
        Load and validate the dataset and record what was loaded.

        :return: Table and tuple counts, dangling foreign keys and nulled numerics.
        :rtype: LoadReport
        """
        report = load_report(self.dataset)
        self.store.write_model(report)
        return report

    def plan(self) -> MetaPathManifest:
        """
        Build the directed join graph and choose one meta-path per reachable auxiliary
        table.

        :return: The join graph, the chosen paths and the unreachable tables.
        :rtype: MetaPathManifest
        """
        self.store.require(LoadReport)
        manifest = plan_meta_paths(self.dataset, self.config.scoring)
        self.store.write_model(manifest)
        self.store.write_text("meta_paths.txt", render_meta_paths(manifest.paths))
        return manifest

    def link(self) -> Coreset:
        """
        Link labeled training-split base tuples to the tuples their meta-paths reach and
        sample the coreset.

        :return: The sampled base keys and their linked tuples per table.
        :rtype: Coreset
        """
        plan = self.store.require(MetaPathManifest)
        config = self.config.coreset
        if config.seed is None:
            config = config.model_copy(update={"seed": self.seed})

        links = link_all(self.dataset, plan.paths, config)
        candidates = training_keys(self.dataset, self.config.split, self.seed)
        coreset = build_coreset(self.dataset, links, config, candidates)
        self.store.write_model(coreset)
        return coreset
