import logging
from typing import Tuple

import pandas as pd

from tablegraft.dto.graph import GraphMeta
from tablegraft.dto.metrics import Evaluation, FeatureReport
from tablegraft.dto.subtables import SplitManifest
from tablegraft.dto.training import Stage1Report, Stage2Report
from tablegraft.harness import evaluate
from tablegraft.hetgraph import HeteroGraph, build_graph, edge_key, load_graph, save_graph
from tablegraft.hgnn import (
    HeteroGNN,
    augment_table,
    feature_selection_report,
    prediction_frame,
    render_feature_report,
    stage2_train,
)
from tablegraft.stages.base import BaseStages
from tablegraft.stages.mining import MiningStages
from tablegraft.types import SplitName
from tablegraft.utils import derive_seed


logger = logging.getLogger(__name__)

GRAPH_DIR = "graph"
CHECKPOINT = "stage2.pt"


class AugmentStages(BaseStages):
    """
    Stage two: heterogeneous graph construction, training, prediction and evaluation.
    """

    def build_graph(self) -> HeteroGraph:
        split = self.store.require(SplitManifest)
        report = self.store.require(Stage1Report)
        encoders = MiningStages(self.store).encoders(report)

        config = self.config
        graph = build_graph(
            self.dataset,
            split.manifests,
            encoders,
            config.encoder,
            config.similarity,
            config.split,
            self.seed,
        )
        save_graph(graph, self.store.path(GRAPH_DIR))
        self.store.write_model(graph.meta)
        return graph

    def load_graph(self) -> HeteroGraph:
        path = self.store.require_path(GraphMeta.__artifact__, GraphMeta.__stage__)
        return load_graph(path.parent)

    def load_model(self) -> Tuple[HeteroGraph, HeteroGNN]:
        graph = self.load_graph()
        model = HeteroGNN.from_checkpoint(
            self.store.read_torch(CHECKPOINT, Stage2Report.__stage__)
        )
        return graph, model

    def train_stage2(self) -> FeatureReport:
        """
        Train the heterogeneous GNN on the graph dump and write the checkpoint, the loss
        curves, the learned edge importances and the feature-selection report.

        :return: Sub-tables ranked by learned importance.
        :rtype: FeatureReport
        """
        graph = self.load_graph()
        config = self.config.stage2
        model = HeteroGNN.for_graph(graph, config, derive_seed(self.seed, "stage2"))
        result = stage2_train(graph, model, self.seed)

        self.store.write_torch(CHECKPOINT, result.model.checkpoint())
        self.store.write_csv(
            "stage2_curve.csv",
            pd.DataFrame(
                {
                    "epoch": result.curve.epochs,
                    "loss": result.curve.losses,
                    "val_loss": result.curve.val_losses,
                }
            ),
        )
        self.store.write_arrays(
            "edge_importance.npz",
            {edge_key(et): values for et, values in result.importance.per_edge.items()},
        )
        self.store.write_model(
            Stage2Report(
                config=config,
                best_epoch=result.best_epoch,
                best_val_loss=result.best_val_loss,
                first_loss=result.curve.first or 0.0,
                last_loss=result.curve.last or 0.0,
                parameter_stamp=result.stamp,
            )
        )

        report = feature_selection_report(result.importance, graph, config.select_top)
        self.store.write_model(report)
        self.store.write_text("feature_report.txt", render_feature_report(report))
        return report

    def predict(self) -> pd.DataFrame:
        """
        Predict every base tuple and write `predictions.csv` and the embedding-augmented
        base table `augmented.csv`.
        """
        graph, model = self.load_model()
        predictions = prediction_frame(graph, model)
        self.store.write_csv("predictions.csv", predictions)
        self.store.write_csv("augmented.csv", augment_table(graph, model, self.dataset))
        return predictions

    def evaluate(self, split: SplitName = "test") -> Evaluation:
        graph, model = self.load_model()
        evaluation = Evaluation(split=split, metrics=evaluate(graph, model, split))
        self.store.write_model(evaluation)
        logger.info("%s metrics: %s", split, evaluation.metrics.values())
        return evaluation
