import logging
from typing import Dict, Optional

import pandas as pd

from tablegraft.dto.joinplan import MetaPathManifest
from tablegraft.dto.linker import Coreset
from tablegraft.dto.subtables import CumulativeAttention, SplitManifest
from tablegraft.dto.training import Stage1Report, Stage1TableReport
from tablegraft.encoders import TableEncoder
from tablegraft.gat import TupleGraphAttention, attention_arrays, records_from_arrays, stage1_all
from tablegraft.stages.base import BaseStages
from tablegraft.subtables import accumulate, build_manifests, render_report
from tablegraft.types import GroupingMethod


logger = logging.getLogger(__name__)


def checkpoint_name(table: str) -> str:
    return f"stage1/{table}.pt"


def attention_name(table: str) -> str:
    return f"stage1/{table}_attention.npz"


class MiningStages(BaseStages):
    """
    Stage one: per-table attention training and attention-based sub-table mining.
    """

    def train_stage1(self) -> Stage1Report:
        coreset = self.store.require(Coreset)
        results, skipped = stage1_all(
            self.dataset, coreset.links, self.config.encoder, self.config.stage1, self.seed
        )

        tables: Dict[str, Stage1TableReport] = {}
        for table, result in sorted(results.items()):
            self.store.write_torch(checkpoint_name(table), result.model.checkpoint())
            self.store.write_arrays(
                attention_name(table), attention_arrays(result.records, result.stamp)
            )
            self.store.write_csv(
                f"stage1/{table}_curve.csv",
                pd.DataFrame({"epoch": result.curve.epochs, "loss": result.curve.losses}),
            )
            tables[table] = Stage1TableReport(
                table=table,
                nodes=result.model.nodes,
                graphs=len(result.records),
                first_loss=result.curve.first or 0.0,
                last_loss=result.curve.last or 0.0,
                parameter_stamp=result.stamp,
            )

        report = Stage1Report(
            config=self.config.stage1, encoder=self.config.encoder, tables=tables, skipped=skipped
        )
        self.store.write_model(report)
        return report

    def cumulative_attention(self, report: Stage1Report) -> Dict[str, CumulativeAttention]:
        cumulative = {}
        for table in sorted(report.tables):
            arrays = self.store.read_arrays(attention_name(table), Stage1Report.__stage__)
            cumulative[table] = accumulate(records_from_arrays(table, arrays))
        return cumulative

    def encoders(self, report: Stage1Report) -> Dict[str, TableEncoder]:
        """
        The trained encoder of every stage-1 table, restored from its checkpoint.
        """
        return {
            table: TupleGraphAttention.from_checkpoint(
                self.store.read_torch(checkpoint_name(table), Stage1Report.__stage__)
            ).encoder
            for table in sorted(report.tables)
        }

    def split(
        self, ell: Optional[float] = None, method: Optional[GroupingMethod] = None
    ) -> SplitManifest:
        """
        Accumulate the attention of each stage-1 table and group its attributes into
        sub-tables.

        :param ell: Overrides the configured significance threshold.
        :type ell: Optional[float]
        :param method: Overrides the configured grouping method.
        :type method: Optional[GroupingMethod]
        :return: One sub-table manifest per reachable auxiliary table.
        :rtype: SplitManifest
        """
        plan = self.store.require(MetaPathManifest)
        report = self.store.require(Stage1Report)
        updates = {k: v for k, v in (("ell", ell), ("method", method)) if v is not None}
        config = self.config.subtables.model_copy(update=updates)

        cumulative = self.cumulative_attention(report)
        manifests = build_manifests(self.dataset, sorted(plan.paths), cumulative, config, self.seed)
        split = SplitManifest(config=config, manifests=manifests, cumulative=cumulative)
        self.store.write_model(split)
        self.store.write_text(
            "subtables.txt", render_report(cumulative, manifests, config.top_pairs)
        )
        return split
