from __future__ import annotations

import itertools
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from typing import (
    Callable,
    Dict,
    Hashable,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
    TypeVar,
)

import numpy as np
import pandas as pd

from tablegraft.dataset import RelationalDataset
from tablegraft.dto.config import PipelineConfig
from tablegraft.dto.joinplan import MetaPathManifest
from tablegraft.dto.linker import Coreset
from tablegraft.dto.metrics import (
    AblationArm,
    AblationReport,
    AblationRun,
    BaselineResult,
    MetricSet,
    SweepPoint,
    SweepReport,
)
from tablegraft.dto.subtables import CumulativeAttention, SubTableConfig, SubTableManifest
from tablegraft.dto.synthetic import SyntheticSpec
from tablegraft.encoders import TableEncoder
from tablegraft.errors import ClampWarning
from tablegraft.gat import Stage1Result, stage1_all
from tablegraft.hetgraph import HeteroGraph, build_graph, training_keys
from tablegraft.hgnn import HeteroGNN, Stage2Result, predict, stage2_train
from tablegraft.joinplan import plan_meta_paths
from tablegraft.linker import build_coreset, link_all
from tablegraft.metrics import compute_metrics, primary_metric, summarize_metrics
from tablegraft.subtables import accumulate, build_manifests, projection, unsplit
from tablegraft.types import BaselineVariant, GroupingMethod, MiningArm, SplitName
from tablegraft.utils import derive_seed, render_table


logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

ARMS: Tuple[Tuple[bool, bool, MiningArm], ...] = tuple(
    itertools.product((True, False), (True, False), ("graph", "random_grouping", "none"))
)


class StageOneOutput(NamedTuple):
    plan: MetaPathManifest
    coreset: Coreset
    results: Dict[str, Stage1Result]
    skipped: Dict[str, str]
    cumulative: Dict[str, CumulativeAttention]

    @property
    def tables(self) -> List[str]:
        return sorted(self.plan.paths)

    @property
    def encoders(self) -> Dict[str, TableEncoder]:
        return {table: result.model.encoder for table, result in self.results.items()}


class RunOutcome(NamedTuple):
    graph: HeteroGraph
    training: Stage2Result
    metrics: MetricSet


def run_stage_one(dataset: RelationalDataset, config: PipelineConfig) -> StageOneOutput:
    """
    Plan meta-paths, link and sample the coreset from the training split, train one
    attention model per auxiliary table and accumulate its attention.
    """
    seed = config.seed
    plan = plan_meta_paths(dataset, config.scoring)
    coreset_config = config.coreset
    if coreset_config.seed is None:
        coreset_config = coreset_config.model_copy(update={"seed": seed})

    links = link_all(dataset, plan.paths, coreset_config)
    coreset = build_coreset(
        dataset, links, coreset_config, training_keys(dataset, config.split, seed)
    )
    results, skipped = stage1_all(dataset, coreset.links, config.encoder, config.stage1, seed)
    cumulative = {table: accumulate(result.records) for table, result in results.items()}
    return StageOneOutput(plan, coreset, results, skipped, cumulative)


def evaluate(graph: HeteroGraph, model: HeteroGNN, split: SplitName = "test") -> MetricSet:
    index = graph.split_index(split).tolist()
    if not index:
        raise ValueError(f"the {split} split holds no labeled base nodes")
    return compute_metrics(
        predict(graph, model, index),
        [graph.labels[i] for i in index],
        graph.task.task,
        graph.task.class_count,
    )


def fit_and_evaluate(
    dataset: RelationalDataset,
    config: PipelineConfig,
    manifests: Mapping[str, SubTableManifest],
    encoders: Optional[Mapping[str, TableEncoder]] = None,
) -> RunOutcome:
    """
    Build the heterogeneous graph from `manifests`, train stage 2 and score the test
    split.
    """
    seed = config.seed
    graph = build_graph(
        dataset, manifests, encoders, config.encoder, config.similarity, config.split, seed
    )
    model = HeteroGNN.for_graph(graph, config.stage2, derive_seed(seed, "stage2"))
    training = stage2_train(graph, model, seed)
    return RunOutcome(graph, training, evaluate(graph, training.model))


def with_arm(config: PipelineConfig, edge_weights: bool, similarity: bool) -> PipelineConfig:
    return config.model_copy(
        update={
            "stage2": config.stage2.model_copy(update={"edge_weights": edge_weights}),
            "similarity": config.similarity.model_copy(update={"enabled": similarity}),
        }
    )


def mining_manifests(
    dataset: RelationalDataset,
    stage_one: StageOneOutput,
    config: PipelineConfig,
    mining: MiningArm,
) -> Dict[str, SubTableManifest]:
    """
    Sub-table manifests of one mining arm: attention-based grouping, random attribute
    pairs, or no mining in the configured reading (whole tuples or one node per
    attribute).
    """
    method: GroupingMethod
    if mining == "graph":
        method = config.subtables.method
    elif mining == "random_grouping":
        method = "random_pairs"
    elif config.experiments.no_mining_variant == "no_mining_per_attribute":
        method = "per_attribute"
    else:
        method = "unsplit"

    subtables = config.subtables.model_copy(update={"method": method})
    return build_manifests(
        dataset, stage_one.tables, stage_one.cumulative, subtables, config.seed
    )


def baseline_manifests(
    dataset: RelationalDataset,
    tables: Sequence[str],
    variant: BaselineVariant,
    k: Optional[int] = None,
    seed: int = 0,
) -> Dict[str, SubTableManifest]:
    """
    base_only keeps no auxiliary node types, all_join one whole-table node type per
    reachable table, random_k a projection onto k uniformly drawn auxiliary attributes.
    """
    if variant == "base_only":
        return {}
    if variant == "all_join":
        return {table: unsplit(table) for table in sorted(tables)}

    pool = [
        (table, column.name)
        for table in sorted(tables)
        for column in dataset.tables[table].attributes()
    ]
    k = len(pool) if k is None else k
    if k > len(pool):
        warnings.warn(
            f"random_k k={k} exceeds the {len(pool)} auxiliary attributes; keeping all",
            ClampWarning,
        )
        k = len(pool)

    rng = np.random.default_rng(derive_seed(seed, "random-k"))
    chosen: Dict[str, List[str]] = {}
    for i in sorted(rng.choice(len(pool), size=k, replace=False).tolist()):
        table, attribute = pool[i]
        chosen.setdefault(table, []).append(attribute)
    return {table: projection(table, attributes) for table, attributes in chosen.items()}


def run_baseline(
    dataset: RelationalDataset,
    variant: BaselineVariant,
    config: PipelineConfig,
    k: Optional[int] = None,
    seed: Optional[int] = None,
    stage_one: Optional[StageOneOutput] = None,
) -> BaselineResult:
    """
    Train and score one baseline feature set under the main pipeline's stage-2 config.
    Auxiliary encoders come from `stage_one` when given, else they are fresh.
    """
    seed = config.seed if seed is None else seed
    config = config.with_seed(seed)
    if stage_one is not None:
        tables = stage_one.tables
    else:
        tables = sorted(plan_meta_paths(dataset, config.scoring).paths)
    if variant == "random_k" and k is None:
        k = config.experiments.random_k

    manifests = baseline_manifests(dataset, tables, variant, k, seed)
    encoders = stage_one.encoders if stage_one else None
    outcome = fit_and_evaluate(dataset, config, manifests, encoders)
    logger.info("baseline %s (seed %d): %s", variant, seed, outcome.metrics.values())
    return BaselineResult(
        variant=variant, k=k if variant == "random_k" else None, seed=seed, metrics=outcome.metrics
    )


def _pool_map(workers: int, fn: Callable[[T], R], items: Sequence[T]) -> List[R]:
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _mean_delta(
    runs: Sequence[AblationRun], metric: str, split_on: str, high: Hashable, low: Hashable
) -> Optional[float]:
    paired: Dict[Tuple[Hashable, ...], Dict[Hashable, Optional[float]]] = {}
    for run in runs:
        arm = {"edge_weights": run.edge_weights, "similarity": run.similarity, "mining": run.mining}
        side = arm.pop(split_on)
        key = (run.seed, *arm.values())
        paired.setdefault(key, {})[side] = run.metrics.values().get(metric)

    deltas = [
        sides[high] - sides[low]
        for sides in paired.values()
        if sides.get(high) is not None and sides.get(low) is not None
    ]
    return float(np.mean(deltas)) if deltas else None


def ablation_deltas(runs: Sequence[AblationRun], metric: str) -> Dict[str, Optional[float]]:
    """
    Mean paired difference of `metric` along each ablation axis; pairs share seed and the
    other two axes.
    """
    return {
        "edge_weights": _mean_delta(runs, metric, "edge_weights", True, False),
        "similarity": _mean_delta(runs, metric, "similarity", True, False),
        "graph_vs_random_grouping": _mean_delta(runs, metric, "mining", "graph", "random_grouping"),
        "graph_vs_none": _mean_delta(runs, metric, "mining", "graph", "none"),
    }


def run_ablations(dataset: RelationalDataset, config: PipelineConfig) -> AblationReport:
    """
    Run the {edge weights} x {similarity edges} x {mining arm} grid over the paired
    seeds. Stage 1 runs once per seed and is shared by the twelve arms of that seed.
    """
    experiments = config.experiments
    runs: List[AblationRun] = []

    for seed in experiments.seeds:
        seeded = config.with_seed(seed)
        stage_one = run_stage_one(dataset, seeded)

        def _run(arm: Tuple[bool, bool, MiningArm]) -> AblationRun:
            edge_weights, similarity, mining = arm
            arm_config = with_arm(seeded, edge_weights, similarity)
            manifests = mining_manifests(dataset, stage_one, arm_config, mining)
            outcome = fit_and_evaluate(dataset, arm_config, manifests, stage_one.encoders)
            logger.info(
                "ablation seed %d weights=%s similarity=%s mining=%s: %s",
                seed,
                edge_weights,
                similarity,
                mining,
                outcome.metrics.values(),
            )
            return AblationRun(
                edge_weights=edge_weights,
                similarity=similarity,
                mining=mining,
                seed=seed,
                metrics=outcome.metrics,
            )

        runs.extend(_pool_map(experiments.workers, _run, ARMS))

    arms = []
    for edge_weights, similarity, mining in ARMS:
        metric_sets = [
            r.metrics
            for r in runs
            if (r.edge_weights, r.similarity, r.mining) == (edge_weights, similarity, mining)
        ]
        arms.append(
            AblationArm(
                edge_weights=edge_weights,
                similarity=similarity,
                mining=mining,
                summary=summarize_metrics(metric_sets),
            )
        )

    return AblationReport(
        seeds=list(experiments.seeds),
        no_mining_variant=experiments.no_mining_variant,
        runs=runs,
        arms=arms,
        deltas=ablation_deltas(runs, primary_metric(dataset.task.task)),
    )


def ablation_frame(report: AblationReport) -> pd.DataFrame:
    rows = []
    for arm in report.arms:
        row = {"edge_weights": arm.edge_weights, "similarity": arm.similarity, "mining": arm.mining}
        for metric, summary in arm.summary.items():
            row[f"{metric}_mean"] = summary.mean
            row[f"{metric}_std"] = summary.stddev
        rows.append(row)
    return pd.DataFrame(rows)


def render_ablation(report: AblationReport) -> str:
    frame = ablation_frame(report)
    rows = [
        tuple("" if isinstance(v, float) and np.isnan(v) else v for v in record)
        for record in frame.itertuples(index=False, name=None)
    ]
    lines = [render_table(list(frame.columns), rows)]
    lines.extend(
        f"delta {axis}: {'n/a' if value is None else f'{value:+.4f}'}"
        for axis, value in report.deltas.items()
    )
    return "\n".join(lines) + "\n"


def run_ell_sweep(
    dataset: RelationalDataset,
    config: PipelineConfig,
    ells: Optional[Sequence[float]] = None,
    methods: Optional[Sequence[GroupingMethod]] = None,
) -> SweepReport:
    """
    Metric curve over the significance threshold for each attention-based grouping
    method, the configured baselines, and a structural check that at ell = 1 every
    table falls back to unsplit.
    """
    experiments = config.experiments
    ells = list(experiments.ells if ells is None else ells)
    methods = list(experiments.sweep_methods if methods is None else methods)
    stage_one = run_stage_one(dataset, config)

    def _manifests(method: GroupingMethod, ell: float) -> Dict[str, SubTableManifest]:
        subtables: SubTableConfig = config.subtables.model_copy(
            update={"method": method, "ell": ell}
        )
        return build_manifests(
            dataset, stage_one.tables, stage_one.cumulative, subtables, config.seed
        )

    def _point(item: Tuple[GroupingMethod, float]) -> SweepPoint:
        method, ell = item
        manifests = _manifests(method, ell)
        outcome = fit_and_evaluate(dataset, config, manifests, stage_one.encoders)
        logger.info("sweep %s ell=%.2f: %s", method, ell, outcome.metrics.values())
        return SweepPoint(
            method=method,
            ell=ell,
            groups=sum(len(m.groups) for m in manifests.values()),
            unsplit_tables=sum(1 for m in manifests.values() if m.unsplit),
            metrics=outcome.metrics,
        )

    points = _pool_map(experiments.workers, _point, [(m, ell) for m in methods for ell in ells])
    fallback = all(
        manifest.unsplit for method in methods for manifest in _manifests(method, 1.0).values()
    )
    baselines = [
        run_baseline(dataset, variant, config, stage_one=stage_one)
        for variant in experiments.baselines
    ]
    return SweepReport(points=points, fallback_at_one=fallback, baselines=baselines)


def sweep_frame(report: SweepReport) -> pd.DataFrame:
    rows = []
    for point in report.points:
        row = {"method": point.method, "ell": point.ell, "groups": point.groups}
        row["unsplit_tables"] = point.unsplit_tables
        row.update(point.metrics.values())
        rows.append(row)
    return pd.DataFrame(rows)


def pair_percentile(cumulative: CumulativeAttention, pair: Tuple[str, str]) -> float:
    """
    Share of the table's attribute pairs whose symmetrized normalized weight is at least
    that of `pair` (0 < result <= 1; smaller is better).
    """
    nodes = cumulative.nodes
    u, v = nodes.index(pair[0]), nodes.index(pair[1])
    target = cumulative.symmetric(u, v)
    weights = [
        cumulative.symmetric(i, j) for i in range(len(nodes)) for j in range(i + 1, len(nodes))
    ]
    return sum(1 for w in weights if w >= target) / len(weights)


def planted_pair_percentile(
    cumulative: Mapping[str, CumulativeAttention], spec: SyntheticSpec
) -> Optional[float]:
    """
    `pair_percentile` of a synthetic dataset's planted attribute pair, or None when stage
    1 skipped the planted table.
    """
    table = cumulative.get(spec.planted_table)
    if table is None:
        return None
    first, second = spec.planted_attributes
    return pair_percentile(table, (first, second))
