from __future__ import annotations

import logging
import math
import warnings
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from typing import Collection, Dict, List, Mapping, Optional, Sequence

import numpy as np

from tablegraft.dataset import RelationalDataset
from tablegraft.dto.joinplan import JoinEdge, MetaPath
from tablegraft.dto.linker import Coreset, CoresetConfig, LabeledTuple
from tablegraft.errors import ClampWarning
from tablegraft.utils import derive_seed


logger = logging.getLogger(__name__)


def _hop_index(dataset: RelationalDataset, hop: JoinEdge) -> Dict[str, List[str]]:
    """
    Map each source-table key to the destination-table keys it joins with over one hop.
    Dangling foreign keys produce no entry.
    """
    src = dataset.tables[hop.src_table]
    dst = dataset.tables[hop.dst_table]
    index: Dict[str, List[str]] = defaultdict(list)

    if hop.fk_on_source:
        for row in src:
            value = src.value(row, hop.fk_column)
            if value is not None and value in dst.index:
                index[row.key].append(str(value))
    else:
        for row in dst:
            value = dst.value(row, hop.fk_column)
            if value is not None and value in src.index:
                index[str(value)].append(row.key)
    return index


def _reachable(dataset: RelationalDataset, meta_path: MetaPath) -> Dict[str, List[str]]:
    """
    Instantiate the meta-path from every labeled base tuple; returns auxiliary key to the
    distinct base keys that reach it, both in table order.
    """
    hops = [_hop_index(dataset, hop) for hop in meta_path.hops]
    reached: Dict[str, set] = defaultdict(set)

    for row in dataset.base:
        if row.key not in dataset.labels:
            continue
        frontier = {row.key}
        for index in hops:
            frontier = {nxt for key in frontier for nxt in index.get(key, ())}
            if not frontier:
                break
        for key in frontier:
            reached[key].add(row.key)

    base_order = {row.key: i for i, row in enumerate(dataset.base)}
    target = dataset.tables[meta_path.target_table]
    return {
        row.key: sorted(reached[row.key], key=base_order.__getitem__)
        for row in target
        if row.key in reached
    }


def link_tuples(
    dataset: RelationalDataset,
    meta_path: MetaPath,
    cap: int = 5,
    seed: int = 0,
) -> List[LabeledTuple]:
    """
    Identify the task-relevant tuples of one auxiliary table: every tuple that some
    labeled base tuple reaches along the meta-path, once per linking base tuple.

    :param dataset: The loaded dataset.
    :type dataset: RelationalDataset
    :param meta_path: Meta-path of the auxiliary table.
    :type meta_path: MetaPath
    :param cap: Links kept per auxiliary tuple; larger link sets are sampled uniformly.
    :type cap: int
    :param seed: Sampling seed.
    :type seed: int
    :return: Labeled tuples in auxiliary-table order, then base-table order.
    :rtype: List[LabeledTuple]
    """
    if cap < 1:
        raise ValueError(f"cap must be at least 1, got {cap}")

    table = meta_path.target_table
    rng = np.random.default_rng(derive_seed(seed, "link", table))
    links: List[LabeledTuple] = []

    for key, base_keys in _reachable(dataset, meta_path).items():
        if len(base_keys) > cap:
            chosen = np.sort(rng.choice(len(base_keys), size=cap, replace=False))
            base_keys = [base_keys[i] for i in chosen]
        links.extend(
            LabeledTuple(table=table, key=key, label=dataset.labels[b], base_key=b)
            for b in base_keys
        )

    logger.debug("linked %d labeled tuples in %s", len(links), table)
    return links


def link_all(
    dataset: RelationalDataset,
    meta_paths: Mapping[str, MetaPath],
    config: Optional[CoresetConfig] = None,
    workers: Optional[int] = None,
) -> Dict[str, List[LabeledTuple]]:
    config = config or CoresetConfig()
    workers = workers or config.workers
    seed = config.seed or 0
    tables = sorted(meta_paths)

    def _link(table: str) -> List[LabeledTuple]:
        return link_tuples(dataset, meta_paths[table], config.per_tuple_label_cap, seed)

    if workers > 1 and len(tables) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_link, tables))
    else:
        results = [_link(t) for t in tables]
    return dict(zip(tables, results))


def allocate(sizes: Sequence[int], n: int) -> List[int]:
    """
    Split a sample of `n` across strata proportionally to their sizes by largest
    remainder, giving every non-empty stratum at least one slot when `n` allows it.
    """
    total = sum(sizes)
    if n >= total:
        return list(sizes)

    quotas = [n * s / total for s in sizes]
    counts = [min(s, math.floor(q)) for s, q in zip(sizes, quotas)]
    non_empty = [i for i, s in enumerate(sizes) if s > 0]
    if n >= len(non_empty):
        for i in non_empty:
            counts[i] = max(counts[i], 1)

    order = sorted(range(len(sizes)), key=lambda i: (-(quotas[i] - math.floor(quotas[i])), i))
    while sum(counts) < n:
        for i in order:
            if counts[i] < sizes[i] and sum(counts) < n:
                counts[i] += 1
    while sum(counts) > n:
        i = max(range(len(counts)), key=lambda j: (counts[j], -j))
        counts[i] -= 1
    return counts


def _strata(dataset: RelationalDataset, keys: List[str], strata: int) -> List[List[str]]:
    if dataset.task.is_classification:
        by_class: Dict[int, List[str]] = defaultdict(list)
        for key in keys:
            by_class[int(dataset.labels[key])].append(key)
        return [by_class[c] for c in sorted(by_class)]

    ranked = sorted(keys, key=lambda k: float(dataset.labels[k]))
    return [list(chunk) for chunk in np.array_split(np.asarray(ranked, dtype=object), strata)]


def sample_size(config: CoresetConfig, population: int) -> int:
    requested = config.base_sample_size
    if isinstance(requested, float) and requested <= 1.0:
        return max(1, round(requested * population))
    if requested > population:
        warnings.warn(
            f"base_sample_size {requested} exceeds the {population} labeled base tuples; "
            "using all of them",
            ClampWarning,
        )
        return population
    return int(requested)


def build_coreset(
    dataset: RelationalDataset,
    links: Mapping[str, List[LabeledTuple]],
    config: Optional[CoresetConfig] = None,
    candidates: Optional[Collection[str]] = None,
) -> Coreset:
    """
    Sample labeled base tuples stratified by label (class-proportional for
    classification, equal quantile strata for regression) and keep exactly the
    labeled tuples linked from the sample. `candidates` restricts the sample to the
    given base keys (the training split).
    """
    config = config or CoresetConfig()
    seed = config.seed or 0
    keys = [
        row.key
        for row in dataset.base
        if row.key in dataset.labels and (candidates is None or row.key in candidates)
    ]
    n = sample_size(config, len(keys))

    if n >= len(keys):
        sampled = set(keys)
    else:
        rng = np.random.default_rng(derive_seed(seed, "coreset"))
        groups = _strata(dataset, keys, config.strata)
        sampled = set()
        for group, count in zip(groups, allocate([len(g) for g in groups], n)):
            if count:
                sampled.update(group[i] for i in rng.choice(len(group), size=count, replace=False))

    base_keys = [k for k in keys if k in sampled]
    kept = {
        table: [link for link in table_links if link.base_key in sampled]
        for table, table_links in sorted(links.items())
    }
    logger.info(
        "coreset: %d of %d base tuples, %s",
        len(base_keys),
        len(keys),
        ", ".join(f"{t}={len(v)}" for t, v in kept.items()),
    )
    return Coreset(
        config=config,
        base_keys=base_keys,
        link_counts={table: len(v) for table, v in sorted(links.items())},
        links=kept,
    )
