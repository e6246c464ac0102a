import pytest

from tablegraft.dataset import label_token
from tablegraft.dto.linker import CoresetConfig
from tablegraft.errors import ClampWarning
from tablegraft.joinplan import plan_meta_paths
from tablegraft.linker import allocate, build_coreset, link_all, link_tuples, sample_size


def brute_force_links(dataset, meta_path):
    """
    (aux key, base key) pairs of a nested-loop join over the raw rows of every hop.
    """
    pairs = {(row.key, row.key) for row in dataset.base if row.key in dataset.labels}
    for hop in meta_path.hops:
        src = dataset.tables[hop.src_table]
        dst = dataset.tables[hop.dst_table]
        joined = set()
        for current, base_key in pairs:
            for row in dst:
                if hop.fk_on_source:
                    matched = src.value(src.index[current], hop.fk_column) == row.key
                else:
                    matched = dst.value(row, hop.fk_column) == current
                if matched:
                    joined.add((row.key, base_key))
        pairs = joined
    return pairs


@pytest.fixture
def plan(shop):
    with pytest.warns(UserWarning):
        return plan_meta_paths(shop)


@pytest.mark.parametrize("table", ["customers", "cities", "reviews"])
def test_link_tuples_matches_nested_loop_join(shop, plan, table):
    links = link_tuples(shop, plan.paths[table], cap=100)

    assert {(link.key, link.base_key) for link in links} == brute_force_links(
        shop, plan.paths[table]
    )
    for link in links:
        expected = shop.class_labels.index(
            label_token(shop.base.value(shop.base.index[link.base_key], "label"))
        )
        assert link.label == expected


def test_one_link_per_reached_tuple(shop, plan):
    links = link_tuples(shop, plan.paths["reviews"])

    assert len(links) == 8
    assert {link.key: link.base_key for link in links}["r3"] == "o2"


def test_cap_samples_reproducibly(shop, plan):
    full = {(link.key, link.base_key) for link in link_tuples(shop, plan.paths["cities"], cap=100)}
    capped = link_tuples(shop, plan.paths["cities"], cap=5, seed=3)

    assert len(full) == 12
    assert len(capped) == 10
    assert {(link.key, link.base_key) for link in capped} <= full
    assert capped == link_tuples(shop, plan.paths["cities"], cap=5, seed=3)


def test_cap_must_be_positive(shop, plan):
    with pytest.raises(ValueError):
        link_tuples(shop, plan.paths["cities"], cap=0)


def test_link_all_parallel_matches_sequential(shop, plan):
    config = CoresetConfig(per_tuple_label_cap=2, seed=1)

    assert link_all(shop, plan.paths, config, workers=3) == link_all(shop, plan.paths, config)


@pytest.mark.parametrize(
    "sizes, n, expected",
    [
        ([90, 10], 20, [18, 2]),
        ([99, 1], 10, [9, 1]),
        ([5, 5, 5], 15, [5, 5, 5]),
        ([4, 0, 2], 100, [4, 0, 2]),
    ],
)
def test_allocate(sizes, n, expected):
    assert allocate(sizes, n) == expected


def test_allocate_proportions():
    counts = allocate([900, 100], 100)

    assert sum(counts) == 100
    assert abs(counts[0] - 90) <= 1
    assert abs(counts[1] - 10) <= 1
    assert min(counts) >= 1


def test_sample_size_clamps():
    with pytest.warns(ClampWarning):
        assert sample_size(CoresetConfig(base_sample_size=50), 12) == 12
    assert sample_size(CoresetConfig(base_sample_size=0.5), 12) == 6
    assert sample_size(CoresetConfig(base_sample_size=1.0), 12) == 12


def test_full_coreset_keeps_every_link(shop, plan):
    links = link_all(shop, plan.paths)

    coreset = build_coreset(shop, links, CoresetConfig(base_sample_size=1.0))

    assert coreset.links == links
    assert len(coreset.base_keys) == 12
    assert coreset.link_counts == coreset.coreset_counts


def test_coreset_is_stratified_subset(shop, plan):
    links = link_all(shop, plan.paths)
    config = CoresetConfig(base_sample_size=6, seed=7)

    coreset = build_coreset(shop, links, config)

    sampled = set(coreset.base_keys)
    assert len(sampled) == 6
    assert sorted(shop.labels[k] for k in sampled) == [0, 0, 0, 1, 1, 1]
    for table, kept in coreset.links.items():
        assert set(kept) <= set(links[table])
        assert all(link.base_key in sampled for link in kept)
        assert len(kept) == sum(1 for link in links[table] if link.base_key in sampled)
    assert build_coreset(shop, links, config) == coreset


def test_coreset_respects_candidates(shop, plan):
    links = link_all(shop, plan.paths)
    candidates = {"o1", "o2", "o3", "o4"}

    coreset = build_coreset(shop, links, CoresetConfig(base_sample_size=1.0), candidates)

    assert set(coreset.base_keys) == candidates
    assert all(link.base_key in candidates for kept in coreset.links.values() for link in kept)
