import math

import numpy as np
import pytest

from dtwindex.core_dtw import TimeSeries, brute_force_dtw
from dtwindex.errors import UsageError
from dtwindex.index import IndexConfig, build_index, linear_scan, range_search, range_search_many
from dtwindex.ingest import Dataset
from dtwindex.lower_bounds import extend
from dtwindex.paa import paa_transform
from dtwindex.rtree import check_tree


def _queries(rng, ds, count):
    queries = []
    for _ in range(count):
        if rng.random() < 0.5:
            base = ds[int(rng.integers(len(ds)))].values
            queries.append(TimeSeries(base + rng.normal(scale=0.3, size=base.shape[0])))
        else:
            n = int(rng.integers(ds.min_length, ds.max_length, endpoint=True))
            queries.append(TimeSeries(np.cumsum(rng.normal(size=n))))
    return queries


def test_single_sequence_index():
    s = TimeSeries([1.0, 2.0, 3.0])
    index = build_index([s], IndexConfig(band_radius=1, n_paa=2))
    assert index.config.lmax == 4
    assert index.root.leaf
    paa = index.entries[0].paa.coords
    assert index.root.box.low.tolist() == paa.tolist()
    assert index.root.box.high.tolist() == paa.tolist()


def test_identical_sequences_share_paa():
    seqs = [TimeSeries([0.0, 1.0, 0.5, 2.0], id=k) for k in range(20)]
    index = build_index(seqs, IndexConfig(band_radius=1, n_paa=4, node_capacity=4))
    coords = {tuple(e.paa.coords) for e in index.entries.values()}
    assert len(coords) == 1
    assert np.array_equal(index.root.box.low, index.root.box.high)


def test_stored_paa_is_recomputable(rng, random_walks):
    ds = random_walks(rng, 100, 20, 30)
    index = build_index(ds, IndexConfig(band_radius=5, n_paa=8, node_capacity=8))
    assert index.config.lmax == 32
    for eid, entry in index.entries.items():
        expected = paa_transform(extend(entry.series, index.config.extension), 8)
        assert np.array_equal(entry.paa.coords, expected.coords)
    points = {eid: e.paa.coords for eid, e in index.entries.items()}
    assert check_tree(index.root, points, 8) == set(range(100))


def test_exact_match_at_zero_epsilon(rng, random_walks):
    ds = random_walks(rng, 50, 20, 25)
    index = build_index(ds, IndexConfig(band_radius=5, n_paa=4))
    res = range_search(index, ds[17], 0.0)
    assert 17 in res.ids()
    assert all(m.distance == 0.0 for m in res.matches)


def test_root_pruned(rng, random_walks):
    ds = random_walks(rng, 60, 20, 25)
    index = build_index(ds, IndexConfig(band_radius=3, n_paa=4))
    res = range_search(index, np.full(22, 1000.0), 1.0)
    assert res.matches == ()
    assert res.stats.dtw_evaluations == 0
    assert res.stats.node_visits == 1
    assert res.stats.pruned_mbr == 60


def test_linear_scan_toy():
    q = [0.0, 0.0, 0.0]
    seqs = [TimeSeries([0.0, 0.0, 1.0]), TimeSeries([0.0, 0.0, 3.0]), TimeSeries(np.zeros(6))]
    assert [brute_force_dtw(q, s, 1) for s in seqs[:2]] == [1.0, 3.0]
    res = linear_scan(seqs, q, 2.0, 1)
    assert [(m.id, m.distance) for m in res.matches] == [(0, 1.0)]
    assert res.stats.dtw_evaluations == 3
    assert res.stats.infeasible == 1
    assert res.stats.rejected_dtw == 1


def test_linear_scan_self_and_disjoint(rng, random_walks):
    ds = random_walks(rng, 20, 10, 12)
    assert 5 in linear_scan(ds, ds[5], 0.0, 2).ids()
    assert linear_scan(ds, np.full(11, 1e6), 0.0, 2).matches == ()


def test_matches_are_sorted(rng, random_walks):
    ds = random_walks(rng, 80, 20, 24)
    index = build_index(ds, IndexConfig(band_radius=4, n_paa=4))
    res = range_search(index, ds[0], 30.0)
    keys = [(m.distance, m.id) for m in res.matches]
    assert keys == sorted(keys)


def test_range_search_equals_linear_scan(rng, random_walks):
    trials = 0
    for _ in range(10):
        r = int(rng.integers(0, 7))
        min_len = int(rng.integers(max(8, r + 1), 40))
        ds = random_walks(rng, int(rng.integers(20, 200)), min_len, min_len + r)
        config = IndexConfig(band_radius=r, n_paa=int(rng.choice([1, 2, 4, 8])),
                             pad_value=float(rng.normal()), node_capacity=int(rng.integers(2, 17)),
                             keogh_plus_filter=bool(rng.random() < 0.5))
        index = build_index(ds, config)
        for Q in _queries(rng, ds, 20):
            all_distances = [m.distance for m in linear_scan(ds, Q, math.inf, r).matches]
            grid = [0.0] + ([float(np.quantile(all_distances, p)) for p in (0.01, 0.05, 0.2, 0.5)]
                            if all_distances else [1.0, 10.0, 100.0, 1000.0])
            for eps in grid:
                expected = linear_scan(ds, Q, eps, r)
                got = range_search(index, Q, eps)
                assert got.as_set() == expected.as_set()
                assert got.stats.pruned_total + got.stats.dtw_evaluations == len(ds)
                trials += 1
    assert trials >= 1000


@pytest.mark.parametrize('n_paa,keogh_plus', [(1, False), (4, False), (4, True)])
def test_tight_bounds_keep_boundary_matches(rng, n_paa, keogh_plus):
    # with r = 0 LB_Keogh+ equals the DTW distance, and so does LB_PAA for a candidate lying entirely below the query
    for _ in range(20):
        length = int(rng.integers(5, 11)) * 4
        seqs = tuple(TimeSeries(rng.normal(scale=float(rng.choice([0.1, 1.0, 100.0])), size=length), id=k)
                     for k in range(30))
        ds = Dataset(seqs)
        index = build_index(ds, IndexConfig(band_radius=0, n_paa=n_paa, pad_value=float(rng.normal()),
                                            node_capacity=4, keogh_plus_filter=keogh_plus))
        Q = TimeSeries(seqs[0].values + 3.0 + np.abs(rng.normal(size=length)))
        for m in linear_scan(ds, Q, math.inf, 0).matches:
            eps = m.distance
            expected = linear_scan(ds, Q, eps, 0)
            got = range_search(index, Q, eps)
            assert m.id in {found.id for found in got.matches}
            assert got.as_set() == expected.as_set()


def test_keogh_plus_stage_keeps_answers(rng, random_walks):
    ds = random_walks(rng, 150, 30, 34)
    plain = build_index(ds, IndexConfig(band_radius=4, n_paa=4))
    staged = build_index(ds, IndexConfig(band_radius=4, n_paa=4, keogh_plus_filter=True))
    for Q in _queries(rng, ds, 20):
        a = range_search(plain, Q, 8.0)
        b = range_search(staged, Q, 8.0)
        assert a.as_set() == b.as_set()
        assert b.stats.dtw_evaluations <= a.stats.dtw_evaluations
        assert a.stats.lb_keogh_evaluations == 0


def test_raising_epsilon_never_removes_matches(rng, random_walks):
    ds = random_walks(rng, 100, 20, 23)
    index = build_index(ds, IndexConfig(band_radius=3, n_paa=4))
    Q = ds[3]
    prev = frozenset()
    for eps in (0.0, 1.0, 5.0, 10.0, 20.0, 50.0, 1e6):
        res = range_search(index, Q, eps)
        assert prev <= res.ids()
        assert res.stats.pruned_total <= len(ds)
        prev = res.ids()


def test_search_is_deterministic(rng, random_walks):
    ds = random_walks(rng, 100, 20, 23)
    index = build_index(ds, IndexConfig(band_radius=3, n_paa=4))
    a = range_search(index, ds[9], 15.0)
    b = range_search(index, ds[9], 15.0)
    assert a == b
    assert a.stats == b.stats


@pytest.mark.parametrize('ncpu', [1, 2])
def test_range_search_many(rng, random_walks, ncpu):
    ds = random_walks(rng, 80, 20, 23)
    index = build_index(ds, IndexConfig(band_radius=3, n_paa=4))
    queries = list(ds.sequences[:6])
    results = range_search_many(index, queries, 10.0, ncpu=ncpu)
    assert len(results) == 6
    for Q, res in zip(queries, results):
        expected = range_search(index, Q, 10.0)
        assert res == expected
        assert res.stats == expected.stats


def test_ids_from_sequences():
    seqs = [TimeSeries([1.0, 2.0], id=40), TimeSeries([2.0, 3.0], id=7)]
    index = build_index(seqs, IndexConfig(band_radius=1, n_paa=1))
    assert sorted(index.entries) == [7, 40]
    assert range_search(index, [1.0, 2.0], 0.0).ids() == {40}


def test_errors(rng, random_walks):
    ds = random_walks(rng, 10, 10, 12)
    index = build_index(ds, IndexConfig(band_radius=2, n_paa=4))
    with pytest.raises(UsageError):
        range_search(index, ds[0], -1.0)
    with pytest.raises(UsageError):
        range_search(index, np.zeros(index.config.lmax), 1.0)
    with pytest.raises(UsageError):
        linear_scan(ds, ds[0], -0.5, 2)
    with pytest.raises(UsageError):
        IndexConfig(band_radius=2, n_paa=7, lmax=100)
    with pytest.raises(UsageError):
        IndexConfig(band_radius=2, node_capacity=1)
    with pytest.raises(UsageError):
        build_index([], IndexConfig(band_radius=2))
    with pytest.raises(UsageError):
        build_index(ds, IndexConfig(band_radius=2, n_paa=4, lmax=8))
    with pytest.raises(UsageError):
        build_index([TimeSeries([1.0], id=1), TimeSeries([2.0], id=1)], IndexConfig(band_radius=0, n_paa=1))


def test_wide_length_spread_is_only_a_warning(caplog):
    seqs = Dataset((TimeSeries(np.zeros(5)), TimeSeries(np.zeros(30))))
    index = build_index(seqs, IndexConfig(band_radius=2, n_paa=1))
    assert len(index) == 2
    assert 'no single query' in caplog.text
    res = range_search(index, np.zeros(5), 0.0)
    assert res.ids() == {0}
    assert res.stats.infeasible == 1
