import struct

import numpy as np
import pytest
import yaml

from dtwindex.core_dtw import TimeSeries
from dtwindex.errors import (IndexChecksumError, IndexFileError, IndexTruncatedError, IndexVersionError)
from dtwindex.index import IndexConfig, build_index, range_search
from dtwindex.index_file import MAGIC, load_index, save_index
from dtwindex.rtree import iter_preorder


def _structure(index):
    return [(n.leaf, n.size, n.box.low.tobytes(), n.box.high.tobytes(), n.children if n.leaf else len(n.children))
            for n in iter_preorder(index.root)]


@pytest.fixture
def saved(tmp_path, rng, random_walks):
    ds = random_walks(rng, 120, 20, 24)
    index = build_index(ds, IndexConfig(band_radius=3, n_paa=4, pad_value=0.1, node_capacity=5))
    fname = str(tmp_path / 'walks.dtwi')
    save_index(index, fname)
    return index, fname


def test_single_sequence_round_trip(tmp_path):
    s = TimeSeries([0.1, 0.2, 0.30000000000000004])
    index = build_index([s], IndexConfig(band_radius=1, n_paa=2))
    fname = str(tmp_path / 'one.dtwi')
    save_index(index, fname)
    loaded = load_index(fname)
    assert loaded.config == index.config
    assert loaded.entries[0].series.values.tobytes() == s.values.tobytes()
    for eps in (0.0, 0.05, 1.0):
        assert range_search(loaded, s, eps) == range_search(index, s, eps)


def test_round_trip_is_bit_identical(saved):
    index, fname = saved
    loaded = load_index(fname)
    assert loaded.config == index.config
    assert list(loaded.entries) == list(index.entries)
    for eid, entry in index.entries.items():
        assert loaded.entries[eid].series.values.tobytes() == entry.series.values.tobytes()
        assert loaded.entries[eid].paa.coords.tobytes() == entry.paa.coords.tobytes()
    assert _structure(loaded) == _structure(index)


def test_round_trip_queries(tmp_path, rng, random_walks):
    ds = random_walks(rng, 1000, 20, 24)
    index = build_index(ds, IndexConfig(band_radius=3, n_paa=8))
    fname = str(tmp_path / 'big.dtwi')
    save_index(index, fname)
    loaded = load_index(fname)
    for _ in range(100):
        Q = np.cumsum(rng.normal(size=int(rng.integers(20, 25))))
        eps = float(rng.uniform(0, 20))
        a = range_search(index, Q, eps)
        b = range_search(loaded, Q, eps)
        assert a == b
        assert a.stats == b.stats


def test_metadata_is_readable(saved):
    index, fname = saved
    with open(fname, 'rb') as f:
        data = f.read()
    assert data[:4] == MAGIC
    version, meta_len = struct.unpack('<II', data[4:12])
    assert version == 1
    meta = yaml.safe_load(data[12:12 + meta_len].decode('utf-8'))
    assert meta['band_radius'] == 3
    assert meta['n_paa'] == 4
    assert meta['lmax'] == index.config.lmax
    assert meta['pad_value'] == 0.1
    assert meta['node_capacity'] == 5
    assert meta['entry_count'] == 120
    assert len(meta['params_hash']) == 16


def _corrupt(fname, func):
    with open(fname, 'rb') as f:
        data = bytearray(f.read())
    data = func(data)
    with open(fname, 'wb') as f:
        f.write(bytes(data))


def test_corrupted_checksum(saved):
    _, fname = saved

    def flip_last(data):
        data[-1] ^= 0xFF
        return data

    _corrupt(fname, flip_last)
    with pytest.raises(IndexChecksumError):
        load_index(fname)


def test_corrupted_payload(saved):
    _, fname = saved

    def flip_sample(data):
        data[len(data) // 2] ^= 0x01
        return data

    _corrupt(fname, flip_sample)
    with pytest.raises(IndexChecksumError):
        load_index(fname)


def test_version_mismatch(saved):
    _, fname = saved

    def bump_version(data):
        data[4:8] = struct.pack('<I', 99)
        return data

    _corrupt(fname, bump_version)
    with pytest.raises(IndexVersionError):
        load_index(fname)


@pytest.mark.parametrize('keep', [3, 10, 0.5, -1])
def test_truncated_file(saved, keep):
    _, fname = saved

    def cut(data):
        n = int(len(data) * keep) if isinstance(keep, float) else keep
        return data[:n]

    _corrupt(fname, cut)
    with pytest.raises(IndexTruncatedError):
        load_index(fname)


def test_bad_magic(saved):
    _, fname = saved

    def wrong_magic(data):
        data[:4] = b'NOPE'
        return data

    _corrupt(fname, wrong_magic)
    with pytest.raises(IndexFileError) as e:
        load_index(fname)
    assert type(e.value) is IndexFileError
