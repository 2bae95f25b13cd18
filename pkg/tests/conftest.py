import numpy as np
import pytest

from dtwindex.core_dtw import TimeSeries
from dtwindex.ingest import Dataset, make_synthetic


def _random_walks(rng, count, min_len, max_len, scale=1.0):
    seqs = []
    for k in range(count):
        n = int(rng.integers(min_len, max_len, endpoint=True))
        seqs.append(TimeSeries(np.cumsum(rng.normal(scale=scale, size=n)), id=k))
    return Dataset(tuple(seqs), 'random_walks')


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_walks():
    """
    Factory of random-walk datasets: random_walks(rng, count, min_len, max_len)
    """
    return _random_walks


@pytest.fixture(scope='session')
def cbf():
    return make_synthetic(shapes=('cylinder', 'bell', 'funnel'), per_shape=200, length=100, seed=7)


@pytest.fixture(scope='session')
def small_cbf():
    return make_synthetic(shapes=('cylinder', 'bell', 'funnel'), per_shape=40, length=100, seed=11)


@pytest.fixture
def toy_ucr(tmp_path):
    fname = tmp_path / 'toy.tsv'
    fname.write_text('1\t0.5\t0.7\t1.5\t2.0\n'
                     '2\t1.0\t1.0\t1.2\n'
                     '1\t-0.5\t0.0\t0.5\t1.0\t1.5\n')
    return str(fname)
