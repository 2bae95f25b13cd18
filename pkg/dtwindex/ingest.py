"""
Datasets in the UCR text layout: one sequence per line, the class label first, then the samples.
"""
import logging
import math
import os
import re
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter1d

from dtwindex.core_dtw import TimeSeries
from dtwindex.errors import DataError, UcrParseError, UsageError
from dtwindex.lower_bounds import ExtensionParams

logger = logging.getLogger(__name__)

TRUNCATION_STREAM = 0
QUERY_STREAM = 1

SHAPES = ('cylinder', 'bell', 'funnel', 'sine')

_NUMBER = re.compile(r'[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?')
_DELIMITED = re.compile(r'\s*[\t,]\s*')


@dataclass(frozen=True)
class Dataset:
    sequences: tuple
    name: str = ''

    def __post_init__(self):
        seqs = tuple(s if isinstance(s, TimeSeries) else TimeSeries(s) for s in self.sequences)
        if not seqs:
            raise DataError(f'dataset {self.name!r} is empty')
        object.__setattr__(self, 'sequences', seqs)

    def __len__(self):
        return len(self.sequences)

    def __iter__(self):
        return iter(self.sequences)

    def __getitem__(self, item):
        return self.sequences[item]

    @property
    def dataset_size(self):
        return len(self.sequences)

    @property
    def lengths(self):
        return [len(s) for s in self.sequences]

    @property
    def max_length(self):
        return max(self.lengths)

    @property
    def min_length(self):
        return min(self.lengths)


@dataclass(frozen=True)
class TruncationSpec:
    seed: int
    band_radius: int

    def __post_init__(self):
        if int(self.band_radius) != self.band_radius or self.band_radius < 0:
            raise UsageError(f'truncation band radius must be a non-negative integer, got {self.band_radius!r}')
        object.__setattr__(self, 'band_radius', int(self.band_radius))


def as_dataset(data, name=''):
    if isinstance(data, Dataset):
        return data
    return Dataset(tuple(data), name)


def split_fields(line):
    line = line.strip()
    if '\t' in line or ',' in line:
        return _DELIMITED.split(line)
    return line.split()


def parse_samples(tokens, path, line_no, first_column=1):
    """
    :return: float64 array, raises UcrParseError naming the 1-based line and column of a bad token
    """
    values = np.empty(len(tokens), dtype=np.float64)
    for k, token in enumerate(tokens):
        column = first_column + k
        if not token:
            raise UcrParseError(path, line_no, column, token, 'empty field')
        if not _NUMBER.fullmatch(token):
            raise UcrParseError(path, line_no, column, token)
        values[k] = float(token)
        if not math.isfinite(values[k]):
            raise UcrParseError(path, line_no, column, token, 'number out of range')
    return values


def load_ucr(path, name=None):
    """
    Read a UCR file. Fields are separated by tabs, commas or runs of blanks; rows may differ in length.

    :param path: text file
    :param name: dataset name, defaults to the file name without extension
    :return: Dataset with ids assigned in line order starting from 0
    """
    if name is None:
        name = os.path.splitext(os.path.basename(path))[0]
    seqs = []
    with open(path, encoding='utf-8') as f:
        for line_no, line in enumerate(f, 1):
            if not line.strip():
                logger.warning(f'{path}: line {line_no} is empty and was skipped')
                continue
            fields = split_fields(line)
            if len(fields) < 2:
                raise UcrParseError(path, line_no, 2, '', 'no samples after the label')
            values = parse_samples(fields[1:], path, line_no, first_column=2)
            seqs.append(TimeSeries(values, id=len(seqs), label=fields[0]))
    if not seqs:
        raise DataError(f'{path} contains no sequences')
    logger.debug(f'{len(seqs)} sequences read from {path}')
    return Dataset(tuple(seqs), name)


def save_ucr(ds, path, sep='\t'):
    """
    Write a dataset in the UCR layout. Samples keep 17 significant digits, so load_ucr restores them exactly.
    """
    with open(path, 'wt', encoding='utf-8') as f:
        for s in as_dataset(ds):
            label = '0' if s.label is None else str(s.label)
            f.write(sep.join([label] + [format(v, '.17g') for v in s.values]) + '\n')


def read_query(path):
    """
    The first non-empty line of the file: a UCR line (label, TAB, samples) or headerless comma-separated samples
    :return: TimeSeries
    """
    lines = []
    with open(path, encoding='utf-8') as f:
        for line_no, line in enumerate(f, 1):
            if line.strip():
                lines.append((line_no, line))
    if not lines:
        raise DataError(f'query file {path} is empty')
    if len(lines) > 1:
        logger.warning(f'query file {path} has {len(lines)} non-empty lines, only line {lines[0][0]} is used')
    line_no, line = lines[0]
    if '\t' in line:
        fields = split_fields(line)
        if len(fields) < 2:
            raise UcrParseError(path, line_no, 2, '', 'no samples after the label')
        return TimeSeries(parse_samples(fields[1:], path, line_no, first_column=2), label=fields[0])
    tokens = [t.strip() for t in line.strip().split(',')]
    return TimeSeries(parse_samples(tokens, path, line_no))


def truncate_random(ds, spec):
    """
    Cut a random tail off every sequence. The kept prefix length is drawn uniformly from [L - r, L], where L is the
    sequence length capped at the shortest length in the dataset, so any two results differ in length by at most r.

    :param ds: Dataset
    :param spec: TruncationSpec
    :return: Dataset with the same ids, labels and name
    """
    ds = as_dataset(ds)
    r = spec.band_radius
    shortest = ds.min_length
    if r >= shortest:
        raise UsageError(f'band radius {r} must be smaller than the shortest sequence length {shortest}')
    if shortest != ds.max_length:
        logger.warning(f'dataset {ds.name!r} is ragged ({shortest}..{ds.max_length}), '
                       f'sequences are capped at length {shortest} before truncation')
    rng = np.random.default_rng([spec.seed, TRUNCATION_STREAM])
    keep = rng.integers(shortest - r, shortest, endpoint=True, size=len(ds))
    seqs = tuple(s if k == len(s) else s.with_values(s.values[:k]) for s, k in zip(ds, keep))
    return Dataset(seqs, ds.name)


def choose_lmax(ds, n_paa):
    """
    Smallest length divisible by n_paa and strictly greater than the longest sequence
    """
    if int(n_paa) != n_paa or n_paa < 1:
        raise UsageError(f'n_paa must be a positive integer, got {n_paa!r}')
    return ExtensionParams.for_lengths(as_dataset(ds).lengths, int(n_paa)).lmax


def default_band_radius(ds, frac=0.10):
    """
    frac of the longest sequence length, rounded half up, at least 1
    """
    if not 0 < frac <= 1:
        raise UsageError(f'band radius fraction must be in (0, 1], got {frac!r}')
    return max(1, math.floor(frac * as_dataset(ds).max_length + 0.5))


def _shape(kind, t, a, b, amplitude, rng):
    length = t.shape[0]
    inside = ((t >= a) & (t <= b)).astype(np.float64)
    if kind == 'cylinder':
        return amplitude * inside
    if kind == 'bell':
        return amplitude * inside * (t - a) / (b - a)
    if kind == 'funnel':
        return amplitude * inside * (b - t) / (b - a)
    if kind == 'sine':
        cycles = rng.uniform(1.0, 3.0)
        phase = rng.uniform(0.0, 2 * math.pi)
        return amplitude / 2 * np.sin(2 * math.pi * cycles * t / length + phase)
    raise UsageError(f'unknown synthetic shape {kind!r}, choose from {", ".join(SHAPES)}')


def make_synthetic(shapes=('cylinder', 'bell', 'funnel'), per_shape=50, length=128, seed=0, noise=0.5):
    """
    Labelled smooth sequences in the spirit of the Cylinder-Bell-Funnel benchmark: a plateau, a ramp up or a ramp
    down of random onset, duration and height (or a random sinusoid), plus gaussian noise, smoothed by a gaussian
    filter.

    :param shapes: shape names from SHAPES, each one is a class label
    :param per_shape: number of sequences per shape
    :param length: length of every sequence, at least 16
    :param seed: seed of the generator
    :param noise: standard deviation of the noise before smoothing
    :return: Dataset named 'synthetic', ids in generation order
    """
    if length < 16:
        raise UsageError(f'synthetic sequences need at least 16 samples, got {length}')
    if per_shape < 1:
        raise UsageError(f'per_shape must be positive, got {per_shape}')
    rng = np.random.default_rng(seed)
    t = np.arange(length, dtype=np.float64)
    sigma = max(1.0, length / 64)
    seqs = []
    for kind in shapes:
        for _ in range(per_shape):
            a = rng.integers(length // 8, length // 4, endpoint=True)
            b = min(a + rng.integers(length // 4, 3 * length // 4, endpoint=True), length - 1)
            amplitude = 6 + rng.standard_normal()
            values = _shape(kind, t, a, b, amplitude, rng) + noise * rng.standard_normal(length)
            seqs.append(TimeSeries(gaussian_filter1d(values, sigma, mode='nearest'), id=len(seqs), label=kind))
    return Dataset(tuple(seqs), 'synthetic')
