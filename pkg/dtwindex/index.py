"""
Exact epsilon-range search under band-constrained DTW.

Candidates are extended to a common length lmax, reduced by PAA and organized in an STR-packed R-tree. A query
descends the tree pruning nodes by LB_MBR, then entries by LB_PAA (optionally by full-resolution LB_Keogh+), and
confirms the survivors by DTW on the original sequences. Every filter lower-bounds the DTW distance, so the answer is
identical to a linear scan.
"""
import logging
import math
import time
from dataclasses import dataclass, field, replace
from functools import partial
from types import MappingProxyType
from typing import Optional

import numpy as np

from dtwindex.core_dtw import BandConstraint, TimeSeries, dtw_distance
from dtwindex.errors import UsageError
from dtwindex.lower_bounds import ExtensionParams, envelope, exceeds, extend, lb_keogh
from dtwindex.paa import PaaVector, lb_mbr, lb_paa, paa_envelope, paa_transform
from dtwindex.parallel import collect
from dtwindex.rtree import bulk_load

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IndexConfig:
    """
    lmax None means auto: the smallest multiple of n_paa strictly greater than the longest indexed sequence.
    keogh_plus_filter adds a full-resolution LB_Keogh+ stage between LB_PAA and DTW.
    """
    band_radius: int
    n_paa: int = 16
    pad_value: float = 0.0
    node_capacity: int = 16
    lmax: Optional[int] = None
    keogh_plus_filter: bool = False

    def __post_init__(self):
        if self.band_radius is None:
            raise UsageError('an index needs a finite band radius')
        object.__setattr__(self, 'band_radius', BandConstraint(self.band_radius).radius)
        if int(self.n_paa) != self.n_paa or self.n_paa < 1:
            raise UsageError(f'n_paa must be a positive integer, got {self.n_paa!r}')
        if int(self.node_capacity) != self.node_capacity or self.node_capacity < 2:
            raise UsageError(f'node capacity must be an integer >= 2, got {self.node_capacity!r}')
        if not math.isfinite(self.pad_value):
            raise UsageError(f'pad value must be finite, got {self.pad_value!r}')
        object.__setattr__(self, 'n_paa', int(self.n_paa))
        object.__setattr__(self, 'node_capacity', int(self.node_capacity))
        object.__setattr__(self, 'pad_value', float(self.pad_value))
        object.__setattr__(self, 'keogh_plus_filter', bool(self.keogh_plus_filter))
        if self.lmax is not None:
            if int(self.lmax) != self.lmax or self.lmax < 1:
                raise UsageError(f'lmax must be a positive integer or auto, got {self.lmax!r}')
            object.__setattr__(self, 'lmax', int(self.lmax))
            if self.lmax % self.n_paa:
                raise UsageError(f'lmax={self.lmax} is not divisible by n_paa={self.n_paa}')

    def resolve(self, lengths):
        """
        :param lengths: lengths of the sequences to be indexed
        :return: IndexConfig with an explicit lmax
        """
        longest = max(lengths)
        if self.lmax is None:
            return replace(self, lmax=ExtensionParams.for_lengths(lengths, self.n_paa).lmax)
        if self.lmax <= longest:
            raise UsageError(f'lmax={self.lmax} must exceed the longest sequence length {longest}')
        return self

    @property
    def extension(self):
        if self.lmax is None:
            raise UsageError('lmax is not resolved yet')
        return ExtensionParams(self.lmax, self.pad_value)

    def to_params(self):
        return {'band_radius': self.band_radius,
                'n_paa': self.n_paa,
                'lmax': self.lmax,
                'pad_value': self.pad_value,
                'node_capacity': self.node_capacity,
                'keogh_plus_filter': self.keogh_plus_filter}


@dataclass(frozen=True, eq=False)
class IndexEntry:
    series: TimeSeries
    paa: PaaVector


@dataclass
class SearchStats:
    node_visits: int = 0
    lb_mbr_evaluations: int = 0
    lb_paa_evaluations: int = 0
    lb_keogh_evaluations: int = 0
    prefilter_evaluations: int = 0
    dtw_evaluations: int = 0
    pruned_mbr: int = 0
    pruned_paa: int = 0
    pruned_keogh: int = 0
    pruned_prefilter: int = 0
    rejected_dtw: int = 0
    infeasible: int = 0

    @property
    def pruned_total(self):
        return self.pruned_mbr + self.pruned_paa + self.pruned_keogh + self.pruned_prefilter

    def as_dict(self):
        return dict(self.__dict__)


@dataclass(frozen=True)
class Match:
    id: int
    distance: float


@dataclass(frozen=True)
class RangeResult:
    """
    matches are ordered by distance, then id
    """
    matches: tuple
    stats: SearchStats = field(compare=False)

    def ids(self):
        return frozenset(m.id for m in self.matches)

    def as_set(self):
        return frozenset((m.id, m.distance) for m in self.matches)


class DtwIndex:
    """
    Immutable searchable structure. Share it freely between threads and processes.
    """

    def __init__(self, config, root, entries):
        """
        :param config: IndexConfig with resolved lmax
        :param root: RTreeNode
        :param entries: dict id -> IndexEntry in insertion order
        """
        self._config = config
        self._root = root
        self._entries = dict(entries)

    @property
    def config(self):
        return self._config

    @property
    def root(self):
        return self._root

    @property
    def entries(self):
        return MappingProxyType(self._entries)

    def __len__(self):
        return len(self._entries)

    def sequences(self):
        return [entry.series for entry in self._entries.values()]


def as_series_list(dataset):
    seqs = getattr(dataset, 'sequences', dataset)
    return [s if isinstance(s, TimeSeries) else TimeSeries(s) for s in seqs]


def entry_ids(seqs):
    """
    Id of every sequence: its own id if that is a non-negative integer, otherwise its position
    """
    ids = []
    for pos, s in enumerate(seqs):
        sid = s.id
        if isinstance(sid, (int, np.integer)) and not isinstance(sid, bool) and sid >= 0:
            ids.append(int(sid))
        else:
            ids.append(pos)
    if len(set(ids)) != len(ids):
        raise UsageError('sequence ids must be unique')
    return ids


def check_epsilon(epsilon):
    if not epsilon >= 0:
        raise UsageError(f'epsilon must be a non-negative number, got {epsilon!r}')


def build_index(dataset, config):
    """
    :param dataset: Dataset or list of TimeSeries (array-likes are accepted as well)
    :param config: IndexConfig, lmax may be auto
    :return: DtwIndex
    """
    start = time.time()
    seqs = as_series_list(dataset)
    if not seqs:
        raise UsageError('cannot build an index over an empty dataset')
    ids = entry_ids(seqs)
    lengths = [len(s) for s in seqs]
    config = config.resolve(lengths)
    spread = max(lengths) - min(lengths)
    if spread > 2 * config.band_radius:
        logger.warning(f'sequence lengths span {min(lengths)}..{max(lengths)}, no single query can be within the band '
                       f'radius {config.band_radius} of all of them')

    ext = config.extension
    entries = {}
    for eid, s in zip(ids, seqs):
        entries[eid] = IndexEntry(s, paa_transform(extend(s, ext), config.n_paa))
    points = np.vstack([entries[eid].paa.coords for eid in ids])
    root = bulk_load(ids, points, config.node_capacity)
    logger.info(f'index over {len(seqs)} sequences built in {(time.time() - start):.2f}s '
                f'(r={config.band_radius}, n_paa={config.n_paa}, lmax={config.lmax}, e={config.pad_value})')
    return DtwIndex(config, root, entries)


def _finish(matches, stats):
    return RangeResult(tuple(sorted(matches, key=lambda m: (m.distance, m.id))), stats)


def range_search(index, Q, epsilon):
    """
    All indexed sequences C with dtw(Q, C, r) <= epsilon
    :param index: DtwIndex
    :param Q: TimeSeries or array-like, shorter than lmax
    :param epsilon: non-negative float
    :return: RangeResult
    """
    check_epsilon(epsilon)
    if not isinstance(Q, TimeSeries):
        Q = TimeSeries(Q)
    config = index.config
    if len(Q) >= config.lmax:
        raise UsageError(f'query length {len(Q)} must be smaller than lmax={config.lmax}')

    ext = config.extension
    env = envelope(extend(Q, ext), config.band_radius)
    penv = paa_envelope(env, config.n_paa)
    stats = SearchStats()
    matches = []
    stack = [index.root]
    while stack:
        node = stack.pop()
        stats.node_visits += 1
        stats.lb_mbr_evaluations += 1
        if exceeds(lb_mbr(penv, node.box), epsilon):
            stats.pruned_mbr += node.size
            continue
        if not node.leaf:
            stack.extend(reversed(node.children))
            continue
        for eid in node.children:
            entry = index.entries[eid]
            stats.lb_paa_evaluations += 1
            if exceeds(lb_paa(penv, entry.paa), epsilon):
                stats.pruned_paa += 1
                continue
            if config.keogh_plus_filter:
                stats.lb_keogh_evaluations += 1
                if exceeds(lb_keogh(env, extend(entry.series, ext)), epsilon):
                    stats.pruned_keogh += 1
                    continue
            stats.dtw_evaluations += 1
            d = dtw_distance(Q.values, entry.series.values, config.band_radius)
            if math.isinf(d):
                stats.infeasible += 1
            elif d <= epsilon:
                matches.append(Match(eid, d))
            else:
                stats.rejected_dtw += 1
    logger.debug(f'range search eps={epsilon}: {len(matches)} matches, {stats.as_dict()}')
    return _finish(matches, stats)


def _search_task(Q, index, epsilon):
    return range_search(index, Q, epsilon)


def range_search_many(index, queries, epsilon, ncpu=1, dask_client=None):
    """
    Answer a batch of queries against one index; results come back in query order
    """
    check_epsilon(epsilon)
    return collect(partial(_search_task, index=index, epsilon=epsilon), queries, ncpu=ncpu, dask_client=dask_client)


def linear_scan(dataset, Q, epsilon, r, prefilter=None):
    """
    Sequential scan computing DTW against every candidate.
    :param dataset: Dataset or list of TimeSeries
    :param Q: query
    :param epsilon: non-negative float
    :param r: band radius (int, None for no band or BandConstraint)
    :param prefilter: optional function (Q, C) -> lower bound; candidates with a bound above epsilon skip DTW
    :return: RangeResult
    """
    check_epsilon(epsilon)
    if not isinstance(Q, TimeSeries):
        Q = TimeSeries(Q)
    radius = r.radius if isinstance(r, BandConstraint) else BandConstraint(r).radius
    seqs = as_series_list(dataset)
    stats = SearchStats()
    matches = []
    for eid, C in zip(entry_ids(seqs), seqs):
        if prefilter is not None:
            stats.prefilter_evaluations += 1
            if exceeds(prefilter(Q, C), epsilon):
                stats.pruned_prefilter += 1
                continue
        stats.dtw_evaluations += 1
        d = dtw_distance(Q.values, C.values, radius)
        if math.isinf(d):
            stats.infeasible += 1
        elif d <= epsilon:
            matches.append(Match(eid, d))
        else:
            stats.rejected_dtw += 1
    return _finish(matches, stats)
