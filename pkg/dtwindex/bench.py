"""
Tightness and pruning power of the lower bounds, parameter sweeps and result files.

Every experiment draws its queries from the dataset itself. Per-query work can be spread over processes or a dask
cluster; per-query results are always reduced in query order, so serial and parallel runs write identical bytes.
"""
import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field, fields, replace
from functools import partial
from typing import Optional

import numpy as np
import yaml

from dtwindex import __version__
from dtwindex.auxiliary import canonical_yaml, params_hash
from dtwindex.core_dtw import dtw_distance, is_feasible
from dtwindex.errors import InvariantError, UsageError
from dtwindex.ingest import QUERY_STREAM, TruncationSpec, as_dataset, choose_lmax, load_ucr, truncate_random
from dtwindex.lower_bounds import ExtensionParams, envelope, exceeds, extend, lb_keogh, lb_kim, lb_yi
from dtwindex.paa import lb_paa, paa_envelope, paa_transform
from dtwindex.parallel import collect

logger = logging.getLogger(__name__)

BOUNDS = ('keogh_plus', 'yi', 'kim', 'paa')
SWEEP_KINDS = ('epsilon', 'n_paa', 'r', 'lmax')
BENCH_KINDS = ('tightness', 'pruning', 'extension')

TIGHTNESS_SLACK = 1e-9

COLUMNS = ('dataset', 'seed', 'kind', 'bound', 'metric', 'r', 'n_paa', 'lmax', 'pad_value', 'epsilon',
           'query', 'candidate', 'value', 'count', 'excluded')
_COLUMN_TYPES = {'seed': int, 'r': int, 'n_paa': int, 'lmax': int, 'pad_value': float, 'epsilon': float,
                 'query': int, 'candidate': int, 'value': float, 'count': int, 'excluded': int}


def _radius_for(frac, length):
    return max(1, math.floor(frac * length + 0.5))


@dataclass(frozen=True)
class SweepConfig:
    """
    band_radius None means r_frac of the longest sequence before truncation.
    lmax None means the smallest admissible value for the PAA setting in use.
    lmax_grid None means four steps of n_paa starting from the smallest admissible lmax.
    """
    dataset: str = ''
    query_count: int = 100
    seed: int = 0
    truncate: bool = True
    band_radius: Optional[int] = None
    r_frac: float = 0.10
    n_paa: int = 16
    lmax: Optional[int] = None
    pad_value: float = 0.0
    bounds: tuple = ('keogh_plus', 'yi', 'kim')
    epsilon_grid: tuple = (1.0, 2.0, 5.0, 10.0, 20.0, 50.0)
    n_paa_grid: tuple = (2, 4, 8, 16)
    r_frac_grid: tuple = (0.10, 0.15, 0.20)
    lmax_grid: Optional[tuple] = None
    base_length: Optional[int] = None

    def __post_init__(self):
        for name in ('bounds', 'epsilon_grid', 'n_paa_grid', 'r_frac_grid', 'lmax_grid'):
            value = getattr(self, name)
            if value is not None:
                if isinstance(value, (str, int, float)):
                    value = str(value).split(',') if isinstance(value, str) else [value]
                object.__setattr__(self, name, tuple(value))
                if not getattr(self, name):
                    raise UsageError(f'{name} must not be empty')
        if int(self.query_count) != self.query_count or self.query_count < 1:
            raise UsageError(f'query count must be a positive integer, got {self.query_count!r}')
        unknown = [b for b in self.bounds if b not in BOUNDS]
        if unknown:
            raise UsageError(f'unknown lower bound(s) {", ".join(unknown)}, choose from {", ".join(BOUNDS)}')
        if any(not e >= 0 for e in self.epsilon_grid):
            raise UsageError('epsilon values must be non-negative')
        if any(int(n) != n or n < 1 for n in self.n_paa_grid) or int(self.n_paa) != self.n_paa or self.n_paa < 1:
            raise UsageError('n_paa values must be positive integers')
        if any(not 0 < f <= 1 for f in self.r_frac_grid + (self.r_frac,)):
            raise UsageError('band radius fractions must be in (0, 1]')
        if self.band_radius is not None and (int(self.band_radius) != self.band_radius or self.band_radius < 0):
            raise UsageError(f'band radius must be a non-negative integer, got {self.band_radius!r}')
        if not math.isfinite(self.pad_value):
            raise UsageError(f'pad value must be finite, got {self.pad_value!r}')
        object.__setattr__(self, 'query_count', int(self.query_count))
        object.__setattr__(self, 'seed', int(self.seed))
        object.__setattr__(self, 'n_paa', int(self.n_paa))
        object.__setattr__(self, 'pad_value', float(self.pad_value))
        object.__setattr__(self, 'epsilon_grid', tuple(float(e) for e in self.epsilon_grid))
        object.__setattr__(self, 'n_paa_grid', tuple(int(n) for n in self.n_paa_grid))
        object.__setattr__(self, 'r_frac_grid', tuple(float(f) for f in self.r_frac_grid))
        if self.lmax_grid is not None:
            object.__setattr__(self, 'lmax_grid', tuple(int(x) for x in self.lmax_grid))

    @classmethod
    def from_dict(cls, params):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(params) - known)
        if unknown:
            raise UsageError(f'unknown benchmark parameter(s): {", ".join(unknown)}')
        return cls(**params)

    @classmethod
    def from_yaml(cls, fname):
        with open(fname) as f:
            params = yaml.safe_load(f) or {}
        if not isinstance(params, dict):
            raise UsageError(f'{fname} must contain a mapping of benchmark parameters')
        return cls.from_dict(params)

    def radius_for(self, frac):
        if self.base_length is None:
            raise UsageError('benchmark parameters are not resolved against a dataset yet')
        return _radius_for(frac, self.base_length)

    def to_params(self):
        return {f.name: list(v) if isinstance(v, tuple) else v
                for f in fields(self) for v in [getattr(self, f.name)]}


@dataclass(frozen=True)
class TightnessStats:
    bound: str
    ratios: np.ndarray
    infeasible: int = 0

    @property
    def count(self):
        return int(self.ratios.shape[0])

    @property
    def mean(self):
        return float(np.mean(self.ratios)) if self.count else math.nan


@dataclass(frozen=True)
class PruningStats:
    s_total: int
    s_pruned: int
    bound: str = ''
    epsilon: float = math.nan

    def __post_init__(self):
        if not 0 <= self.s_pruned <= self.s_total:
            raise InvariantError(f'pruned count {self.s_pruned} is outside [0, {self.s_total}]')

    @property
    def power(self):
        return self.s_pruned / self.s_total if self.s_total else 0.0

    @property
    def retrieved_ratio(self):
        return (self.s_total - self.s_pruned) / self.s_total if self.s_total else 0.0


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.rows)

    def column(self, name, **where):
        return [row[name] for row in self.rows if all(row[k] == v for k, v in where.items())]


def tightness(lb_value, dtw_value):
    """
    Ratio of a lower bound to the DTW distance; 0/0 is 1.
    A ratio above 1 (beyond rounding slack) means the bound is not a lower bound and raises InvariantError.
    """
    if not lb_value >= 0:
        raise UsageError(f'lower bound must be non-negative, got {lb_value!r}')
    if not is_feasible(dtw_value) or not math.isfinite(dtw_value) or dtw_value < 0:
        raise UsageError(f'tightness needs a finite non-negative DTW distance, got {dtw_value!r}')
    if dtw_value == 0:
        if lb_value > TIGHTNESS_SLACK:
            raise InvariantError(f'lower bound {lb_value!r} exceeds a zero DTW distance')
        return 1.0
    t = lb_value / dtw_value
    if t > 1 + TIGHTNESS_SLACK:
        raise InvariantError(f'lower bound {lb_value!r} exceeds the DTW distance {dtw_value!r}')
    return t


def tightness_ratios(lbs, dtws):
    """
    Vectorized tightness over feasible pairs
    :return: (ratios array, number of infeasible pairs skipped)
    """
    lbs = np.asarray(lbs, dtype=np.float64)
    dtws = np.asarray(dtws, dtype=np.float64)
    feasible = np.isfinite(dtws)
    lbs, dtws = lbs[feasible], dtws[feasible]
    zero = dtws == 0
    if np.any(lbs[zero] > TIGHTNESS_SLACK):
        raise InvariantError('a lower bound exceeds a zero DTW distance')
    ratios = np.ones_like(dtws)
    np.divide(lbs, dtws, out=ratios, where=~zero)
    if ratios.size and ratios.max() > 1 + TIGHTNESS_SLACK:
        k = int(np.argmax(ratios))
        raise InvariantError(f'lower bound {lbs[k]!r} exceeds the DTW distance {dtws[k]!r}')
    return ratios, int(np.count_nonzero(~feasible))


def count_pruned(values, epsilon):
    """
    :param values: lower bound of every candidate of one query
    :return: PruningStats with S = number of candidates and S0 = candidates whose bound exceeds epsilon
    """
    values = np.asarray(values, dtype=np.float64)
    return PruningStats(int(values.shape[0]), int(np.count_nonzero(exceeds(values, epsilon))), epsilon=float(epsilon))


def draw_queries(size, cfg):
    """
    Positions of the query sequences, without replacement unless more queries than sequences are requested
    """
    rng = np.random.default_rng([cfg.seed, QUERY_STREAM])
    return [int(k) for k in rng.choice(size, size=cfg.query_count, replace=cfg.query_count > size)]


def prepare(ds, cfg):
    """
    Resolve the band radius on the original dataset, then truncate the dataset if requested.
    :return: (Dataset, SweepConfig with band_radius and base_length set)
    """
    ds = as_dataset(ds, cfg.dataset)
    base = cfg.base_length if cfg.base_length is not None else ds.max_length
    r = cfg.band_radius if cfg.band_radius is not None else _radius_for(cfg.r_frac, base)
    cfg = replace(cfg, base_length=base, band_radius=r)
    if cfg.truncate:
        ds = truncate_random(ds, TruncationSpec(cfg.seed, r))
    logger.info(f'dataset {ds.name!r}: {ds.dataset_size} sequences of length {ds.min_length}..{ds.max_length}, '
                f'r={r}, seed={cfg.seed}')
    return ds, cfg


def _resolved(ds, cfg):
    if cfg.band_radius is None or cfg.base_length is None:
        base = cfg.base_length if cfg.base_length is not None else ds.max_length
        r = cfg.band_radius if cfg.band_radius is not None else _radius_for(cfg.r_frac, base)
        cfg = replace(cfg, base_length=base, band_radius=r)
    return cfg


def resolve_lmax(ds, cfg, n_paa):
    if cfg.lmax is None:
        return choose_lmax(ds, n_paa)
    if cfg.lmax <= ds.max_length:
        raise UsageError(f'lmax={cfg.lmax} must exceed the longest sequence length {ds.max_length}')
    if cfg.lmax % n_paa:
        raise UsageError(f'lmax={cfg.lmax} is not divisible by n_paa={n_paa}')
    return cfg.lmax


def _query_values(qpos, seqs, band_radius, bounds, n_paa=None, lmax=None, pad_value=0.0, extended=False):
    """
    Lower bounds and DTW distances between one query and every other sequence
    :return: dict of arrays in candidate order: 'ids', 'dtw' (inf if infeasible), one array per bound and
             'dtw_extended' if requested
    """
    Q = seqs[qpos]
    cands = [C for pos, C in enumerate(seqs) if pos != qpos]
    out = {'ids': np.array([pos for pos in range(len(seqs)) if pos != qpos], dtype=np.int64),
           'dtw': np.array([dtw_distance(Q.values, C.values, band_radius) for C in cands])}
    ext = ExtensionParams(lmax, pad_value) if lmax is not None else None
    if ext is not None and ({'keogh_plus', 'paa'} & set(bounds) or extended):
        q_ext = extend(Q, ext)
        c_ext = [extend(C, ext) for C in cands]
        env = envelope(q_ext, band_radius)
        if 'keogh_plus' in bounds:
            out['keogh_plus'] = np.array([lb_keogh(env, C) for C in c_ext])
        if 'paa' in bounds:
            penv = paa_envelope(env, n_paa)
            out['paa'] = np.array([lb_paa(penv, paa_transform(C, n_paa)) for C in c_ext])
        if extended:
            out['dtw_extended'] = np.array([dtw_distance(q_ext.values, C.values, band_radius) for C in c_ext])
    if 'yi' in bounds:
        out['yi'] = np.array([lb_yi(Q, C) for C in cands])
    if 'kim' in bounds:
        out['kim'] = np.array([lb_kim(Q, C) for C in cands])
    return out


def _collect_values(ds, cfg, bounds, n_paa=None, lmax=None, extended=False, band_radius=None, ncpu=1,
                    dask_client=None):
    if band_radius is None:
        band_radius = cfg.band_radius
    func = partial(_query_values, seqs=ds.sequences, band_radius=band_radius, bounds=tuple(bounds),
                   n_paa=n_paa, lmax=lmax, pad_value=cfg.pad_value, extended=extended)
    return collect(func, draw_queries(ds.dataset_size, cfg), ncpu=ncpu, dask_client=dask_client)


def _tightness_from(bound, values):
    lbs = np.concatenate([v[bound] for v in values])
    dtws = np.concatenate([v['dtw'] for v in values])
    ratios, infeasible = tightness_ratios(lbs, dtws)
    if infeasible:
        logger.warning(f'{infeasible} query-candidate pairs violate the band constraint and are left out '
                       f'of the {bound} tightness')
    return TightnessStats(bound, ratios, infeasible)


def _pruning_from(bound, values, size, epsilon):
    pruned = sum(count_pruned(v[bound], epsilon).s_pruned for v in values)
    return PruningStats(size * len(values), pruned, bound, float(epsilon))


def _bound_settings(ds, cfg, bound, n_paa=None):
    if bound == 'paa':
        n_paa = n_paa or cfg.n_paa
        return n_paa, resolve_lmax(ds, cfg, n_paa)
    if bound == 'keogh_plus':
        return None, resolve_lmax(ds, cfg, cfg.n_paa)
    return None, None


def measure_tightness(ds, bound, cfg, ncpu=1, dask_client=None):
    """
    Mean tightness of one lower bound over all pairs of drawn queries and the other sequences
    :param ds: Dataset, already truncated
    :param bound: name from BOUNDS
    :param cfg: SweepConfig
    :return: TightnessStats
    """
    if bound not in BOUNDS:
        raise UsageError(f'unknown lower bound {bound!r}, choose from {", ".join(BOUNDS)}')
    ds = as_dataset(ds)
    cfg = _resolved(ds, cfg)
    n_paa, lmax = _bound_settings(ds, cfg, bound)
    values = _collect_values(ds, cfg, [bound], n_paa, lmax, ncpu=ncpu, dask_client=dask_client)
    return _tightness_from(bound, values)


def measure_pruning(ds, bound, epsilon, cfg, ncpu=1, dask_client=None):
    """
    Pruning power of one lower bound at epsilon: S is the dataset size per query, S0 the candidates whose bound
    exceeds epsilon (the query itself is never pruned)
    :return: PruningStats summed over queries
    """
    if bound not in BOUNDS:
        raise UsageError(f'unknown lower bound {bound!r}, choose from {", ".join(BOUNDS)}')
    if not epsilon >= 0:
        raise UsageError(f'epsilon must be a non-negative number, got {epsilon!r}')
    ds = as_dataset(ds)
    cfg = _resolved(ds, cfg)
    n_paa, lmax = _bound_settings(ds, cfg, bound)
    values = _collect_values(ds, cfg, [bound], n_paa, lmax, ncpu=ncpu, dask_client=dask_client)
    return _pruning_from(bound, values, ds.dataset_size, epsilon)


def measure_extension(ds, cfg, ncpu=1, dask_client=None):
    """
    DTW distance of the first drawn query to every other sequence, original and extended to lmax.
    :return: list of (candidate id, original distance, extended distance) over feasible candidates
    """
    ds = as_dataset(ds)
    cfg = _resolved(ds, replace(cfg, query_count=1))
    lmax = resolve_lmax(ds, cfg, cfg.n_paa)
    v, = _collect_values(ds, cfg, [], lmax=lmax, extended=True, ncpu=ncpu, dask_client=dask_client)
    out = []
    for pos, d, d_ext in zip(v['ids'], v['dtw'], v['dtw_extended']):
        if not math.isfinite(d):
            continue
        if d_ext > d * (1 + TIGHTNESS_SLACK) + TIGHTNESS_SLACK:
            raise InvariantError(f'extended DTW {d_ext!r} exceeds the original distance {d!r}')
        out.append((int(pos), float(d), float(d_ext)))
    return out


def _row(ds, cfg, kind, bound, metric, value, count, r=None, n_paa=None, lmax=None, epsilon=None, excluded=0,
         query=None, candidate=None):
    return {'dataset': ds.name,
            'seed': cfg.seed,
            'kind': kind,
            'bound': bound,
            'metric': metric,
            'r': cfg.band_radius if r is None else r,
            'n_paa': n_paa,
            'lmax': lmax,
            'pad_value': cfg.pad_value,
            'epsilon': epsilon,
            'query': query,
            'candidate': candidate,
            'value': float(value),
            'count': int(count),
            'excluded': int(excluded)}


def _tightness_rows(ds, cfg, kind, bounds, n_paa=None, lmax=None, band_radius=None, ncpu=1, dask_client=None):
    r = cfg.band_radius if band_radius is None else band_radius
    settings = {b: _bound_settings(ds, cfg, b, n_paa) for b in bounds}
    if lmax is not None:
        settings = {b: (s[0], lmax if s[1] is not None else None) for b, s in settings.items()}
    # one pass per distinct extension setting, so DTW distances are computed once for all bounds sharing it
    groups = {}
    for b in bounds:
        groups.setdefault(settings[b], []).append(b)
    rows = {}
    for (g_paa, g_lmax), group in groups.items():
        values = _collect_values(ds, cfg, group, g_paa, g_lmax, band_radius=r, ncpu=ncpu, dask_client=dask_client)
        for b in group:
            stats = _tightness_from(b, values)
            rows[b] = _row(ds, cfg, kind, b, 'mean_tightness', stats.mean, stats.count, r=r,
                           n_paa=settings[b][0], lmax=settings[b][1], excluded=stats.infeasible)
    return [rows[b] for b in bounds]


def _pruning_rows(ds, cfg, kind, ncpu=1, dask_client=None):
    rows = []
    for b in cfg.bounds:
        n_paa, lmax = _bound_settings(ds, cfg, b)
        values = _collect_values(ds, cfg, [b], n_paa, lmax, ncpu=ncpu, dask_client=dask_client)
        for eps in cfg.epsilon_grid:
            stats = _pruning_from(b, values, ds.dataset_size, eps)
            rows.append(_row(ds, cfg, kind, b, 'pruning_power', stats.power, stats.s_total,
                             n_paa=n_paa, lmax=lmax, epsilon=eps))
            rows.append(_row(ds, cfg, kind, b, 'retrieved_ratio', stats.retrieved_ratio, stats.s_total,
                             n_paa=n_paa, lmax=lmax, epsilon=eps))
    return rows


def _n_paa_rows(ds, cfg, ncpu=1, dask_client=None):
    lmax = cfg.lmax if cfg.lmax is not None else choose_lmax(ds, math.lcm(*cfg.n_paa_grid))
    rows = []
    for n_paa in cfg.n_paa_grid:
        lmax_n = resolve_lmax(ds, replace(cfg, lmax=lmax), n_paa)
        rows.extend(_tightness_rows(ds, cfg, 'n_paa', ['paa'], n_paa=n_paa, lmax=lmax_n, ncpu=ncpu,
                                    dask_client=dask_client))
    return rows


def _r_rows(ds, cfg, ncpu=1, dask_client=None):
    rows = []
    for frac in cfg.r_frac_grid:
        rows.extend(_tightness_rows(ds, cfg, 'r', cfg.bounds, band_radius=cfg.radius_for(frac), ncpu=ncpu,
                                    dask_client=dask_client))
    return rows


def _lmax_rows(ds, cfg, ncpu=1, dask_client=None):
    if cfg.lmax_grid is None:
        start = choose_lmax(ds, cfg.n_paa)
        grid = [start + k * cfg.n_paa for k in range(4)]
    else:
        grid = list(cfg.lmax_grid)
    rows = []
    for lmax in grid:
        if lmax <= ds.max_length:
            raise UsageError(f'lmax={lmax} must exceed the longest sequence length {ds.max_length}')
        paa = lmax % cfg.n_paa == 0
        values = _collect_values(ds, cfg, ['paa'] if paa else [], cfg.n_paa if paa else None, lmax, extended=True,
                                 ncpu=ncpu, dask_client=dask_client)
        dtws = np.concatenate([v['dtw'] for v in values])
        ext = np.concatenate([v['dtw_extended'] for v in values])
        feasible = np.isfinite(dtws)
        excluded = int(np.count_nonzero(~feasible))
        n = int(np.count_nonzero(feasible))
        rows.append(_row(ds, cfg, 'lmax', '', 'mean_dtw', np.mean(dtws[feasible]) if n else math.nan, n,
                         lmax=lmax, excluded=excluded))
        rows.append(_row(ds, cfg, 'lmax', '', 'mean_dtw_extended', np.mean(ext[feasible]) if n else math.nan, n,
                         lmax=lmax, excluded=excluded))
        if paa:
            stats = _tightness_from('paa', values)
            rows.append(_row(ds, cfg, 'lmax', 'paa', 'mean_tightness', stats.mean, stats.count,
                             n_paa=cfg.n_paa, lmax=lmax, excluded=stats.infeasible))
    return rows


def _metadata(ds, cfg, kind):
    params = cfg.to_params()
    return {'dataset': ds.name,
            'kind': kind,
            'seed': cfg.seed,
            'dataset_size': ds.dataset_size,
            'band_radius': cfg.band_radius,
            'params_hash': params_hash(params),
            'created_by': f'dtwindex {__version__}'}


def _source(ds, cfg):
    if ds is None:
        if not cfg.dataset:
            raise UsageError('no dataset given')
        ds = load_ucr(cfg.dataset)
    return prepare(ds, cfg)


def run_sweep(kind, cfg, ds=None, ncpu=1, dask_client=None):
    """
    :param kind: epsilon (pruning power over the epsilon grid), n_paa (LB_PAA tightness at a fixed lmax),
                 r (tightness over the band radius fractions) or lmax (DTW of extended sequences and LB_PAA tightness
                 over the lmax grid)
    :param cfg: SweepConfig
    :param ds: original dataset, loaded from cfg.dataset if omitted
    :return: ResultTable
    """
    if kind not in SWEEP_KINDS:
        raise UsageError(f'unknown sweep {kind!r}, choose from {", ".join(SWEEP_KINDS)}')
    start = time.time()
    ds, cfg = _source(ds, cfg)
    if kind == 'epsilon':
        rows = _pruning_rows(ds, cfg, kind, ncpu, dask_client)
    elif kind == 'n_paa':
        rows = _n_paa_rows(ds, cfg, ncpu, dask_client)
    elif kind == 'r':
        rows = _r_rows(ds, cfg, ncpu, dask_client)
    else:
        rows = _lmax_rows(ds, cfg, ncpu, dask_client)
    logger.info(f'{kind} sweep done in {(time.time() - start):.2f}s')
    return ResultTable(rows, _metadata(ds, cfg, f'sweep_{kind}'))


def run_bench(kind, cfg, ds=None, ncpu=1, dask_client=None):
    """
    :param kind: tightness (one row per bound), pruning (pruning power and retrieved ratio per bound and epsilon)
                 or extension (original and extended DTW of one query against every candidate)
    :return: ResultTable
    """
    if kind not in BENCH_KINDS:
        raise UsageError(f'unknown benchmark {kind!r}, choose from {", ".join(BENCH_KINDS)}')
    start = time.time()
    ds, cfg = _source(ds, cfg)
    if kind == 'tightness':
        rows = _tightness_rows(ds, cfg, kind, cfg.bounds, ncpu=ncpu, dask_client=dask_client)
    elif kind == 'pruning':
        rows = _pruning_rows(ds, cfg, kind, ncpu, dask_client)
    else:
        lmax = resolve_lmax(ds, cfg, cfg.n_paa)
        query = draw_queries(ds.dataset_size, replace(cfg, query_count=1))[0]
        rows = []
        for pos, d, d_ext in measure_extension(ds, cfg, ncpu, dask_client):
            rows.append(_row(ds, cfg, kind, '', 'dtw', d, 1, lmax=lmax, query=query, candidate=pos))
            rows.append(_row(ds, cfg, kind, '', 'dtw_extended', d_ext, 1, lmax=lmax, query=query, candidate=pos))
    logger.info(f'{kind} benchmark done in {(time.time() - start):.2f}s')
    return ResultTable(rows, _metadata(ds, cfg, kind))


def _format_value(value):
    if value is None:
        return ''
    if isinstance(value, float):
        return format(value, '.17g')
    return str(value)


def _json_value(value):
    if isinstance(value, float) and math.isfinite(value):
        s = format(value, '.17g')
        return s if any(ch in s for ch in '.en') else s + '.0'
    return json.dumps(value)


def emit_results(table, path, fmt='csv', metadata=None):
    """
    Write a result table. CSV files start with the metadata as '# key: value' lines followed by a header row;
    JSON-lines files start with a {"metadata": {...}} line. Floats keep 17 significant digits.

    :param table: ResultTable
    :param path: output file name
    :param fmt: csv or jsonl
    :param metadata: extra metadata merged over table.metadata
    """
    meta = dict(table.metadata)
    meta.update(metadata or {})
    if fmt == 'csv':
        with open(path, 'wt', newline='') as f:
            for line in canonical_yaml(meta).splitlines():
                f.write(f'# {line}\n')
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(COLUMNS)
            for row in table.rows:
                writer.writerow([_format_value(row[c]) for c in COLUMNS])
    elif fmt == 'jsonl':
        with open(path, 'wt') as f:
            f.write(json.dumps({'metadata': meta}, sort_keys=True) + '\n')
            for row in table.rows:
                f.write('{' + ', '.join(f'{json.dumps(c)}: {_json_value(row[c])}' for c in COLUMNS) + '}\n')
    else:
        raise UsageError(f'unknown result format {fmt!r}, use csv or jsonl')


def _typed(row):
    out = {}
    for c in COLUMNS:
        value = row.get(c)
        if c in _COLUMN_TYPES:
            value = None if value in ('', None) else _COLUMN_TYPES[c](value)
        elif value is None:
            value = ''
        out[c] = value
    return out


def read_results(path):
    """
    Parse a file written by emit_results
    :return: ResultTable
    """
    with open(path) as f:
        first = f.readline()
        if first.startswith('{'):
            meta = json.loads(first)['metadata']
            rows = [_typed(json.loads(line)) for line in f if line.strip()]
            return ResultTable(rows, meta)
        meta_lines = []
        line = first
        while line.startswith('#'):
            meta_lines.append(line[2:])
            line = f.readline()
        meta = yaml.safe_load(''.join(meta_lines)) or {}
        reader = csv.DictReader([line] + f.readlines())
        return ResultTable([_typed(row) for row in reader], meta)
