"""
Band-constrained Dynamic Time Warping with the L1 base distance.

Indices of warping paths are 1-based, as in the usual DTW notation: a path runs from (1, 1) to (n, m).
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from dtwindex.errors import InvalidPathError, InvalidSeriesError, UsageError

logger = logging.getLogger(__name__)

BRUTE_FORCE_MAX_CELLS = 14


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """
    Finite real-valued sequence. Values are copied to a read-only float64 array.
    """
    values: np.ndarray
    id: Optional[object] = None
    label: Optional[str] = None

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64)
        if arr.ndim != 1:
            raise InvalidSeriesError(f'time series must be one-dimensional, got shape {arr.shape}')
        if arr.size == 0:
            raise InvalidSeriesError('time series must contain at least one sample')
        if not np.all(np.isfinite(arr)):
            raise InvalidSeriesError(f'time series {self.id!r} contains NaN or infinite samples')
        arr.setflags(write=False)
        object.__setattr__(self, 'values', arr)

    def __len__(self):
        return self.values.shape[0]

    def __repr__(self):
        return f'TimeSeries(id={self.id!r}, label={self.label!r}, length={len(self)})'

    def with_values(self, values):
        return TimeSeries(values, id=self.id, label=self.label)


@dataclass(frozen=True)
class BandConstraint:
    """
    Sakoe-Chiba band of the given radius; radius None stands for no band at all.
    """
    radius: Optional[int] = None

    def __post_init__(self):
        if self.radius is not None:
            if isinstance(self.radius, bool) or int(self.radius) != self.radius or self.radius < 0:
                raise UsageError(f'band radius must be a non-negative integer, got {self.radius!r}')
            object.__setattr__(self, 'radius', int(self.radius))

    @property
    def unbounded(self):
        return self.radius is None

    def feasible(self, i, j):
        return self.radius is None or abs(i - j) <= self.radius

    def effective_radius(self, n, m):
        return max(n, m) if self.radius is None else self.radius


UNBOUNDED = BandConstraint(None)


def as_band(band):
    if isinstance(band, BandConstraint):
        return band
    return BandConstraint(band)


class _Infeasible:
    """
    Result of DTW when no band-feasible warping path exists. Orders above every real number.
    """
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __reduce__(self):
        return _Infeasible, ()

    def __repr__(self):
        return 'INFEASIBLE'

    def __float__(self):
        return math.inf

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return id(self)

    def __lt__(self, other):
        return False

    def __le__(self, other):
        return other is self

    def __gt__(self, other):
        return other is not self

    def __ge__(self, other):
        return True


INFEASIBLE = _Infeasible()


def is_feasible(distance):
    return distance is not INFEASIBLE


@dataclass(frozen=True)
class WarpingPath:
    steps: tuple

    def __post_init__(self):
        object.__setattr__(self, 'steps', tuple((int(i), int(j)) for i, j in self.steps))

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)


def values_of(x):
    """
    :param x: TimeSeries or any one-dimensional array-like of finite numbers
    :return: float64 numpy array
    """
    if isinstance(x, TimeSeries):
        return x.values
    return TimeSeries(x).values


def base_distance(a, b):
    return abs(a - b)


@njit(cache=True)
def _dtw_banded(q, c, radius):
    n = q.shape[0]
    m = c.shape[0]
    prev = np.full(m + 1, np.inf)
    cur = np.full(m + 1, np.inf)
    prev[0] = 0.0
    for i in range(1, n + 1):
        lo = max(1, i - radius)
        hi = min(m, i + radius)
        # the cell left of the band may hold a value from two rows above
        cur[lo - 1] = np.inf
        for j in range(lo, hi + 1):
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = abs(q[i - 1] - c[j - 1]) + best
        if hi < m:
            cur[hi + 1] = np.inf
        prev, cur = cur, prev
    return prev[m]


@njit(cache=True)
def _dtw_matrix(q, c, radius):
    n = q.shape[0]
    m = c.shape[0]
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(max(1, i - radius), min(m, i + radius) + 1):
            best = acc[i - 1, j - 1]
            if acc[i - 1, j] < best:
                best = acc[i - 1, j]
            if acc[i, j - 1] < best:
                best = acc[i, j - 1]
            acc[i, j] = abs(q[i - 1] - c[j - 1]) + best
    return acc


def dtw_distance(q, c, radius):
    """
    Raw banded DTW over float64 arrays without validation
    :param q: numpy array
    :param c: numpy array
    :param radius: int band radius or None for no band
    :return: float, math.inf when no band-feasible path exists
    """
    n, m = q.shape[0], c.shape[0]
    if radius is None:
        radius = max(n, m)
    if abs(n - m) > radius:
        return math.inf
    return float(_dtw_banded(q, c, radius))


def dtw(Q, C, band=UNBOUNDED):
    """
    Minimum summed L1 cost over all band-feasible warping paths between Q and C.
    :param Q: TimeSeries or array-like
    :param C: TimeSeries or array-like
    :param band: BandConstraint, int radius or None (no band)
    :return: float or INFEASIBLE if |len(Q) - len(C)| exceeds the band radius
    """
    band = as_band(band)
    d = dtw_distance(values_of(Q), values_of(C), band.radius)
    return INFEASIBLE if math.isinf(d) else d


def dtw_with_path(Q, C, band=UNBOUNDED):
    """
    DTW distance together with an optimal warping path. Ties are broken preferring the diagonal predecessor,
    then the vertical (i - 1, j), then the horizontal (i, j - 1) one.
    :return: (float, WarpingPath) or INFEASIBLE
    """
    band = as_band(band)
    q, c = values_of(Q), values_of(C)
    n, m = q.shape[0], c.shape[0]
    radius = band.effective_radius(n, m)
    if abs(n - m) > radius:
        return INFEASIBLE
    acc = _dtw_matrix(q, c, radius)
    i, j = n, m
    steps = [(i, j)]
    while (i, j) != (1, 1):
        best = (i - 1, j - 1)
        for cand in ((i - 1, j), (i, j - 1)):
            if acc[cand] < acc[best]:
                best = cand
        i, j = best
        steps.append((i, j))
    steps.reverse()
    return float(acc[n, m]), WarpingPath(tuple(steps))


def validate_path(path, n, m, band=UNBOUNDED):
    """
    Check the boundary, monotonicity, continuity and band constraints of a warping path
    :param path: WarpingPath or sequence of 1-based (i, j) pairs
    :param n: length of the first sequence
    :param m: length of the second sequence
    :param band: BandConstraint, int or None
    :return: bool
    """
    band = as_band(band)
    steps = list(path)
    if not steps or tuple(steps[0]) != (1, 1) or tuple(steps[-1]) != (n, m):
        return False
    for i, j in steps:
        if not band.feasible(i, j):
            return False
    for (i0, j0), (i1, j1) in zip(steps, steps[1:]):
        di, dj = i1 - i0, j1 - j0
        if di not in (0, 1) or dj not in (0, 1) or di + dj == 0:
            return False
    return True


def path_cost(Q, C, path):
    q, c = values_of(Q), values_of(C)
    if not validate_path(path, q.shape[0], c.shape[0]):
        raise InvalidPathError(f'not a valid warping path for lengths ({q.shape[0]}, {c.shape[0]})')
    total = 0.0
    for i, j in path:
        total += base_distance(q[i - 1], c[j - 1])
    return float(total)


def brute_force_dtw(Q, C, band=UNBOUNDED):
    """
    Exhaustive enumeration of all valid band-feasible warping paths. Exponential, for verification only.
    :return: float or INFEASIBLE
    """
    band = as_band(band)
    q, c = values_of(Q), values_of(C)
    n, m = q.shape[0], c.shape[0]
    if n + m > BRUTE_FORCE_MAX_CELLS:
        raise UsageError(f'brute force DTW is limited to n + m <= {BRUTE_FORCE_MAX_CELLS}, got {n + m}')

    best = math.inf
    # iterative depth-first walk over (i, j, cost so far including cell (i, j))
    stack = [(1, 1, float(base_distance(q[0], c[0])))]
    while stack:
        i, j, acc = stack.pop()
        if i == n and j == m:
            if acc < best:
                best = acc
            continue
        for di, dj in ((1, 1), (1, 0), (0, 1)):
            ni, nj = i + di, j + dj
            if ni <= n and nj <= m and band.feasible(ni, nj):
                stack.append((ni, nj, acc + base_distance(q[ni - 1], c[nj - 1])))
    return INFEASIBLE if math.isinf(best) else float(best)
