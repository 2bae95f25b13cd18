"""
Sequence-level lower bounds of banded DTW: LB_Keogh over query envelopes, sequence extension to a common length
with LB_Keogh+, and the LB_Kim / LB_Yi baselines for unequal-length sequences.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from dtwindex.core_dtw import BandConstraint, TimeSeries, values_of
from dtwindex.errors import UsageError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Envelope:
    upper: np.ndarray
    lower: np.ndarray
    radius: int

    def __post_init__(self):
        for name in ('upper', 'lower'):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.upper.shape != self.lower.shape:
            raise UsageError('upper and lower envelope sequences must have the same length')

    def __len__(self):
        return self.upper.shape[0]


@dataclass(frozen=True)
class ExtensionParams:
    lmax: int
    pad_value: float = 0.0

    def __post_init__(self):
        if int(self.lmax) != self.lmax or self.lmax < 1:
            raise UsageError(f'lmax must be a positive integer, got {self.lmax!r}')
        if not np.isfinite(self.pad_value):
            raise UsageError(f'pad value must be finite, got {self.pad_value!r}')
        object.__setattr__(self, 'lmax', int(self.lmax))
        object.__setattr__(self, 'pad_value', float(self.pad_value))

    @classmethod
    def for_lengths(cls, lengths, n_paa=1, pad_value=0.0):
        """
        Smallest multiple of n_paa strictly greater than the longest length
        """
        longest = max(lengths)
        return cls((longest // n_paa + 1) * n_paa, pad_value)


def _radius(r):
    if isinstance(r, BandConstraint):
        r = r.radius
    if r is None:
        raise UsageError('an envelope needs a finite band radius')
    return BandConstraint(r).radius


def envelope(Q, r):
    """
    Windowed max/min of Q over [i - r, i + r] clipped to the sequence boundaries
    :param Q: TimeSeries or array-like
    :param r: non-negative int (or BandConstraint with a finite radius)
    :return: Envelope
    """
    r = _radius(r)
    q = values_of(Q)
    # mode='nearest' repeats the edge samples, which are inside every clipped window anyway
    size = 2 * r + 1
    return Envelope(maximum_filter1d(q, size=size, mode='nearest'),
                    minimum_filter1d(q, size=size, mode='nearest'),
                    r)


def envelope_excess(values, upper, lower):
    """
    Sum over points of the distance to the [lower, upper] interval. Shared by LB_Keogh and LB_PAA so that an identity
    PAA reproduces LB_Keogh bit-for-bit.
    """
    return float(np.sum(np.maximum(values - upper, 0.0) + np.maximum(lower - values, 0.0)))


def lb_keogh(env, C):
    c = values_of(C)
    if c.shape[0] != len(env):
        raise UsageError(f'LB_Keogh needs equal lengths, envelope has {len(env)} points, candidate {c.shape[0]}')
    return envelope_excess(c, env.upper, env.lower)


def extend(X, params):
    """
    Pad X with params.pad_value up to params.lmax samples
    :return: TimeSeries of length lmax keeping the id and label of X
    """
    x = values_of(X)
    if x.shape[0] >= params.lmax:
        raise UsageError(f'cannot extend a sequence of length {x.shape[0]} to lmax={params.lmax}, '
                         f'lmax must be strictly greater')
    values = np.concatenate([x, np.full(params.lmax - x.shape[0], params.pad_value)])
    if isinstance(X, TimeSeries):
        return X.with_values(values)
    return TimeSeries(values)


def lb_keogh_plus(Q, C, r, params):
    """
    LB_Keogh between the extended query and the extended candidate.
    It is a lower bound of dtw(Q, C, r) whenever |len(Q) - len(C)| <= r (otherwise that distance is infeasible).
    """
    return lb_keogh(envelope(extend(Q, params), r), extend(C, params))


def lb_kim(Q, C):
    q, c = values_of(Q), values_of(C)
    return float(max(abs(q[0] - c[0]),
                     abs(q[-1] - c[-1]),
                     abs(q.max() - c.max()),
                     abs(q.min() - c.min())))


def lb_yi(Q, C):
    """
    Q is the criterion: points of C above max(Q) or below min(Q) contribute their excess
    """
    q, c = values_of(Q), values_of(C)
    return envelope_excess(c, q.max(), q.min())


# relative and absolute rounding allowance between a bound and the DTW value it lower-bounds
PRUNE_RTOL = 1e-9
PRUNE_ATOL = 1e-12


def exceeds(bound, epsilon):
    """
    Whether a lower bound rules a candidate out of the epsilon range.
    Bounds and DTW sum the same terms in a different order, so a tight bound may round a few ulps above a DTW value
    equal to epsilon; such candidates are kept and DTW decides.
    :param bound: float or array of lower bounds
    """
    return bound > epsilon * (1 + PRUNE_RTOL) + PRUNE_ATOL
