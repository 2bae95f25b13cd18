"""
Piecewise aggregate approximation of extended sequences and the index-level lower bounds LB_PAA and LB_MBR.

All distances carry the scale factor lmax / n_paa (the segment length), so that with n_paa == lmax they coincide
with their full-resolution counterparts.
"""
from dataclasses import dataclass

import numpy as np

from dtwindex.core_dtw import values_of
from dtwindex.errors import UsageError
from dtwindex.lower_bounds import envelope_excess


def _frozen(values):
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PaaVector:
    coords: np.ndarray
    n_paa: int
    lmax: int

    def __post_init__(self):
        object.__setattr__(self, 'coords', _frozen(self.coords))
        if self.coords.shape != (self.n_paa,):
            raise UsageError(f'PAA vector must have {self.n_paa} coordinates, got shape {self.coords.shape}')
        if self.lmax % self.n_paa:
            raise UsageError(f'lmax={self.lmax} is not a multiple of n_paa={self.n_paa}')

    @property
    def scale(self):
        return self.lmax / self.n_paa


@dataclass(frozen=True, eq=False)
class Mbr:
    low: np.ndarray
    high: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'low', _frozen(self.low))
        object.__setattr__(self, 'high', _frozen(self.high))
        if self.low.shape != self.high.shape or self.low.ndim != 1:
            raise UsageError('MBR boundaries must be one-dimensional and of equal size')
        if np.any(self.low > self.high):
            raise UsageError('MBR low boundary exceeds its high boundary')

    @property
    def dim(self):
        return self.low.shape[0]

    @classmethod
    def of_points(cls, points):
        """
        :param points: 2D array (k x n_paa) of PAA coordinates
        """
        points = np.asarray(points, dtype=np.float64)
        return cls(points.min(axis=0), points.max(axis=0))

    @classmethod
    def union(cls, boxes):
        return cls(np.min([b.low for b in boxes], axis=0), np.max([b.high for b in boxes], axis=0))

    @property
    def center(self):
        return (self.low + self.high) / 2


@dataclass(frozen=True)
class PaaEnvelope:
    upper: PaaVector
    lower: PaaVector

    def __post_init__(self):
        if self.upper.n_paa != self.lower.n_paa or self.upper.lmax != self.lower.lmax:
            raise UsageError('upper and lower PAA envelopes differ in shape')
        if np.any(self.lower.coords > self.upper.coords):
            raise UsageError('lower PAA envelope exceeds the upper one')

    @property
    def n_paa(self):
        return self.upper.n_paa

    @property
    def lmax(self):
        return self.upper.lmax

    @property
    def scale(self):
        return self.upper.scale


def paa_transform(X, n_paa):
    """
    Segment means of an (extended) sequence whose length is a multiple of n_paa
    :return: PaaVector
    """
    x = values_of(X)
    if n_paa < 1 or x.shape[0] % n_paa:
        raise UsageError(f'sequence length {x.shape[0]} is not divisible by n_paa={n_paa}; extend it first')
    return PaaVector(x.reshape(n_paa, -1).mean(axis=1), n_paa, x.shape[0])


def _check_compatible(a, b):
    if a.n_paa != b.n_paa or a.lmax != b.lmax:
        raise UsageError(f'PAA shapes differ: (n_paa={a.n_paa}, lmax={a.lmax}) vs (n_paa={b.n_paa}, lmax={b.lmax})')


def d_paa(qbar, cbar):
    _check_compatible(qbar, cbar)
    return qbar.scale * float(np.sum(np.abs(qbar.coords - cbar.coords)))


def paa_envelope(env, n_paa):
    """
    :param env: Envelope of an extended query
    :param n_paa: number of segments
    :return: PaaEnvelope
    """
    return PaaEnvelope(paa_transform(env.upper, n_paa), paa_transform(env.lower, n_paa))


def lb_paa(penv, cbar):
    _check_compatible(penv.upper, cbar)
    return penv.scale * envelope_excess(cbar.coords, penv.upper.coords, penv.lower.coords)


def lb_mbr(penv, box):
    """
    Scaled minimum per-dimension separation between the PAA envelope intervals and the box slabs.
    Never exceeds lb_paa(penv, cbar) for any cbar inside the box.
    """
    if box.dim != penv.n_paa:
        raise UsageError(f'MBR has {box.dim} dimensions, PAA envelope {penv.n_paa}')
    gaps = np.maximum(penv.lower.coords - box.high, 0.0) + np.maximum(box.low - penv.upper.coords, 0.0)
    return penv.scale * float(np.sum(gaps))
