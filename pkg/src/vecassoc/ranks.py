"""Rank-based pseudo-observations and empirical copulas.

Everything downstream (the five association estimators, resampling, the
rolling pipeline) consumes only the objects produced here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.stats import rankdata

from ._dominance import dominance_counts
from .exceptions import InvalidInputError


class Scaling(str, Enum):
    """Divisor applied to ranks: ``n`` (the empirical cdf) or ``n + 1``."""

    OVER_N = "over_n"
    OVER_N_PLUS_1 = "over_n_plus_1"


class TieMode(str, Enum):
    MIDRANK = "midrank"


@dataclass(frozen=True)
class VectorPartition:
    """Split of ``p + q`` columns into an X-block and a Y-block."""

    p: int
    q: int

    def __post_init__(self):
        if int(self.p) < 1 or int(self.q) < 1:
            raise InvalidInputError(f"partition needs p >= 1 and q >= 1, got p={self.p}, q={self.q}")

    @property
    def d(self) -> int:
        return self.p + self.q


@dataclass(frozen=True, eq=False)
class SampleMatrix:
    """``n`` observations of ``(X, Y)``; columns ``[:p]`` are X, ``[p:]`` are Y."""

    data: np.ndarray
    p: int
    q: int

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim != 2:
            raise InvalidInputError(f"sample must be a 2-d matrix, got ndim={arr.ndim}")
        VectorPartition(self.p, self.q)
        if arr.shape[1] != self.p + self.q:
            raise InvalidInputError(
                f"sample has {arr.shape[1]} columns but p + q = {self.p + self.q}"
            )
        if arr.shape[0] < 2:
            raise InvalidInputError(f"need at least 2 observations, got {arr.shape[0]}")
        bad = ~np.isfinite(arr)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise InvalidInputError(f"non-finite entry at row {r}, column {c}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "q", int(self.q))

    @classmethod
    def from_blocks(cls, x, y) -> SampleMatrix:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if y.ndim == 1:
            y = y[:, None]
        if x.shape[0] != y.shape[0]:
            raise InvalidInputError("X and Y blocks have different row counts")
        return cls(np.hstack([x, y]), x.shape[1], y.shape[1])

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def x(self) -> np.ndarray:
        return self.data[:, : self.p]

    @property
    def y(self) -> np.ndarray:
        return self.data[:, self.p :]

    @property
    def partition(self) -> VectorPartition:
        return VectorPartition(self.p, self.q)

    def swapped(self) -> SampleMatrix:
        """The same sample with the roles of X and Y exchanged."""
        return SampleMatrix(np.hstack([self.y, self.x]), self.q, self.p)

    def take(self, rows) -> SampleMatrix:
        return SampleMatrix(self.data[np.asarray(rows)], self.p, self.q)


@dataclass(frozen=True, eq=False)
class PseudoSample:
    """Pseudo-observations ``u`` (n x p) and ``v`` (n x q) in (0, 1].

    ``ranks`` keeps the mid-ranks the values were scaled from, so exact
    (integer) arithmetic stays available downstream.
    """

    u: np.ndarray
    v: np.ndarray
    tie_mode: TieMode = TieMode.MIDRANK
    scaling: Scaling = Scaling.OVER_N
    ranks: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.float64)
        v = np.asarray(self.v, dtype=np.float64)
        if u.ndim == 1:
            u = u[:, None]
        if v.ndim == 1:
            v = v[:, None]
        if u.shape[0] != v.shape[0]:
            raise InvalidInputError("u and v have different row counts")
        if u.shape[1] < 1 or v.shape[1] < 1:
            raise InvalidInputError("u and v need at least one column each")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "tie_mode", TieMode(self.tie_mode))
        object.__setattr__(self, "scaling", Scaling(self.scaling))
        if self.ranks is None:
            object.__setattr__(self, "ranks", np.hstack([u, v]) * self.denominator)

    @property
    def n(self) -> int:
        return self.u.shape[0]

    @property
    def p(self) -> int:
        return self.u.shape[1]

    @property
    def q(self) -> int:
        return self.v.shape[1]

    @property
    def denominator(self) -> int:
        return scaling_denominator(self.n, self.scaling)

    @property
    def values(self) -> np.ndarray:
        return np.hstack([self.u, self.v])

    def doubled_ranks(self) -> np.ndarray:
        """``2 * ranks`` as int64; exact because mid-ranks are half-integers."""
        return np.rint(2.0 * self.ranks).astype(np.int64)


def scaling_denominator(n: int, scaling) -> int:
    return n if Scaling(scaling) is Scaling.OVER_N else n + 1


def midranks(x, axis: int = 0) -> np.ndarray:
    """Ranks along ``axis`` with ties given the mean of the positions they occupy."""
    return np.ascontiguousarray(rankdata(x, method="average", axis=axis))


def pseudo_observations(
    sample: SampleMatrix, tie_mode=TieMode.MIDRANK, scaling=Scaling.OVER_N
) -> PseudoSample:
    """Column-wise mid-ranks divided by ``n`` (or ``n + 1``).

    Examples
    --------
    >>> s = SampleMatrix([[10.0, 1.0], [5.0, 1.0], [7.0, 2.0]], p=1, q=1)
    >>> pseudo_observations(s).values.tolist()
    [[1.0, 0.5], [0.3333333333333333, 0.5], [0.6666666666666666, 1.0]]
    """
    if not isinstance(sample, SampleMatrix):
        raise InvalidInputError("pseudo_observations expects a SampleMatrix")
    TieMode(tie_mode)
    scaling = Scaling(scaling)
    r = midranks(sample.data, axis=0)
    z = r / scaling_denominator(sample.n, scaling)
    return PseudoSample(z[:, : sample.p], z[:, sample.p :], tie_mode, scaling, ranks=r)


def empirical_copula(pseudo: PseudoSample, u, v):
    """Fraction of pseudo-observation rows componentwise below ``(u, v)``.

    ``u`` and ``v`` may be single points (shapes ``(p,)``, ``(q,)``) or stacks
    of ``m`` points (``(m, p)``, ``(m, q)``); a float or an ``(m,)`` array is
    returned accordingly.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    single = u.ndim == 1
    u2 = np.atleast_2d(u)
    v2 = np.atleast_2d(v)
    if u2.shape[1] != pseudo.p or v2.shape[1] != pseudo.q or u2.shape[0] != v2.shape[0]:
        raise InvalidInputError(
            f"query dimensions {u2.shape[1:]}/{v2.shape[1:]} do not match p={pseudo.p}, q={pseudo.q}"
        )
    if ((u2 < 0) | (u2 > 1) | (v2 < 0) | (v2 > 1)).any():
        raise InvalidInputError("query point must lie in [0, 1]^(p+q)")
    out = np.empty(u2.shape[0])
    for i in range(u2.shape[0]):
        below = (pseudo.u <= u2[i]).all(axis=1) & (pseudo.v <= v2[i]).all(axis=1)
        out[i] = np.count_nonzero(below) / pseudo.n
    return float(out[0]) if single else out


def pi_transform(block) -> np.ndarray:
    """Row-wise ``prod_i (1 - block[:, i])``.

    Factors are sorted before multiplying so the result does not depend on
    column order, bit for bit.
    """
    b = np.asarray(block, dtype=np.float64)
    if b.ndim == 1:
        b = b[:, None]
    return np.prod(np.sort(1.0 - b, axis=-1), axis=-1)


def marginal_copula_scores(pseudo: PseudoSample) -> tuple[np.ndarray, np.ndarray]:
    """Empirical marginal copulas at the sample points, ``A_n(U_k)`` and ``B_n(V_k)``."""
    a = dominance_counts(pseudo.u) / pseudo.n
    b = dominance_counts(pseudo.v) / pseudo.n
    return a, b
