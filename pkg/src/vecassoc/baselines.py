"""Classical comparison measures: canonical correlation, RV coefficient, distance correlation.

All three work on the raw sample (not on ranks), are direction-blind and lie
in ``[0, 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .exceptions import DegenerateInputError, InvalidInputError
from .ranks import SampleMatrix

DCOR_MAX_N = 20_000
_DCOR_CHUNK = 1024


@dataclass(frozen=True)
class CrossCovariance:
    sxx: np.ndarray
    syy: np.ndarray
    sxy: np.ndarray

    @classmethod
    def of(cls, sample: SampleMatrix) -> CrossCovariance:
        s = np.cov(sample.data, rowvar=False, ddof=1)
        s = np.atleast_2d(s)
        p = sample.p
        return cls(s[:p, :p], s[p:, p:], s[:p, p:])


def _inv_sqrt(s, name):
    s = (s + s.T) / 2
    lam, vec = np.linalg.eigh(s)
    top = lam.max()
    if not top > 0:
        raise DegenerateInputError(f"{name} covariance block is zero")
    if lam.min() < 1e-12 * top:
        eps = 1e-10 * np.trace(s) / s.shape[0]
        lam = lam + eps
    if lam.min() <= 0:
        raise DegenerateInputError(f"{name} covariance block is rank deficient")
    return (vec / np.sqrt(lam)) @ vec.T


def canonical_correlation(sample: SampleMatrix) -> float:
    """Largest canonical correlation between the X- and Y-blocks.

    Computed as the top singular value of ``Sxx^{-1/2} Sxy Syy^{-1/2}``, which
    equals the square root of the top eigenvalue of
    ``Sxx^{-1} Sxy Syy^{-1} Syx``.  Near-singular blocks get a ridge of
    ``1e-10 * trace / dim``.
    """
    cc = CrossCovariance.of(sample)
    kx = _inv_sqrt(cc.sxx, "X")
    ky = _inv_sqrt(cc.syy, "Y")
    sv = np.linalg.svd(kx @ cc.sxy @ ky, compute_uv=False)
    return float(np.clip(sv[0], 0.0, 1.0))


def rv_coefficient(sample: SampleMatrix) -> float:
    """``tr(Sxy Syx) / sqrt(tr(Sxx^2) tr(Syy^2))``."""
    cc = CrossCovariance.of(sample)
    vx = np.sum(cc.sxx * cc.sxx)
    vy = np.sum(cc.syy * cc.syy)
    if vx == 0 or vy == 0:
        raise DegenerateInputError("RV coefficient undefined: a block has zero variance")
    return float(np.clip(np.sum(cc.sxy * cc.sxy) / np.sqrt(vx * vy), 0.0, 1.0))


def _centered_moments(x, y):
    n = x.shape[0]
    row_a = np.empty(n)
    row_b = np.empty(n)
    for i in range(0, n, _DCOR_CHUNK):
        row_a[i : i + _DCOR_CHUNK] = cdist(x[i : i + _DCOR_CHUNK], x).mean(axis=1)
        row_b[i : i + _DCOR_CHUNK] = cdist(y[i : i + _DCOR_CHUNK], y).mean(axis=1)
    ga, gb = row_a.mean(), row_b.mean()
    sab = saa = sbb = 0.0
    for i in range(0, n, _DCOR_CHUNK):
        sl = slice(i, i + _DCOR_CHUNK)
        a = cdist(x[sl], x) - row_a[sl, None] - row_a[None, :] + ga
        b = cdist(y[sl], y) - row_b[sl, None] - row_b[None, :] + gb
        sab += np.sum(a * b)
        saa += np.sum(a * a)
        sbb += np.sum(b * b)
    return sab / n**2, saa / n**2, sbb / n**2


def distance_correlation(sample: SampleMatrix) -> float:
    """Biased (V-statistic) distance correlation of the X- and Y-block rows.

    Memory is ``O(n * chunk)``; time is ``O(n^2)``, so ``n`` is capped at
    ``DCOR_MAX_N``.
    """
    n = sample.n
    if n < 3:
        raise InvalidInputError("distance correlation needs n >= 3")
    if n > DCOR_MAX_N:
        raise InvalidInputError(f"distance correlation is O(n^2); n={n} exceeds {DCOR_MAX_N}")
    x, y = sample.x, sample.y
    if np.ptp(x, axis=0).max() == 0 or np.ptp(y, axis=0).max() == 0:
        raise DegenerateInputError("distance correlation undefined: a block has all rows identical")
    dcov2, dvx2, dvy2 = _centered_moments(x, y)
    dcov2 = max(dcov2, 0.0)
    return float(np.clip(np.sqrt(dcov2 / np.sqrt(dvx2 * dvy2)), 0.0, 1.0))


BASELINES = {
    "cca": canonical_correlation,
    "rv": rv_coefficient,
    "dcor": distance_correlation,
}
