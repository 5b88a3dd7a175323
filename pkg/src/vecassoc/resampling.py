"""Bootstrap and jackknife standard errors for any of the measures.

Resampling acts on raw rows; every resample is re-ranked (mid-ranks) before
the estimator runs, so ties created by drawing a row twice are handled the
same way as ties in the data.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .copulas import child_seed
from .estimators import estimate_raw_batch
from .exceptions import DegenerateInputError, InvalidInputError
from .measures import RANK_MEASURES, check_measure, estimate_batch
from .ranks import SampleMatrix, Scaling, midranks

log = logging.getLogger(__name__)

_JACK_CHUNK_ELEMS = 4_000_000
_U64 = 2**64


@dataclass(frozen=True)
class ResamplingConfig:
    method: str = "bootstrap"
    b_iterations: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("bootstrap", "jackknife"):
            raise InvalidInputError(f"unknown resampling method {self.method!r}")
        if self.method == "bootstrap" and int(self.b_iterations) < 2:
            raise InvalidInputError("bootstrap needs b_iterations >= 2")
        if not 0 <= int(self.seed) < _U64:
            raise InvalidInputError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class BootstrapResult:
    se: float
    estimates: np.ndarray
    rejected: int


def bootstrap_estimates(data, p, measure, convention, scaling, b_iterations, seed):
    """Replicate estimates for ``b_iterations`` resamples of the rows of ``data``.

    Replicate ``b``, attempt ``k`` draws its row indices from the substream
    ``(seed, b, k)``; a degenerate replicate is redrawn with ``k + 1``.
    Returns ``(estimates, rejected)``.
    """
    data = np.asarray(data, dtype=np.float64)
    n = data.shape[0]
    out = np.full(b_iterations, np.nan)
    attempt = np.zeros(b_iterations, dtype=np.int64)
    todo = np.arange(b_iterations)
    rejected = 0
    while todo.size:
        idx = np.stack(
            [np.random.default_rng(child_seed(seed, b, attempt[b])).integers(0, n, n) for b in todo]
        )
        vals = estimate_raw_batch(data[idx], p, measure, convention, scaling)
        ok = np.isfinite(vals)
        out[todo[ok]] = vals[ok]
        todo = todo[~ok]
        rejected += todo.size
        attempt[todo] += 1
        if rejected > b_iterations:
            raise DegenerateInputError(
                f"{measure}: more than half of the bootstrap resamples were degenerate ({rejected} rejected)"
            )
    return out, rejected


def bootstrap(
    sample: SampleMatrix, measure: str, convention=None, config: ResamplingConfig | None = None,
    scaling=Scaling.OVER_N,
) -> BootstrapResult:
    """Bootstrap standard deviation (divisor ``B - 1``) of an estimator."""
    check_measure(measure)
    config = config or ResamplingConfig()
    if config.method != "bootstrap":
        raise InvalidInputError("bootstrap() needs a config with method='bootstrap'")
    est, rejected = bootstrap_estimates(
        sample.data, sample.p, measure, convention, scaling, int(config.b_iterations), config.seed
    )
    if rejected:
        log.info("%s: %d degenerate bootstrap resamples redrawn", measure, rejected)
    return BootstrapResult(_spread(est, ddof=1), est, rejected)


def bootstrap_se(sample, measure, convention=None, config=None, scaling=Scaling.OVER_N) -> float:
    return bootstrap(sample, measure, convention, config, scaling).se


def _loo_ranks(data, ranks, rows):
    # mid-ranks without row j: drop 1 per strictly smaller removed value, 1/2 per tie
    n, d = data.shape
    removed = data[rows][:, None, :]
    adj = ranks[None] - (removed < data[None]) - 0.5 * (removed == data[None])
    keep = np.ones((len(rows), n), dtype=bool)
    keep[np.arange(len(rows)), rows] = False
    return adj[keep].reshape(len(rows), n - 1, d)


def jackknife_estimates(data, p, measure, convention, scaling) -> np.ndarray:
    """Leave-one-out estimates; entry ``j`` omits row ``j``."""
    data = np.asarray(data, dtype=np.float64)
    n, d = data.shape
    chunk = max(1, _JACK_CHUNK_ELEMS // max(1, n * d))
    out = np.empty(n)
    rank_based = measure in RANK_MEASURES
    if rank_based:
        ranks = midranks(data, axis=0)
    for start in range(0, n, chunk):
        rows = np.arange(start, min(n, start + chunk))
        if rank_based:
            out[rows] = estimate_batch(_loo_ranks(data, ranks, rows), p, measure, convention, scaling)
        else:
            stack = np.stack([np.delete(data, j, axis=0) for j in rows])
            out[rows] = estimate_raw_batch(stack, p, measure, convention, scaling)
    return out


def _spread(est, ddof) -> float:
    if np.ptp(est) == 0:
        return 0.0  # the rounded mean of equal values need not equal them
    return float(np.std(est, ddof=ddof))


def jackknife_se_from_estimates(est) -> float:
    est = np.sort(np.asarray(est, dtype=np.float64))  # canonical order: exact permutation invariance
    n = est.size
    if np.ptp(est) == 0:
        return 0.0
    dev = est - est.mean()
    return float(np.sqrt((n - 1) / n * np.sum(dev * dev)))


def jackknife_se(sample: SampleMatrix, measure: str, convention=None, scaling=Scaling.OVER_N) -> float:
    """Jackknife standard deviation ``sqrt((n-1)/n * sum_j (est_j - mean)^2)``."""
    check_measure(measure)
    if sample.n < 3:
        raise InvalidInputError("jackknife needs n >= 3")
    est = jackknife_estimates(sample.data, sample.p, measure, convention, scaling)
    bad = np.flatnonzero(~np.isfinite(est))
    if bad.size:
        raise DegenerateInputError(f"{measure} is degenerate when row {bad[0]} is left out")
    return jackknife_se_from_estimates(est)


def standard_error(sample, measure, config: ResamplingConfig, convention=None, scaling=Scaling.OVER_N) -> float:
    if config.method == "bootstrap":
        return bootstrap_se(sample, measure, convention, config, scaling)
    return jackknife_se(sample, measure, convention, scaling)
