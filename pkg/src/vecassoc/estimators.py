"""Uniform entry point from raw samples to any of the eight measures."""

from __future__ import annotations

import numpy as np

from .baselines import BASELINES
from .exceptions import DegenerateInputError
from .measures import (
    RANK_MEASURES,
    MeasureEstimate,
    check_measure,
    estimate_batch,
    estimate_pseudo,
    resolve_convention,
)
from .ranks import SampleMatrix, Scaling, midranks, pseudo_observations


def estimate(sample: SampleMatrix, measure: str, convention=None, scaling=Scaling.OVER_N) -> MeasureEstimate:
    """Estimate ``measure`` on a raw sample.

    Rank-based measures go through pseudo-observations; ``cca``, ``rv`` and
    ``dcor`` use the raw values.
    """
    check_measure(measure)
    if measure in RANK_MEASURES:
        return estimate_pseudo(pseudo_observations(sample, scaling=scaling), measure, convention)
    value = BASELINES[measure](sample)
    return MeasureEstimate(measure, value, sample.n, resolve_convention(measure))


def estimate_raw_batch(data, p: int, measure: str, convention=None, scaling=Scaling.OVER_N) -> np.ndarray:
    """Estimate ``measure`` on each sample of a stack ``(m, n, p + q)``.

    Each sample is ranked independently (mid-ranks).  Degenerate samples give
    NaN instead of raising.
    """
    data = np.asarray(data, dtype=np.float64)
    check_measure(measure)
    if measure in RANK_MEASURES:
        return estimate_batch(midranks(data, axis=1), p, measure, convention, scaling)
    func = BASELINES[measure]
    out = np.empty(data.shape[0])
    q = data.shape[2] - p
    for i, x in enumerate(data):
        try:
            out[i] = func(SampleMatrix(x, p, q))
        except DegenerateInputError:
            out[i] = np.nan
    return out
