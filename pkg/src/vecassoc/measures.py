"""The five copula-based association estimators between two random vectors.

All estimators work from pseudo-observations only.  Internally every
estimator is evaluated on a stack of mid-rank matrices of shape
``(m, n, p + q)`` so that resampling and simulation studies run through
exactly the same code as single estimates.

Two conventions exist for the rank-correlation-type estimators:

``paper_literal``
    ``12 * mean((1 - s_k) (1 - t_k)) - 3`` on scaled ranks ``s, t``.  Its
    maximum is ``1 - 6/n + 2/n**2`` under ``over_n`` scaling and
    ``(n - 1)/(n + 1)`` under ``over_n_plus_1``.
``normalized``
    Pearson correlation of the same rank vectors (classical Spearman).

``rho1`` and ``rho2`` are Pearson correlations by definition and are always
reported as ``normalized``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from math import comb

import numpy as np

from ._dominance import dominance_counts_batch
from .exceptions import DegenerateInputError, InvalidInputError
from .ranks import PseudoSample, Scaling, midranks, pi_transform, scaling_denominator

RANK_MEASURES = ("rho_bar", "rho1", "rho2", "rho3", "rho4")
BASELINE_MEASURES = ("cca", "rv", "dcor")
ALL_MEASURES = RANK_MEASURES + BASELINE_MEASURES


class Convention(str, Enum):
    PAPER_LITERAL = "paper_literal"
    NORMALIZED = "normalized"


DEFAULT_CONVENTION = {
    "rho_bar": Convention.NORMALIZED,
    "rho1": Convention.NORMALIZED,
    "rho2": Convention.NORMALIZED,
    "rho3": Convention.PAPER_LITERAL,
    "rho4": Convention.PAPER_LITERAL,
    "cca": Convention.NORMALIZED,
    "rv": Convention.NORMALIZED,
    "dcor": Convention.NORMALIZED,
}

# int64 headroom for the literal sums; beyond it fall back to float64
_INT_LIMIT = 2**62
_EXACT_FLOAT_INT = 2**53


def resolve_convention(measure: str, convention=None) -> Convention:
    """Convention actually used for ``measure`` given a request (``None`` = default)."""
    check_measure(measure)
    if measure in ("rho1", "rho2") or measure in BASELINE_MEASURES:
        return Convention.NORMALIZED
    if convention is None:
        return DEFAULT_CONVENTION[measure]
    return Convention(convention)


def check_measure(measure: str) -> str:
    if measure not in ALL_MEASURES:
        raise InvalidInputError(f"unknown measure {measure!r}; expected one of {', '.join(ALL_MEASURES)}")
    return measure


@dataclass(frozen=True)
class StandardError:
    value: float
    method: str  # "bootstrap" | "jackknife"

    def __post_init__(self):
        if self.method not in ("bootstrap", "jackknife"):
            raise InvalidInputError(f"unknown standard-error method {self.method!r}")
        if not self.value >= 0:
            raise InvalidInputError("standard error must be non-negative")


@dataclass(frozen=True)
class MeasureEstimate:
    measure_id: str
    value: float
    n: int
    convention: Convention
    se: StandardError | None = None

    def with_se(self, value: float, method: str) -> MeasureEstimate:
        return MeasureEstimate(self.measure_id, self.value, self.n, self.convention, StandardError(value, method))


@dataclass(frozen=True)
class SpearmanMatrix:
    values: np.ndarray  # (p, q)


@dataclass(frozen=True)
class Decomposition:
    rho_z: float
    between: float
    within_x: float
    within_y: float
    weights: tuple[Fraction, Fraction, Fraction]

    def reconstruct(self) -> float:
        wb, wx, wy = (float(w) for w in self.weights)
        return wb * self.between + wx * self.within_x + wy * self.within_y


def literal_ceiling(n: int, scaling=Scaling.OVER_N) -> float:
    """Largest attainable value of a ``paper_literal`` rank coefficient."""
    if Scaling(scaling) is Scaling.OVER_N:
        return float(Fraction(n * n - 6 * n + 2, n * n))
    return float(Fraction(n - 1, n + 1))


# ----------------------------------------------------------------------------
# batched kernels; all take arrays with the observation axis at -2 (or -1 for
# score vectors) and return NaN where an estimator is degenerate


def _pearson(a, b):
    """Pearson correlation along the last axis; NaN if either input is constant."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ca = a - a.mean(axis=-1, keepdims=True)
    cb = b - b.mean(axis=-1, keepdims=True)
    num = (ca * cb).sum(axis=-1)
    den = np.sqrt((ca * ca).sum(axis=-1) * (cb * cb).sum(axis=-1))
    const = (np.ptp(a, axis=-1) == 0) | (np.ptp(b, axis=-1) == 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = num / den
    r = np.clip(r, -1.0, 1.0)
    return np.where(const, np.nan, r)


def _literal_value(total, n, denom, pairs=1):
    """``12 * total / (4 n N^2 pairs) - 3`` with ``total`` a sum of doubled-rank products.

    Integer totals small enough for exact float conversion are combined into
    one integer numerator, so the result is the correctly rounded rational.
    """
    total = np.asarray(total)
    den = n * denom * denom * pairs
    if total.dtype.kind == "i" and 12 * den < _EXACT_FLOAT_INT:
        num = 3 * (total - den)
        return num.astype(np.float64) / float(den)
    return 12.0 * total.astype(np.float64) / (4.0 * den) - 3.0


def _rank_pearson(ra, rb):
    """Pearson correlation of mid-ranks along the last axis.

    Centered doubled mid-ranks ``2r - (n + 1)`` are integers, so the three
    sums are exact and perfectly associated columns give exactly +-1.
    """
    n = ra.shape[-1]
    if n**3 >= _INT_LIMIT:
        return _pearson(ra, rb)
    ca = _doubled(ra) - (n + 1)
    cb = _doubled(rb) - (n + 1)
    num = (ca * cb).sum(axis=-1).astype(np.float64)
    vx = (ca * ca).sum(axis=-1).astype(np.float64)
    vy = (cb * cb).sum(axis=-1).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.clip(num / np.sqrt(vx * vy), -1.0, 1.0)
    return np.where((vx == 0) | (vy == 0), np.nan, r)


def _use_int(n, denom, pairs=1):
    return n * (2 * denom) ** 2 * pairs < _INT_LIMIT


def _literal_pair_sums(w_x, w_y, use_int):
    # w_*: complemented doubled ranks (m, n, k); returns (m, p, q)
    if use_int:
        return np.einsum("mni,mnj->mij", w_x, w_y)
    return np.einsum("mni,mnj->mij", w_x.astype(np.float64), w_y.astype(np.float64))


def _doubled(r):
    return np.rint(2.0 * np.asarray(r)).astype(np.int64)


def _spearman_matrix_batch(ranks, p, convention, denom):
    """(m, n, d) mid-ranks -> (m, p, q) Spearman coefficients."""
    m, n, d = ranks.shape
    if convention is Convention.PAPER_LITERAL:
        w = 2 * denom - _doubled(ranks)
        s = _literal_pair_sums(w[..., :p], w[..., p:], _use_int(n, denom))
        return _literal_value(s, n, denom)
    if n**3 >= _INT_LIMIT:
        c = ranks - ranks.mean(axis=1, keepdims=True)
        norm = np.sqrt((c * c).sum(axis=1, keepdims=True))
        const = np.ptp(ranks, axis=1) == 0  # (m, d)
        with np.errstate(invalid="ignore", divide="ignore"):
            z = c / norm
        out = np.clip(np.einsum("mni,mnj->mij", z[..., :p], z[..., p:]), -1.0, 1.0)
        bad = const[:, :p, None] | const[:, None, p:]
        return np.where(bad, np.nan, out)
    # exact integer sums, as in _rank_pearson
    c = _doubled(ranks) - (n + 1)
    num = np.einsum("mni,mnj->mij", c[..., :p], c[..., p:]).astype(np.float64)
    ss = (c * c).sum(axis=1).astype(np.float64)  # (m, d)
    den = np.sqrt(ss[:, :p, None] * ss[:, None, p:])
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.clip(num / den, -1.0, 1.0)
    return np.where(den == 0, np.nan, out)


def _rank_coefficient(sa, sb, convention, denom):
    """Spearman-type coefficient of two score stacks (m, n) via their mid-ranks."""
    ra = midranks(sa, axis=-1)
    rb = midranks(sb, axis=-1)
    if convention is Convention.NORMALIZED:
        return _rank_pearson(ra, rb)
    n = sa.shape[-1]
    wa = 2 * denom - _doubled(ra)
    wb = 2 * denom - _doubled(rb)
    if _use_int(n, denom):
        total = (wa * wb).sum(axis=-1)
    else:
        total = (wa.astype(np.float64) * wb.astype(np.float64)).sum(axis=-1)
    return _literal_value(total, n, denom)


def _rho_bar_batch(ranks, p, convention, denom):
    m, n, d = ranks.shape
    q = d - p
    if convention is Convention.PAPER_LITERAL:
        w = 2 * denom - _doubled(ranks)
        use_int = _use_int(n, denom, p * q)
        s = _literal_pair_sums(w[..., :p], w[..., p:], use_int)
        return _literal_value(s.sum(axis=(1, 2)), n, denom, p * q)
    return _spearman_matrix_batch(ranks, p, convention, denom).mean(axis=(1, 2))


def _pi_scores(ranks, p, denom):
    u = ranks / denom
    return pi_transform(u[..., :p]), pi_transform(u[..., p:])


def _pi_keys(ranks, p, denom):
    """Ranking keys proportional to the pi-scores of each block.

    ``prod(1 - u)`` is ``prod(w) / (2 denom)^k`` with integer ``w = 2 denom -
    2 r``, so the integer product orders rows exactly.  When it could
    overflow, sorted factors are multiplied in floating point, which at
    least keeps the keys independent of column order.
    """
    w = 2 * denom - _doubled(ranks)

    def key(block):
        k = block.shape[-1]
        if float(2 * denom) ** k < _INT_LIMIT:
            return np.prod(block, axis=-1)
        return np.prod(np.sort(block, axis=-1).astype(np.float64), axis=-1)

    return key(w[..., :p]), key(w[..., p:])


def _copula_scores(ranks, p):
    return dominance_counts_batch(ranks[..., :p]), dominance_counts_batch(ranks[..., p:])


def estimate_batch(ranks, p: int, measure: str, convention=None, scaling=Scaling.OVER_N) -> np.ndarray:
    """Evaluate one rank-based measure on a stack of mid-rank matrices.

    Parameters
    ----------
    ranks : ndarray, shape (m, n, p + q)
        Column-wise mid-ranks (1..n) of ``m`` samples.
    p : int
        Width of the X-block.
    measure : {"rho_bar", "rho1", "rho2", "rho3", "rho4"}
    convention : Convention or str, optional
        Defaults per measure, see ``DEFAULT_CONVENTION``.
    scaling : Scaling or str
        Rank divisor used for pseudo-observations and transformed scores.

    Returns
    -------
    ndarray, shape (m,)
        NaN marks samples on which the estimator is degenerate.
    """
    # fixed memory layout keeps reductions (and so results) independent of the caller
    ranks = np.ascontiguousarray(ranks, dtype=np.float64)
    if ranks.ndim == 2:
        ranks = ranks[None]
    m, n, d = ranks.shape
    if not 1 <= p < d:
        raise InvalidInputError(f"invalid X-block width p={p} for {d} columns")
    if measure not in RANK_MEASURES:
        raise InvalidInputError(f"{measure!r} is not a rank-based measure")
    conv = resolve_convention(measure, convention)
    denom = scaling_denominator(n, scaling)
    if measure == "rho_bar":
        return _rho_bar_batch(ranks, p, conv, denom)
    if measure == "rho1":
        a, b = _pi_scores(ranks, p, denom)
        return _pearson(a, b)
    if measure == "rho2":
        a, b = _copula_scores(ranks, p)
        return _pearson(a, b)
    if measure == "rho3":
        a, b = _pi_keys(ranks, p, denom)
    else:
        a, b = _copula_scores(ranks, p)
    return _rank_coefficient(a, b, conv, denom)


# ----------------------------------------------------------------------------
# single-sample API


def _ranks_of(pseudo: PseudoSample):
    return np.hstack([pseudo.ranks[:, : pseudo.p], pseudo.ranks[:, pseudo.p :]])[None]


def _finish(pseudo, measure, conv, value, what):
    if not np.isfinite(value):
        raise DegenerateInputError(f"{measure} is undefined: {what}")
    return MeasureEstimate(measure, float(value), pseudo.n, conv)


def pairwise_spearman(pseudo: PseudoSample, convention=Convention.NORMALIZED) -> SpearmanMatrix:
    """Spearman coefficient of every X column against every Y column."""
    conv = Convention(convention)
    vals = _spearman_matrix_batch(_ranks_of(pseudo), pseudo.p, conv, pseudo.denominator)[0]
    if np.isnan(vals).any():
        raise DegenerateInputError("constant column: Spearman correlation undefined")
    return SpearmanMatrix(vals)


def rho_bar(pseudo: PseudoSample, convention=Convention.NORMALIZED) -> MeasureEstimate:
    """Mean of the ``p * q`` pairwise Spearman coefficients."""
    conv = Convention(convention)
    v = _rho_bar_batch(_ranks_of(pseudo), pseudo.p, conv, pseudo.denominator)[0]
    return _finish(pseudo, "rho_bar", conv, v, "constant column")


def _within_mean(ranks, conv, denom):
    k = ranks.shape[1]
    if k < 2:
        return 0.0
    vals = []
    for i in range(k - 1):
        sub = np.concatenate([ranks[:, [i]], ranks[:, i + 1 :]], axis=1)[None]
        vals.append(_spearman_matrix_batch(sub, 1, conv, denom)[0, 0])
    vals = np.concatenate([np.atleast_1d(v) for v in vals])
    if np.isnan(vals).any():
        raise DegenerateInputError("constant column: Spearman correlation undefined")
    return float(vals.mean())


def decompose_total(pseudo: PseudoSample, convention=Convention.NORMALIZED) -> Decomposition:
    """Split average association within ``Z = (X, Y)`` into between and within parts.

    Weights are ``pq``, ``C(p, 2)`` and ``C(q, 2)`` over ``C(p + q, 2)`` and are
    returned as exact fractions.
    """
    conv = Convention(convention)
    p, q = pseudo.p, pseudo.q
    total = comb(p + q, 2)
    weights = (Fraction(p * q, total), Fraction(comb(p, 2), total), Fraction(comb(q, 2), total))
    between = pairwise_spearman(pseudo, conv).values.mean()
    wx = _within_mean(pseudo.ranks[:, :p], conv, pseudo.denominator)
    wy = _within_mean(pseudo.ranks[:, p:], conv, pseudo.denominator)
    allpairs = _within_mean(pseudo.ranks, conv, pseudo.denominator)
    return Decomposition(allpairs, float(between), wx, wy, weights)


def rho1(pseudo: PseudoSample) -> MeasureEstimate:
    """Pearson correlation of ``prod(1 - U_i)`` and ``prod(1 - V_j)`` over rows."""
    a, b = pi_transform(pseudo.u), pi_transform(pseudo.v)
    return _finish(pseudo, "rho1", Convention.NORMALIZED, _pearson(a, b), "constant product transform")


def rho2(pseudo: PseudoSample) -> MeasureEstimate:
    v = estimate_batch(_ranks_of(pseudo), pseudo.p, "rho2", scaling=pseudo.scaling)[0]
    return _finish(pseudo, "rho2", Convention.NORMALIZED, v, "constant marginal copula score")


def rho3(pseudo: PseudoSample, convention=Convention.PAPER_LITERAL) -> MeasureEstimate:
    """Spearman coefficient of the ranked product transforms of U and V."""
    conv = Convention(convention)
    v = estimate_batch(_ranks_of(pseudo), pseudo.p, "rho3", conv, pseudo.scaling)[0]
    return _finish(pseudo, "rho3", conv, v, "all product transforms tied")


def rho4(pseudo: PseudoSample, convention=Convention.PAPER_LITERAL) -> MeasureEstimate:
    """Spearman coefficient of the ranked marginal-copula scores ``A_n(U)``, ``B_n(V)``."""
    conv = Convention(convention)
    v = estimate_batch(_ranks_of(pseudo), pseudo.p, "rho4", conv, pseudo.scaling)[0]
    return _finish(pseudo, "rho4", conv, v, "all marginal copula scores tied")


def estimate_pseudo(pseudo: PseudoSample, measure: str, convention=None) -> MeasureEstimate:
    """Dispatch to one of the five estimators by id."""
    conv = resolve_convention(measure, convention)
    if measure == "rho_bar":
        return rho_bar(pseudo, conv)
    if measure == "rho1":
        return rho1(pseudo)
    if measure == "rho2":
        return rho2(pseudo)
    if measure == "rho3":
        return rho3(pseudo, conv)
    if measure == "rho4":
        return rho4(pseudo, conv)
    raise InvalidInputError(f"{measure!r} is not a rank-based measure")
