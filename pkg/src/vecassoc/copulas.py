"""Copula samplers used by the simulation studies, plus large-sample population values.

Sampling is deterministic in ``(seed, row index)``: rows are produced in
fixed-size blocks, each block drawing from its own ``SeedSequence`` children.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .exceptions import InvalidInputError, ParameterError
from .ranks import SampleMatrix, Scaling

KINDS = (
    "gaussian_general",
    "gaussian_equicorr",
    "clayton",
    "independence",
    "comonotone",
    "example1",
    "example2",
)

BLOCK_ROWS = 65_536
_LO = 2.0**-53
_HI = 1.0 - 2.0**-53
_PSD_TOL = 1e-10


def spearman_to_pearson(rho_s):
    """Pearson correlation of a bivariate normal with Spearman coefficient ``rho_s``."""
    return 2.0 * np.sin(np.pi * np.asarray(rho_s, dtype=np.float64) / 6.0)


def pearson_to_spearman(r):
    return 6.0 / np.pi * np.arcsin(np.asarray(r, dtype=np.float64) / 2.0)


def example1_spearman_matrix(a: float, b: float) -> np.ndarray:
    """Target Spearman matrix of the example1 model: within-block ``a``, cross-block ``+-b``."""
    return np.array(
        [
            [1.0, a, b, b],
            [a, 1.0, -b, -b],
            [b, -b, 1.0, a],
            [b, -b, a, 1.0],
        ]
    )


def example1_correlation(a: float, b: float) -> np.ndarray:
    """Gaussian correlation matrix used to realise the example1 Spearman target.

    Entries are ``2 sin(pi rho / 6)`` of the target.  When that matrix is not
    positive semi-definite (it is not for ``a = 0.6, b = 0.4``), negative
    eigenvalues are clipped to zero and the diagonal rescaled to one.  The
    repair keeps the sign pattern, so cross-block entries stay ``+-b'`` and
    their mean is still exactly zero.
    """
    m = spearman_to_pearson(example1_spearman_matrix(a, b))
    lam, vec = np.linalg.eigh(m)
    if lam.min() >= 0:
        return m
    c = (vec * np.clip(lam, 0.0, None)) @ vec.T
    s = np.sqrt(np.diag(c))
    c = c / np.outer(s, s)
    c = (c + c.T) / 2
    np.fill_diagonal(c, 1.0)
    return c


def block_correlation(within: float, between: float, p: int = 2, q: int = 2) -> np.ndarray:
    """Correlation matrix with ``within`` inside each block and ``between`` across blocks."""
    d = p + q
    m = np.full((d, d), float(between))
    m[:p, :p] = within
    m[p:, p:] = within
    np.fill_diagonal(m, 1.0)
    return m


@dataclass(frozen=True)
class CopulaSpec:
    """Generative model for ``(U, V)`` with ``U`` of width ``p`` and ``V`` of width ``q``.

    Prefer the constructors (``gaussian``, ``equicorrelated``, ``clayton`` ...)
    over building instances directly.
    """

    kind: str
    p: int
    q: int
    theta: float | None = None
    corr: tuple[tuple[float, ...], ...] | None = None
    a: float | None = None
    b: float | None = None
    _factor: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown copula kind {self.kind!r}")
        if int(self.p) < 1 or int(self.q) < 1:
            raise ParameterError("copula needs p >= 1 and q >= 1")
        d = self.d
        if self.kind == "gaussian_equicorr":
            t = self.theta
            lo = -1.0 / (d - 1) if d > 1 else -np.inf
            if t is None or not (lo < t < 1.0):
                raise ParameterError(f"equicorrelation theta must lie in ({lo:.6g}, 1), got {t}")
            m = np.full((d, d), float(t))
            np.fill_diagonal(m, 1.0)
            object.__setattr__(self, "_factor", _factorize(m))
        elif self.kind == "gaussian_general":
            if self.corr is None:
                raise ParameterError("gaussian_general needs a correlation matrix")
            m = np.asarray(self.corr, dtype=np.float64)
            if m.shape != (d, d):
                raise ParameterError(f"correlation matrix must be {d}x{d}, got {m.shape}")
            object.__setattr__(self, "_factor", _factorize(m))
        elif self.kind == "clayton":
            if self.theta is None or not self.theta > 0:
                raise ParameterError(f"Clayton theta must be > 0, got {self.theta}")
        elif self.kind == "example1":
            if (self.p, self.q) != (2, 2):
                raise ParameterError("example1 is defined for p = q = 2")
            object.__setattr__(self, "_factor", _factorize(example1_correlation(self.a, self.b)))
        elif self.kind == "example2":
            if (self.p, self.q) != (2, 2):
                raise ParameterError("example2 is defined for p = q = 2")

    @property
    def d(self) -> int:
        return self.p + self.q

    # constructors -----------------------------------------------------------

    @classmethod
    def gaussian(cls, corr, p: int) -> CopulaSpec:
        m = np.asarray(corr, dtype=np.float64)
        return cls("gaussian_general", p, m.shape[0] - p, corr=tuple(map(tuple, m.tolist())))

    @classmethod
    def equicorrelated(cls, theta: float, p: int, q: int) -> CopulaSpec:
        return cls("gaussian_equicorr", p, q, theta=float(theta))

    @classmethod
    def clayton(cls, theta: float, p: int, q: int) -> CopulaSpec:
        return cls("clayton", p, q, theta=float(theta))

    @classmethod
    def independence(cls, p: int, q: int) -> CopulaSpec:
        return cls("independence", p, q)

    @classmethod
    def comonotone(cls, p: int, q: int) -> CopulaSpec:
        return cls("comonotone", p, q)

    @classmethod
    def example1(cls, a: float = 0.6, b: float = 0.4) -> CopulaSpec:
        return cls("example1", 2, 2, a=float(a), b=float(b))

    @classmethod
    def example2(cls) -> CopulaSpec:
        return cls("example2", 2, 2)

    # serialization ----------------------------------------------------------

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "p": self.p, "q": self.q}
        for key in ("theta", "a", "b"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        if self.corr is not None:
            out["corr"] = [list(r) for r in self.corr]
        return out

    def to_text(self) -> str:
        """Plain ``key = value`` lines; ``corr`` rows are ``;``-separated."""
        lines = []
        for key, val in self.to_dict().items():
            if key == "corr":
                val = ";".join(",".join(repr(float(x)) for x in row) for row in val)
            lines.append(f"{key} = {val}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> CopulaSpec:
        kv = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidInputError(f"expected 'key = value', got {raw!r}")
            k, v = (s.strip() for s in line.split("=", 1))
            kv[k] = v
        return cls.from_mapping(kv)

    @classmethod
    def from_mapping(cls, kv) -> CopulaSpec:
        try:
            kind = str(kv["kind"])
            p, q = int(kv.get("p", 2)), int(kv.get("q", 2))
            corr = kv.get("corr")
            if isinstance(corr, str):
                corr = [[float(x) for x in row.split(",")] for row in corr.split(";")]
            fl = {k: float(kv[k]) for k in ("theta", "a", "b") if kv.get(k) is not None}
        except (KeyError, ValueError) as exc:
            raise InvalidInputError(f"bad copula specification: {exc}") from exc
        if corr is not None:
            corr = tuple(tuple(float(x) for x in row) for row in corr)
        return cls(kind, p, q, corr=corr, **fl)


def _factorize(m):
    """Symmetric factor ``L`` with ``L @ L.T == m`` (Cholesky, else eigen for PSD)."""
    m = np.asarray(m, dtype=np.float64)
    if not np.allclose(m, m.T, atol=1e-12):
        raise ParameterError("correlation matrix is not symmetric")
    if not np.allclose(np.diag(m), 1.0, atol=1e-12):
        raise ParameterError("correlation matrix must have unit diagonal")
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        pass
    lam, vec = np.linalg.eigh(m)
    if lam.min() < -_PSD_TOL:
        raise ParameterError(
            f"correlation matrix is not positive semi-definite (smallest eigenvalue {lam.min():.3g})"
        )
    return vec * np.sqrt(np.clip(lam, 0.0, None))


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if seed is None:
        raise InvalidInputError("a seed is required for reproducible sampling")
    return np.random.SeedSequence(int(seed))


def child_seed(seed, *key: int) -> np.random.SeedSequence:
    """Substream of ``seed`` addressed by an integer key path."""
    ss = _seed_sequence(seed)
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + tuple(int(k) for k in key))


def _draw_block(spec: CopulaSpec, rows: int, ss: np.random.SeedSequence) -> np.ndarray:
    # one generator per random input keeps every draw prefix-consistent in rows
    def rng(k):
        return np.random.default_rng(child_seed(ss, k))

    d = spec.d
    kind = spec.kind
    if kind in ("gaussian_general", "gaussian_equicorr", "example1"):
        z = rng(0).standard_normal((rows, d)) @ spec._factor.T
        return ndtr(z)
    if kind == "clayton":
        th = spec.theta
        v = rng(0).standard_gamma(1.0 / th, size=rows)
        e = rng(1).standard_exponential((rows, d))
        return np.exp(-np.log1p(e / v[:, None]) / th)
    if kind == "independence":
        return rng(0).random((rows, d))
    if kind == "comonotone":
        w = rng(0).random(rows)
        return np.repeat(w[:, None], d, axis=1)
    # example2: X ~ Pi (two iid uniforms), Y = (V1, 1 - V1) ~ W, X independent of Y
    w = rng(0).random((rows, 3))
    return np.column_stack([w[:, 0], w[:, 1], w[:, 2], 1.0 - w[:, 2]])


def sample(spec: CopulaSpec, n: int, seed) -> SampleMatrix:
    """``n`` i.i.d. rows from ``spec``, every entry strictly inside (0, 1).

    Row ``i`` depends only on ``seed`` and ``i``, so a longer sample extends a
    shorter one drawn with the same seed.
    """
    n = int(n)
    if n < 2:
        raise InvalidInputError("need n >= 2 rows")
    ss = _seed_sequence(seed)
    blocks = [
        _draw_block(spec, min(BLOCK_ROWS, n - start), child_seed(ss, b))
        for b, start in enumerate(range(0, n, BLOCK_ROWS))
    ]
    u = np.clip(np.concatenate(blocks, axis=0), _LO, _HI)
    return SampleMatrix(u, spec.p, spec.q)


def sample_stack(spec: CopulaSpec, n: int, seeds) -> np.ndarray:
    """Stack of independent samples, one per seed: shape ``(len(seeds), n, d)``."""
    return np.stack([sample(spec, n, s).data for s in seeds])


@dataclass(frozen=True)
class PopulationValue:
    value: float
    mc_se: float
    N: int


def population_value(
    spec: CopulaSpec,
    measure: str,
    N: int = 1_000_000,
    seed=0,
    convention=None,
    scaling=Scaling.OVER_N_PLUS_1,
    batches: int = 10,
) -> PopulationValue:
    """Approximate the population value of ``measure`` by one estimate at size ``N``.

    The Monte Carlo standard error comes from batch means: the estimator is
    evaluated on ``batches`` disjoint blocks of size ``N / batches`` and its
    spread is scaled down by ``sqrt(batches)``.
    """
    from .estimators import estimate, estimate_raw_batch

    if N < 100_000:
        raise InvalidInputError("population values need N >= 1e5")
    s = sample(spec, N, seed)
    value = estimate(s, measure, convention, scaling).value
    m = N // batches
    parts = s.data[: m * batches].reshape(batches, m, spec.d)
    if measure in ("rho2", "rho4"):
        vals = np.array([estimate_raw_batch(x[None], spec.p, measure, convention, scaling)[0] for x in parts])
    else:
        vals = estimate_raw_batch(parts, spec.p, measure, convention, scaling)
    se = float(np.std(vals, ddof=1) / np.sqrt(batches))
    return PopulationValue(float(value), se, N)
