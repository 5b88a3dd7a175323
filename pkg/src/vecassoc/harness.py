"""Monte Carlo studies, normality diagnostics, the Pi-versus-W rho1 bound and the
integral-identity cross-checks.

Every replication draws from its own substream ``(seed, cell, replication)``,
so results do not depend on how replications are spread over workers.
"""

from __future__ import annotations

import logging
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, stats
from scipy.special import xlogy

from ._dominance import count_above, count_below, dominance_counts
from .copulas import CopulaSpec, block_correlation, child_seed, population_value, sample
from .estimators import estimate_raw_batch
from .exceptions import DegenerateInputError, InvalidInputError
from .measures import check_measure
from .ranks import Scaling
from .resampling import bootstrap_estimates, jackknife_estimates, jackknife_se_from_estimates

log = logging.getLogger(__name__)

MAX_DEGENERATE_FRACTION = 0.01
EXAMPLE2_EXACT = 767 / 13824


@dataclass(frozen=True)
class StudyConfig:
    """One Monte Carlo study: a copula, the sample sizes and what to estimate.

    ``bootstrap_b = 0`` skips the bootstrap and ``jackknife=False`` skips the
    jackknife; the corresponding row fields are then NaN.  ``population_n =
    None`` skips the large-sample reference value.
    """

    spec: CopulaSpec
    sample_sizes: tuple[int, ...] = (50, 100, 500)
    mc_replications: int = 1000
    bootstrap_b: int = 200
    jackknife: bool = True
    measures: tuple[str, ...] = ("rho_bar",)
    seed: int = 0
    scaling: Scaling = Scaling.OVER_N_PLUS_1
    convention: object = None
    population_n: int | None = 1_000_000
    workers: int | None = 1

    def __post_init__(self):
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        object.__setattr__(self, "measures", tuple(self.measures))
        object.__setattr__(self, "scaling", Scaling(self.scaling))
        if int(self.mc_replications) < 2:
            raise InvalidInputError("mc_replications must be >= 2")
        if not self.sample_sizes or min(self.sample_sizes) < 10:
            raise InvalidInputError("sample sizes must be >= 10")
        if int(self.bootstrap_b) == 1 or int(self.bootstrap_b) < 0:
            raise InvalidInputError("bootstrap_b must be 0 (skip) or >= 2")
        if not self.measures:
            raise InvalidInputError("at least one measure is required")
        for m in self.measures:
            check_measure(m)

    @property
    def p(self) -> int:
        return self.spec.p

    @property
    def q(self) -> int:
        return self.spec.q

    def cell_key(self) -> int:
        return zlib.crc32(self.spec.to_text().encode())


@dataclass(frozen=True)
class StudyRow:
    measure: str
    p: int
    q: int
    theta: float
    n: int
    true_value: float
    mean_estimate: float
    sd_estimate: float
    mean_boot_se: float
    mean_jack_se: float
    sd_boot_se: float
    sd_jack_se: float
    degenerate: int = 0

    COLUMNS = (
        "theta", "n", "true_value", "mean_estimate", "sd_estimate",
        "mean_boot_se", "mean_jack_se", "sd_boot_se", "sd_jack_se",
    )  # fmt: skip


def replication_seed(config: StudyConfig, n: int, rep: int) -> np.random.SeedSequence:
    return child_seed(config.seed, config.cell_key(), n, rep)


def _one_replication(config: StudyConfig, n: int, rep: int):
    """Return per-measure ``(estimate, boot_se, jack_se)``; NaN marks a degenerate replicate."""
    ss = replication_seed(config, n, rep)
    data = sample(config.spec, n, child_seed(ss, 0)).data
    out = []
    for measure in config.measures:
        est = estimate_raw_batch(data[None], config.p, measure, config.convention, config.scaling)[0]
        boot = jack = np.nan
        if np.isfinite(est):
            try:
                if config.bootstrap_b:
                    reps, _ = bootstrap_estimates(
                        data, config.p, measure, config.convention, config.scaling,
                        int(config.bootstrap_b), child_seed(ss, 1),
                    )  # fmt: skip
                    boot = float(np.std(reps, ddof=1))
                if config.jackknife:
                    loo = jackknife_estimates(data, config.p, measure, config.convention, config.scaling)
                    jack = jackknife_se_from_estimates(loo) if np.all(np.isfinite(loo)) else np.nan
                    if not np.isfinite(jack):
                        est = np.nan
            except DegenerateInputError:
                est = np.nan
        out.append((est, boot, jack))
    return out


def _run_chunk(args):
    config, n, reps = args
    return [_one_replication(config, n, r) for r in reps]


def _resolve_workers(workers):
    if workers is None:
        return os.cpu_count() or 1
    return max(1, int(workers))


def _replicate(config: StudyConfig, n: int, worker_fn=_run_chunk) -> np.ndarray:
    """Array of shape ``(reps, measures, 3)`` in replication order."""
    reps = int(config.mc_replications)
    workers = _resolve_workers(config.workers)
    if workers == 1:
        res = worker_fn((config, n, range(reps)))
    else:
        size = max(1, -(-reps // (4 * workers)))
        chunks = [(config, n, range(s, min(reps, s + size))) for s in range(0, reps, size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            res = [r for part in pool.map(worker_fn, chunks) for r in part]
    return np.asarray(res, dtype=np.float64)


@lru_cache(maxsize=64)
def _population(spec_text, measure, N, seed, convention, scaling):
    spec = CopulaSpec.from_text(spec_text)
    return population_value(spec, measure, N=N, seed=seed, convention=convention, scaling=scaling).value


def _nanstd(x):
    x = x[np.isfinite(x)]
    return float(np.std(x, ddof=1)) if x.size > 1 else np.nan


def _nanmean(x):
    x = x[np.isfinite(x)]
    return float(np.mean(x)) if x.size else np.nan


def run_table_study(config: StudyConfig) -> list[StudyRow]:
    """Run the study and return one row per ``(measure, n)``.

    Raises
    ------
    DegenerateInputError
        If more than 1% of the replications of any cell are degenerate.
    """
    rows = []
    theta = np.nan if config.spec.theta is None else float(config.spec.theta)
    truths = {}
    for m in config.measures:
        if config.population_n:
            conv = None if config.convention is None else str(getattr(config.convention, "value", config.convention))
            truths[m] = _population(
                config.spec.to_text(), m, int(config.population_n), config.seed, conv, config.scaling
            )
        else:
            truths[m] = np.nan
    for n in config.sample_sizes:
        res = _replicate(config, n)
        for j, m in enumerate(config.measures):
            est, boot, jack = res[:, j, 0], res[:, j, 1], res[:, j, 2]
            bad = int(np.sum(~np.isfinite(est)))
            if bad > MAX_DEGENERATE_FRACTION * len(est):
                raise DegenerateInputError(
                    f"{m}, n={n}: {bad} of {len(est)} replications were degenerate (limit 1%)"
                )
            if bad:
                log.warning("%s, n=%d: %d degenerate replications dropped", m, n, bad)
            rows.append(
                StudyRow(
                    m, config.p, config.q, theta, n, truths[m],
                    _nanmean(est), _nanstd(est),
                    _nanmean(boot), _nanmean(jack), _nanstd(boot), _nanstd(jack),
                    bad,
                )  # fmt: skip
            )
    return rows


# presets -------------------------------------------------------------------

TABLE_MEASURES = {1: "rho_bar", 2: "rho2", 3: "rho4"}
TABLE_THETAS = (-0.1, 0.2, 0.5)
TABLE_DIMS = (3, 4)


def table_configs(table: int, **overrides) -> list[StudyConfig]:
    """Study configurations for one of the three equicorrelated Gaussian tables.

    ``overrides`` are forwarded to every :class:`StudyConfig` (for example
    ``mc_replications=100``); ``dims`` and ``thetas`` restrict the grid.
    """
    if table not in TABLE_MEASURES:
        raise InvalidInputError(f"table must be one of {sorted(TABLE_MEASURES)}, got {table}")
    dims = overrides.pop("dims", TABLE_DIMS)
    thetas = overrides.pop("thetas", TABLE_THETAS)
    return [
        StudyConfig(CopulaSpec.equicorrelated(t, d, d), measures=(TABLE_MEASURES[table],), **overrides)
        for d in dims
        for t in thetas
    ]


def figure1_specs() -> dict[str, CopulaSpec]:
    """The six settings of the normality diagnostic, keyed by a short label."""
    out = {}
    for r in (-0.75, 0.0, 0.75):
        out[f"gaussian_{r:g}"] = CopulaSpec.gaussian(block_correlation(0.5, r), 2)
    for a in (0.5, 2.0, 5.0):
        out[f"clayton_{a:g}"] = CopulaSpec.clayton(a, 2, 2)
    return out


# normality diagnostic --------------------------------------------------------


@dataclass(frozen=True)
class NormalityResult:
    label: str
    n: int
    grid: np.ndarray
    density: np.ndarray
    ks: float
    skewness: float
    standardized: np.ndarray = field(repr=False)


def _estimates_only(config: StudyConfig, n: int, measure: str) -> np.ndarray:
    out = np.empty(config.mc_replications)
    chunk = 64
    for s in range(0, config.mc_replications, chunk):
        reps = range(s, min(config.mc_replications, s + chunk))
        data = np.stack([sample(config.spec, n, child_seed(replication_seed(config, n, r), 0)).data for r in reps])
        out[s : s + len(reps)] = estimate_raw_batch(data, config.p, measure, config.convention, config.scaling)
    return out


def standardize(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    sd = np.std(x, ddof=1)
    if not sd > 0:
        raise DegenerateInputError("estimates have zero standard deviation; cannot standardize")
    return (x - x.mean()) / sd


def run_normality_study(configs, grid) -> list[NormalityResult]:
    """Kernel density of standardized estimates for each setting and sample size.

    Parameters
    ----------
    configs : mapping of label -> StudyConfig
        Only the first measure of each config is used; bootstrap and
        jackknife settings are ignored.
    grid : array_like
        Evaluation points for the density.

    Notes
    -----
    Gaussian kernel with Silverman's bandwidth.  ``ks`` is the
    Kolmogorov-Smirnov distance between the standardized estimates and
    the standard normal.
    """
    grid = np.asarray(grid, dtype=np.float64)
    out = []
    for label, cfg in configs.items():
        if cfg.mc_replications < 1000:
            log.warning("%s: %d replications is thin for a density estimate", label, cfg.mc_replications)
        for n in cfg.sample_sizes:
            est = _estimates_only(cfg, n, cfg.measures[0])
            if not np.all(np.isfinite(est)):
                raise DegenerateInputError(f"{label}, n={n}: degenerate replications in the normality study")
            z = standardize(est)
            kde = stats.gaussian_kde(z, bw_method="silverman")
            out.append(
                NormalityResult(
                    label, n, grid, kde(grid),
                    float(stats.kstest(z, "norm").statistic), float(stats.skew(z)), z,
                )  # fmt: skip
            )
    return out


# rho1 bound for copulas Pi and W ------------------------------------------------


def _survival_pi(s):
    # 1 - s + s log s, with the s -> 0 limit handled by xlogy
    return 1.0 - s + xlogy(s, s)


def _survival_w(t):
    return 2.0 * np.sqrt(np.maximum(0.25 - t, 0.0))


@dataclass(frozen=True)
class Example2Bound:
    integral: float
    rho1_max: float


def example2_bound(method: str = "grid", grid: int = 2000) -> Example2Bound:
    """Attainable upper bound of rho1 when X has copula Pi and Y copula W (p = q = 2).

    ``method="grid"`` uses a ``grid x grid`` midpoint rule on
    ``min(1 - s + s log s, 2 sqrt(max(1/4 - t, 0)))``; ``method="adaptive"``
    integrates the closed-form inner integral ``c/4 - c^3/12`` with QUADPACK.
    """
    if method == "grid":
        g = int(grid)
        if g < 2:
            raise InvalidInputError("grid must be >= 2")
        x = (np.arange(g) + 0.5) / g
        f, w = _survival_pi(x), _survival_w(x)
        total = 0.0
        step = max(1, 4_000_000 // g)
        for i in range(0, g, step):
            total += np.minimum(f[i : i + step, None], w[None, :]).sum()
        val = total / (g * g)
    elif method == "adaptive":
        val, _ = integrate.quad(lambda s: _survival_pi(s) / 4 - _survival_pi(s) ** 3 / 12, 0.0, 1.0,
                                epsabs=1e-14, epsrel=1e-12)  # fmt: skip
    else:
        raise InvalidInputError(f"unknown integration method {method!r}")
    # E[pi_2(U)] E[pi_2(V)] = 1/4 * 1/6; variances 1/9 - 1/16 (Pi) and 1/30 - 1/36 (W)
    rho = (val - 1.0 / 24.0) / (np.sqrt(1 / 30 - 1 / 36) * np.sqrt(1 / 9 - 1 / 16))
    return Example2Bound(float(val), float(rho))


# integral identities ------------------------------------------------------------


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    lhs: float
    rhs: float
    se_lhs: float
    se_rhs: float

    @property
    def difference(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def combined_se(self) -> float:
        return float(np.hypot(self.se_lhs, self.se_rhs))

    def passed(self, k: float = 5.0) -> bool:
        return self.difference <= k * self.combined_se


@dataclass(frozen=True)
class IdentityReport:
    spec: CopulaSpec
    N: int
    checks: tuple[IdentityCheck, ...]

    def passed(self, k: float = 5.0) -> bool:
        return all(c.passed(k) for c in self.checks)


def _mean_se(h):
    return float(np.mean(h)), float(np.std(h, ddof=1) / np.sqrt(h.size))


def _check(name, left, right):
    return IdentityCheck(name, left[0], right[0], left[1], right[1])


def verify_appendix_identities(spec: CopulaSpec, N: int = 100_000, seed=0, queries: int = 4000) -> IdentityReport:
    """Check four covariance identities by two independent Monte Carlo routes.

    Left sides are moments of transformed rows of one copula sample of size
    ``N`` (divisor ``N``).  Right sides are the matching integrals, averaged
    over ``queries`` random evaluation points of empirical (survival)
    distribution functions built from the same sample:

    * ``cov(pi_p(U), pi_q(V)) = int int C(u,v) - A(u) B(v) du dv``
    * ``var(pi_p(U)) = int int A(u ^ u') - A(u) A(u') du du'``
    * ``cov(A(U), B(V)) = int int Cbar(u,v) - Abar(u) Bbar(v) dA(u) dB(v)``
    * ``var(A(U)) = int int Abar(u v u') - Abar(u) Abar(u') dA(u) dA(u')``

    Points for the first two are uniform on the unit cube; for the last two
    they are independent draws of sample rows, which realises ``dA dB``.
    """
    N = int(N)
    if N < 100_000:
        raise InvalidInputError("identity checks need N >= 1e5")
    ss = child_seed(seed, 0)
    z = sample(spec, N, ss).data
    u, v = z[:, : spec.p], z[:, spec.p :]
    rng = np.random.default_rng(child_seed(seed, 1))
    M = int(queries)
    checks = []

    def moment(a, b):
        h = (a - a.mean()) * (b - b.mean())
        return float(h.mean()), float(np.std(h, ddof=1) / np.sqrt(N))

    pu = np.prod(1.0 - u, axis=1)
    pv = np.prod(1.0 - v, axis=1)

    # pi-transform covariance
    qu, qv = rng.random((M, spec.p)), rng.random((M, spec.q))
    h = (count_below(z, np.hstack([qu, qv])) - count_below(u, qu) * (count_below(v, qv) / N)) / N
    checks.append(_check("cov(pi_p(U), pi_q(V))", moment(pu, pv), _mean_se(h)))

    # pi-transform variance
    qu2 = rng.random((M, spec.p))
    a1, a2 = count_below(u, qu) / N, count_below(u, qu2) / N
    h = count_below(u, np.minimum(qu, qu2)) / N - a1 * a2
    checks.append(_check("var(pi_p(U))", moment(pu, pu), _mean_se(h)))

    # marginal-copula scores
    a = dominance_counts(u) / N
    b = dominance_counts(v) / N
    i, j = rng.integers(0, N, M), rng.integers(0, N, M)
    h = (count_above(z, np.hstack([u[i], v[j]])) - count_above(u, u[i]) * (count_above(v, v[j]) / N)) / N
    checks.append(_check("cov(A(U), B(V))", moment(a, b), _mean_se(h)))

    k = rng.integers(0, N, M)
    h = (count_above(u, np.maximum(u[i], u[k])) - count_above(u, u[i]) * (count_above(u, u[k]) / N)) / N
    checks.append(_check("var(A(U))", moment(a, a), _mean_se(h)))

    return IdentityReport(spec, N, tuple(checks))
