import numpy as np
import pytest
from scipy import stats

from vecassoc import InvalidInputError, ParameterError, estimate
from vecassoc.copulas import (
    CopulaSpec,
    block_correlation,
    example1_correlation,
    example1_spearman_matrix,
    pearson_to_spearman,
    population_value,
    sample,
)
from vecassoc.ranks import pi_transform

SPECS = [
    CopulaSpec.equicorrelated(0.5, 2, 3),
    CopulaSpec.equicorrelated(-0.2, 3, 2),
    CopulaSpec.gaussian(block_correlation(0.5, -0.3), 2),
    CopulaSpec.clayton(2.0, 2, 2),
    CopulaSpec.clayton(0.3, 1, 3),
    CopulaSpec.independence(2, 2),
    CopulaSpec.example1(),
    CopulaSpec.example2(),
]


def spearman(u, i, j):
    return stats.spearmanr(u[:, i], u[:, j])[0]


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind)
def test_unit_interval_and_uniform_margins(spec):
    n = 20_000
    u = sample(spec, n, seed=1).data
    assert u.shape == (n, spec.d)
    assert ((u > 0) & (u < 1)).all()
    for j in range(spec.d):
        assert stats.kstest(u[:, j], "uniform").statistic <= 2 / np.sqrt(n)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind)
def test_prefix_consistency_and_determinism(spec):
    long = sample(spec, 70_000, seed=3).data  # spans two generation blocks
    short = sample(spec, 1000, seed=3).data
    np.testing.assert_array_equal(long[:1000], short)
    np.testing.assert_array_equal(sample(spec, 1000, seed=3).data, short)
    assert not np.array_equal(sample(spec, 1000, seed=4).data, short)


def test_equicorr_gaussianized_correlation():
    n = 50_000
    u = sample(CopulaSpec.equicorrelated(0.3, 2, 2), n, seed=2).data
    z = stats.norm.ppf(u)
    r = np.corrcoef(z, rowvar=False)[np.triu_indices(4, 1)]
    assert np.abs(r - 0.3).max() <= 4 / np.sqrt(n)


def test_equicorr_spearman_large():
    u = sample(CopulaSpec.equicorrelated(0.5, 1, 1), 1_000_000, seed=5).data
    oracle = 6 / np.pi * np.arcsin(0.25)
    assert oracle == pytest.approx(0.4826, abs=5e-5)
    assert spearman(u, 0, 1) == pytest.approx(oracle, abs=0.003)


def test_clayton_near_independence():
    u = sample(CopulaSpec.clayton(0.01, 1, 1), 1_000_000, seed=6).data
    assert abs(spearman(u, 0, 1)) <= 0.01


@pytest.mark.parametrize("theta", [0.5, 2.0, 5.0])
def test_clayton_kendall_tau(theta):
    # Kendall's tau of the Clayton family is theta / (theta + 2)
    u = sample(CopulaSpec.clayton(theta, 1, 2), 20_000, seed=7).data
    for i, j in ((0, 1), (1, 2)):
        tau = stats.kendalltau(u[:, i], u[:, j])[0]
        assert tau == pytest.approx(theta / (theta + 2), abs=0.015)


def test_example2_support():
    u = sample(CopulaSpec.example2(), 1_000_000, seed=8).data
    pv = pi_transform(u[:, 2:])
    assert (pv > 0).all()
    assert (pv <= 0.25).all()
    np.testing.assert_array_equal(u[:, 3], 1.0 - u[:, 2])


def test_example1_bridge():
    c = example1_correlation(0.6, 0.4)
    np.testing.assert_allclose(c, c.T)
    np.testing.assert_allclose(np.diag(c), 1.0)
    assert np.linalg.eigvalsh(c).min() > -1e-12
    # sign pattern of the target survives, and the cross-block mean stays zero
    target = example1_spearman_matrix(0.6, 0.4)
    assert (np.sign(c) == np.sign(target)).all()
    assert pearson_to_spearman(c)[:2, 2:].mean() == pytest.approx(0.0, abs=1e-15)
    # a target that already maps to a PSD matrix is used unchanged
    np.testing.assert_allclose(
        example1_correlation(0.3, 0.2), 2 * np.sin(np.pi * example1_spearman_matrix(0.3, 0.2) / 6)
    )


def test_example1_sample_spearman():
    u = sample(CopulaSpec.example1(), 200_000, seed=9).data
    target = pearson_to_spearman(example1_correlation(0.6, 0.4))
    emp = stats.spearmanr(u).statistic
    assert np.abs(emp - target).max() < 0.01
    assert emp[:2, 2:].mean() == pytest.approx(0.0, abs=0.01)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind)
def test_text_round_trip(spec):
    back = CopulaSpec.from_text(spec.to_text())
    assert back == spec
    np.testing.assert_array_equal(sample(back, 50, 0).data, sample(spec, 50, 0).data)


def test_from_text_comments_and_errors():
    spec = CopulaSpec.from_text("# model\nkind = clayton\np = 2\nq = 3  # wide Y\ntheta = 1.5\n")
    assert spec == CopulaSpec.clayton(1.5, 2, 3)
    with pytest.raises(InvalidInputError):
        CopulaSpec.from_text("kind clayton")
    with pytest.raises(InvalidInputError):
        CopulaSpec.from_text("p = 2")
    with pytest.raises(InvalidInputError):
        CopulaSpec.from_text("kind = clayton\ntheta = abc")


@pytest.mark.parametrize(
    "build, match",
    [
        (lambda: CopulaSpec.equicorrelated(1.0, 2, 2), "theta"),
        (lambda: CopulaSpec.equicorrelated(-1 / 3, 2, 2), "theta"),
        (lambda: CopulaSpec.clayton(0.0, 2, 2), "theta"),
        (lambda: CopulaSpec.clayton(-1.0, 2, 2), "theta"),
        (lambda: CopulaSpec.gaussian(block_correlation(0.5, 0.9), 2), "semi-definite"),
        (lambda: CopulaSpec.gaussian([[1.0, 0.2], [0.3, 1.0]], 1), "symmetric"),
        (lambda: CopulaSpec.gaussian([[2.0, 0.2], [0.2, 1.0]], 1), "diagonal"),
        (lambda: CopulaSpec("example1", 2, 3, a=0.6, b=0.4), "p = q = 2"),
        (lambda: CopulaSpec("student", 2, 2), "kind"),
        (lambda: CopulaSpec.independence(0, 2), "p >= 1"),
    ],
)
def test_parameter_errors(build, match):
    with pytest.raises(ParameterError, match=match):
        build()


def test_equicorr_lower_limit_is_open():
    CopulaSpec.equicorrelated(-1 / 3 + 1e-6, 2, 2)


def test_population_value_examples():
    v = population_value(CopulaSpec.equicorrelated(0.2, 3, 3), "rho_bar", N=1_000_000, seed=1)
    assert v.value == pytest.approx(0.191, abs=0.003)
    assert 0 < v.mc_se < 0.003
    v = population_value(CopulaSpec.equicorrelated(-0.1, 3, 3), "rho4", N=1_000_000, seed=1)
    assert v.value == pytest.approx(-0.310, abs=0.005)


@pytest.mark.parametrize("measure", ["rho_bar", "rho1", "rho2", "rho3", "rho4"])
def test_population_value_independence(measure):
    N = 200_000
    v = population_value(CopulaSpec.independence(2, 2), measure, N=N, seed=2)
    assert abs(v.value) <= 4 / np.sqrt(N)


def test_population_value_needs_large_n():
    with pytest.raises(InvalidInputError):
        population_value(CopulaSpec.independence(2, 2), "rho_bar", N=1000)


def test_sample_requires_seed_and_rows():
    with pytest.raises(InvalidInputError):
        sample(CopulaSpec.independence(1, 1), 10, None)
    with pytest.raises(InvalidInputError):
        sample(CopulaSpec.independence(1, 1), 1, 0)


def test_comonotone_sampler():
    s = sample(CopulaSpec.comonotone(2, 2), 100, seed=0)
    assert estimate(s, "rho_bar").value == 1.0
