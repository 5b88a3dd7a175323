import numpy as np
import pytest

from vecassoc import DegenerateInputError, InvalidInputError, ResamplingConfig, estimate
from vecassoc.copulas import CopulaSpec, child_seed, sample
from vecassoc.measures import Convention
from vecassoc.ranks import SampleMatrix
from vecassoc.resampling import bootstrap, jackknife_estimates, jackknife_se

LIT, NORM = Convention.PAPER_LITERAL, Convention.NORMALIZED


@pytest.fixture(scope="module")
def eq_sample():
    return sample(CopulaSpec.equicorrelated(0.5, 2, 2), 120, seed=11)


def test_config_validation():
    with pytest.raises(InvalidInputError):
        ResamplingConfig("bootstrap", b_iterations=1)
    with pytest.raises(InvalidInputError):
        ResamplingConfig("permutation")
    with pytest.raises(InvalidInputError):
        ResamplingConfig(seed=-1)
    ResamplingConfig("jackknife", b_iterations=0)


def test_two_replicate_identity(eq_sample):
    cfg = ResamplingConfig(b_iterations=2, seed=5)
    res = bootstrap(eq_sample, "rho_bar", config=cfg)
    # redo both replicates by hand from the documented substreams
    vals = []
    for b in range(2):
        idx = np.random.default_rng(child_seed(5, b, 0)).integers(0, eq_sample.n, eq_sample.n)
        vals.append(estimate(eq_sample.take(idx), "rho_bar").value)
    assert res.rejected == 0
    assert res.se == pytest.approx(abs(vals[0] - vals[1]) / np.sqrt(2), rel=1e-12)


def test_bootstrap_is_deterministic(eq_sample):
    cfg = ResamplingConfig(b_iterations=30, seed=9)
    a = bootstrap(eq_sample, "rho2", config=cfg)
    b = bootstrap(eq_sample, "rho2", config=cfg)
    assert a.se == b.se
    np.testing.assert_array_equal(a.estimates, b.estimates)
    c = bootstrap(eq_sample, "rho2", config=ResamplingConfig(b_iterations=30, seed=10))
    assert c.se != a.se


def test_bootstrap_row_order_agreement():
    s = sample(CopulaSpec.equicorrelated(0.5, 3, 3), 300, seed=4)
    perm = np.random.default_rng(0).permutation(s.n)
    a = bootstrap(s, "rho_bar", config=ResamplingConfig(b_iterations=400, seed=1)).se
    b = bootstrap(s.take(perm), "rho_bar", config=ResamplingConfig(b_iterations=400, seed=2)).se
    # relative sd of a bootstrap sd from B draws is about 1/sqrt(2B)
    assert abs(a - b) / a < 4 * np.sqrt(2 / 800)


def test_bootstrap_degenerate_data():
    s = SampleMatrix(np.ones((20, 4)), 2, 2)
    with pytest.raises(DegenerateInputError):
        bootstrap(s, "rho_bar", config=ResamplingConfig(b_iterations=10))


def test_bootstrap_redraws_degenerate_resamples():
    # n=3 resamples often repeat one row three times
    s = SampleMatrix([[0.1, 0.3], [0.2, 0.1], [0.3, 0.2]], 1, 1)
    res = bootstrap(s, "rho_bar", config=ResamplingConfig(b_iterations=40, seed=3))
    assert res.rejected > 0
    assert np.isfinite(res.estimates).all()


def test_jackknife_hand_example():
    # leave-one-out Spearman values are -1, +1, +1
    s = SampleMatrix([[1.0, 1.0], [2.0, 3.0], [3.0, 2.0]], 1, 1)
    est = jackknife_estimates(s.data, 1, "rho_bar", NORM, "over_n")
    np.testing.assert_allclose(est, [-1.0, 1.0, 1.0], atol=1e-15)
    assert jackknife_se(s, "rho_bar", NORM) == pytest.approx(4 / 3, abs=1e-14)


def test_jackknife_constant_estimator_is_zero():
    t = np.arange(10.0)
    s = SampleMatrix(np.column_stack([t, t**3, np.exp(t)]), 1, 2)
    for m in ("rho_bar", "rho3", "rho4"):
        assert jackknife_se(s, m, LIT) == 0.0
    for m in ("rho_bar", "rho2"):
        assert jackknife_se(s, m, NORM) == 0.0


def test_bootstrap_constant_estimator_is_zero():
    t = np.arange(12.0)
    s = SampleMatrix(np.column_stack([t, -t]), 1, 1)
    # resamples carry ties, so the replicates equal -1 only to rounding
    res = bootstrap(s, "rho_bar", NORM, ResamplingConfig(b_iterations=20))
    assert res.se < 1e-15
    t2 = np.arange(30.0)
    s2 = SampleMatrix(np.column_stack([t2, t2]), 1, 1)
    res = bootstrap(s2, "rho_bar", NORM, ResamplingConfig(b_iterations=20))
    np.testing.assert_array_equal(res.estimates, res.estimates[0])
    assert res.se == 0.0


def test_jackknife_matches_naive_leave_one_out(eq_sample):
    for m in ("rho_bar", "rho1", "rho2", "rho3", "rho4", "rv"):
        fast = jackknife_estimates(eq_sample.data, 2, m, None, "over_n")
        slow = [
            estimate(eq_sample.take(np.delete(np.arange(eq_sample.n), j)), m).value
            for j in range(eq_sample.n)
        ]
        np.testing.assert_array_equal(fast, slow)


@pytest.mark.parametrize("measure", ["rho_bar", "rho3", "rho4"])
def test_jackknife_permutation_invariance_exact(measure):
    s = sample(CopulaSpec.clayton(1.5, 2, 2), 60, seed=8)
    perm = np.random.default_rng(1).permutation(s.n)
    assert jackknife_se(s, measure, LIT) == jackknife_se(s.take(perm), measure, LIT)


def test_jackknife_permutation_invariance_normalized():
    s = sample(CopulaSpec.clayton(1.5, 2, 2), 60, seed=8)
    perm = np.random.default_rng(1).permutation(s.n)
    for m in ("rho_bar", "rho1", "rho2"):
        assert jackknife_se(s.take(perm), m, NORM) == pytest.approx(jackknife_se(s, m, NORM), abs=1e-12)


def test_jackknife_errors():
    with pytest.raises(InvalidInputError):
        jackknife_se(SampleMatrix([[0.1, 0.2], [0.3, 0.4]], 1, 1), "rho_bar")
    # removing row 0 leaves a constant X column
    x = np.array([5.0, 1.0, 1.0, 1.0])
    s = SampleMatrix(np.column_stack([x, np.arange(4.0)]), 1, 1)
    with pytest.raises(DegenerateInputError, match="row 0"):
        jackknife_se(s, "rho_bar", NORM)
