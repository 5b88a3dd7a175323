import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vecassoc import InvalidInputError
from vecassoc.ranks import (
    PseudoSample,
    SampleMatrix,
    Scaling,
    VectorPartition,
    empirical_copula,
    marginal_copula_scores,
    pi_transform,
    pseudo_observations,
)


def col(values):
    return SampleMatrix(np.column_stack([values, np.arange(len(values))]), 1, 1)


def test_rank_definition():
    ps = pseudo_observations(col([10.0, 5.0, 7.0]))
    assert ps.u[:, 0].tolist() == [1.0, 1 / 3, 2 / 3]


def test_midranks_on_ties():
    ps = pseudo_observations(col([1.0, 1.0, 2.0]))
    assert ps.u[:, 0].tolist() == [0.5, 0.5, 1.0]


def test_over_n_plus_1_scaling():
    ps = pseudo_observations(col([3.0, 1.0, 2.0]), scaling=Scaling.OVER_N_PLUS_1)
    assert ps.u[:, 0].tolist() == [0.75, 0.25, 0.5]


def test_monotone_map_is_bit_identical(rng):
    x = rng.normal(size=(50, 3))
    a = pseudo_observations(SampleMatrix(x, 2, 1)).values
    y = x.copy()
    y[:, 0] = np.exp(y[:, 0])
    y[:, 2] = y[:, 2] ** 3
    assert np.array_equal(a, pseudo_observations(SampleMatrix(y, 2, 1)).values)


@pytest.mark.parametrize(
    "data, p, q",
    [
        (np.zeros((1, 2)), 1, 1),
        (np.array([[1.0, np.nan], [2.0, 3.0]]), 1, 1),
        (np.array([[1.0, np.inf], [2.0, 3.0]]), 1, 1),
        (np.zeros((3, 3)), 1, 1),
        (np.zeros((3, 2)), 0, 2),
    ],
)
def test_invalid_samples(data, p, q):
    with pytest.raises(InvalidInputError):
        SampleMatrix(data, p, q)


def test_partition_validation():
    with pytest.raises(InvalidInputError):
        VectorPartition(1, 0)
    assert VectorPartition(2, 3).d == 5


def test_sample_is_read_only():
    s = SampleMatrix(np.ones((3, 2)), 1, 1)
    with pytest.raises(ValueError):
        s.data[0, 0] = 5.0


@given(st.permutations(list(range(8))))
def test_no_ties_gives_permutation_of_grid(perm):
    x = np.array(perm, dtype=float)
    for scaling, denom in ((Scaling.OVER_N, 8), (Scaling.OVER_N_PLUS_1, 9)):
        ps = pseudo_observations(col(x), scaling=scaling)
        assert sorted(ps.u[:, 0] * denom) == list(range(1, 9))


def test_empirical_copula_examples():
    ps = PseudoSample(np.array([[0.5], [1.0]]), np.array([[0.5], [1.0]]))
    assert empirical_copula(ps, [0.5], [1.0]) == 0.5
    assert empirical_copula(ps, [1.0], [1.0]) == 1.0
    assert empirical_copula(ps, [0.0], [1.0]) == 0.0


def test_empirical_copula_margins_and_errors(rng):
    ps = pseudo_observations(SampleMatrix(rng.normal(size=(40, 3)), 2, 1))
    a, b = marginal_copula_scores(ps)
    assert np.allclose(empirical_copula(ps, ps.u, np.ones((40, 1))), a)
    assert np.allclose(empirical_copula(ps, np.ones((40, 2)), ps.v), b)
    with pytest.raises(InvalidInputError):
        empirical_copula(ps, [0.5], [0.5])
    with pytest.raises(InvalidInputError):
        empirical_copula(ps, [0.5, 1.5], [0.5])


@given(arrays(np.float64, (20, 3), elements=st.integers(0, 5).map(float)), st.randoms(use_true_random=False))
def test_copula_permutation_invariant_and_monotone(data, r):
    s = SampleMatrix(data, 2, 1)
    perm = list(range(20))
    r.shuffle(perm)
    a = pseudo_observations(s)
    b = pseudo_observations(s.take(perm))
    assert np.array_equal(a.values[perm], b.values)
    assert np.array_equal(a.ranks.sum(axis=0), b.ranks.sum(axis=0))  # half-integers: exact
    assert np.allclose(a.values.sum(axis=0), b.values.sum(axis=0), rtol=0, atol=1e-12)
    pts = np.array([[r.random() for _ in range(3)] for _ in range(6)])
    hi = np.minimum(pts + 0.2, 1.0)
    ca = empirical_copula(a, pts[:, :2], pts[:, 2:])
    assert np.array_equal(ca, empirical_copula(b, pts[:, :2], pts[:, 2:]))
    assert np.all(empirical_copula(a, hi[:, :2], hi[:, 2:]) >= ca)


def test_pi_transform_examples():
    assert pi_transform(np.ones((1, 4)))[0] == 0.0
    assert pi_transform(np.array([[0.25]]))[0] == 0.75
    assert pi_transform(np.array([[0.5, 0.5]]))[0] == 0.25


def test_marginal_scores_examples():
    u = np.array([[1 / 3, 2 / 3], [2 / 3, 1 / 3], [1.0, 1.0]])
    ps = PseudoSample(u, u[:, :1])
    a, _ = marginal_copula_scores(ps)
    assert np.allclose(a, [1 / 3, 1 / 3, 1.0])


def test_marginal_scores_one_dimension_and_comonotone(rng):
    x = rng.normal(size=30)
    ps = pseudo_observations(SampleMatrix(np.column_stack([x, x, x, rng.normal(size=30)]), 3, 1))
    a, b = marginal_copula_scores(ps)
    assert np.array_equal(a, ps.u[:, 0])
    assert np.array_equal(b, ps.v[:, 0])
    assert a.min() >= 1 / 30
