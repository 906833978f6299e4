import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mhmm import (
    Categorical,
    HmmParams,
    MixtureModel,
    ParameterError,
    entropy_rate,
    model_entropy,
    normalized_entropy,
    stationary_distribution,
    transition_inner_product,
)

# worked-example matrices
N_MAT = np.array([[.99, 0, .01], [.1, .8, .1], [.01, 0, .99]])
M_MAT = np.array([[.5, .2, .3], [.4, .3, .3], [.2, .4, .4]])
A_MAT = np.array([[.99, .01], [.02, .98]])
B_MAT = np.array([[.4, .6], [.5, .5]])
C_MAT = np.array([[.01, .99], [.99, .01]])


def power_iteration(A, steps=10_000):
    mu = np.full(A.shape[0], 1.0 / A.shape[0])
    for _ in range(steps):
        mu = mu @ A
    return mu


def hand_entropy(A):
    """Entropy rate with explicit loops and the 0 log 0 = 0 convention."""
    mu = power_iteration(A)
    total = 0.0
    for i in range(A.shape[0]):
        for j in range(A.shape[1]):
            if A[i, j] > 0:
                total -= mu[i] * A[i, j] * np.log(A[i, j])
    return total


def mixture_of(*mats):
    comps = tuple(HmmParams(np.full(len(A), 1 / len(A)), A, Categorical(np.eye(len(A))))
                  for A in mats)
    return MixtureModel(comps, np.full(len(mats), 1 / len(mats)))


def test_uniform_stationary():
    st_ = stationary_distribution(np.full((4, 4), 0.25))
    np.testing.assert_allclose(st_.mu, 0.25, atol=1e-12)
    assert not st_.non_unique


def test_two_state_closed_form():
    mu = stationary_distribution(A_MAT).mu
    # mu_1 / mu_2 = A_21 / A_12
    np.testing.assert_allclose(mu, [2 / 3, 1 / 3], atol=1e-9)


def test_identity_is_non_unique_and_uniform():
    st_ = stationary_distribution(np.eye(3))
    assert st_.non_unique
    np.testing.assert_allclose(st_.mu, 1 / 3, atol=1e-12)


def test_periodic_chain_has_unique_solution():
    st_ = stationary_distribution([[0, 1], [1, 0]])
    np.testing.assert_allclose(st_.mu, [0.5, 0.5], atol=1e-12)
    assert not st_.non_unique


def test_non_stochastic_rejected():
    with pytest.raises(ParameterError):
        stationary_distribution([[0.5, 0.6], [0.5, 0.5]])
    with pytest.raises(ParameterError):
        entropy_rate(np.ones((2, 3)) / 3)


def test_entropy_extremes():
    assert entropy_rate(np.eye(3)) == 0.0
    assert entropy_rate(np.full((5, 5), 0.2)) == pytest.approx(np.log(5), abs=1e-12)
    assert normalized_entropy(np.full((5, 5), 0.2)) == pytest.approx(1.0, abs=1e-12)
    assert normalized_entropy([[1.0]]) == 0.0


def test_worked_example_values():
    assert entropy_rate(N_MAT) == pytest.approx(hand_entropy(N_MAT), abs=1e-9)
    assert 0.02 <= normalized_entropy(N_MAT) <= 0.07
    assert normalized_entropy(M_MAT) == pytest.approx(hand_entropy(M_MAT) / np.log(3), abs=1e-9)
    assert normalized_entropy(M_MAT) >= 0.90
    rep = model_entropy(mixture_of(N_MAT, M_MAT))
    assert rep.model_average_normalized == pytest.approx(0.53, abs=0.05)
    assert rep.model_average_normalized == pytest.approx(
        (rep.per_component_normalized[0] + rep.per_component_normalized[1]) / 2, abs=0)


def test_identity_mixture_all_zero():
    rep = model_entropy(mixture_of(np.eye(2), np.eye(2), np.eye(2)))
    assert rep.per_component_nats == (0.0, 0.0, 0.0)
    assert rep.model_average_normalized == 0.0


def test_inner_products():
    assert transition_inner_product(A_MAT, C_MAT) == pytest.approx(0.04, abs=1e-2)
    assert transition_inner_product(A_MAT, B_MAT) == pytest.approx(0.90, abs=1e-2)
    assert transition_inner_product(np.eye(3), np.fliplr(np.eye(3))[[1, 0, 2]]) == 0.0
    assert transition_inner_product(A_MAT, B_MAT) == transition_inner_product(B_MAT, A_MAT)
    with pytest.raises(ParameterError):
        transition_inner_product(np.eye(2), np.eye(3))


def stochastic_matrices(min_j=1, max_j=5, positive=False):
    @st.composite
    def build(draw):
        J = draw(st.integers(min_j, max_j))
        seed = draw(st.integers(0, 2**32 - 1))
        alpha = draw(st.sampled_from([0.1, 1.0, 5.0]))
        rng = np.random.default_rng(seed)
        A = rng.dirichlet(np.full(J, alpha), size=J)
        if positive:
            A = 0.95 * A + 0.05 / J
        return A
    return build()


@settings(max_examples=100, deadline=None)
@given(stochastic_matrices())
def test_entropy_bounds(A):
    h = entropy_rate(A)
    assert 0.0 <= h <= np.log(A.shape[0]) + 1e-12


@settings(max_examples=60, deadline=None)
@given(stochastic_matrices(min_j=2), st.randoms(use_true_random=False))
def test_entropy_permutation_invariant(A, rnd):
    perm = list(range(A.shape[0]))
    rnd.shuffle(perm)
    P = A[np.ix_(perm, perm)]
    assert entropy_rate(P) == pytest.approx(entropy_rate(A), abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(stochastic_matrices(positive=True))
def test_stationary_matches_power_iteration(A):
    mu = stationary_distribution(A).mu
    assert np.abs(mu @ A - mu).max() <= 1e-8
    assert mu.sum() == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(mu, power_iteration(A), atol=1e-6)


@settings(max_examples=60, deadline=None)
@given(stochastic_matrices())
def test_self_inner_product_lower_bound(A):
    J = A.shape[0]
    assert transition_inner_product(A, A) >= 1.0 / J - 1e-12
