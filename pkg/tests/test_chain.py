import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from markov_bb.chain import (
    build_chain,
    is_irreducible,
    random_reversible_chain,
    stationary_distribution,
    weighted_spectrum,
)
from markov_bb.errors import NotIrreducible, NotReversible, RowSumError


@pytest.mark.parametrize("kernel, expected", [
    ([[0.5, 0.5], [0.5, 0.5]], [0.5, 0.5]),
    ([[0.0, 1.0], [1.0, 0.0]], [0.5, 0.5]),
    ([[0.9, 0.1], [0.2, 0.8]], [2 / 3, 1 / 3]),
])
def test_stationary_examples(kernel, expected):
    chain = build_chain(kernel)
    np.testing.assert_allclose(chain.stationary, expected, atol=1e-14)
    assert chain.reversibility_defect <= 1e-15


def test_rejects_bad_row_sums():
    with pytest.raises(RowSumError):
        build_chain([[0.5, 0.49], [0.5, 0.5]])


def test_rejects_reducible_kernel():
    with pytest.raises(NotIrreducible):
        build_chain([[1.0, 0.0], [0.5, 0.5]])
    assert not is_irreducible(np.eye(3))


def test_rejects_non_reversible_cycle():
    # biased walk on a 3-cycle has uniform stationary law but no detailed balance
    k = np.array([[0.0, 0.8, 0.2], [0.2, 0.0, 0.8], [0.8, 0.2, 0.0]])
    with pytest.raises(NotReversible):
        build_chain(k)


def test_chain_arrays_are_read_only():
    chain = build_chain([[0.9, 0.1], [0.2, 0.8]], labels=["x", "y"])
    with pytest.raises(ValueError):
        chain.kernel[0, 0] = 1.0
    assert chain.labels == ("x", "y")


@pytest.mark.parametrize("kernel, eigs, gap", [
    ([[0.0, 1.0], [1.0, 0.0]], [1.0, -1.0], 2.0),
    ([[0.5, 0.5], [0.5, 0.5]], [1.0, 0.0], 1.0),
])
def test_spectrum_examples(kernel, eigs, gap):
    report = weighted_spectrum(build_chain(kernel))
    np.testing.assert_allclose(report.eigenvalues, eigs, atol=1e-14)
    assert report.spectral_gap == pytest.approx(gap, abs=1e-14)


def test_single_state_chain():
    chain = build_chain([[1.0]])
    report = weighted_spectrum(chain)
    np.testing.assert_allclose(report.eigenvalues, [1.0])
    assert report.top_eigenvector_defect == 0.0
    assert report.spectral_gap == np.inf


def test_random_chain_is_deterministic():
    a = random_reversible_chain(3, seed=7, connectivity=1.0)
    b = random_reversible_chain(3, seed=7, connectivity=1.0)
    np.testing.assert_array_equal(a.kernel, b.kernel)
    assert random_reversible_chain(5, seed=42, connectivity=0.5).n == 5


@given(st.integers(2, 12), st.integers(0, 2**31 - 1), st.floats(0.05, 1.0))
def test_random_chain_invariants(n, seed, connectivity):
    chain = random_reversible_chain(n, seed=seed, connectivity=connectivity)
    k, pi = chain.kernel, chain.stationary
    assert np.max(np.abs(pi @ k - pi)) <= 1e-12
    assert chain.reversibility_defect <= 1e-12
    assert np.max(np.abs(k.sum(axis=1) - 1.0)) <= 1e-14
    np.testing.assert_allclose(stationary_distribution(k), pi, atol=1e-12)


@given(st.integers(2, 12), st.integers(0, 2**31 - 1))
def test_spectrum_matches_general_eigensolver(n, seed):
    chain = random_reversible_chain(n, seed=seed)
    report = weighted_spectrum(chain)
    raw = np.sort(np.linalg.eigvals(chain.kernel).real)[::-1]
    np.testing.assert_allclose(report.eigenvalues, raw, atol=1e-8)
    assert abs(report.eigenvalues[0] - 1.0) <= 1e-10
    assert np.all(np.diff(report.eigenvalues) <= 0)
    assert report.spectral_gap > 0
