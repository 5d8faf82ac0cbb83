import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from markov_bb.calculus import gradient, inner_mu, mu_divergence
from markov_bb.chain import build_chain, random_reversible_chain
from markov_bb.errors import IllConditioned, InvalidParams, NotInRange, NotStrictlyPositive
from markov_bb.operators import (
    assemble_A,
    assemble_B,
    decompose_tangent,
    default_params,
    make_params,
    metric_g,
    project_gradient,
    restricted_inverse_norm,
    solve_B_restricted,
    tangent_vector,
)

seeds = st.integers(0, 2**31 - 1)


def _instance(n, seed):
    chain = random_reversible_chain(n, seed=seed)
    r = np.random.default_rng(seed + 1)
    params = make_params(1.3, 0.7, r.uniform(0.5, 1.5, n), chain, normalize=True)
    mu = np.exp(r.uniform(-2, 2, n))
    return chain, params, mu, r


def test_assembly_examples(sym2):
    np.testing.assert_allclose(assemble_A(np.ones(2), sym2), [[0.25, -0.25], [-0.25, 0.25]])
    np.testing.assert_allclose(assemble_B(np.ones(2), sym2), [[0.5, -0.5], [-0.5, 0.5]])
    np.testing.assert_array_equal(assemble_A(np.zeros(2), sym2), np.zeros((2, 2)))
    np.testing.assert_array_equal(assemble_B(np.zeros(2), sym2), np.zeros((2, 2)))


def test_solve_examples(sym2, chain5):
    np.testing.assert_allclose(solve_B_restricted(np.ones(2), np.zeros(2), sym2), [0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(solve_B_restricted(np.ones(2), [1.0, -1.0], sym2), [1.0, -1.0], atol=1e-14)
    mu = np.linspace(0.5, 2.0, 5)
    phi = np.array([0.3, -1.0, 2.0, 0.1, -1.4])
    phi -= phi.mean()
    nu = assemble_B(mu, chain5) @ phi
    np.testing.assert_allclose(solve_B_restricted(mu, nu, chain5), phi, atol=1e-10)


def test_solve_errors(sym2):
    with pytest.raises(NotStrictlyPositive):
        solve_B_restricted([1.0, 0.0], [1.0, -1.0], sym2)
    with pytest.raises(NotInRange):
        solve_B_restricted(np.ones(2), [1.0, 1.0], sym2)
    weak = build_chain([[1 - 1e-13, 1e-13], [1e-13, 1 - 1e-13]])
    with pytest.raises(IllConditioned):
        solve_B_restricted(np.ones(2), [1.0, -1.0], weak)


def test_make_params_checks(chain5):
    with pytest.raises(InvalidParams):
        make_params(0.0, 1.0, np.ones(5), chain5)
    with pytest.raises(InvalidParams):
        make_params(1.0, 1.0, 2 * np.ones(5), chain5)
    with pytest.raises(InvalidParams):
        make_params(1.0, 1.0, np.ones(4), chain5)
    with pytest.raises(InvalidParams):
        make_params(1.0, 1.0, -np.ones(5), chain5)
    p = make_params(1.0, 1.0, 2 * np.ones(5), chain5, normalize=True).p
    assert p @ chain5.stationary == pytest.approx(1.0)


def test_decompose_examples(sym2, chain5):
    params = default_params(sym2)
    dec = decompose_tangent(np.ones(2), [1.0, -1.0], params, sym2)
    assert dec.source_rate == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(dec.potential, [1.0, -1.0], atol=1e-14)
    assert dec.grad_potential[0, 1] == pytest.approx(-2.0)
    params5 = make_params(1.0, 1.0, np.arange(1.0, 6.0), chain5, normalize=True)
    dec = decompose_tangent(np.ones(5), 0.7 * params5.p, params5, chain5)
    assert dec.source_rate == pytest.approx(0.7)
    assert np.max(np.abs(dec.grad_potential)) <= 1e-12
    dec = decompose_tangent(np.ones(5), np.zeros(5), params5, chain5)
    assert dec.source_rate == 0.0 and np.max(np.abs(dec.grad_potential)) == 0.0


def test_metric_examples(sym2):
    a, b = 1.7, 0.6
    params = make_params(a, b, np.ones(2), sym2)
    assert metric_g(np.ones(2), params.p, params.p, params, sym2) == pytest.approx(a**2)
    rho = np.array([1.0, -1.0])
    assert metric_g(np.ones(2), rho, rho, params, sym2) == pytest.approx(b**2)
    assert metric_g(np.ones(2), np.zeros(2), np.zeros(2), params, sym2) == 0.0


@given(st.integers(2, 8), seeds)
def test_kernel_range_and_rank(n, seed):
    chain, _, mu, _ = _instance(n, seed)
    a_mu, b_mu = assemble_A(mu, chain), assemble_B(mu, chain)
    scale = 1e-12 * (1 + np.abs(b_mu).max())
    ones = np.ones(n)
    assert np.abs(a_mu @ ones).max() <= scale
    assert np.abs(b_mu @ ones).max() <= scale
    assert np.abs(chain.stationary @ b_mu).max() <= scale
    assert np.abs(ones @ a_mu).max() <= scale
    np.testing.assert_array_equal(a_mu, chain.stationary[:, None] * b_mu)
    np.testing.assert_allclose(a_mu, a_mu.T, atol=1e-15)
    for mat in (a_mu, b_mu):
        sv = np.linalg.svd(mat, compute_uv=False)
        assert int(np.sum(sv > 1e-10 * sv[0])) == n - 1


@given(st.integers(2, 8), seeds)
def test_mobility_norm_equals_quadratic_form(n, seed):
    chain, _, mu, r = _instance(n, seed)
    psi = r.normal(size=n)
    lhs = inner_mu(gradient(psi), gradient(psi), mu, chain)
    assert lhs == pytest.approx(psi @ assemble_A(mu, chain) @ psi, rel=1e-12)


@given(st.integers(2, 8), seeds)
def test_tangent_round_trip(n, seed):
    chain, params, mu, r = _instance(n, seed)
    rho = r.normal(size=n)
    dec = decompose_tangent(mu, rho, params, chain)
    # rho + div_mu grad psi - h p = 0
    residual = rho + mu_divergence(dec.grad_potential, mu, chain) - dec.source_rate * params.p
    assert np.abs(residual).max() <= 1e-10
    np.testing.assert_allclose(tangent_vector(mu, dec, params, chain), rho, atol=1e-10)


@given(st.integers(2, 8), seeds, st.floats(-3, 3))
def test_metric_bilinear_symmetric_positive(n, seed, alpha):
    chain, params, mu, r = _instance(n, seed)
    rho, rho2, xi = r.normal(size=(3, n))
    lhs = metric_g(mu, alpha * rho + rho2, xi, params, chain)
    rhs = alpha * metric_g(mu, rho, xi, params, chain) + metric_g(mu, rho2, xi, params, chain)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)
    assert metric_g(mu, rho, xi, params, chain) == pytest.approx(metric_g(mu, xi, rho, params, chain), rel=1e-10,
                                                                 abs=1e-12)
    assert metric_g(mu, rho, rho, params, chain) > 0


@given(st.integers(2, 8), seeds)
def test_project_gradient(n, seed):
    chain, _, mu, r = _instance(n, seed)
    field = r.normal(size=(n, n))
    proj = project_gradient(mu, field, chain)
    assert abs(inner_mu(proj, field - proj, mu, chain)) <= 1e-10 * (1 + inner_mu(field, field, mu, chain))
    np.testing.assert_allclose(project_gradient(mu, proj, chain), proj, atol=1e-10)
    np.testing.assert_allclose(mu_divergence(field - proj, mu, chain), 0.0, atol=1e-10)
    phi = r.normal(size=n)
    np.testing.assert_allclose(project_gradient(mu, gradient(phi), chain), gradient(phi), atol=1e-10)


def test_project_gradient_of_zero(chain5):
    np.testing.assert_allclose(project_gradient(np.ones(5), np.zeros((5, 5)), chain5), 0.0, atol=1e-15)


def test_restricted_inverse_norm(sym2):
    # B_1 = [[.5,-.5],[-.5,.5]] maps (1,-1)/sqrt2 to (1,-1)/sqrt2, singular value 1 on the complements
    assert restricted_inverse_norm(np.ones(2), sym2) == pytest.approx(1.0)
