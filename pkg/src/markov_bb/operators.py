"""Mobility operators, the continuity-equation solver and the metric tensor."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from .calculus import gradient, inner_mu, is_strictly_positive, mass, mobility, mu_divergence
from .chain import MarkovChain
from .errors import IllConditioned, InvalidParams, NotInRange, NotStrictlyPositive

POSITIVITY_FLOOR = 1e-12
RANGE_TOL = 1e-10
MAX_CONDITION = 1e12


@dataclass(frozen=True, eq=False)
class TransportParams:
    """Cost weights ``a`` (source) and ``b`` (transport), source direction ``p``.

    Use :func:`make_params` to get a validated instance.
    """

    a: float
    b: float
    p: np.ndarray


@dataclass(frozen=True, eq=False)
class TangentDecomposition:
    """Tangent vector as (gradient field, source rate).

    ``potential`` is the zero-sum potential whose gradient is
    ``grad_potential`` when one is available.
    """

    grad_potential: np.ndarray
    source_rate: float
    potential: Optional[np.ndarray] = None


def make_params(a: float, b: float, p, chain: MarkovChain, normalize: bool = False) -> TransportParams:
    """Validate weights and source direction against ``chain``.

    With ``normalize=True`` the direction is rescaled to unit mass,
    otherwise a mass off from 1 by more than 1e-10 is an error.
    """
    a, b = float(a), float(b)
    if not (a > 0 and b > 0 and np.isfinite(a) and np.isfinite(b)):
        raise InvalidParams(f"a and b must be positive and finite, got a={a}, b={b}")
    p = np.array(p, dtype=float)
    if p.shape != (chain.n,):
        raise InvalidParams(f"p must have length {chain.n}, got shape {p.shape}")
    if not is_strictly_positive(p):
        raise InvalidParams("p must be strictly positive")
    m = mass(p, chain)
    if normalize:
        p = p / m
    elif abs(m - 1.0) > 1e-10:
        raise InvalidParams(f"p must have unit mass [p, pi] = 1, got {float(m):.12g}")
    p.setflags(write=False)
    return TransportParams(a=a, b=b, p=p)


def default_params(chain: MarkovChain, a: float = 1.0, b: float = 1.0) -> TransportParams:
    return make_params(a, b, np.ones(chain.n), chain)


def assemble_B(mu, chain: MarkovChain) -> np.ndarray:
    """Weighted graph Laplacian with edge weights ``K(x,y) * mobility``."""
    w = chain.kernel * mobility(mu)
    np.fill_diagonal(w, 0.0)
    return np.diag(w.sum(axis=1)) - w


def assemble_A(mu, chain: MarkovChain) -> np.ndarray:
    """``diag(pi) @ B_mu``; symmetric by detailed balance."""
    return chain.stationary[:, None] * assemble_B(mu, chain)


def _require_positive(mu, what="mu"):
    mu = np.asarray(mu, dtype=float)
    if not np.all(mu > POSITIVITY_FLOOR):
        raise NotStrictlyPositive(f"{what} must be strictly positive (min {mu.min():.3e})")
    return mu


def solve_B_restricted(mu, nu, chain: MarkovChain) -> np.ndarray:
    """Zero-sum solution ``psi`` of ``B_mu psi = nu``.

    Solves the stacked system ``[B_mu; 1^T] psi = [nu; 0]`` by QR.

    Raises
    ------
    NotStrictlyPositive
        ``mu`` has an entry at or below 1e-12.
    NotInRange
        ``[nu, pi]`` is not zero.
    IllConditioned
        The stacked system has condition number above 1e12.
    """
    mu = _require_positive(mu)
    nu = np.asarray(nu, dtype=float)
    scale = 1.0 + float(np.max(np.abs(nu))) if nu.size else 1.0
    if abs(mass(nu, chain)) > RANGE_TOL * scale:
        raise NotInRange(f"[nu, pi] = {mass(nu, chain):.3e} is not zero")
    n = chain.n
    system = np.vstack([assemble_B(mu, chain), np.ones((1, n))])
    q, r = np.linalg.qr(system)
    cond = np.linalg.cond(r)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise IllConditioned(f"restricted mobility system has condition number {cond:.3e}")
    rhs = np.append(nu, 0.0)
    return solve_triangular(r, q.T @ rhs)


def decompose_tangent(mu, rho, params: TransportParams, chain: MarkovChain) -> TangentDecomposition:
    """Split ``rho`` into a gradient flux and a source along ``params.p``.

    The source rate is the mass of ``rho`` and the potential solves
    ``B_mu psi = rho - h p``, so ``rho + div_mu grad psi = h p``.
    """
    rho = np.asarray(rho, dtype=float)
    h = mass(rho, chain)
    psi = solve_B_restricted(mu, rho - h * params.p, chain)
    return TangentDecomposition(grad_potential=gradient(psi), source_rate=h, potential=psi)


def tangent_vector(mu, dec: TangentDecomposition, params: TransportParams, chain: MarkovChain) -> np.ndarray:
    """Velocity ``-div_mu(field) + h p`` represented by a decomposition."""
    return -mu_divergence(dec.grad_potential, mu, chain) + dec.source_rate * params.p


def pair_metric(mu, first: TangentDecomposition, second: TangentDecomposition,
                params: TransportParams, chain: MarkovChain) -> float:
    """Metric pairing evaluated directly on two decompositions."""
    return (params.a**2 * first.source_rate * second.source_rate
            + params.b**2 * inner_mu(first.grad_potential, second.grad_potential, mu, chain))


def metric_g(mu, rho, xi, params: TransportParams, chain: MarkovChain) -> float:
    """Riemannian metric ``a^2 h_rho h_xi + b^2 <grad psi_rho, grad psi_xi>_mu``."""
    d_rho = decompose_tangent(mu, rho, params, chain)
    d_xi = d_rho if xi is rho else decompose_tangent(mu, xi, params, chain)
    a_mu = assemble_A(mu, chain)
    return float(params.a**2 * d_rho.source_rate * d_xi.source_rate
                 + params.b**2 * d_rho.potential @ a_mu @ d_xi.potential)


def project_gradient(mu, field, chain: MarkovChain) -> np.ndarray:
    """Closest gradient field to ``field`` in the mobility-weighted norm."""
    psi = solve_B_restricted(mu, -mu_divergence(field, mu, chain), chain)
    return gradient(psi)


def restricted_inverse_norm(mu, chain: MarkovChain) -> float:
    """Operator 2-norm of the inverse of ``B_mu`` mapped from H onto H_pi."""
    n = chain.n
    if n == 1:
        return 0.0
    basis_h = _orthonormal_complement(np.ones(n))
    basis_hpi = _orthonormal_complement(chain.stationary)
    core = basis_hpi.T @ assemble_B(mu, chain) @ basis_h
    smallest = np.linalg.svd(core, compute_uv=False)[-1]
    return np.inf if smallest == 0 else 1.0 / smallest


def _orthonormal_complement(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    q, _ = np.linalg.qr(np.column_stack([v, np.eye(v.size)]))
    return q[:, 1:v.size]
