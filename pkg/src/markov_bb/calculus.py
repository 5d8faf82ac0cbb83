"""Discrete calculus on a reversible chain.

Node functions are length-N arrays and edge fields are dense N x N arrays
indexed by ordered pairs ``(x, y)``.
"""

from __future__ import annotations

import math

import numpy as np

from .chain import POSITIVE_ENTRY, MarkovChain
from .errors import NegativeInput

# below this relative gap the quotient formula is replaced by its series
SERIES_THRESHOLD = 1e-8


def log_mean(u: float, v: float) -> float:
    """Logarithmic mean of two nonnegative reals.

    >>> log_mean(3.0, 3.0)
    3.0
    >>> log_mean(0.0, 5.0)
    0.0
    """
    if u < 0 or v < 0 or math.isnan(u) or math.isnan(v):
        raise NegativeInput(f"log_mean needs nonnegative arguments, got ({u}, {v})")
    return float(log_mean_array(np.float64(u), np.float64(v)))


def log_mean_array(u, v) -> np.ndarray:
    """Elementwise logarithmic mean with broadcasting.

    Zero in either argument gives 0. Near the diagonal the quotient is
    replaced by ``m (1 - r^2/12 - r^4/180)`` with ``m`` the arithmetic mean
    and ``r = (u - v) / m``.
    """
    u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    if np.any(u < 0) or np.any(v < 0):
        raise NegativeInput("log_mean needs nonnegative arguments")
    out = np.zeros(u.shape)
    pos = (u > 0) & (v > 0)
    if not np.any(pos):
        return out
    # ordering the pair makes the result exactly symmetric
    up, vp = np.maximum(u[pos], v[pos]), np.minimum(u[pos], v[pos])
    m = 0.5 * (up + vp)
    r = (up - vp) / m
    near = np.abs(up - vp) <= SERIES_THRESHOLD * np.maximum(up, vp)
    res = np.empty_like(up)
    res[near] = m[near] * (1.0 - r[near] ** 2 / 12.0 - r[near] ** 4 / 180.0)
    far = ~near
    uf, vf = up[far], vp[far]
    ratio = uf / vf
    # log1p keeps the log difference accurate when u/v is close to 1
    close = ratio < 2.0
    logdiff = np.where(close, np.log1p((uf - vf) / vf), np.log(uf) - np.log(vf))
    res[far] = (uf - vf) / logdiff
    out[pos] = res
    return out


def log_mean_du(u, v) -> np.ndarray:
    """Partial derivative of the logarithmic mean in its first argument.

    With ``s = log(u / v)`` this is ``(s - 1 + exp(-s)) / s^2``. Both
    arguments must be strictly positive.
    """
    u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    ratio = u / v
    s = np.where((ratio > 0.5) & (ratio < 2.0), np.log1p((u - v) / v), np.log(u) - np.log(v))
    small = np.abs(s) < 1e-3
    ss = np.where(small, 1.0, s)
    direct = (ss + np.expm1(-ss)) / ss**2
    series = 0.5 - s / 6.0 + s**2 / 24.0 - s**3 / 120.0 + s**4 / 720.0
    return np.where(small, series, direct)


def mobility(mu) -> np.ndarray:
    """Edge field ``(x, y) -> log_mean(mu(x), mu(y))``."""
    mu = np.asarray(mu, dtype=float)
    return log_mean_array(mu[:, None], mu[None, :])


def gradient(psi) -> np.ndarray:
    """``grad psi (x, y) = psi(y) - psi(x)``."""
    psi = np.asarray(psi, dtype=float)
    return psi[None, :] - psi[:, None]


def divergence(field, chain: MarkovChain) -> np.ndarray:
    """``(div F)(x) = 1/2 sum_y (F(x, y) - F(y, x)) K(x, y)``."""
    field = np.asarray(field, dtype=float)
    return 0.5 * np.sum((field - field.T) * chain.kernel, axis=1)


def mu_divergence(field, mu, chain: MarkovChain) -> np.ndarray:
    """Divergence of the mobility-weighted field ``mobility(mu) * field``."""
    return divergence(mobility(mu) * np.asarray(field, dtype=float), chain)


def laplacian(psi, chain: MarkovChain) -> np.ndarray:
    return divergence(gradient(psi), chain)


def inner_node(phi, psi, chain: MarkovChain) -> float:
    """Stationary-weighted dot product of two node functions."""
    return float(np.sum(np.asarray(phi, dtype=float) * np.asarray(psi, dtype=float) * chain.stationary))


def l1_norm(psi, chain: MarkovChain) -> float:
    return inner_node(np.abs(psi), np.ones(chain.n), chain)


def l2_norm(psi, chain: MarkovChain) -> float:
    return math.sqrt(inner_node(psi, psi, chain))


def mass(mu, chain: MarkovChain) -> float:
    """Total mass ``sum_x mu(x) pi(x)``."""
    return float(np.dot(np.asarray(mu, dtype=float), chain.stationary))


def inner_edge(phi, psi, chain: MarkovChain) -> float:
    """``1/2 sum_{x,y} Phi(x,y) Psi(x,y) K(x,y) pi(x)``."""
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    return float(0.5 * np.sum(phi * psi * chain.edge_weights))


def inner_mu(phi, psi, mu, chain: MarkovChain) -> float:
    return inner_edge(phi, mobility(mu) * np.asarray(psi, dtype=float), chain)


def active_pairs(mu, chain: MarkovChain) -> np.ndarray:
    """Pairs on which edge fields are distinguishable for the density ``mu``."""
    return mobility(mu) * chain.kernel > POSITIVE_ENTRY


def is_nonnegative(mu) -> bool:
    return bool(np.all(np.asarray(mu, dtype=float) >= 0))


def is_strictly_positive(mu) -> bool:
    return bool(np.all(np.asarray(mu, dtype=float) > 0))
