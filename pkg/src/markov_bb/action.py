"""Discretized admissible paths and their actions.

A :class:`DiscretePath` on the grid ``t_0 < ... < t_n`` carries one potential
and one source rate per interval. Mobilities are evaluated at the interval
midpoint measure ``(mu_k + mu_{k+1}) / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Tuple

import numpy as np

from .calculus import is_nonnegative, l1_norm, mass
from .chain import MarkovChain
from .errors import NegativeInput
from .operators import (
    TransportParams,
    assemble_A,
    assemble_B,
    restricted_inverse_norm,
    solve_B_restricted,
)


@dataclass(frozen=True, eq=False)
class DiscretePath:
    """Time-discretized trajectory ``(mu, psi, h)``.

    Attributes
    ----------
    times : ndarray of shape (n + 1,)
    measures : ndarray of shape (n + 1, N)
    potentials : ndarray of shape (n, N)
        One potential per interval.
    sources : ndarray of shape (n,)
        One source rate per interval.
    """

    times: np.ndarray
    measures: np.ndarray
    potentials: np.ndarray
    sources: np.ndarray

    def __post_init__(self):
        n = len(self.times) - 1
        if n < 1 or np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing with at least two nodes")
        if self.measures.shape[0] != n + 1 or self.potentials.shape[0] != n or self.sources.shape != (n,):
            raise ValueError("path arrays have inconsistent lengths")

    @property
    def n_intervals(self) -> int:
        return len(self.times) - 1

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.measures[1:] + self.measures[:-1])

    @property
    def velocities(self) -> np.ndarray:
        return np.diff(self.measures, axis=0) / np.diff(self.times)[:, None]

    def reversed(self) -> "DiscretePath":
        """Same curve run backwards; potentials and sources change sign."""
        t0, t1 = self.times[0], self.times[-1]
        return DiscretePath(
            times=(t0 + t1 - self.times)[::-1].copy(),
            measures=self.measures[::-1].copy(),
            potentials=-self.potentials[::-1].copy(),
            sources=-self.sources[::-1].copy(),
        )


def continuity_residual(path: DiscretePath, params: TransportParams, chain: MarkovChain) -> float:
    """Largest sup-norm residual of ``mu_dot = B_mu psi + h p`` over intervals."""
    worst = 0.0
    for mid, vel, psi, h in zip(path.midpoints, path.velocities, path.potentials, path.sources):
        r = vel - assemble_B(mid, chain) @ psi - h * params.p
        worst = max(worst, float(np.max(np.abs(r))))
    return worst


def action_integrand(path: DiscretePath, params: TransportParams, chain: MarkovChain) -> np.ndarray:
    """Per-interval values of ``a^2 h^2 + b^2 [A psi, psi]``."""
    out = np.empty(path.n_intervals)
    for k, (mid, psi, h) in enumerate(zip(path.midpoints, path.potentials, path.sources)):
        out[k] = params.a**2 * h**2 + params.b**2 * psi @ assemble_A(mid, chain) @ psi
    return out


def action_quad(path: DiscretePath, params: TransportParams, chain: MarkovChain) -> float:
    """Time integral of the quadratic action density."""
    return float(np.dot(np.diff(path.times), action_integrand(path, params, chain)))


def action_linsq(path: DiscretePath, params: TransportParams, chain: MarkovChain) -> float:
    """Square of the time integral of the action density's square root."""
    speed = np.sqrt(np.maximum(action_integrand(path, params, chain), 0.0))
    return float(np.dot(np.diff(path.times), speed)) ** 2


def epsilon_lift(mu, eps: float) -> np.ndarray:
    """``(1 - eps) mu + eps`` pushes a nonnegative density into the open cone."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    mu = np.asarray(mu, dtype=float)
    if not is_nonnegative(mu):
        raise NegativeInput("epsilon_lift needs a nonnegative density")
    return (1.0 - eps) * mu + eps


def reparameterize(path: DiscretePath, new_interval: Tuple[float, float]) -> DiscretePath:
    """Affine change of time onto ``new_interval``.

    Potentials and sources scale by ``(T - tau) / (T_new - tau_new)`` so the
    continuity equation is preserved.
    """
    lo, hi = map(float, new_interval)
    if not hi > lo:
        raise ValueError("new interval must have positive length")
    tau, big_t = path.times[0], path.times[-1]
    ratio = (big_t - tau) / (hi - lo)
    times = lo + (path.times - tau) / ratio
    times[0], times[-1] = lo, hi
    return DiscretePath(times=times, measures=path.measures.copy(),
                        potentials=ratio * path.potentials, sources=ratio * path.sources)


def three_phase_measure(t, mu0, mu1, eps: float, params: TransportParams, chain: MarkovChain) -> np.ndarray:
    """Lift-transport-descend curve evaluated at times ``t`` in [0, 1].

    Assumes ``mass(mu1) >= mass(mu0)``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    mu0 = np.asarray(mu0, dtype=float)
    mu1 = np.asarray(mu1, dtype=float)
    p = params.p
    lift = mass(mu1 - mu0, chain) + eps
    low, high = mu0 + lift * p, mu1 + eps * p
    out = np.empty((t.size, mu0.size))
    for i, s in enumerate(t):
        if s <= 1 / 3:
            out[i] = mu0 + 3 * s * lift * p
        elif s <= 2 / 3:
            out[i] = (2 - 3 * s) * low + (3 * s - 1) * high
        else:
            out[i] = mu1 + (3 - 3 * s) * eps * p
    return out


def three_phase_path(mu0, mu1, eps: float, n_per_phase: int,
                     params: TransportParams, chain: MarkovChain) -> DiscretePath:
    """Explicit admissible path that stays strictly positive inside (0, 1).

    Phase one adds mass along ``p`` until the masses match plus ``eps``,
    phase two moves mass at constant velocity with zero source, phase three
    removes the extra ``eps``. When ``mu1`` is lighter than ``mu0`` the path
    is built the other way and reversed.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if n_per_phase < 1:
        raise ValueError("n_per_phase must be positive")
    mu0 = np.asarray(mu0, dtype=float)
    mu1 = np.asarray(mu1, dtype=float)
    if not (is_nonnegative(mu0) and is_nonnegative(mu1)):
        raise NegativeInput("endpoints must be nonnegative")
    if mass(mu1, chain) < mass(mu0, chain):
        return three_phase_path(mu1, mu0, eps, n_per_phase, params, chain).reversed()

    m = n_per_phase
    times = np.linspace(0.0, 1.0, 3 * m + 1)
    measures = three_phase_measure(times, mu0, mu1, eps, params, chain)
    measures[0], measures[-1] = mu0, mu1
    lift = mass(mu1 - mu0, chain) + eps
    sources = np.concatenate([np.full(m, 3 * lift), np.zeros(m), np.full(m, -3 * eps)])
    potentials = np.zeros((3 * m, chain.n))
    velocity = 3 * ((mu1 - mu0) - mass(mu1 - mu0, chain) * params.p)
    mids = 0.5 * (measures[1:] + measures[:-1])
    for k in range(m, 2 * m):
        potentials[k] = solve_B_restricted(mids[k], velocity, chain)
    return DiscretePath(times=times, measures=measures, potentials=potentials, sources=sources)


class L1Bounds(NamedTuple):
    c: float
    C: float
    n_samples: int


def l1_bounds(mu0, mu1, params: TransportParams, chain: MarkovChain, w_hat: float,
              n_samples: int = 256, seed: int = 0) -> L1Bounds:
    """Constants of the local comparison with the weighted L1 distance.

    ``c`` uses ``w_hat`` in place of the true distance; any upper estimate
    keeps ``||mu0 - mu1||_1 <= c * w_hat`` valid. ``C`` is a maximum over a
    mass ball, approximated by Dirichlet samples on the ball's boundary plus
    the strictly positive endpoints.
    """
    if w_hat < 0:
        raise ValueError("w_hat must be nonnegative")
    mu0 = np.asarray(mu0, dtype=float)
    mu1 = np.asarray(mu1, dtype=float)
    a, b, pi = params.a, params.b, chain.stationary
    min_pi = float(pi.min())
    c = 1 / a + (1 / b) * np.sqrt((2 * mass(mu0, chain) + 2 * w_hat / a) / min_pi)

    radius = max(l1_norm(mu0, chain), l1_norm(mu1, chain))
    rng = np.random.default_rng(seed)
    candidates = [radius * w / pi for w in rng.dirichlet(np.ones(chain.n), size=n_samples)]
    candidates += [m for m in (mu0, mu1) if np.all(m > 0)]
    factor = 1 / min_pi + float(np.linalg.norm(params.p))
    best = 0.0
    for nu in candidates:
        a_norm = np.linalg.norm(assemble_A(nu, chain), 2)
        best = max(best, np.sqrt(a_norm) * restricted_inverse_norm(nu, chain))
    return L1Bounds(c=float(c), C=float(a + b * factor * best), n_samples=len(candidates))
