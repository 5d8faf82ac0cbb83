"""Upper estimates of the transport distance by path optimization.

The decision variables are the logarithms of the interior measures on a
uniform grid. For each interval the potential and source rate are the
unique ones reproducing the finite-difference velocity at the interval's
quadrature measures, so the objective is the discrete quadratic action

    F = sum_k dt * (a^2 h_k^2 + b^2 w_k^T A_k^+ w_k),   w_k = pi * (rho_k - h_k p).

F is convex in the measures, which makes the restarts agree up to optimizer
tolerance.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from scipy.optimize import minimize

from .action import DiscretePath, three_phase_measure
from .calculus import is_nonnegative, log_mean_array, log_mean_du, mass
from .chain import MarkovChain
from .errors import NegativeInput, NonConvergence, NotStrictlyPositive
from .operators import TransportParams

DEFAULTS = dict(n_steps=32, restarts=4, seed=0, max_iters=500, tol=1e-9, positivity_floor=1e-10)


@dataclass(frozen=True, eq=False)
class DistanceEstimate:
    upper_bound: float
    lower_bound: float
    path: DiscretePath
    optimizer_trace: List[Tuple[int, float]] = field(default_factory=list)
    n_steps: int = 0
    restarts_used: int = 0
    converged: bool = True

    @property
    def action(self) -> float:
        return self.upper_bound**2


QUADRATURE = {
    # (position inside the interval, weight)
    "midpoint": ((0.5, 1.0),),
    "trapezoid": ((0.0, 0.5), (1.0, 0.5)),
}


class PathEnergy:
    """Discrete quadratic action of a path with fixed endpoints.

    Parameters
    ----------
    mu0, mu1 : ndarray
        Endpoint densities.
    n_steps : int
        Number of uniform intervals on [0, 1].
    quadrature : {"midpoint", "trapezoid"}
        Where the mobility is evaluated inside each interval. The velocity is
        the interval's finite difference either way. Because the action
        density is convex along a segment, the trapezoid rule bounds the
        action of the piecewise-linear path from above and never increases
        under mesh bisection; it needs strictly positive endpoints.
    """

    def __init__(self, mu0, mu1, n_steps: int, params: TransportParams, chain: MarkovChain,
                 quadrature: str = "midpoint"):
        self.mu0 = np.asarray(mu0, dtype=float)
        self.mu1 = np.asarray(mu1, dtype=float)
        self.n_steps = int(n_steps)
        self.dt = 1.0 / self.n_steps
        self.params = params
        self.chain = chain
        if quadrature not in QUADRATURE:
            raise ValueError(f"unknown quadrature {quadrature!r}")
        if quadrature == "trapezoid" and not (np.all(self.mu0 > 0) and np.all(self.mu1 > 0)):
            raise NotStrictlyPositive("trapezoid quadrature needs strictly positive endpoints")
        self.quadrature = quadrature
        rule = QUADRATURE[quadrature]
        self._pos = np.array([r[0] for r in rule])
        self._wts = np.array([r[1] for r in rule])
        self.edge = chain.edge_weights.copy()
        np.fill_diagonal(self.edge, 0.0)
        n = chain.n
        m = self.n_steps * len(rule)
        self._border = np.zeros((m, n + 1, n + 1))
        self._border[:, :n, n] = 1.0
        self._border[:, n, :n] = 1.0

    @property
    def shape(self):
        return (self.n_steps - 1, self.chain.n)

    def measures(self, interior) -> np.ndarray:
        interior = np.asarray(interior, dtype=float).reshape(self.shape)
        return np.vstack([self.mu0, interior, self.mu1])

    def _solve(self, measures):
        pi, p = self.chain.stationary, self.params.p
        n, q = self.chain.n, self._pos.size
        # evaluation measures, interval-major: (n_steps, q, N)
        evals = ((1 - self._pos)[None, :, None] * measures[:-1, None, :]
                 + self._pos[None, :, None] * measures[1:, None, :])
        rho = np.diff(measures, axis=0) / self.dt
        h = rho @ pi
        w = pi * (rho - h[:, None] * p)
        flat = evals.reshape(-1, n)
        theta = log_mean_array(flat[:, :, None], flat[:, None, :])
        weights = self.edge * theta
        system = self._border.copy()
        system[:, :n, :n] = -weights
        idx = np.arange(n)
        system[:, idx, idx] = weights.sum(axis=2)
        rhs = np.concatenate([np.repeat(w, q, axis=0), np.zeros((flat.shape[0], 1))], axis=1)
        psi = np.linalg.solve(system, rhs[..., None])[..., :n, 0].reshape(self.n_steps, q, n)
        return evals, h, w, psi

    def value(self, interior) -> float:
        _, h, w, psi = self._solve(self.measures(interior))
        a, b = self.params.a, self.params.b
        quad = np.einsum("kn,kqn,q->k", w, psi, self._wts)
        return float(self.dt * np.sum(a**2 * h**2 + b**2 * quad))

    def value_and_grad(self, interior):
        """Action and its gradient with respect to the interior measures."""
        measures = self.measures(interior)
        evals, h, w, psi = self._solve(measures)
        a, b, dt = self.params.a, self.params.b, self.dt
        pi, p = self.chain.stationary, self.params.p
        wts, pos = self._wts, self._pos
        quad = np.einsum("kn,kqn,q->k", w, psi, wts)
        value = dt * np.sum(a**2 * h**2 + b**2 * quad)

        # d(w^T A^+ w)/drho = 2 (I - pi p^T) diag(pi) psi
        pi_psi = np.einsum("kqn,q->kn", psi, wts) * pi
        g_rho = dt * (2 * a**2 * h[:, None] * pi
                      + 2 * b**2 * (pi_psi - np.outer(pi_psi @ p, pi)))
        # d(w^T A^+ w)/dmu(z) = -sum_y E(z,y) dtheta/du (psi_y - psi_z)^2
        diff_sq = (psi[..., None, :] - psi[..., :, None]) ** 2
        dtheta = log_mean_du(evals[..., :, None], evals[..., None, :])
        g_eval = -dt * b**2 * wts[None, :, None] * np.sum(self.edge * dtheta * diff_sq, axis=-1)
        g_left = np.einsum("kqn,q->kn", g_eval, 1 - pos)
        g_right = np.einsum("kqn,q->kn", g_eval, pos)

        grad = (g_rho[:-1] - g_rho[1:]) / dt + g_right[:-1] + g_left[1:]
        return float(value), grad

    def path(self, interior) -> DiscretePath:
        """Path with midpoint potentials, whatever the quadrature rule."""
        measures = self.measures(interior)
        mid = self if self.quadrature == "midpoint" else PathEnergy(
            self.mu0, self.mu1, self.n_steps, self.params, self.chain)
        _, h, _, psi = mid._solve(measures)
        return DiscretePath(times=np.linspace(0.0, 1.0, self.n_steps + 1), measures=measures,
                            potentials=psi[:, 0, :], sources=h)


def _numeric_grad(fun, u, step_scale=1e-6):
    grad = np.empty_like(u)
    for i in range(u.size):
        step = step_scale * (1 + abs(u[i]))
        up, down = u.copy(), u.copy()
        up[i] += step
        down[i] -= step
        grad[i] = (fun(up) - fun(down)) / (2 * step)
    return grad


def _initial_guesses(mu0, mu1, n_steps, restarts, rng_list, params, chain):
    times = np.linspace(0.0, 1.0, n_steps + 1)[1:-1]
    if mass(mu1, chain) >= mass(mu0, chain):
        lifted = three_phase_measure(times, mu0, mu1, 0.1, params, chain)
    else:
        lifted = three_phase_measure(1 - times, mu1, mu0, 0.1, params, chain)
    line = (1 - times)[:, None] * mu0 + times[:, None] * mu1
    if not (np.all(mu0 > 0) and np.all(mu1 > 0)):
        scale = 1e-2 * (1.0 + max(mu0.max(), mu1.max()))
        line = line + 4 * scale * (times * (1 - times))[:, None]
    guesses = [lifted]
    for k in range(1, restarts):
        if k == 1:
            guesses.append(line)
        else:
            noise = rng_list[k].normal(scale=0.3, size=line.shape)
            guesses.append(line * np.exp(noise))
    return guesses


def estimate_distance(mu0, mu1, params: TransportParams, chain: MarkovChain, *,
                      n_steps: int = 32, restarts: int = 4, seed: int = 0, max_iters: int = 500,
                      tol: float = 1e-9, positivity_floor: float = 1e-10,
                      gradient: str = "analytic", quadrature: str = "midpoint") -> DistanceEstimate:
    """Minimize the discrete quadratic action between two densities.

    Restart 0 starts from the lift-transport-descend path, restart 1 from
    the straight line between the endpoints, later restarts from random
    log-normal perturbations of that line. The best restart is returned.

    Returns
    -------
    DistanceEstimate
        ``upper_bound`` is the square root of the best discrete action and
        ``lower_bound`` is ``a * |mass(mu1) - mass(mu0)|``.

    Warns
    -----
    NonConvergence
        When the best restart used all ``max_iters`` iterations and was still
        improving by more than ``tol`` (relative) over its last 10 iterations.
    """
    mu0 = np.asarray(mu0, dtype=float)
    mu1 = np.asarray(mu1, dtype=float)
    if not (is_nonnegative(mu0) and is_nonnegative(mu1)):
        raise NegativeInput("endpoints must be nonnegative")
    if n_steps < 2:
        raise ValueError("n_steps must be at least 2")
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    lower = params.a * abs(mass(mu1, chain) - mass(mu0, chain))
    energy = PathEnergy(mu0, mu1, n_steps, params, chain, quadrature)
    seeds = np.random.SeedSequence(seed).spawn(restarts)
    rngs = [np.random.default_rng(s) for s in seeds]
    guesses = _initial_guesses(mu0, mu1, n_steps, restarts, rngs, params, chain)
    log_floor = math.log(positivity_floor)

    def fun(u):
        return energy.value(np.exp(u))

    def fun_and_grad(u):
        x = np.exp(u)
        value, grad = energy.value_and_grad(x)
        return value, (grad.ravel() * x.ravel())

    def fun_and_numeric_grad(u):
        return fun(u), _numeric_grad(fun, u)

    objective = fun_and_grad if gradient == "analytic" else fun_and_numeric_grad

    best = None
    for guess in guesses:
        u0 = np.log(np.maximum(guess, positivity_floor)).ravel()
        trace = [(0, fun(u0))]

        def callback(intermediate_result):
            trace.append((len(trace), float(intermediate_result.fun)))
            if len(trace) > 10:
                old, new = trace[-11][1], trace[-1][1]
                if new <= 0 or old - new <= tol * abs(new):
                    raise StopIteration

        res = minimize(objective, u0, jac=True, method="L-BFGS-B", callback=callback,
                       bounds=[(log_floor, None)] * u0.size,
                       options=dict(maxiter=max_iters, ftol=1e-15, gtol=1e-12, maxcor=20))
        value = fun(res.x)
        if best is None or value < best[0]:
            best = (value, res.x, trace, res.nit)

    value, u, trace, nit = best
    converged = True
    if nit >= max_iters and len(trace) > 1:
        # last 10 iterations, or all of them when there were fewer
        old, new = trace[-min(11, len(trace))][1], trace[-1][1]
        if old - new > tol * abs(new):
            converged = False
            warnings.warn(f"path optimizer hit max_iters={max_iters} while still improving",
                          NonConvergence, stacklevel=2)
    return DistanceEstimate(
        upper_bound=math.sqrt(max(value, 0.0)),
        lower_bound=float(lower),
        path=energy.path(np.exp(u)),
        optimizer_trace=trace,
        n_steps=n_steps,
        restarts_used=len(guesses),
        converged=converged,
    )
