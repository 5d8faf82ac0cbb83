"""Acceptance criteria as callable checks.

Each ``criterion_*`` function runs one check end to end and returns a
:class:`CriterionResult`. The test suite calls them with full sample counts;
the ``demo`` CLI command calls them with reduced counts on the built-in
chains.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from .action import l1_bounds
from .calculus import (
    divergence,
    gradient,
    inner_edge,
    inner_mu,
    inner_node,
    l1_norm,
    laplacian,
)
from .chain import MarkovChain, build_chain, random_reversible_chain, weighted_spectrum
from .distance import estimate_distance
from .errors import NonConvergence
from .flow import argmin_envelope_rate, estimate_decay, integrate_flow
from .operators import assemble_A, assemble_B, decompose_tangent, make_params, tangent_vector

ChainSource = Callable[[int, np.random.Generator], MarkovChain]


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float
    time_limit: Optional[float] = None

    @property
    def within_time(self) -> bool:
        return self.time_limit is None or self.seconds <= self.time_limit

    @property
    def ok(self) -> bool:
        return self.passed and self.within_time

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        limit = "" if self.time_limit is None else f"/{self.time_limit:.0f}s"
        return f"[{status}] criterion {self.number:2d} {self.name}: {self.detail} ({self.seconds:.1f}s{limit})"


def two_state_chain() -> MarkovChain:
    """Built-in 2-state chain with stationary law (2/3, 1/3)."""
    return build_chain([[0.75, 0.25], [0.5, 0.5]], labels=["a", "b"])


def five_state_chain() -> MarkovChain:
    """Built-in lazy birth-death chain on five states with uneven weights."""
    weights = np.zeros((5, 5))
    for x, w in enumerate([1.0, 2.0, 0.5, 1.5]):
        weights[x, x + 1] = weights[x + 1, x] = w
    weights += np.diag([1.0, 0.5, 1.0, 0.5, 1.0])
    return build_chain(weights / weights.sum(axis=1, keepdims=True), labels=list("abcde"))


def random_source(n_min: int = 2, n_max: int = 10) -> ChainSource:
    def source(i, rng):
        n = int(rng.integers(n_min, n_max + 1))
        return random_reversible_chain(n, seed=int(rng.integers(2**31)))
    return source


def builtin_source() -> ChainSource:
    chains = [two_state_chain(), five_state_chain()]
    return lambda i, rng: chains[i % 2]


def _random_p(chain, rng, a=1.0, b=1.0):
    return make_params(a, b, rng.uniform(0.5, 1.5, chain.n), chain, normalize=True)


def _random_density(chain, rng, mass_range=(0.2, 5.0)):
    rho = np.exp(rng.normal(scale=0.7, size=chain.n))
    return rho * rng.uniform(*mass_range) / float(rho @ chain.stationary)


def _timed(number, name, time_limit, body):
    start = time.perf_counter()
    passed, detail = body()
    return CriterionResult(number, name, bool(passed), detail, time.perf_counter() - start, time_limit)


def _quiet_distance(*args, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergence)
        return estimate_distance(*args, **kwargs)


def criterion_1(n_cases: int = 20, source: Optional[ChainSource] = None, seed: int = 1) -> CriterionResult:
    """Pure-source pairs: upper within 1% of ``a|s|``, lower equal to it."""
    source = source or random_source()

    def body():
        rng = np.random.default_rng(seed)
        worst = 0.0
        lower_ok = True
        for i in range(n_cases):
            chain = source(i, rng)
            params = _random_p(chain, rng, a=float(rng.choice([0.5, 1.0, 2.0])))
            mu0 = rng.uniform(0.2, 2.0, chain.n) + 0.6 * params.p
            s = rng.uniform(0.02, 0.5) * rng.choice([-1.0, 1.0])
            est = _quiet_distance(mu0, mu0 + s * params.p, params, chain)
            exact = params.a * abs(s)
            worst = max(worst, abs(est.upper_bound - exact) / exact)
            lower_ok &= abs(est.lower_bound - exact) <= 1e-12 * exact
        return worst <= 0.01 and lower_ok, f"{n_cases} cases, worst relative gap {worst:.2e}, lower exact={lower_ok}"

    return _timed(1, "exact pure-source distance", 60.0, body)


def criterion_2(n_cases: int = 500, source: Optional[ChainSource] = None, seed: int = 2) -> CriterionResult:
    """Laplacian, integration by parts, ``A = Pi B``, the mobility norm and ranks."""
    source = source or random_source(2, 8)

    def body():
        rng = np.random.default_rng(seed)
        failures = {}

        def fail(key):
            failures[key] = failures.get(key, 0) + 1

        for i in range(n_cases):
            chain = source(i, rng)
            n, pi = chain.n, chain.stationary
            psi = rng.normal(size=n)
            field = rng.normal(size=(n, n))
            mu = np.exp(rng.normal(size=n))
            if np.max(np.abs(laplacian(psi, chain) - (chain.kernel @ psi - psi))) > 1e-14 * (1 + np.abs(psi).max()):
                fail("laplacian")
            lhs = inner_edge(gradient(psi), field, chain)
            rhs = -inner_node(psi, divergence(field, chain), chain)
            if abs(lhs - rhs) > 1e-12 * (1 + abs(lhs) + abs(rhs)):
                fail("integration by parts")
            b_mu, a_mu = assemble_B(mu, chain), assemble_A(mu, chain)
            if np.max(np.abs(a_mu - pi[:, None] * b_mu)) > 1e-15 * (1 + np.abs(a_mu).max()):
                fail("A = Pi B")
            norm_sq = inner_mu(gradient(psi), gradient(psi), mu, chain)
            if abs(norm_sq - psi @ a_mu @ psi) > 1e-12 * max(1.0, abs(norm_sq)):
                fail("mobility norm")
            scale = 1e-12 * (1 + np.abs(b_mu).max())
            ones = np.ones(n)
            if max(np.abs(a_mu @ ones).max(), np.abs(b_mu @ ones).max(),
                   np.abs(pi @ b_mu).max(), np.abs(ones @ a_mu).max()) > scale:
                fail("kernel/range")
            for mat in (a_mu, b_mu):
                sv = np.linalg.svd(mat, compute_uv=False)
                if int(np.sum(sv > 1e-10 * sv[0])) != n - 1:
                    fail("rank")
        detail = f"{n_cases} instances, failures: {failures or 'none'}"
        return not failures, detail

    return _timed(2, "operator identities", 30.0, body)


def criterion_3(n_cases: int = 500, source: Optional[ChainSource] = None, seed: int = 3) -> CriterionResult:
    source = source or random_source(2, 8)

    def body():
        rng = np.random.default_rng(seed)
        worst = 0.0
        for i in range(n_cases):
            chain = source(i, rng)
            params = _random_p(chain, rng)
            mu = np.exp(rng.uniform(-2.0, 2.0, chain.n))
            rho = rng.normal(size=chain.n)
            dec = decompose_tangent(mu, rho, params, chain)
            worst = max(worst, float(np.max(np.abs(rho - tangent_vector(mu, dec, params, chain)))))
        return worst <= 1e-10, f"{n_cases} round trips, worst residual {worst:.2e}"

    return _timed(3, "tangent round trip", 10.0, body)


# one-sided weights (times 60) for the first two nodes, fifth order
_EDGE_STENCILS = (np.array([-137.0, 300.0, -300.0, 200.0, -75.0, 12.0]),
                  np.array([-12.0, -65.0, 120.0, -60.0, 20.0, -3.0]))


def _fd_derivative(values, dt):
    """High-order finite differences on a uniform grid (at least 6 samples).

    A second-order stencil's error ``dt^2 f''' / 6`` is of the same order as
    the tolerances checked here, so it would test the stencil, not the flow.
    Interior nodes use the fourth-order central stencil.
    """
    f = np.asarray(values, dtype=float)
    if f.size < 6:
        raise ValueError("need at least 6 samples")
    out = np.empty_like(f)
    out[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * dt)
    for k, stencil in enumerate(_EDGE_STENCILS):
        out[k] = stencil @ f[:6] / (60 * dt)
        out[-1 - k] = -(stencil @ f[::-1][:6]) / (60 * dt)
    return out


def _short_trajectories(n_runs, source, seed, t_max):
    rng = np.random.default_rng(seed)
    for i in range(n_runs):
        chain = source(i, rng)
        a, b = (float(v) for v in rng.choice([0.7, 1.0, 1.5], size=2))
        params = _random_p(chain, rng, a=a, b=b)
        rho0 = _random_density(chain, rng)
        yield chain, params, integrate_flow(rho0, params, chain, t_max=t_max, record_every=1)


def criterion_4(n_runs: int = 20, source: Optional[ChainSource] = None, seed: int = 4,
                t_max: float = 10.0) -> CriterionResult:
    """Finite-difference entropy derivative against the squared gradient norm."""
    source = source or random_source(2, 8)

    def body():
        worst = 0.0
        for chain, params, traj in _short_trajectories(n_runs, source, seed, t_max):
            tol = max(1e-8, 5 * traj.dt**2)
            err = np.abs(_fd_derivative(traj.entropy, traj.dt) + traj.grad_norm_sq)
            worst = max(worst, float(np.max(err)) / tol)
        return worst <= 1.0, f"{n_runs} trajectories, worst error / tolerance {worst:.3f}"

    return _timed(4, "gradient-flow identity", 60.0, body)


def criterion_5(n_chains: int = 5, per_chain: int = 10, source: Optional[ChainSource] = None,
                seed: int = 5) -> CriterionResult:
    """Convergence to equilibrium, tail-fit quality and the sampled decay bound."""
    source = source or random_source(2, 8)

    def body():
        rng = np.random.default_rng(seed)
        problems = []
        worst_r2, worst_excess = 1.0, -math.inf
        for c in range(n_chains):
            chain = source(c, rng)
            params = _random_p(chain, rng)
            for k in range(per_chain):
                traj = integrate_flow(_random_density(chain, rng), params, chain, t_max=200.0)
                if not traj.stopped_early:
                    problems.append(f"chain {c} run {k} did not reach stop_tol")
                    continue
                report = estimate_decay(traj, chain, params, seed=int(rng.integers(2**31)))
                worst_r2 = min(worst_r2, report.r_squared)
                usable = traj.gap >= 1e-13
                f = np.log(traj.gap[usable]) + report.loja_constant * traj.times[usable]
                # largest f(t) - f(t0) over t0 <= t
                excess = float(np.max(f - np.minimum.accumulate(f)))
                worst_excess = max(worst_excess, excess)
        ok = not problems and worst_r2 >= 0.99 and worst_excess <= math.log(1.05)
        detail = (f"{n_chains * per_chain} runs, min r^2 {worst_r2:.6f}, "
                  f"worst bound ratio {math.exp(worst_excess):.4f}")
        if problems:
            detail += f", {len(problems)} unconverged"
        return ok, detail

    return _timed(5, "exponential convergence", 300.0, body)


def criterion_6(n_runs: int = 20, source: Optional[ChainSource] = None, seed: int = 6,
                t_max: float = 10.0) -> CriterionResult:
    """Positivity floor and the mass law ``d/dt mass = -a^-2 <log rho, p>``."""
    source = source or random_source(2, 8)

    def body():
        worst_mass, floor_ok = 0.0, True
        for chain, params, traj in _short_trajectories(n_runs, source, seed, t_max):
            floor_ok &= traj.floor > 0 and bool(np.all(traj.min_state >= traj.floor))
            rate = -(np.log(traj.states) @ (params.p * chain.stationary)) / params.a**2
            tol = max(1e-8, 5 * traj.dt**2)
            worst_mass = max(worst_mass, float(np.max(np.abs(_fd_derivative(traj.mass, traj.dt) - rate))) / tol)
        return floor_ok and worst_mass <= 1.0, (
            f"{n_runs} trajectories, floor respected={floor_ok}, worst mass error / tolerance {worst_mass:.3f}")

    return _timed(6, "positivity floor and mass law", None, body)


def criterion_7(n_triples: int = 30, source: Optional[ChainSource] = None, seed: int = 7,
                n_steps: int = 32, restarts: int = 2) -> CriterionResult:
    """Symmetry, triangle inequality, identity and the L1 comparison."""
    source = source or random_source(2, 5)

    def body():
        rng = np.random.default_rng(seed)
        opts = dict(n_steps=n_steps, restarts=restarts)
        worst_sym = worst_tri = worst_self = worst_l1 = 0.0
        for i in range(n_triples):
            chain = source(i, rng)
            params = _random_p(chain, rng)
            x, y, z = (_random_density(chain, rng, (0.5, 2.0)) for _ in range(3))
            d_xy = _quiet_distance(x, y, params, chain, seed=i, **opts).upper_bound
            d_yx = _quiet_distance(y, x, params, chain, seed=i, **opts).upper_bound
            d_yz = _quiet_distance(y, z, params, chain, seed=i, **opts).upper_bound
            d_xz = _quiet_distance(x, z, params, chain, seed=i, **opts).upper_bound
            d_xx = _quiet_distance(x, x, params, chain, seed=i, **opts).upper_bound
            worst_sym = max(worst_sym, abs(d_xy - d_yx) / max(d_xy, d_yx))
            worst_tri = max(worst_tri, d_xz / (d_xy + d_yz))
            worst_self = max(worst_self, d_xx)
            c = l1_bounds(x, y, params, chain, d_xy, n_samples=0).c
            worst_l1 = max(worst_l1, l1_norm(x - y, chain) / (c * d_xy))
        ok = worst_sym <= 0.02 and worst_tri <= 1.02 and worst_self <= 1e-6 and worst_l1 <= 1.0
        return ok, (f"{n_triples} triples, symmetry {worst_sym:.2e}, triangle ratio {worst_tri:.3f}, "
                    f"self distance {worst_self:.1e}, L1/(c W) {worst_l1:.3f}")

    return _timed(7, "metric axioms", 300.0, body)


def criterion_8(chain: Optional[MarkovChain] = None, scales=(1, 4, 16, 64)) -> CriterionResult:
    """``W(lam mu0, lam mu1) / sqrt(lam)`` stays flat while the L1 distance grows linearly."""
    chain = chain or five_state_chain()

    def body():
        params = make_params(1.0, 1.0, np.ones(chain.n), chain)
        mu0 = np.linspace(1.6, 0.6, chain.n)
        mu1 = mu0[::-1] * float(mu0 @ chain.stationary) / float(mu0[::-1] @ chain.stationary)
        ratios, l1 = [], []
        for lam in scales:
            est = _quiet_distance(lam * mu0, lam * mu1, params, chain)
            ratios.append(est.upper_bound / math.sqrt(lam))
            l1.append(l1_norm(lam * (mu0 - mu1), chain))
        spread = max(ratios) / min(ratios)
        growth = l1[-1] / l1[0]
        ok = spread <= 1.2 and abs(growth - scales[-1] / scales[0]) <= 1e-9 * growth
        ratio_text = ", ".join(f"{r:.4f}" for r in ratios)
        return ok, f"W/sqrt(lam) = [{ratio_text}], spread {spread:.4f}, L1 growth {growth:.1f}x"

    return _timed(8, "mass-scaling degeneracy", None, body)


def criterion_9(n_chains: int = 100, source: Optional[ChainSource] = None, seed: int = 9) -> CriterionResult:
    source = source or random_source()

    def body():
        rng = np.random.default_rng(seed)
        worst_top, worst_imag, min_gap = 0.0, 0.0, math.inf
        for i in range(n_chains):
            chain = source(i, rng)
            report = weighted_spectrum(chain)
            worst_top = max(worst_top, abs(report.eigenvalues.max() - 1.0))
            raw = np.linalg.eigvals(chain.kernel)
            worst_imag = max(worst_imag, float(np.max(np.abs(raw.imag))))
            if chain.n > 1:
                min_gap = min(min_gap, report.spectral_gap)
        ok = worst_top <= 1e-10 and worst_imag <= 1e-10 and min_gap > 0
        return ok, (f"{n_chains} chains, |kappa_1 - 1| <= {worst_top:.1e}, "
                    f"max |Im| {worst_imag:.1e}, min gap {min_gap:.3e}")

    return _timed(9, "spectrum", None, body)


def criterion_10(n_families: int = 50, seed: int = 10, steps=(1e-2, 1e-3, 1e-4, 1e-5)) -> CriterionResult:
    """Right derivative of a min-envelope against forward differences."""

    def body():
        rng = np.random.default_rng(seed)
        slopes = []
        t0 = 0.3
        for _ in range(n_families):
            n = int(rng.integers(2, 8))
            values = rng.uniform(0.5, 1.5, n)
            ties = rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False)
            values[ties] = 0.0
            beta = rng.uniform(-1.0, 1.0, n)
            gamma = rng.uniform(0.5, 2.0, n) * rng.choice([-1.0, 1.0], n)
            alpha = values - beta * t0 - gamma * t0**2

            def envelope(t):
                return float(np.min(alpha + beta * t + gamma * t**2))

            rates = beta + 2 * gamma * t0
            right = argmin_envelope_rate(alpha + beta * t0 + gamma * t0**2, rates)
            errors = [abs((envelope(t0 + h) - envelope(t0)) / h - right) for h in steps]
            slopes.append(np.polyfit(np.log(steps), np.log(errors), 1)[0])
        slopes = np.array(slopes)
        ok = bool(np.all(np.abs(slopes - 1.0) <= 0.1))
        return ok, f"{n_families} families, error-vs-h slopes in [{slopes.min():.3f}, {slopes.max():.3f}]"

    return _timed(10, "envelope right derivative", None, body)


def _theta(u, v):
    """Logarithmic mean written out independently of the library version."""
    diff = u - v
    same = np.abs(diff) <= 1e-12 * np.maximum(u, v)
    with np.errstate(divide="ignore", invalid="ignore"):
        quot = diff / (np.log(u) - np.log(v))
    return np.where(same, 0.5 * (u + v), quot)


def two_state_oracle(mu0, mu1, a: float, b: float, q: float, n_d: int = 60,
                     grid: float = 1e-3, max_slope: float = 1.0, lift: float = 1.0) -> float:
    """Shortest path for the symmetric 2-state chain by dynamic programming.

    With ``M`` the mass and ``d = mu(1) - mu(2)``, a path costs
    ``a^2 M'^2 + b^2 d'^2 / (8 q theta)`` per unit time, so the distance is
    the length of the shortest curve in that metric. The curve is taken as a
    graph ``M(d)`` over ``n_d`` slices of ``d`` with ``M`` on a grid of
    spacing ``grid * M0`` in ``[M0, (1 + lift) M0]``; moves between adjacent
    slices are limited to ``|dM/dd| <= max_slope`` and costed by Simpson's
    rule along the segment.
    """
    mu0, mu1 = np.asarray(mu0, dtype=float), np.asarray(mu1, dtype=float)
    m0 = 0.5 * (mu0[0] + mu0[1])
    if abs(m0 - 0.5 * (mu1[0] + mu1[1])) > 1e-12 * m0:
        raise ValueError("the oracle expects equal-mass endpoints")
    ds = np.linspace(mu0[0] - mu0[1], mu1[0] - mu1[1], n_d + 1)
    step = abs(ds[1] - ds[0])
    if step == 0:
        return 0.0
    spacing = grid * m0
    ms = m0 + spacing * np.arange(int(round(lift / grid)) + 1)
    width = int(math.ceil(max_slope * step / spacing))

    def speed(m, d, slope):
        return np.sqrt(a**2 * slope**2 + b**2 / (8 * q * _theta(m + d / 2, m - d / 2)))

    cost = np.full(ms.size, np.inf)
    cost[0] = 0.0
    for i in range(n_d):
        d_mid = 0.5 * (ds[i] + ds[i + 1])
        new = np.full(ms.size, np.inf)
        for offset in range(-width, width + 1):
            j = np.arange(max(0, -offset), ms.size - max(0, offset))
            src, dst = ms[j], ms[j + offset]
            slope = (dst - src) / step
            seg = step / 6 * (speed(src, ds[i], slope) + 4 * speed(0.5 * (src + dst), d_mid, slope)
                              + speed(dst, ds[i + 1], slope))
            new[j + offset] = np.minimum(new[j + offset], cost[j] + seg)
        cost = new
    return float(cost[0])


TWO_STATE_PAIRS = (
    # (mass, d0, d1, a)
    (1.0, 1.0, -1.0, 1.0),
    (1.0, 1.5, -0.5, 1.0),
    (0.5, 0.8, -0.8, 1.0),
    (2.0, 1.0, -3.0, 1.0),
    (1.0, 1.9, -1.9, 0.5),
)


def criterion_11(pairs=TWO_STATE_PAIRS, q: float = 0.5) -> CriterionResult:
    """Optimizer against the 2-state dynamic-programming oracle."""

    def body():
        endpoints = [(np.array([m + d0 / 2, m - d0 / 2]), np.array([m + d1 / 2, m - d1 / 2]), a)
                     for m, d0, d1, a in pairs]
        # oracle values first, independently of the optimizer
        oracle = [two_state_oracle(mu0, mu1, a, 1.0, q) for mu0, mu1, a in endpoints]
        chain = build_chain([[1 - q, q], [q, 1 - q]])
        worst = 0.0
        for (mu0, mu1, a), ref in zip(endpoints, oracle):
            est = _quiet_distance(mu0, mu1, make_params(a, 1.0, np.ones(2), chain), chain)
            worst = max(worst, abs(est.upper_bound - ref) / ref)
        return worst <= 0.02, f"{len(pairs)} pairs, worst relative gap to oracle {worst:.2e}"

    return _timed(11, "2-state brute-force oracle", None, body)


def run_all(quick: bool = False) -> List[CriterionResult]:
    """Every criterion; ``quick`` uses reduced counts on the built-in chains."""
    if not quick:
        return [criterion_1(), criterion_2(), criterion_3(), criterion_4(), criterion_5(), criterion_6(),
                criterion_7(), criterion_8(), criterion_9(), criterion_10(), criterion_11()]
    src = builtin_source()
    return [
        criterion_1(4, src), criterion_2(40, src), criterion_3(40, src), criterion_4(2, src, t_max=5.0),
        criterion_5(2, 2, src), criterion_6(2, src, t_max=5.0), criterion_7(2, src, n_steps=16),
        criterion_8(five_state_chain(), scales=(1, 16)), criterion_9(2, src), criterion_10(10),
        criterion_11(TWO_STATE_PAIRS[:2]),
    ]
