"""Entropy, its metric gradient, and the heat flow with source.

The flow ``rho' = b^-2 (K - I) rho - a^-2 <log rho, p> p`` is integrated by
fixed-step RK4. A positivity monitor compares each new state with an a
priori floor derived from the entropy sublevel set; a violating step is
redone with 2, 4, ... substeps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import xlogy

from .calculus import gradient, inner_edge, inner_node, l2_norm, mass
from .chain import MarkovChain, weighted_spectrum
from .errors import AtEquilibrium, InsufficientData, NotStrictlyPositive, StepSizeUnderflow
from .operators import TangentDecomposition, TransportParams

ENTROPY_AT_ONE = -1.0
GAP_CUTOFF = 1e-13
MAX_HALVINGS = 20


@dataclass(frozen=True, eq=False)
class FlowTrajectory:
    """Recorded samples of one heat-flow run.

    ``gap`` is the entropy excess over the equilibrium, evaluated without
    cancellation. ``floor`` is the positivity floor used by the monitor.
    """

    times: np.ndarray
    states: np.ndarray
    entropy: np.ndarray
    gap: np.ndarray
    grad_norm_sq: np.ndarray
    min_state: np.ndarray
    mass: np.ndarray
    l2_distance: np.ndarray
    floor: float
    dt: float
    stopped_early: bool
    halvings: int = 0

    @property
    def max_state(self) -> float:
        return float(self.states.max())


@dataclass(frozen=True)
class DecayReport:
    fitted_rate: float
    r_squared: float
    loja_constant: float
    l2_distance_final: float
    l2_rate: float = math.nan
    l2_r_squared: float = math.nan
    n_samples: int = 0
    spectral_gap: Optional[float] = None
    loja_label: str = "sampled lower-estimate"


def entropy(mu, chain: MarkovChain) -> float:
    """``sum_x (mu log mu - mu) pi(x)`` with ``0 log 0 = 0``."""
    mu = np.asarray(mu, dtype=float)
    return float(np.dot(xlogy(mu, mu) - mu, chain.stationary))


def iota(u):
    """``u log u - u + 1``, accurate near ``u = 1``."""
    u = np.asarray(u, dtype=float)
    eps = u - 1.0
    near = np.abs(eps) < 0.5
    safe = np.where(near, eps, 0.0)
    close = (1.0 + safe) * np.log1p(safe) - safe
    # sum_k (-1)^k e^k / (k (k - 1)) avoids the cancellation in `close`
    tiny = np.abs(eps) < 1e-2
    series = sum((-1) ** k * safe**k / (k * (k - 1)) for k in range(2, 10))
    return np.where(tiny, series, np.where(near, close, xlogy(u, u) - u + 1.0))


def entropy_gap(mu, chain: MarkovChain) -> float:
    """Entropy excess over the equilibrium, ``H(mu) - H(1)``."""
    return float(np.dot(iota(mu), chain.stationary))


def _check_positive(mu, what="mu"):
    mu = np.asarray(mu, dtype=float)
    if not np.all(mu > 0):
        raise NotStrictlyPositive(f"{what} must be strictly positive")
    return mu


def log_source_rate(mu, params: TransportParams, chain: MarkovChain) -> float:
    """``<log mu, p>_pi``."""
    return inner_node(np.log(mu), params.p, chain)


def entropy_gradient(mu, params: TransportParams, chain: MarkovChain) -> TangentDecomposition:
    """Metric gradient of the entropy as (``b^-2 grad log mu``, ``a^-2 <log mu, p>``)."""
    mu = _check_positive(mu)
    log_mu = np.log(mu)
    potential = log_mu / params.b**2
    potential = potential - potential.mean()
    return TangentDecomposition(grad_potential=gradient(log_mu) / params.b**2,
                                source_rate=inner_node(log_mu, params.p, chain) / params.a**2,
                                potential=potential)


def grad_norm_sq(mu, params: TransportParams, chain: MarkovChain) -> float:
    """``a^-2 <log mu, p>^2 + b^-2 ||grad log mu||_mu^2``.

    Uses ``mobility * grad log mu = grad mu`` so no logarithmic mean is
    evaluated.
    """
    mu = _check_positive(mu)
    log_mu = np.log(mu)
    source = inner_node(log_mu, params.p, chain)
    transport = inner_edge(gradient(log_mu), gradient(mu), chain)
    return source**2 / params.a**2 + transport / params.b**2


def heat_rhs(rho, params: TransportParams, chain: MarkovChain) -> np.ndarray:
    rho = _check_positive(rho, "rho")
    lap = chain.kernel @ rho - rho
    return lap / params.b**2 - log_source_rate(rho, params, chain) / params.a**2 * params.p


def _rhs_unchecked(rho, params, chain):
    lap = chain.kernel @ rho - rho
    return lap / params.b**2 - (np.dot(np.log(rho), params.p * chain.stationary) / params.a**2) * params.p


def sublevel_sup(gap_bound: float, chain: MarkovChain) -> float:
    """Largest component allowed by ``sum_x iota(rho(x)) pi(x) <= gap_bound``."""
    if gap_bound <= 0:
        return 1.0
    target = gap_bound / float(chain.stationary.min())
    hi = 2.0
    while iota(hi) < target:
        hi *= 2.0
    return brentq(lambda u: float(iota(u)) - target, 1.0, hi, xtol=1e-12, rtol=1e-12)


def positivity_floor(rho0, params: TransportParams, chain: MarkovChain) -> float:
    """A priori lower bound for every state of the flow started at ``rho0``.

    The sup bound ``R`` comes from the entropy sublevel set of ``rho0``; then
    ``C = sum_x pi p max(0, log R)`` and the floor is
    ``min(min(rho0) / 2, exp(-2 C max p / min(pi p^2)))``.
    """
    rho0 = _check_positive(rho0, "rho0")
    pi, p = chain.stationary, params.p
    sup = sublevel_sup(entropy_gap(rho0, chain), chain)
    c_bound = float(np.sum(pi * p)) * max(0.0, math.log(sup))
    exponent = -2.0 * c_bound * float(p.max()) / float(np.min(pi * p**2))
    return min(0.5 * float(rho0.min()), math.exp(exponent))


def rk4_step(rho, dt, params, chain):
    k1 = _rhs_unchecked(rho, params, chain)
    k2 = _rhs_unchecked(rho + 0.5 * dt * k1, params, chain)
    k3 = _rhs_unchecked(rho + 0.5 * dt * k2, params, chain)
    k4 = _rhs_unchecked(rho + dt * k3, params, chain)
    return rho + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _guarded_step(rho, dt, floor, params, chain):
    """One step of size ``dt``; returns (state, halvings used)."""
    for halvings in range(MAX_HALVINGS + 1):
        substeps = 2**halvings
        h = dt / substeps
        state = rho
        ok = True
        for _ in range(substeps):
            with np.errstate(invalid="ignore", divide="ignore"):
                state = rk4_step(state, h, params, chain)
            if not np.all(np.isfinite(state)) or state.min() < floor:
                ok = False
                break
        if ok:
            return state, halvings
    raise StepSizeUnderflow(f"positivity floor {floor:.3e} violated after {MAX_HALVINGS} halvings")


def integrate_flow(rho0, params: TransportParams, chain: MarkovChain, *, dt: Optional[float] = None,
                   t_max: float = 200.0, stop_tol: float = 1e-10, record_every: int = 10) -> FlowTrajectory:
    """Integrate the heat flow with source from ``rho0``.

    Stops at ``t_max`` or once ``||rho_t - 1||_{pi,2} < stop_tol``; the
    final state is always recorded. ``dt`` defaults to
    ``0.01 * min(a^2, b^2)``.
    """
    rho = np.array(rho0, dtype=float)
    if rho.shape != (chain.n,) or not np.all(rho > 0):
        raise NotStrictlyPositive("rho0 must be a strictly positive density of the chain's size")
    if dt is None:
        dt = 0.01 * min(params.a**2, params.b**2)
    if dt <= 0:
        raise ValueError("dt must be positive")
    if record_every < 1:
        raise ValueError("record_every must be positive")
    floor = positivity_floor(rho, params, chain)
    rows = []

    def record(t, state):
        rows.append((t, state.copy(), entropy(state, chain), entropy_gap(state, chain),
                     grad_norm_sq(state, params, chain), float(state.min()), mass(state, chain),
                     l2_norm(state - 1.0, chain)))

    t = 0.0
    step = 0
    total_halvings = 0
    record(t, rho)
    stopped = l2_norm(rho - 1.0, chain) < stop_tol
    n_steps = int(math.ceil(t_max / dt - 1e-9))
    while not stopped and step < n_steps:
        rho, used = _guarded_step(rho, dt, floor, params, chain)
        total_halvings += used
        step += 1
        t = step * dt
        stopped = l2_norm(rho - 1.0, chain) < stop_tol
        if stopped or step % record_every == 0 or step == n_steps:
            record(t, rho)

    cols = list(zip(*rows))
    return FlowTrajectory(
        times=np.array(cols[0]), states=np.array(cols[1]), entropy=np.array(cols[2]),
        gap=np.array(cols[3]), grad_norm_sq=np.array(cols[4]), min_state=np.array(cols[5]),
        mass=np.array(cols[6]), l2_distance=np.array(cols[7]), floor=floor, dt=dt,
        stopped_early=bool(stopped), halvings=total_halvings,
    )


def lojasiewicz_ratio(mu, params: TransportParams, chain: MarkovChain) -> float:
    """``||grad H(mu)||_g^2 / (H(mu) - H(1))``."""
    mu = _check_positive(mu)
    gap = entropy_gap(mu, chain)
    if gap < 1e-14:
        raise AtEquilibrium("entropy gap below 1e-14; the ratio is undefined at equilibrium")
    return grad_norm_sq(mu, params, chain) / gap


def sample_lojasiewicz(params: TransportParams, chain: MarkovChain, gap_bound: float, floor: float,
                       n_samples: int = 200, seed: int = 0) -> float:
    """Smallest ratio over random states of the sublevel set ``gap <= gap_bound``.

    States are ``exp(s * z)`` with ``z`` standard normal, scaled down until
    they fall inside the set and above ``floor``.
    """
    rng = np.random.default_rng(seed)
    best = math.inf
    count = 0
    for _ in range(50 * n_samples):
        if count >= n_samples:
            break
        z = rng.normal(size=chain.n)
        state = np.exp(rng.uniform(0.0, 1.0) ** 2 * 3.0 * z)
        for _ in range(60):
            gap = entropy_gap(state, chain)
            if gap <= gap_bound and state.min() >= floor:
                break
            state = np.sqrt(state)
        else:
            continue
        if gap < GAP_CUTOFF:
            continue
        best = min(best, grad_norm_sq(state, params, chain) / gap)
        count += 1
    return best


def _linear_fit(x, y):
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


def estimate_decay(traj: FlowTrajectory, chain: MarkovChain, params: Optional[TransportParams] = None,
                   n_random: int = 200, seed: int = 0) -> DecayReport:
    """Tail fit of the entropy gap and a sampled Lojasiewicz constant.

    Samples with gap below 1e-13 are dropped; the fit uses the later half of
    what remains. The constant is the smallest ratio over usable recorded
    states and, when ``params`` is given, ``n_random`` random states of the
    initial sublevel set.

    Raises
    ------
    InsufficientData
        Fewer than 10 usable samples.
    """
    usable = np.flatnonzero(traj.gap >= GAP_CUTOFF)
    if usable.size < 10:
        raise InsufficientData(f"only {usable.size} samples with entropy gap >= {GAP_CUTOFF}")
    tail = usable[usable.size // 2:]
    if tail.size < 10:
        tail = usable[-10:]
    times = traj.times[tail]
    rate, r2 = _linear_fit(times, np.log(traj.gap[tail]))
    l2 = traj.l2_distance
    l2_ok = tail[l2[tail] > 0]
    if l2_ok.size >= 2:
        l2_rate, l2_r2 = _linear_fit(traj.times[l2_ok], np.log(l2[l2_ok] ** 2))
    else:
        l2_rate, l2_r2 = math.nan, math.nan
    loja = float(np.min(traj.grad_norm_sq[usable] / traj.gap[usable]))
    if params is not None and n_random > 0:
        loja = min(loja, sample_lojasiewicz(params, chain, float(traj.gap[0]), traj.floor,
                                            n_samples=n_random, seed=seed))
    return DecayReport(
        fitted_rate=-rate, r_squared=r2, loja_constant=loja, l2_distance_final=float(l2[-1]),
        l2_rate=-l2_rate, l2_r_squared=l2_r2, n_samples=int(tail.size),
        spectral_gap=weighted_spectrum(chain).spectral_gap,
    )


def argmin_envelope_rate(values, rates) -> float:
    """Right derivative of ``t -> min_x eta_t(x)`` from values and rates at ``t``.

    It is the smallest rate over the (near-)minimizers.
    """
    values = np.asarray(values, dtype=float)
    rates = np.asarray(rates, dtype=float)
    if values.shape != rates.shape or values.size == 0:
        raise ValueError("values and rates must be non-empty and of equal length")
    lowest = values.min()
    ties = values <= lowest + 1e-12 * (1 + abs(lowest))
    return float(rates[ties].min())
