"""Heat inequalities and the Moser iteration on radial functions.

Everything here works on a fixed :class:`WarpedMetric` with the discrete
operators of :mod:`ricci_smoothing.geometry`: node quadrature for volume
integrals, edge quadrature for Dirichlet integrals, and the divergence-form
Laplacian, which is self-adjoint for that pair.

Constants table
---------------
``energy_constant(p, c)``
    ``max(2(p-1)/p * (1 + 1/(p-1)^2), (4/27) (p+c)^3 p^2 / (p-1)^2)``.
    The first entry is the cutoff-gradient coefficient produced by the
    integration-by-parts inequality, the second the Hoelder/Sobolev/Young
    absorption of the potential ``u`` into ``(p-1)/p`` of the gradient.
``cutoff_constant(p, c)``
    ``4 * energy_constant(p, c)``: cutoffs satisfy ``|grad chi| <= 2/(r-r')``.
The window inequality carries the extra factor ``p/(p-1)`` that comes from
the gradient coefficient ``(p-1)/p`` of the energy inequality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ricci_smoothing.geometry import (
    WarpedMetric,
    dirichlet_energy,
    edge_conductance,
    laplacian_values,
    tube_at,
    tube_integrals,
)

NU = 1.5


def energy_constant(p: float, c: float = 0.0) -> float:
    if not p > 1:
        raise ValueError("p must exceed 1")
    grad = 2.0 * (p - 1.0) / p * (1.0 + 1.0 / (p - 1.0) ** 2)
    absorb = 4.0 / 27.0 * (p + c) ** 3 * p**2 / (p - 1.0) ** 2
    return max(grad, absorb)


def cutoff_constant(p: float, c: float = 0.0) -> float:
    return 4.0 * energy_constant(p, c)


def smoothstep(x: np.ndarray) -> np.ndarray:
    """C^2 quintic step, 0 for x <= 0 and 1 for x >= 1; slope at most 15/8."""
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (10.0 - 15.0 * x + 6.0 * x**2)


def cutoff(m: WarpedMetric, center: int, inner: float, outer: float) -> np.ndarray:
    """1 within arclength ``inner`` of ``center``, 0 beyond ``outer``."""
    if not 0 <= inner < outer:
        raise ValueError("cutoff needs 0 <= inner < outer")
    dist = tube_at(m, center, outer).distances
    return 1.0 - smoothstep((dist - inner) / (outer - inner))


# ---------------------------------------------------------------------------
# heat problems


@dataclass
class HeatProblem:
    """``df/dt = Lap f + u f`` on a fixed metric, solved as an equality.

    ``u`` is a callable ``t -> node array`` (nonnegative).  ``mu`` is the
    declared budget ``(int u^3)^(1/3) <= mu t^(-1/3)``; ``A`` the Sobolev
    constant of the tubes used in the checks; ``c`` the volume-growth
    constant (0 on a fixed metric).
    """

    metric: WarpedMetric
    f0: np.ndarray
    T: float
    u: Callable[[float], np.ndarray] | None = None
    mu: float = 0.0
    A: float = 1.0
    c: float = 0.0

    def __post_init__(self):
        self.f0 = np.asarray(self.f0, dtype=float)
        if np.any(self.f0 < 0):
            raise ValueError("initial data must be nonnegative")
        if not self.T > 0:
            raise ValueError("horizon T must be positive")

    def potential(self, t: float) -> np.ndarray:
        if self.u is None:
            return np.zeros(self.metric.grid.n)
        return np.asarray(self.u(t), dtype=float)

    def budget_excess(self, times) -> float:
        """Largest ``(int u^3)^(1/3) - mu t^(-1/3)`` over the sampled times."""
        dv = self.metric.volume_weights
        worst = -math.inf
        for t in times:
            if t <= 0:
                continue
            norm = float(np.dot(dv, self.potential(t) ** 3)) ** (1.0 / 3.0)
            worst = max(worst, norm - self.mu * t ** (-1.0 / 3.0))
        return worst


@dataclass
class HeatSolution:
    metric: WarpedMetric
    times: np.ndarray
    values: np.ndarray  # (samples, n)
    problem: HeatProblem | None = None
    blowup_time: float | None = None
    extra: dict = field(default_factory=dict)

    def at(self, t: float) -> np.ndarray:
        """Linear interpolation in time."""
        times = self.times
        j = int(np.searchsorted(times, t))
        if j <= 0:
            return self.values[0]
        if j >= times.size:
            return self.values[-1]
        t0, t1 = times[j - 1], times[j]
        lam = (t - t0) / (t1 - t0)
        return (1.0 - lam) * self.values[j - 1] + lam * self.values[j]


def diffusion_dt_limit(m: WarpedMetric) -> float:
    """Largest explicit Euler step keeping the heat step monotone."""
    cond = edge_conductance(m)
    diag = (cond + np.roll(cond, 1)) / m.volume_weights
    return 1.0 / float(diag.max())


def heat_solve(hp: HeatProblem, dt: float | None = None, safety: float = 0.9) -> HeatSolution:
    """Forward Euler for ``df/dt = Lap f + u f``; every step is sampled.

    With ``dt`` below :func:`diffusion_dt_limit` the update is a nonnegative
    combination of neighbouring values, so ``f`` stays nonnegative and, for
    ``u = 0``, between the extremes of ``f0``.  The potential is evaluated
    at the midpoint of each step.
    """
    m = hp.metric
    limit = diffusion_dt_limit(m)
    if dt is None:
        dt = safety * limit
    elif dt > limit * (1 + 1e-12):
        raise ValueError(f"dt={dt!r} violates the diffusion limit {limit!r}")
    steps = max(1, math.ceil(hp.T / dt))
    dt = hp.T / steps
    f = hp.f0.copy()
    out = np.empty((steps + 1, f.size))
    out[0] = f
    for k in range(steps):
        t = k * dt
        f = f + dt * (laplacian_values(m, f) + hp.potential(t + 0.5 * dt) * f)
        out[k + 1] = f
    return HeatSolution(m, np.linspace(0.0, hp.T, steps + 1), out, hp)


# ---------------------------------------------------------------------------
# inequality checks


@dataclass(frozen=True)
class InequalityResult:
    lhs: float
    rhs: float
    flagged: bool = False

    @property
    def gap(self) -> float:
        return self.rhs - self.lhs

    def holds(self, rel_tol: float = 1e-8) -> bool:
        return self.lhs <= self.rhs + rel_tol * max(abs(self.lhs), abs(self.rhs))


def _pow(f: np.ndarray, e: float) -> np.ndarray:
    if e < 1:
        f = np.maximum(f, 1e-300)
    return f**e


def cutoff_ibp_gap(f: np.ndarray, chi: np.ndarray, p: float, m: WarpedMetric) -> InequalityResult:
    """Both sides of the integration-by-parts inequality

    ``int |grad(chi f^(p/2))|^2 <= p^2/(2(p-1)) int chi^2 f^(p-1) (-Lap f)
    + (1 + 1/(p-1)^2) int |grad chi|^2 f^p``.
    """
    if not p > 1:
        raise ValueError("p must exceed 1")
    f = np.asarray(f, dtype=float)
    chi = np.asarray(chi, dtype=float)
    if np.any(f < 0):
        raise ValueError("f must be nonnegative")
    lhs = dirichlet_energy(m, chi * f ** (p / 2.0))
    source = np.dot(m.volume_weights, chi**2 * _pow(f, p - 1.0) * (-laplacian_values(m, f)))
    grad = dirichlet_energy(m, chi, weight=f**p)
    rhs = p**2 / (2.0 * (p - 1.0)) * source + (1.0 + 1.0 / (p - 1.0) ** 2) * grad
    flagged = bool(p < 2 and np.any(f == 0))
    return InequalityResult(float(lhs), float(rhs), flagged)


def energy_step_check(sol: HeatSolution, chi: np.ndarray, p: float, t: float,
                      mu: float | None = None, A: float | None = None, c: float | None = None) -> float:
    """Signed residual of the local energy inequality at time ``t``.

    ``d/dt int chi^2 f^p + (p-1)/p int |grad(chi f^(p/2))|^2
    - C_p int |grad chi|^2 f^p - C_p mu^3 A^2 t^(-1) int chi^2 f^p``,
    with ``C_p = energy_constant(p, c)``.  Nonpositive when the inequality
    holds.  The time derivative is a centred difference of the samples.
    """
    if not t > 0:
        raise ValueError("the energy check needs t > 0")
    hp = sol.problem
    mu = hp.mu if mu is None else mu
    A = hp.A if A is None else A
    c = hp.c if c is None else c
    m = sol.metric
    dv = m.volume_weights
    times = sol.times
    j = int(np.clip(np.searchsorted(times, t), 1, times.size - 2))

    def mass(k):
        return float(np.dot(dv, chi**2 * sol.values[k] ** p))

    rate = (mass(j + 1) - mass(j - 1)) / (times[j + 1] - times[j - 1])
    f = sol.values[j]
    tj = times[j]
    cp = energy_constant(p, c)
    grad = dirichlet_energy(m, chi * f ** (p / 2.0))
    cut = dirichlet_energy(m, chi, weight=f**p)
    return rate + (p - 1.0) / p * grad - cp * cut - cp * mu**3 * A**2 / tj * mass(j)


def _tube_series(sol: HeatSolution, p: float, r: float, center: int) -> np.ndarray:
    tube = tube_at(sol.metric, center, r)
    w = tube.weights * sol.metric.volume_weights
    return (sol.values**p) @ w


def _time_integral(times: np.ndarray, series: np.ndarray, tau: float) -> float:
    if tau >= times[-1]:
        return 0.0
    j = int(np.searchsorted(times, tau, side="right"))
    head = np.interp(tau, times, series)
    ts = np.concatenate(([tau], times[j:]))
    ys = np.concatenate(([head], series[j:]))
    return float(np.trapezoid(ys, ts))


def h_functional(sol: HeatSolution, p: float, tau: float, r: float, center: int) -> float:
    """``int_tau^T int_{T_r(center)} f^p dV dt``."""
    if not tau < sol.times[-1]:
        raise ValueError("tau must precede the horizon")
    return _time_integral(sol.times, _tube_series(sol, p, r, center), tau)


def window_check(sol: HeatSolution, p: float, tau: float, tau2: float, r: float, r2: float,
                 A: float, mu: float, center: int, c: float = 0.0) -> InequalityResult:
    """Both sides of the window inequality

    ``H(3p/2, tau2, r2) <= A p/(p-1) (C(tau2) + 1/(tau2-tau) + C1/(r-r2)^2)^(3/2) H(p, tau, r)^(3/2)``

    with ``C(t) = C_p mu^3 A^2 / t`` and ``C1 = cutoff_constant(p, c)``.
    """
    m = sol.metric
    res = float(m.grid.ds * m.w.max())
    dt = float(np.diff(sol.times).max())
    if not (0 <= tau < tau2 < sol.times[-1]) or not (0 < r2 < r):
        raise ValueError("need tau < tau2 < T and r2 < r")
    if r - r2 < 2.0 * res or tau2 - tau < 2.0 * dt:
        raise ValueError("degenerate window: shrink steps below grid or time resolution")
    cp = energy_constant(p, c)
    lhs = h_functional(sol, NU * p, tau2, r2, center)
    bracket = cp * mu**3 * A**2 / tau2 + 1.0 / (tau2 - tau) + cutoff_constant(p, c) / (r - r2) ** 2
    rhs = A * p / (p - 1.0) * bracket**1.5 * h_functional(sol, p, tau, r, center) ** 1.5
    return InequalityResult(lhs, float(rhs))


# ---------------------------------------------------------------------------
# iteration schedule and sup bound


@dataclass(frozen=True)
class MoserSchedule:
    p0: float
    t: float
    r: float
    nu: float
    k_max: int
    entries: tuple  # (p_k, tau_k, r_k)
    sigma: np.ndarray
    sigma_prime: np.ndarray


def moser_schedule(p0: float, t: float, r: float, k_max: int) -> MoserSchedule:
    """``p_k = p0 nu^k``, ``tau_k = t(1 - nu^(-k-1))``, ``r_k = r/2 (1 + nu^(-k/2))``."""
    if not p0 > 2 or not t > 0 or not r > 0:
        raise ValueError("need p0 > 2, t > 0, r > 0")
    k = np.arange(k_max + 1)
    entries = tuple(
        (p0 * NU**i, t * (1.0 - NU ** (-i - 1)), 0.5 * r * (1.0 + NU ** (-i / 2.0)))
        for i in range(k_max + 1)
    )
    sigma = np.cumsum(NU ** (-k.astype(float)))
    sigma_prime = np.cumsum(k * NU ** (-k.astype(float)))
    return MoserSchedule(p0, t, r, NU, k_max, entries, sigma, sigma_prime)


def sup_bound_kernel(A: float, mu: float, p0: float, t: float, r: float, energy: float) -> float:
    """``A^(2/p0) ((1 + A^2 mu^3)/t + 1/r^2)^(3/p0) energy^(1/p0)``."""
    return A ** (2.0 / p0) * ((1.0 + A**2 * mu**3) / t + 1.0 / r**2) ** (3.0 / p0) * energy ** (1.0 / p0)


def kernel_ratio(sol: HeatSolution, A: float, mu: float, p0: float, r: float, center: int,
                 t_from: float = 0.1) -> float:
    """``max f(center, t) / kernel`` over samples with ``t >= t_from * T``.

    The energy is ``int_0^T int_{T_r(center)} f^p0``.
    """
    energy = h_functional(sol, p0, 0.0, r, center)
    T = sol.times[-1]
    sel = sol.times >= t_from * T
    worst = 0.0
    for t, row in zip(sol.times[sel], sol.values[sel]):
        worst = max(worst, float(row[center]) / sup_bound_kernel(A, mu, p0, t, r, energy))
    return worst


# ---------------------------------------------------------------------------
# quadratic reaction and the coupled decay estimate


def _tube_l2_max(m: WarpedMetric, f: np.ndarray, r: float) -> float:
    return float(np.sqrt(tube_integrals(m, f**2 * m.volume_weights, r).max()))


def scalar_smoothing_check(m: WarpedMetric, f0: np.ndarray, C0: float, A: float, r: float, T: float,
                           safety: float = 0.9, blowup_level: float = 1e8, C2: float | None = None) -> dict:
    """Solve ``df/dt = Lap f + C0 f^2`` and report the smoothing trackers.

    Keys: ``initial_l2`` (max tube L^2 norm of ``f0`` at radius ``r``),
    ``entry_threshold`` ``(6 C0 A)^-1``, ``hypothesis_ok``,
    ``maximal_threshold`` ``(3 C0 A)^-1``, ``threshold_crossing`` (first time
    the tube norm exceeds it, or None), ``max_t_sup_f``, ``blowup_time``,
    ``final_time``, ``horizon`` (``min(T, C2 r^2)`` when ``C2`` is given),
    ``reached_horizon`` and ``solution``.
    """
    f = np.asarray(f0, dtype=float).copy()
    if np.any(f < 0):
        raise ValueError("initial data must be nonnegative")
    entry = 1.0 / (6.0 * C0 * A)
    maximal = 1.0 / (3.0 * C0 * A)
    initial = _tube_l2_max(m, f, r)
    horizon = T if C2 is None else min(T, C2 * r**2)
    limit = safety * diffusion_dt_limit(m)

    t = 0.0
    times = [0.0]
    values = [f.copy()]
    crossing = None
    blowup = None
    max_tsup = 0.0
    while t < horizon * (1 - 1e-14):
        fmax = float(f.max())
        dt = min(limit, 0.1 / (C0 * fmax) if fmax > 0 else limit, horizon - t)
        f = f + dt * (laplacian_values(m, f) + C0 * f**2)
        t += dt
        if not np.all(np.isfinite(f)) or f.max() > blowup_level:
            blowup = t
            break
        times.append(t)
        values.append(f.copy())
        max_tsup = max(max_tsup, t * float(f.max()))
        if crossing is None and _tube_l2_max(m, f, r) > maximal:
            crossing = t
    sol = HeatSolution(m, np.array(times), np.array(values), blowup_time=blowup)
    return {
        "initial_l2": initial,
        "entry_threshold": entry,
        "hypothesis_ok": initial <= entry,
        "maximal_threshold": maximal,
        "threshold_crossing": crossing,
        "max_t_sup_f": max_tsup,
        "blowup_time": blowup,
        "final_time": times[-1],
        "horizon": horizon,
        "reached_horizon": blowup is None and times[-1] >= horizon * (1 - 1e-12),
        "solution": sol,
    }


def corollary_decay_check(f_sol: HeatSolution, u0: np.ndarray, c0: float, A: float, r: float,
                          safety: float = 0.9) -> dict:
    """Solve ``du/dt = Lap u + c0 f u`` along the samples of ``f_sol``.

    Reports ``max_ratio``: the largest
    ``t^(2/3) u(x, t) / (A^(2/3) (int_{T_3r(x)} u0^3)^(1/3))`` over nodes and
    times ``t > 0``, and the solution.
    """
    m = f_sol.metric
    u = np.asarray(u0, dtype=float).copy()
    if np.any(u < 0):
        raise ValueError("initial data must be nonnegative")
    cubes = tube_integrals(m, u**3 * m.volume_weights, 3.0 * r)
    with np.errstate(divide="ignore"):
        denom = A ** (2.0 / 3.0) * np.cbrt(cubes)
    limit = safety * diffusion_dt_limit(m)
    times = [0.0]
    values = [u.copy()]
    worst = 0.0
    T = f_sol.times[-1]
    t = 0.0
    while t < T * (1 - 1e-14):
        fmid = f_sol.at(t)
        react = float((c0 * fmid).max())
        dt = min(limit, 0.1 / react if react > 0 else limit, T - t)
        u = u + dt * (laplacian_values(m, u) + c0 * f_sol.at(t + 0.5 * dt) * u)
        t += dt
        times.append(t)
        values.append(u.copy())
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(denom > 0, t ** (2.0 / 3.0) * u / denom, 0.0)
        worst = max(worst, float(ratio.max()))
    return {
        "max_ratio": worst,
        "solution": HeatSolution(m, np.array(times), np.array(values)),
    }
