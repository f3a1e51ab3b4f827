"""Seeded problem generators shared by the experiments and the tests."""

from __future__ import annotations

import math

import numpy as np

from ricci_smoothing.analysis import sobolev_estimate
from ricci_smoothing.geometry import (
    Fourier,
    Grid,
    WarpedMetric,
    build_metric,
    curvature,
    tube_at,
    tube_integrals,
)
from ricci_smoothing.moser import HeatProblem


def bump_profile(height: float, period_length: float = 4.0, depth_fraction: float = 0.2,
                 reference_n: int = 256, points_per_width: float = 8.0, b0: float = 1.0) -> dict:
    """Bump of the given curvature height whose dip is a fixed fraction of ``b0``.

    ``width = sqrt(2 depth_fraction b0 / height)`` so that ``b'' = height`` at
    the bottom.  Narrow bumps get a graded ``w`` that puts about
    ``points_per_width`` nodes of a ``reference_n`` grid across the bump; the
    grading is part of the profile, so refining the grid later keeps it.
    """
    width = math.sqrt(2.0 * depth_fraction * b0 / height)
    ds = period_length / reference_n
    grading = min(1.0, width / (points_per_width * ds))
    sigma = 4.0 * width / grading if grading < 1.0 else 1.0
    return {
        "family": "bump",
        "center": 0.5 * period_length,
        "height": float(height),
        "width": width,
        "b0": b0,
        "grading": grading,
        "grading_sigma": sigma,
    }


def max_tube_l2(m: WarpedMetric, r: float) -> float:
    fld = curvature(m)
    return float(tube_integrals(m, fld.riem_norm_sq * m.volume_weights, r).max())


def with_tube_l2(profile: dict, grid: Grid, r: float, target: float) -> dict:
    """Copy of ``profile`` with ``a0`` chosen so the largest tube ``L^2``
    curvature at radius ``r`` equals ``target`` (it is linear in ``a0``)."""
    base = dict(profile, a0=1.0)
    l2 = max_tube_l2(build_metric(base, grid), r)
    return dict(base, a0=target / l2)


def ric_bound(m: WarpedMetric) -> float:
    """``sup |Ric|`` as an operator norm (largest absolute eigenvalue)."""
    fld = curvature(m)
    return float(np.abs(np.stack([fld.ric_r, fld.ric_theta, fld.ric_s])).max())


def horizon(m: WarpedMetric, r: float) -> float:
    """``min(r^2, 1/K)`` with ``K = sup |Ric|`` of the metric."""
    K = ric_bound(m)
    return min(r * r, 1.0 / K) if K > 0 else r * r


def random_heat_problem(seed: int, n: int = 128, period_length: float = 4.0,
                        adversarial: bool = False):
    """Seeded heat problem with a time-independent potential.

    A constant-in-time ``u = U(x)`` satisfies ``(int u^3)^(1/3) <= mu t^(-1/3)``
    on ``[0, T]`` with ``mu = ||U||_3 T^(1/3)``.  Returns
    ``(problem, center, r)``; ``A`` is the Sobolev estimate of the ``r``-tube.
    The centre sits on a node of the 128-point grid, so the same seed gives
    the same problem at every resolution that refines it.

    ``adversarial`` replaces ``u`` by a large constant while declaring a tiny
    budget, so the energy inequality must fail.
    """
    rng = np.random.default_rng(seed)
    grid = Grid(n, period_length)
    m = build_metric(Fourier.random(seed, amplitude=0.3), grid)
    frac = rng.uniform()
    center = round(int(128 * frac) * n / 128) % n
    r = float(rng.uniform(0.6, 1.2))
    T = float(rng.uniform(0.05, 0.3))
    amp = rng.uniform(0.5, 5.0)
    U = amp * (1.0 + np.cos(2.0 * math.pi * (grid.s / period_length - rng.uniform())))
    mu = float(np.dot(m.volume_weights, U**3)) ** (1.0 / 3.0) * T ** (1.0 / 3.0)
    s0 = grid.s[center]
    f0 = np.exp(-(((grid.s - s0) / rng.uniform(0.1, 0.5)) ** 2)) + 0.05 * rng.uniform()
    A = sobolev_estimate(m, tube_at(m, center, r)).A
    if adversarial:
        U, mu = np.full(n, 500.0), 1e-3
    hp = HeatProblem(m, f0, T, u=_Constant(U), mu=mu, A=A)
    return hp, center, r


class _Constant:
    """Picklable time-independent potential."""

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)

    def __call__(self, t):
        return self.values


def random_cutoff_pair(seed: int, m: WarpedMetric):
    """Seeded smooth positive ``f`` and a cutoff ``chi`` for the integration-by-parts suite."""
    from ricci_smoothing.moser import cutoff

    rng = np.random.default_rng(seed)
    f = build_metric(Fourier.random(10_000 + seed, amplitude=0.8), m.grid).b
    center = int(rng.integers(m.grid.n))
    inner = float(rng.uniform(0.1, 0.4))
    outer = float(rng.uniform(0.5, 1.0))
    return f, cutoff(m, center, inner, outer)


def default_calibration_suite(base_n: int = 128) -> list[dict]:
    """Twelve members spanning bump heights and collapse factors.

    Bumps live on ``L = 4`` with tube radius ``r = 0.5``; their ``a0`` puts
    the largest tube ``L^2`` curvature at ``0.05 * factor``.
    """
    members = []
    r = 0.5
    grid = Grid(base_n, 4.0)
    for h in (10.0, 100.0, 1000.0):
        prof = bump_profile(h, 4.0, reference_n=256)
        fixed = with_tube_l2(prof, grid, r, 0.05)
        for factor in (1.0, 0.1, 0.01):
            members.append({
                "id": f"bump-h{int(h)}-a{factor:g}",
                "grid": {"n": base_n, "period_length": 4.0},
                "profile": dict(fixed, a0=fixed["a0"] * factor),
                "r": r,
            })
    members.append({"id": "flat-product", "grid": {"n": base_n, "period_length": 8.0},
                    "profile": {"family": "flat_product", "a0": 1.0, "b0": 1.0}, "r": r})
    members.append({"id": "collapsed-modulated", "grid": {"n": base_n, "period_length": 8.0},
                    "profile": {"family": "collapsed", "a0": 0.01, "b0": 1.0, "b_amplitude": 0.2},
                    "r": r})
    members.append({"id": "fourier-seed7", "grid": {"n": base_n, "period_length": 8.0},
                    "profile": {"family": "fourier", "seed": 7, "amplitude": 0.15}, "r": r})
    return members
