"""Geometric functionals behind the smoothing hypotheses.

Sobolev constants of tubes, greedy coverings, curvature-concentration scans
and tube-volume comparability.  Tubes are fiber-saturated, so all of these
reduce to one-dimensional problems along the arclength of the ``s``-circle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from ricci_smoothing.geometry import (
    RadialFunction,
    Tube,
    WarpedMetric,
    curvature,
    dirichlet_energy,
    edge_conductance,
    tube_at,
    tube_integrals,
)


@dataclass(frozen=True)
class SobolevEstimate:
    A: float
    minimizer: RadialFunction
    iterations: int
    converged: bool
    restart_values: tuple = ()


@dataclass(frozen=True)
class ConcentrationRecord:
    center: int
    radius: float
    l2_curv: float
    volume: float
    ratio: float
    sobolev_proxy: float


def _ordered_tube(m: WarpedMetric, tube: Tube) -> np.ndarray:
    """Tube nodes in order of increasing signed offset from the centre."""
    n = m.grid.n
    offs = (tube.index_set - tube.center_index + n // 2) % n - n // 2
    return tube.index_set[np.argsort(offs, kind="stable")]


def rayleigh_ratio(m: WarpedMetric, f: np.ndarray) -> float:
    """``(int f^4)^(1/2) / int |grad f|^2`` for a node field."""
    top = math.sqrt(float(np.dot(m.volume_weights, f**4)))
    return top / dirichlet_energy(m, f)


def sobolev_estimate(m: WarpedMetric, tube: Tube, restarts: int = 8, seed: int = 0,
                     max_iter: int = 2000, tol: float = 1e-13) -> SobolevEstimate:
    """Best constant ``A`` in ``||f||_4^2 <= A ||grad f||_2^2`` over radial ``f``
    vanishing outside the tube's nodes.

    Each restart iterates ``f <- K^{-1}(mu f^3)`` renormalised to unit
    Dirichlet energy, where ``K`` is the Dirichlet matrix of the tube and
    ``mu`` the volume weights.  This is gradient ascent of ``int f^4`` on the
    energy ellipsoid taken in the energy inner product; convexity of
    ``int f^4`` makes the ratio nondecreasing along the iteration.  Returns a
    lower bound for the true constant (radial functions only).
    """
    idx = _ordered_tube(m, tube)
    k = idx.size
    if k < 8:
        raise ValueError(f"tube has {k} interior points; at least 8 are needed")
    n = m.grid.n
    cond = edge_conductance(m)
    left = cond[(idx - 1) % n]   # edge (i-1, i)
    right = cond[idx]            # edge (i, i+1)
    # upper banded form for cholesky_banded: row 0 superdiagonal, row 1 diagonal
    band = np.zeros((2, k))
    band[1] = left + right
    band[0, 1:] = -right[:-1]
    chol = cholesky_banded(band)
    mu = m.volume_weights[idx]

    def energy(v):
        return float(np.dot(band[1], v * v) + 2.0 * np.dot(band[0, 1:], v[:-1] * v[1:]))

    def ratio(v):
        return math.sqrt(float(np.dot(mu, v**4))) / energy(v)

    rng = np.random.default_rng(seed)
    x = (np.arange(k) + 1.0) / (k + 1.0)
    best = None
    values = []
    total_iter = 0
    all_converged = True
    for _ in range(restarts):
        c = rng.uniform(0.2, 0.8)
        width = rng.uniform(0.1, 0.5)
        f = np.sin(math.pi * x) * np.exp(-(((x - c) / width) ** 2)) * (1.0 + 0.1 * rng.uniform(size=k))
        f /= math.sqrt(energy(f))
        prev = ratio(f)
        converged = False
        for it in range(max_iter):
            y = cho_solve_banded((chol, False), mu * f**3)
            f = y / math.sqrt(energy(y))
            cur = ratio(f)
            if abs(cur - prev) <= tol * cur:
                converged = True
                break
            prev = cur
        total_iter += it + 1
        all_converged &= converged
        values.append(cur)
        if best is None or cur > best[0]:
            best = (cur, f.copy())

    full = np.zeros(n)
    full[idx] = np.abs(best[1])
    minimizer = RadialFunction(full, "sobolev_minimizer")
    return SobolevEstimate(
        A=rayleigh_ratio(m, full),
        minimizer=minimizer,
        iterations=total_iter,
        converged=all_converged,
        restart_values=tuple(sorted(values, reverse=True)),
    )


def covering(m: WarpedMetric, r: float, center: int):
    """Greedy cover of the ``2r``-tube by ``r``-tubes centred in the ``3r/2``-tube.

    Returns ``(centers, N)``; every node of the ``2r``-tube lies at arclength
    distance below ``r`` from some centre.
    """
    big = tube_at(m, center, 2.0 * r)
    allowed = tube_at(m, center, 1.5 * r)
    pos = _signed_offsets(m, center)
    targets = sorted(big.index_set, key=lambda i: pos[i])
    candidates = sorted(allowed.index_set, key=lambda i: pos[i])
    cand_pos = np.array([pos[i] for i in candidates])

    centers = []
    covered = set()
    for node in targets:
        if node in covered:
            continue
        p = pos[node]
        reach = np.flatnonzero(np.abs(cand_pos - p) < r)
        if reach.size:
            choice = candidates[int(reach.max())]
        else:
            choice = candidates[int(np.argmin(np.abs(cand_pos - p)))]
        centers.append(int(choice))
        for t in targets:
            if abs(pos[t] - pos[choice]) < r:
                covered.add(t)
        covered.add(node)
    return centers, len(centers)


def _signed_offsets(m: WarpedMetric, center: int) -> np.ndarray:
    edges = m.edge_lengths
    total = float(edges.sum())
    pos = np.concatenate(([0.0], np.cumsum(edges[:-1])))
    return (pos - pos[center] + 0.5 * total) % total - 0.5 * total


def concentration_scan(m: WarpedMetric, r: float, factors=(1.0, 0.5, 0.25)) -> list[ConcentrationRecord]:
    """Concentration ``rho^4 / Vol(T_rho) * int_{T_rho} |Rm|^2`` at every centre.

    ``rho`` runs over ``factor * r``.
    """
    fld = curvature(m)
    dv = m.volume_weights
    records = []
    for fac in factors:
        rho = fac * r
        vols = tube_integrals(m, dv, rho)
        l2 = tube_integrals(m, fld.riem_norm_sq * dv, rho)
        scale = rho**4 / vols
        for i in range(m.grid.n):
            records.append(ConcentrationRecord(
                center=i,
                radius=rho,
                l2_curv=float(l2[i]),
                volume=float(vols[i]),
                ratio=float(scale[i] * l2[i]),
                sobolev_proxy=float(math.sqrt(scale[i])),
            ))
    return records


def max_ratios(records) -> dict[float, float]:
    """Largest concentration ratio for each radius in a scan."""
    out: dict[float, float] = {}
    for rec in records:
        out[rec.radius] = max(out.get(rec.radius, 0.0), rec.ratio)
    return out


def ball_comparability(m: WarpedMetric, r: float) -> float:
    """``max Vol(T_r(y1)) / Vol(T_r(y2))`` over ``y1, y2`` in a common ``3r/2``-tube."""
    vols = tube_integrals(m, m.volume_weights, r)
    worst = 1.0
    for x in range(m.grid.n):
        near = tube_at(m, x, 1.5 * r).index_set
        v = vols[near]
        worst = max(worst, float(v.max() / v.min()))
    return worst


def space_form_ball_volume(radius: float, kappa: float) -> float:
    """``int_0^radius (sinh(sqrt(kappa) x) / sqrt(kappa))^3 dx`` in closed form."""
    if kappa <= 0:
        return radius**4 / 4.0
    k = math.sqrt(kappa)
    ch = math.cosh(k * radius)
    return (ch**3 / 3.0 - ch + 2.0 / 3.0) / k**4


def comparison_bound(ric_bound: float, r: float) -> float:
    """Volume-comparison bound for ``Vol(B_r(y2)) / Vol(B_r(y1))`` when
    ``d(y1, y2) <= 3r`` and ``Ric >= -ric_bound``: ``V(4r) / V(r)`` in the
    4-dimensional space form of curvature ``-ric_bound / 3``."""
    kappa = ric_bound / 3.0
    return space_form_ball_volume(4.0 * r, kappa) / space_form_ball_volume(r, kappa)
