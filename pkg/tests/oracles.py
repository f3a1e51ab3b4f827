"""Independent brute-force oracles used by the test-suite.

Nothing here imports the stencils of ``ricci_smoothing.geometry``; the
curvature oracle builds the full 4x4 metric in coordinates
``(s, theta, vartheta, phi)`` and runs the textbook Christoffel/Riemann
formulas with its own finite differences.
"""

from __future__ import annotations

import math

import numpy as np

# 4th-order centred first-derivative weights on offsets -2..2
_FD4 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


def _d_s(x, ds):
    return (np.roll(x, -1, axis=0) - np.roll(x, 1, axis=0)) / (2.0 * ds)


def _d_v(x, hv):
    """Derivative along the polar-angle axis (axis 1), valid for interior points."""
    m = x.shape[1]
    out = np.zeros((x.shape[0], m - 4) + x.shape[2:])
    for k, c in enumerate(_FD4):
        if c:
            out += c * x[:, k : k + m - 4]
    return out / hv


def christoffel_curvature(w, a, b, ds, hv=1e-2):
    """Curvature of ``w^2 ds^2 + a^2 dth^2 + b^2 (dv^2 + sin^2 v dphi^2)``.

    Evaluated at the equator ``v = pi/2``.  Returns a dict with the same
    keys as ``CurvatureField`` (sectional curvatures, Ricci eigenvalues,
    full contraction ``R_abcd R^abcd``, ``Ric_ab Ric^ab`` and scalar).
    """
    n = len(w)
    v = math.pi / 2 + hv * np.arange(-4, 5)  # 9 polar samples
    sin2 = np.sin(v) ** 2
    g = np.zeros((n, v.size, 4, 4))
    g[:, :, 0, 0] = (w**2)[:, None]
    g[:, :, 1, 1] = (a**2)[:, None]
    g[:, :, 2, 2] = (b**2)[:, None]
    g[:, :, 3, 3] = (b**2)[:, None] * sin2[None, :]

    # dg[..., c, a, b] = d_c g_ab on the 5 inner polar samples
    inner = slice(2, -2)
    dg = np.zeros((n, 5, 4, 4, 4))
    dg[:, :, 0] = _d_s(g, ds)[:, inner]
    dg[:, :, 2] = _d_v(g, hv)
    ginv = np.linalg.inv(g[:, inner])

    # Gamma^a_bc = 1/2 g^ad (d_b g_dc + d_c g_db - d_d g_bc)
    # lower[..., d, b, c]
    lower = 0.5 * (np.einsum("...bdc->...dbc", dg) + np.einsum("...cdb->...dbc", dg) - np.einsum("...dbc->...dbc", dg))
    gam = np.einsum("...ad,...dbc->...abc", ginv, lower)

    dgam = np.zeros((n, 1, 4, 4, 4, 4))  # [e, a, b, c] = d_e Gamma^a_bc at the equator
    dgam[:, 0, 0] = _d_s(gam, ds)[:, 2]
    dgam[:, 0, 2] = _d_v(gam, hv)[:, 0]
    dgam = dgam[:, 0]
    G = gam[:, 2]
    # R^a_bcd = d_c G^a_db - d_d G^a_cb + G^a_ce G^e_db - G^a_de G^e_cb
    riem = (
        np.einsum("...cadb->...abcd", dgam)
        - np.einsum("...dacb->...abcd", dgam)
        + np.einsum("...ace,...edb->...abcd", G, G)
        - np.einsum("...ade,...ecb->...abcd", G, G)
    )
    g0 = g[:, 4]
    gi = np.linalg.inv(g0)
    riem_low = np.einsum("...ae,...ebcd->...abcd", g0, riem)
    riem_up = np.einsum("...bf,...cg,...dh,...afgh->...abcd", gi, gi, gi, riem)
    ric = np.einsum("...abad->...bd", riem)
    ric_mixed = np.einsum("...ab,...bc->...ac", gi, ric)
    diag = np.diagonal(g0, axis1=-2, axis2=-1)

    def sec(i, j):
        return riem[:, i, j, i, j] / diag[:, j]

    return {
        "k_rtheta": sec(0, 1),
        "k_rs": sec(0, 2),
        "k_thetas": sec(1, 2),
        "k_ss": sec(2, 3),
        "ric_r": ric[:, 0, 0] / diag[:, 0],
        "ric_theta": ric[:, 1, 1] / diag[:, 1],
        "ric_s": ric[:, 2, 2] / diag[:, 2],
        "riem_norm_sq": np.einsum("...abcd,...abcd->...", riem_low, riem_up),
        "ric_norm_sq": np.einsum("...ab,...ba->...", ric_mixed, ric_mixed),
        "scalar": np.einsum("...aa->...", ric_mixed),
    }


def shortest_arc_distances(w, ds, center):
    """Exhaustive O(n^2) scan of forward/backward edge sums from ``center``."""
    n = len(w)
    edge = [0.5 * (w[i] + w[(i + 1) % n]) * ds for i in range(n)]
    out = np.zeros(n)
    for j in range(n):
        fwd = sum(edge[(center + k) % n] for k in range((j - center) % n))
        bwd = sum(edge[(j + k) % n] for k in range((center - j) % n))
        out[j] = min(fwd, bwd)
    return out


def hyperbolic_ball_volume(radius, kappa):
    """Volume (up to the constant sphere factor) of a ball in the 4-D space
    form of curvature ``-kappa``; ``kappa = 0`` gives the Euclidean ``r^4/4``."""
    from scipy.integrate import quad

    if kappa <= 0:
        return radius**4 / 4.0
    k = math.sqrt(kappa)
    val, _ = quad(lambda x: (math.sinh(k * x) / k) ** 3, 0.0, radius)
    return val
