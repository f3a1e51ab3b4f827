import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import christoffel_curvature, shortest_arc_distances
from ricci_smoothing.geometry import (
    FIBER_VOLUME,
    Bump,
    Collapsed,
    FlatProduct,
    Fourier,
    Grid,
    NonPositiveWarpError,
    Tube,
    WarpedMetric,
    build_metric,
    curvature,
    dirichlet_energy,
    integrate,
    l2_curvature,
    laplacian_values,
    profile_from_dict,
    reparametrize_arclength,
    tube_at,
    tube_integrals,
    volume,
)


def flat(n=64, L=4.0, a0=1.0, b0=1.0, w0=1.0):
    return build_metric(FlatProduct(a0, b0, w0), Grid(n, L))


def test_flat_product_profile_is_constant():
    m = flat()
    assert np.all(m.w == 1) and np.all(m.a == 1) and np.all(m.b == 1)


def test_collapsed_profile():
    m = build_metric(Collapsed(a0=0.01, b0=1.0), Grid(64, 4.0))
    assert np.allclose(m.a, 0.01) and np.allclose(m.b, 1) and np.allclose(m.w, 1)


def test_bump_dips_by_documented_depth_and_stays_positive():
    prof = Bump(center=2.0, height=10.0, width=0.2)
    m = build_metric(prof, Grid(256, 4.0))
    assert np.all(m.b > 0)
    assert m.b.min() == pytest.approx(1.0 - 0.5 * 10.0 * 0.04, rel=1e-12)
    assert m.b[0] == pytest.approx(1.0, abs=1e-12)


def test_grid_and_metric_validation():
    with pytest.raises(ValueError):
        Grid(8, 1.0)
    with pytest.raises(ValueError):
        Grid(32, 0.0)
    g = Grid(32, 1.0)
    b = np.ones(32)
    b[7] = -1.0
    with pytest.raises(NonPositiveWarpError) as info:
        WarpedMetric(g, np.ones(32), np.ones(32), b)
    assert info.value.index == 7 and info.value.name == "b"
    with pytest.raises(ValueError):
        WarpedMetric(g, np.ones(31), np.ones(32), np.ones(32))


def test_metric_arrays_are_read_only():
    m = flat()
    with pytest.raises(ValueError):
        m.a[0] = 2.0


def test_profile_from_dict_errors():
    with pytest.raises(ValueError, match="unknown profile family"):
        profile_from_dict({"family": "torus"})
    with pytest.raises(ValueError, match="bad parameters"):
        profile_from_dict({"family": "flat_product", "radius": 3})
    assert isinstance(profile_from_dict({"family": "fourier", "seed": 3}), Fourier)


def test_unit_sphere_product_curvature():
    f = curvature(flat())
    assert np.allclose(f.k_ss, 1) and np.allclose(f.k_rtheta, 0)
    assert np.allclose(f.k_rs, 0) and np.allclose(f.k_thetas, 0)
    assert np.allclose(f.ric_r, 0) and np.allclose(f.ric_theta, 0) and np.allclose(f.ric_s, 1)
    assert np.allclose(f.riem_norm_sq, 4) and np.allclose(f.scalar, 2)


@pytest.mark.parametrize("B", [0.5, 2.0, 7.0])
def test_scaled_sphere_curvature(B):
    f = curvature(flat(b0=B))
    assert np.allclose(f.k_ss, 1 / B**2)
    assert np.allclose(f.riem_norm_sq, 4 / B**4)


@pytest.mark.parametrize("seed", range(4))
def test_curvature_identities_and_oracle(seed):
    m = build_metric(Fourier.random(seed, amplitude=0.3), Grid(256, 8.0))
    f = curvature(m)
    assert np.allclose(f.scalar, f.ric_r + f.ric_theta + 2 * f.ric_s)
    assert np.allclose(f.riem_norm_sq,
                       4 * (f.k_rtheta**2 + 2 * f.k_rs**2 + 2 * f.k_thetas**2 + f.k_ss**2))
    assert np.allclose(f.ric_norm_sq, f.ric_r**2 + f.ric_theta**2 + 2 * f.ric_s**2)
    oracle = christoffel_curvature(m.w, m.a, m.b, m.grid.ds)
    for key, val in f.as_dict().items():
        scale = max(1.0, np.abs(oracle[key]).max())
        assert np.abs(val - oracle[key]).max() / scale < 5e-3, key


def test_volume_closed_forms():
    m = flat(n=64, L=1.0)
    assert volume(m) == pytest.approx(FIBER_VOLUME, rel=1e-12)
    assert FIBER_VOLUME == pytest.approx(78.9568, abs=1e-4)
    m4 = flat(n=64, L=4.0)
    assert volume(m4, tube_at(m4, 0, 0.5)) == pytest.approx(FIBER_VOLUME, rel=1e-12)
    collapsed = flat(n=64, L=4.0, a0=0.01)
    assert volume(collapsed) / volume(m4) == pytest.approx(0.01, rel=1e-14)


def test_empty_region_volume_warns():
    m = flat(n=64, L=4.0)
    empty = Tube(0, 1e-9, np.array([], dtype=int), np.zeros(64))
    with pytest.warns(RuntimeWarning):
        assert volume(m, empty) == 0.0


def test_l2_curvature_closed_forms():
    m = flat(n=64, L=4.0)
    assert l2_curvature(m, tube_at(m, 0, 0.5)) == pytest.approx(32 * math.pi**2, rel=1e-12)
    for B in (2.0, 5.0, 20.0):
        mb = flat(n=64, L=4.0, b0=B)
        assert l2_curvature(mb, tube_at(mb, 0, 0.5)) == pytest.approx(32 * math.pi**2 / B**2, rel=1e-12)


def test_integrate_constant():
    m = flat(n=64, L=4.0)
    assert integrate(m, np.full(64, 3.0)) == pytest.approx(3 * volume(m))


def test_laplacian_of_constant_and_eigenfunction():
    m = flat(n=256, L=4.0)
    assert np.allclose(laplacian_values(m, np.full(256, 5.0)), 0, atol=1e-12)
    f = np.cos(2 * math.pi * m.grid.s / 4.0)
    lap = laplacian_values(m, f)
    k2 = (2 * math.pi / 4.0) ** 2
    assert np.abs(lap + k2 * f).max() < 2 * k2 * (k2 * m.grid.ds**2)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_laplacian_self_adjoint(seed):
    rng = np.random.default_rng(seed)
    m = build_metric(Fourier.random(seed, amplitude=0.4), Grid(64, 3.0))
    f, g = rng.normal(size=(2, 64))
    dv = m.volume_weights
    lhs = np.dot(dv, laplacian_values(m, f) * g)
    rhs = np.dot(dv, f * laplacian_values(m, g))
    assert abs(lhs - rhs) <= 1e-10 * (abs(lhs) + abs(rhs) + 1)
    # summation by parts: -<Lap f, f> is the Dirichlet energy
    assert -np.dot(dv, laplacian_values(m, f) * f) == pytest.approx(dirichlet_energy(m, f), rel=1e-10)


def test_tube_index_sets():
    m = flat(n=64, L=4.0)  # ds = 1/16
    t = tube_at(m, 0, 0.5)
    offsets = sorted(((t.index_set + 32) % 64) - 32)
    assert offsets == list(range(-7, 8))  # strictly inside 8 steps
    m2 = flat(n=64, L=4.0, w0=2.0)
    assert tube_at(m2, 0, 0.5).index_set.size == 7  # within 4 steps, strictly
    with pytest.raises(ValueError):
        tube_at(m, 0, 3.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 47), st.floats(0.05, 0.9))
def test_tube_matches_exhaustive_distance_scan(seed, center, rho):
    rng = np.random.default_rng(seed)
    w = rng.uniform(0.5, 2.0, 48)
    m = WarpedMetric(Grid(48, 3.0), w, np.ones(48), np.ones(48))
    dist = shortest_arc_distances(w, m.grid.ds, center)
    t = tube_at(m, center, rho)
    assert set(t.index_set.tolist()) == set(np.flatnonzero(dist < rho).tolist())


def test_tube_integrals_match_single_tubes():
    m = build_metric(Fourier.random(2, amplitude=0.3), Grid(96, 4.0))
    dens = curvature(m).riem_norm_sq * m.volume_weights
    all_centers = tube_integrals(m, dens, 0.6)
    for c in (0, 17, 95):
        t = tube_at(m, c, 0.6)
        single = float(np.dot(t.weights, dens))
        assert all_centers[c] == pytest.approx(single, rel=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.3, 5.0))
def test_curvature_scales_inversely_with_metric(seed, lam):
    m = build_metric(Fourier.random(seed, amplitude=0.3), Grid(64, 4.0))
    f = curvature(m)
    g = curvature(m.scaled(lam))
    assert np.allclose(g.riem_norm_sq, f.riem_norm_sq / lam**4, rtol=1e-9, atol=0)
    assert np.allclose(g.scalar, f.scalar / lam**2, rtol=1e-9, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(1e-3, 1e3))
def test_curvature_independent_of_constant_a_scale(seed, c):
    m = build_metric(Fourier.random(seed, amplitude=0.3), Grid(64, 4.0))
    f = curvature(m).as_dict()
    g = curvature(m.with_fields(a=m.a * c)).as_dict()
    for k in f:
        assert np.allclose(f[k], g[k], rtol=1e-12, atol=1e-12)


def test_reparametrize_arclength_keeps_length_and_curvature():
    m = build_metric(Fourier.random(5, amplitude=0.2), Grid(512, 6.0))
    r = reparametrize_arclength(m)
    assert np.allclose(r.w, r.w[0])
    assert r.total_arclength == pytest.approx(m.total_arclength, rel=1e-12)
    assert curvature(r).riem_norm_sq.max() == pytest.approx(curvature(m).riem_norm_sq.max(), rel=1e-3)
