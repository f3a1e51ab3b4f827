"""Ricci flow ``dg/dt = -2 Ric(g)`` for the doubly warped ansatz.

Each warp obeys ``d(x)/dt = -x * Ric(e_x, e_x)``:

    dw/dt = w (a''/a + 2 b''/b)
    da/dt = a'' + 2 a'b'/b
    db/dt = b'' + a'b'/a - (1 - b'^2)/b

The scheme is explicit midpoint with an arclength CFL rule.  Curvature is
always recomputed from the metric; nothing evolves curvature separately.
The ``g_ss`` component is evolved as is (no DeTurck term), so the tracked
ratios ``g(t)/g(0)`` are those of the actual flow.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ricci_smoothing.geometry import (
    CurvatureField,
    WarpedMetric,
    curvature,
    d1,
    d2,
    tube_integrals,
)

log = logging.getLogger(__name__)

STOP_REASONS = ("reached_t_end", "equivalence_violated", "step_limit", "nonfinite_state")


class StepRejected(RuntimeError):
    """A step produced a nonpositive or nonfinite warp.

    ``state`` is the metric before the step.
    """

    def __init__(self, state: WarpedMetric, reason: str):
        super().__init__(f"step from t={state.time:.6g} rejected: {reason}")
        self.state = state
        self.reason = reason


@dataclass(frozen=True)
class FlowControls:
    t_end: float
    cfl_safety: float = 0.25
    max_steps: int = 1_000_000
    equivalence_limit: float = 2.0
    snapshot_times: Sequence[float] = ()
    stop_on_equivalence: bool = False
    # arclength radius of the tubes tracked for L^2 curvature; None disables
    tube_radius: float | None = None
    # start of the window for the t*sup|Rm| and t^(2/3)*sup|Ric| maxima
    t1: float | None = None
    fixed_dt: float | None = None
    dt_min: float = 1e-12

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if not 0 < self.cfl_safety < 1:
            raise ValueError("cfl_safety must lie in (0, 1)")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if not self.equivalence_limit > 1:
            raise ValueError("equivalence_limit must exceed 1")

    @property
    def window_start(self) -> float:
        return 0.01 * self.t_end if self.t1 is None else self.t1


@dataclass
class BoundReport:
    """Time series of everything the flow run tracks.

    Units per column are listed in ``COLUMNS`` (time carries length^2).
    """

    time: list = field(default_factory=list)
    sup_rm: list = field(default_factory=list)
    sup_ric: list = field(default_factory=list)
    t_sup_rm: list = field(default_factory=list)
    t23_sup_ric: list = field(default_factory=list)
    equivalence: list = field(default_factory=list)
    tube_l2_max: list = field(default_factory=list)
    volume: list = field(default_factory=list)
    concentration_max: list = field(default_factory=list)
    dvol_c: list = field(default_factory=list)
    stop_reason: str | None = None
    first_equivalence_violation: float | None = None
    window_start: float = 0.0

    COLUMNS = (
        ("time", "length^2"),
        ("sup_rm", "1/length^2"),
        ("sup_ric", "1/length^2"),
        ("t_sup_rm", "1"),
        ("t23_sup_ric", "length^(-2/3)"),
        ("equivalence", "1"),
        ("tube_l2_max", "1"),
        ("volume", "length^4"),
        ("concentration_max", "1"),
        ("dvol_c", "1"),
    )

    def append(self, t, field_: CurvatureField, equivalence, volume, tube_l2, concentration):
        if self.time and not t > self.time[-1]:
            raise ValueError("report timestamps must increase strictly")
        sup_rm = float(np.sqrt(field_.riem_norm_sq.max()))
        sup_ric = float(np.sqrt(field_.ric_norm_sq.max()))
        rm = np.sqrt(field_.riem_norm_sq)
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.where(rm > 0, -field_.scalar / rm, 0.0)
        self.time.append(float(t))
        self.sup_rm.append(sup_rm)
        self.sup_ric.append(sup_ric)
        self.t_sup_rm.append(t * sup_rm)
        self.t23_sup_ric.append(t ** (2.0 / 3.0) * sup_ric)
        self.equivalence.append(float(equivalence))
        self.volume.append(float(volume))
        self.tube_l2_max.append(float(tube_l2))
        self.concentration_max.append(float(concentration))
        self.dvol_c.append(float(c.max()))

    def _window_max(self, series) -> float:
        t = np.asarray(self.time)
        vals = np.asarray(series)[t >= self.window_start]
        return float(vals.max()) if vals.size else float("nan")

    @property
    def max_t_sup_rm(self) -> float:
        return self._window_max(self.t_sup_rm)

    @property
    def max_t23_sup_ric(self) -> float:
        return self._window_max(self.t23_sup_ric)

    @property
    def final_time(self) -> float:
        return self.time[-1]

    def columns(self) -> dict[str, np.ndarray]:
        return {name: np.asarray(getattr(self, name)) for name, _ in self.COLUMNS}

    def summary(self) -> dict:
        return {
            "stop_reason": self.stop_reason,
            "final_time": self.final_time,
            "steps": len(self.time) - 1,
            "max_t_sup_rm": self.max_t_sup_rm,
            "max_t23_sup_ric": self.max_t23_sup_ric,
            "max_equivalence": float(max(self.equivalence)),
            "first_equivalence_violation": self.first_equivalence_violation,
            "max_dvol_c": float(max(self.dvol_c)),
            "window_start": self.window_start,
        }


@dataclass
class FlowTrajectory:
    snapshots: list

    @property
    def times(self) -> np.ndarray:
        return np.array([m.time for m in self.snapshots])

    @property
    def final(self) -> WarpedMetric:
        return self.snapshots[-1]


def flow_rhs(m: WarpedMetric):
    """Time derivatives ``(dw, da, db)`` of the warps under Ricci flow."""
    ds = m.grid.ds
    w, a, b = m.w, m.a, m.b
    a1, b1 = d1(a, w, ds), d1(b, w, ds)
    a2, b2 = d2(a, w, ds), d2(b, w, ds)
    dw = w * (a2 / a + 2.0 * b2 / b)
    da = a2 + 2.0 * a1 * b1 / b
    db = b2 + a1 * b1 / a - (1.0 - b1**2) / b
    return dw, da, db


def cfl_dt(m: WarpedMetric, safety: float, field_: CurvatureField | None = None) -> float:
    """``safety * min((w ds)^2 / 4, 1 / (1 + sup|Rm|))``."""
    if field_ is None:
        field_ = curvature(m)
    diffusion = float(np.min((m.w * m.grid.ds) ** 2)) / 4.0
    reaction = 1.0 / (1.0 + math.sqrt(float(field_.riem_norm_sq.max())))
    return safety * min(diffusion, reaction)


def _advance(m: WarpedMetric, rates, dt: float):
    arrays = [x + dt * r for x, r in zip((m.w, m.a, m.b), rates)]
    for name, arr in zip("wab", arrays):
        if not np.all(np.isfinite(arr)):
            raise StepRejected(m, f"nonfinite {name}")
        if not np.all(arr > 0):
            raise StepRejected(m, f"nonpositive {name} at index {int(np.argmin(arr))}")
    return arrays


def flow_step(m: WarpedMetric, dt: float, check_cfl: bool = True) -> WarpedMetric:
    """One explicit midpoint step of size ``dt``."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    if dt == 0:
        return m
    if check_cfl:
        limit = cfl_dt(m, 1.0)
        if dt > limit * (1 + 1e-12):
            raise ValueError(f"dt={dt!r} exceeds the stability limit {limit!r}")
    half = _advance(m, flow_rhs(m), 0.5 * dt)
    mid = WarpedMetric(m.grid, *half, m.time + 0.5 * dt)
    w, a, b = _advance(m, flow_rhs(mid), dt)
    return WarpedMetric(m.grid, w, a, b, m.time + dt)


def equivalence_ratio(m: WarpedMetric, m0: WarpedMetric) -> float:
    """``max(x/x0, x0/x)`` over the grid and the three warps."""
    worst = 1.0
    for x, x0 in ((m.w, m0.w), (m.a, m0.a), (m.b, m0.b)):
        q = x / x0
        worst = max(worst, float(q.max()), float((1.0 / q).max()))
    return worst


def _tube_trackers(m: WarpedMetric, field_: CurvatureField, radius: float | None):
    if radius is None:
        return float("nan"), float("nan")
    try:
        vols = tube_integrals(m, m.volume_weights, radius)
    except ValueError:
        return float("nan"), float("nan")
    l2 = tube_integrals(m, field_.riem_norm_sq * m.volume_weights, radius)
    conc = radius**4 / vols * l2
    return float(l2.max()), float(conc.max())


def run_flow(m0: WarpedMetric, c: FlowControls):
    """Integrate from ``m0`` until ``c.t_end`` or a stop condition.

    Returns ``(trajectory, report)``.  Snapshots are taken at ``m0``, at every
    requested snapshot time reached and at the final state.
    """
    report = BoundReport(window_start=c.window_start)
    snaps = [m0]
    targets = sorted({float(t) for t in c.snapshot_times if m0.time < t < c.t_end} | {float(c.t_end)})

    m = m0
    fld = curvature(m)

    def record(metric, f):
        eq = equivalence_ratio(metric, m0)
        l2, conc = _tube_trackers(metric, f, c.tube_radius)
        report.append(metric.time, f, eq, float(metric.volume_weights.sum()), l2, conc)
        return eq

    record(m, fld)
    steps = 0
    stop = None
    ti = 0
    while stop is None:
        target = targets[ti]
        dt = c.fixed_dt if c.fixed_dt is not None else cfl_dt(m, c.cfl_safety, fld)
        if dt < c.dt_min:
            log.warning("time step %.3g below dt_min at t=%.6g", dt, m.time)
            stop = "nonfinite_state"
            break
        hit = m.time + dt >= target * (1 - 1e-14)
        if hit:
            dt = target - m.time
        while True:
            try:
                new = flow_step(m, dt, check_cfl=False)
                new_field = curvature(new)
                if not np.all(np.isfinite(new_field.riem_norm_sq)):
                    raise StepRejected(m, "nonfinite curvature")
                break
            except StepRejected as exc:
                log.info("%s; halving dt", exc)
                dt *= 0.5
                hit = False
                if dt < c.dt_min:
                    stop = "nonfinite_state"
                    break
        if stop is not None:
            break
        if hit:
            new = new.with_fields(time=target)
        m, fld = new, new_field
        steps += 1
        eq = record(m, fld)
        if eq > c.equivalence_limit and report.first_equivalence_violation is None:
            report.first_equivalence_violation = m.time
            if c.stop_on_equivalence:
                stop = "equivalence_violated"
        if hit:
            if target == targets[-1]:
                stop = stop or "reached_t_end"
            else:
                snaps.append(m)
                ti += 1
        if stop is None and steps >= c.max_steps:
            stop = "step_limit"
    if snaps[-1] is not m:
        snaps.append(m)
    report.stop_reason = stop
    return FlowTrajectory(snaps), report


def dvol_residual(trajectory: FlowTrajectory,
                  source: Callable[[WarpedMetric], np.ndarray] | None = None) -> float:
    """Check ``d(dV)/dt = -R dV`` along the snapshots.

    Centred differences in time over consecutive snapshot triples; the
    residual is normalised by ``dV``.  ``source`` replaces the scalar
    curvature ``R`` (used to test the diagnostic itself).
    """
    snaps = trajectory.snapshots
    if len(snaps) < 3:
        raise ValueError("dvol_residual needs at least three snapshots")
    if source is None:
        def source(m):
            return curvature(m).scalar
    worst = 0.0
    for prev, cur, nxt in zip(snaps, snaps[1:], snaps[2:]):
        span = nxt.time - prev.time
        dv = cur.volume_weights
        rate = (nxt.volume_weights - prev.volume_weights) / span
        res = np.abs(rate + source(cur) * dv) / dv
        worst = max(worst, float(res.max()))
    return worst
