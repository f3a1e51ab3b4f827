"""Experiment runners.

Every runner takes plain parameters, returns a summary dictionary and, when
given an output directory, writes its files there and nowhere else.  The
dispatcher :func:`run_experiment` maps an :class:`ExperimentConfig` onto
these runners and adds the manifest.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ricci_smoothing.analysis import (
    ball_comparability,
    comparison_bound,
    concentration_scan,
    covering,
    max_ratios,
    sobolev_estimate,
)
from ricci_smoothing.flow import FlowControls, run_flow
from ricci_smoothing.geometry import (
    Grid,
    WarpedMetric,
    build_metric,
    curvature,
    tube_at,
    tube_integrals,
    volume,
)
from ricci_smoothing.harness import suites
from ricci_smoothing.harness.config import ExperimentConfig
from ricci_smoothing.harness.records import plot_csv, read_json, write_csv, write_json
from ricci_smoothing.moser import (
    cutoff,
    energy_step_check,
    heat_solve,
    kernel_ratio,
    cutoff_ibp_gap,
    window_check,
    scalar_smoothing_check,
)

IBP_P_VALUES = (1.5, 2.0, 3.0, 6.0)
DEFAULT_DRIFT = 0.1


class InvariantViolation(RuntimeError):
    """A checked inequality or invariant failed; ``details`` says which."""

    def __init__(self, message: str, details: dict | None = None):
        super().__init__(message)
        self.details = details or {}


class RuntimeStop(RuntimeError):
    """A run ended early (blow-up, step limit); outputs were still written."""

    def __init__(self, message: str, details: dict | None = None):
        super().__init__(message)
        self.details = details or {}


def _map(fn: Callable, items: Sequence, workers: int):
    """``fn`` over ``items`` in order, optionally in worker processes.

    Results are yielded in input order, so a consumer can stop early.
    """
    if workers <= 1 or len(items) <= 1:
        yield from map(fn, items)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(fn, items)


def _rel_spread(values) -> float:
    v = np.asarray(values, dtype=float)
    scale = np.abs(v).max()
    return float((v.max() - v.min()) / scale) if scale > 0 else 0.0


# ---------------------------------------------------------------------------
# hypotheses


@dataclass
class HypothesisVerdict:
    r: float
    epsilon: float
    K: float
    max_tube_l2: float
    worst_center: int
    max_ric: float
    worst_ric_center: int
    max_concentration: float
    predicted_horizon: float
    l2_ok: bool
    ric_ok: bool
    concentration_ok: bool

    @property
    def passed(self) -> bool:
        return self.l2_ok and self.ric_ok

    def as_dict(self) -> dict:
        return dict(asdict(self), passed=self.passed)


def check_hypotheses(m0: WarpedMetric, r: float, epsilon: float, K: float,
                     C1: float = 1.0) -> HypothesisVerdict:
    """Scan every centre for tube ``L^2`` curvature and pointwise ``|Ric|``.

    ``|Ric|`` is the operator norm (largest absolute eigenvalue).  The
    concentration form ``r^4/Vol(T_r) int_{T_r} |Rm|^2 <= epsilon`` is
    recorded alongside.  ``C1`` scales the predicted horizon
    ``C1 min(r^2, 1/K)``; the default is the value the calibration suite
    supports (every member survives to ``min(r^2, 1/K)``).
    """
    if not 0 < r <= 1:
        raise ValueError("the hypotheses are stated for 0 < r <= 1")
    fld = curvature(m0)
    dv = m0.volume_weights
    l2 = tube_integrals(m0, fld.riem_norm_sq * dv, r)
    vols = tube_integrals(m0, dv, r)
    conc = r**4 / vols * l2
    ric = np.abs(np.stack([fld.ric_r, fld.ric_theta, fld.ric_s])).max(axis=0)
    i = int(np.argmax(l2))
    j = int(np.argmax(ric))
    return HypothesisVerdict(
        r=r,
        epsilon=epsilon,
        K=K,
        max_tube_l2=float(l2[i]),
        worst_center=i,
        max_ric=float(ric[j]),
        worst_ric_center=j,
        max_concentration=float(conc.max()),
        predicted_horizon=C1 * min(r * r, 1.0 / K),
        l2_ok=bool(l2[i] <= epsilon),
        ric_ok=bool(ric[j] <= K * (1 + 1e-12)),
        concentration_ok=bool(conc.max() <= epsilon),
    )


def epsilon_failure_height(r: float, epsilon: float, a0: float, n: int = 256,
                           period_length: float = 4.0, lo: float = 1.0, hi: float = 1e4,
                           rel_tol: float = 1e-3) -> float | None:
    """Smallest bump height (bisection in ``log h``) whose largest tube ``L^2``
    curvature exceeds ``epsilon`` at fixed ``a0``; None if even ``hi`` passes."""
    grid = Grid(n, period_length)

    def fails(h):
        m = build_metric(dict(suites.bump_profile(h, period_length, reference_n=n), a0=a0), grid)
        return suites.max_tube_l2(m, r) > epsilon

    if fails(lo):
        return lo
    if not fails(hi):
        return None
    while hi / lo > 1 + rel_tol:
        mid = math.sqrt(lo * hi)
        if fails(mid):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# flow runs


def _write_flow_outputs(report, out: Path, prefix: str = "") -> None:
    cols = report.columns()
    units = dict(report.COLUMNS)
    csv_path = write_csv(out / f"{prefix}timeseries.csv", cols, units)
    plot_csv(csv_path, out / f"{prefix}bounds.svg", "time", ["t_sup_rm", "equivalence"],
             title="scale-invariant bounds")
    plot_csv(csv_path, out / f"{prefix}concentration.svg", "time", ["concentration_max", "tube_l2_max"],
             title="curvature concentration", logy=True)


def flow_experiment(m0: WarpedMetric, controls: FlowControls, out: Path | None = None) -> dict:
    traj, report = run_flow(m0, controls)
    final = traj.final
    summary = dict(report.summary())
    summary.update(
        reached_t_end=report.stop_reason == "reached_t_end",
        b2_final_min=float((final.b**2).min()),
        b2_final_max=float((final.b**2).max()),
        a_final_min=float(final.a.min()),
        volume_initial=report.volume[0],
        volume_final=report.volume[-1],
    )
    if out is not None:
        _write_flow_outputs(report, out)
        write_json(out / "summary.json", summary)
    if report.stop_reason in ("step_limit", "nonfinite_state"):
        raise RuntimeStop(f"flow stopped early: {report.stop_reason} at t={report.final_time:.6g}",
                          summary)
    return summary


def collapse_sweep(m0: WarpedMetric, controls: FlowControls, factors=(1.0, 0.1, 0.01),
                   out: Path | None = None) -> dict:
    """Run the flow from ``m0`` with ``a`` scaled by each factor.

    Existence time is the first equivalence violation (or the end time).
    ``tracker_deviation`` is the largest relative difference of any
    scale-invariant tracker against the first factor.
    """
    runs = []
    for fac in factors:
        _, rep = run_flow(m0.with_fields(a=m0.a * fac), controls)
        runs.append(rep)
        if out is not None:
            _write_flow_outputs(rep, out / f"a{fac:g}")
    exist = [rep.first_equivalence_violation or rep.final_time for rep in runs]
    ref = runs[0]
    dev = 0.0
    for rep in runs[1:]:
        for name in ("t_sup_rm", "t23_sup_ric", "equivalence", "concentration_max", "dvol_c"):
            x = np.asarray(getattr(ref, name))
            y = np.asarray(getattr(rep, name))
            if x.shape != y.shape:
                dev = math.inf
                continue
            scale = max(float(np.abs(x).max()), 1e-300)
            dev = max(dev, float(np.abs(x - y).max()) / scale)
    summary = {
        "factors": list(factors),
        "existence_times": exist,
        "existence_spread": _rel_spread(exist),
        "stop_reasons": [rep.stop_reason for rep in runs],
        "max_t_sup_rm": [rep.max_t_sup_rm for rep in runs],
        "tracker_deviation": dev,
    }
    if out is not None:
        write_json(out / "summary.json", summary)
    return summary


def _smoothing_member(args):
    h, n, period_length, r, target = args
    grid = Grid(n, period_length)
    prof = suites.with_tube_l2(suites.bump_profile(h, period_length, reference_n=n), grid, r, target)
    m = build_metric(prof, grid)
    T = suites.horizon(m, r)
    _, rep = run_flow(m, FlowControls(t_end=T, tube_radius=r))
    return h, T, rep


def smoothing_sweep(heights=(10.0, 100.0, 1000.0), n: int = 256, period_length: float = 4.0,
                    r: float = 0.5, target_l2: float = 0.05, workers: int = 1,
                    out: Path | None = None) -> dict:
    """Bumps of increasing height at a common largest tube ``L^2`` curvature.

    Each member flows to ``T = min(r^2, 1/K)`` and reports
    ``max t sup|Rm|`` over ``[0.01 T, T]``; ``spread`` is max/min of those.
    """
    items = [(float(h), n, period_length, r, target_l2) for h in sorted(heights)]
    members = {}
    for h, T, rep in _map(_smoothing_member, items, workers):
        key = f"h{h:g}"
        members[key] = {
            "height": h,
            "T": T,
            "stop_reason": rep.stop_reason,
            "max_t_sup_rm": rep.max_t_sup_rm,
            "max_t23_sup_ric": rep.max_t23_sup_ric,
            "max_equivalence": float(max(rep.equivalence)),
        }
        if out is not None:
            _write_flow_outputs(rep, out / key)
            write_json(out / key / "summary.json", members[key])
    vals = [v["max_t_sup_rm"] for v in members.values()]
    summary = {"members": members, "spread": max(vals) / min(vals), "target_l2": target_l2, "r": r}
    if out is not None:
        write_json(out / "summary.json", summary)
    return summary


# ---------------------------------------------------------------------------
# heat-inequality suites


def _heat_probe(args):
    """Energy and window checks on one seeded heat problem."""
    seed, n, adversarial = args
    hp, center, r = suites.random_heat_problem(seed, n, adversarial=adversarial)
    sol = heat_solve(hp)
    m = hp.metric
    chi = cutoff(m, center, 0.5 * r, r)
    dv = m.volume_weights
    energy = []
    for p in IBP_P_VALUES:
        for t in np.linspace(0.1, 1.0, 5) * hp.T * 0.99:
            res = energy_step_check(sol, chi, p, float(t))
            scale = float(np.dot(dv, chi**2 * sol.at(t) ** p))
            energy.append({"p": p, "t": float(t), "residual": res, "relative": res / scale})
    window = []
    if not adversarial:
        T = hp.T
        for t2 in (0.3 * T, 0.5 * T, 0.7 * T):
            for r2 in (0.5 * r, 0.7 * r, 0.85 * r):
                res = window_check(sol, 3.0, 0.5 * t2, t2, r, r2, hp.A, hp.mu, center)
                window.append({"tau2": t2, "r2": r2, "lhs": res.lhs, "rhs": res.rhs,
                               "holds": res.holds()})
    return {"seed": seed, "energy": energy, "window": window}


def _cutoff_probe(args):
    seed, n = args
    m = build_metric({"family": "fourier", "seed": seed, "amplitude": 0.3}, Grid(n, 4.0))
    f, chi = suites.random_cutoff_pair(seed, m)
    rows = []
    for p in IBP_P_VALUES:
        res = cutoff_ibp_gap(f, chi, p, m)
        rows.append({"seed": seed, "p": p, "lhs": res.lhs, "rhs": res.rhs, "holds": res.holds()})
    return rows


def moser_verify(seeds: int = 100, seed: int = 0, heat_problems: int = 10, n: int = 128,
                 workers: int = 1, out: Path | None = None) -> dict:
    """Integration-by-parts inequality on ``seeds`` cutoff pairs for every p,
    energy and window inequalities on ``heat_problems`` heat solves, and one
    adversarial budget violation that must be detected."""
    ibp_rows = [row for rows in _map(_cutoff_probe, [(seed + i, n) for i in range(seeds)], workers)
              for row in rows]
    heat = list(_map(_heat_probe, [(seed + i, n, False) for i in range(heat_problems)], workers))
    adv = _heat_probe((seed, n, True))

    ibp_bad = [r for r in ibp_rows if not r["holds"]]
    energy_worst = max(e["relative"] for h in heat for e in h["energy"])
    energy_bad = [dict(e, seed=h["seed"]) for h in heat for e in h["energy"] if e["relative"] > 1e-8]
    window = [dict(w, seed=h["seed"]) for h in heat for w in h["window"]]
    window_bad = [w for w in window if not w["holds"]]
    adv_detected = any(e["relative"] > 1e-8 for e in adv["energy"])
    summary = {
        "seed": seed,
        "seeds": seeds,
        "p_values": list(IBP_P_VALUES),
        "ibp_checks": len(ibp_rows),
        "ibp_violations": len(ibp_bad),
        "energy_checks": sum(len(h["energy"]) for h in heat),
        "energy_violations": len(energy_bad),
        "energy_worst_relative": energy_worst,
        "window_checks": len(window),
        "window_violations": len(window_bad),
        "window_worst_ratio": max(w["lhs"] / w["rhs"] for w in window) if window else 0.0,
        "adversarial_detected": adv_detected,
    }
    summary["violations"] = len(ibp_bad) + len(energy_bad) + len(window_bad)
    if out is not None:
        write_csv(out / "ibp.csv",
                  {k: [r[k] for r in ibp_rows] for k in ("seed", "p", "lhs", "rhs")},
                  {"seed": "1", "p": "1", "lhs": "length^0", "rhs": "length^0"})
        write_csv(out / "window.csv",
                  {k: [w[k] for w in window] for k in ("seed", "tau2", "r2", "lhs", "rhs")},
                  {"seed": "1", "tau2": "length^2", "r2": "length", "lhs": "1", "rhs": "1"})
        write_json(out / "summary.json", summary)
    if summary["violations"] or not adv_detected:
        raise InvariantViolation("heat inequality suite failed", summary)
    return summary


def _kernel_member(args):
    seed, n, p0 = args
    hp, center, r = suites.random_heat_problem(seed, n)
    sol = heat_solve(hp)
    return kernel_ratio(sol, hp.A, hp.mu, p0, r, center)


def kernel_suite(count: int = 30, seed: int = 0, n: int = 128, p0: float = 3.0,
                 workers: int = 1) -> dict:
    """``sup f / kernel`` over seeded heat problems and ``t in [0.1T, T]``."""
    ratios = list(_map(_kernel_member, [(seed + i, n, p0) for i in range(count)], workers))
    return {"ratios": ratios, "C_star": max(ratios), "p0": p0, "n": n}


def riccati_suite(n: int = 128, period_length: float = 8.0, r: float = 0.5, C0: float = 1.0,
                  fractions=(0.25, 0.5, 0.9), C2: float | None = None, a0: float = 1.0,
                  data: str = "constant") -> dict:
    """Data for ``df/dt = Lap f + C0 f^2`` below the entry threshold.

    The Sobolev constant ``A`` is estimated on an ``r``-tube of the product
    metric with ``a = a0``.  Each run starts from data whose largest tube
    norm is ``fraction`` times the threshold; ``data`` is ``"constant"`` or
    ``"bump"`` (a Gaussian of width ``r/2``).  Without ``C2`` the runs go
    until blow-up and the reported ``C2`` is half the smallest survival time
    over ``r^2``; with ``C2`` they are checked to reach ``C2 r^2``.
    """
    grid = Grid(n, period_length)
    m = build_metric({"family": "flat_product", "a0": a0, "b0": 1.0}, grid)
    A = sobolev_estimate(m, tube_at(m, 0, r)).A
    entry = 1.0 / (6.0 * C0 * A)
    if data == "constant":
        shape = np.ones(n)
    elif data == "bump":
        d = (grid.s + 0.5 * period_length) % period_length - 0.5 * period_length
        shape = np.exp(-((d / (0.5 * r)) ** 2))
    else:
        raise ValueError(f"unknown data shape {data!r}")
    unit = math.sqrt(float(tube_integrals(m, shape**2 * m.volume_weights, r).max()))
    runs = []
    for frac in fractions:
        f0 = frac * entry / unit * shape
        amp = float(f0.max())
        T = 2.0 / (C0 * amp) if C2 is None else C2 * r * r
        res = scalar_smoothing_check(m, f0, C0, A, r, T, C2=C2)
        survival = res["blowup_time"] if res["blowup_time"] is not None else res["final_time"]
        runs.append({
            "fraction": frac,
            "amplitude": amp,
            "hypothesis_ok": res["hypothesis_ok"],
            "survival": survival,
            "reached_horizon": res["reached_horizon"],
            "max_t_sup_f": res["max_t_sup_f"],
            "threshold_crossing": res["threshold_crossing"],
        })
    measured = 0.5 * min(run["survival"] for run in runs) / (r * r)
    return {"A": A, "entry_threshold": entry, "runs": runs,
            "C2": measured if C2 is None else C2}


# ---------------------------------------------------------------------------
# calibration


@dataclass
class RegressionBaseline:
    """Measured constants, each tagged with the fingerprint that produced it."""

    constants: dict = field(default_factory=dict)   # name -> {"value", "fingerprint"}
    members: dict = field(default_factory=dict)     # member id -> measurements

    def value(self, name: str) -> float:
        return self.constants[name]["value"]

    def as_dict(self) -> dict:
        return {"constants": self.constants, "members": self.members}

    def write(self, path: Path) -> Path:
        return write_json(path, self.as_dict())

    @classmethod
    def load(cls, path: Path) -> "RegressionBaseline":
        d = read_json(path)
        return cls(d["constants"], d.get("members", {}))

    def compare(self, other: "RegressionBaseline", drift: float = DEFAULT_DRIFT) -> dict:
        """Relative drift of every shared constant; names above ``drift`` fail."""
        drifts = {}
        for name, entry in self.constants.items():
            if name not in other.constants:
                continue
            a = float(entry["value"])
            b = float(other.constants[name]["value"])
            drifts[name] = abs(a - b) / abs(a) if a != 0 else abs(b)
        failing = sorted(k for k, v in drifts.items() if not v <= drift)
        return {"drift": drifts, "failing": failing, "tolerance": drift}


def _coverage_check(m: WarpedMetric, r: float) -> tuple[int, bool]:
    """Largest greedy cover size over all centres and whether every cover is complete."""
    worst = 0
    ok = True
    for x in range(m.grid.n):
        centers, count = covering(m, r, x)
        worst = max(worst, count)
        target = set(tube_at(m, x, 2.0 * r).index_set.tolist())
        reached = set()
        for c in centers:
            reached.update(tube_at(m, c, r).index_set.tolist())
        ok &= target <= reached
    return worst, bool(ok)


def calibration_member(member: dict) -> dict:
    """Flow and analysis measurements for one suite member."""
    grid = Grid(int(member["grid"]["n"]), float(member["grid"]["period_length"]))
    m = build_metric(member["profile"], grid)
    r = float(member["r"])
    T = suites.horizon(m, r) * float(member.get("horizon_factor", 1.0))
    _, rep = run_flow(m, FlowControls(t_end=T, tube_radius=r, stop_on_equivalence=True,
                                      t1=0.01 * T, max_steps=int(member.get("max_steps", 1_000_000))))
    fld = curvature(m)
    l2 = tube_integrals(m, fld.riem_norm_sq * m.volume_weights, r)
    center = int(np.argmax(l2))
    est = sobolev_estimate(m, tube_at(m, center, r))
    vol = volume(m, tube_at(m, center, r))
    n_cover, covered = _coverage_check(m, r)
    K = suites.ric_bound(m)
    comp = ball_comparability(m, r)
    return {
        "id": member["id"],
        "n": grid.n,
        "T": T,
        "stop_reason": rep.stop_reason,
        "existence_ratio": rep.final_time / (T / float(member.get("horizon_factor", 1.0))),
        "max_t_sup_rm": rep.max_t_sup_rm,
        "max_t23_sup_ric": rep.max_t23_sup_ric,
        "max_dvol_c": float(max(rep.dvol_c)),
        "sobolev_A": est.A,
        "sobolev_ratio": est.A / math.sqrt(r**4 / vol),
        "covering_N": n_cover,
        "covering_complete": covered,
        "comparability": comp,
        "comparison_bound": comparison_bound(K, r),
    }


def _member_fingerprint(member: dict) -> str:
    cfg = ExperimentConfig(kind="calibrate", suite={"member": member})
    return cfg.fingerprint()


def calibrate(members: Sequence[dict], heat_problems: int = 30, seed: int = 0, heat_n: int = 128,
              workers: int = 1, out: Path | None = None) -> RegressionBaseline:
    """Run every member and fold the measurements into named constants.

    Members are processed in sorted-id order.  A member that stops on
    anything other than the end time or the equivalence limit, leaves a
    cover incomplete, or exceeds its comparison bound aborts calibration.
    """
    if len(members) < 10:
        raise ValueError("a calibration suite needs at least 10 members")
    ordered = sorted(members, key=lambda d: d["id"])
    results = _map(calibration_member, ordered, workers)
    rows = {}
    for member, res in zip(ordered, results):
        res["fingerprint"] = _member_fingerprint(member)
        rows[res["id"]] = res
        bad = []
        if res["stop_reason"] not in ("reached_t_end", "equivalence_violated"):
            bad.append(f"stop reason {res['stop_reason']}")
        if not math.isfinite(res["max_t_sup_rm"]) or not math.isfinite(res["max_t23_sup_ric"]):
            bad.append("diverging tracker")
        if not res["covering_complete"]:
            bad.append("incomplete cover")
        if res["comparability"] > res["comparison_bound"]:
            bad.append("comparability above the comparison bound")
        if bad:
            raise InvariantViolation(f"member {res['id']}: {', '.join(bad)}", res)
        if out is not None:
            write_json(out / res["id"] / "summary.json", res)

    suite_fp = ExperimentConfig(kind="calibrate", suite={"members": ordered}).fingerprint()
    kernel = kernel_suite(heat_problems, seed, heat_n, workers=workers)
    kernel_fp = ExperimentConfig(kind="calibrate",
                                 suite={"heat_problems": heat_problems, "seed": seed, "n": heat_n}).fingerprint()

    def sup(key):
        return max(r[key] for r in rows.values())

    constants = {
        "kernel_C_star": {"value": kernel["C_star"], "fingerprint": kernel_fp},
        "smoothing_t_sup_rm": {"value": sup("max_t_sup_rm"), "fingerprint": suite_fp},
        "ricci_decay_t23_sup_ric": {"value": sup("max_t23_sup_ric"), "fingerprint": suite_fp},
        "sobolev_ratio_bound": {"value": sup("sobolev_ratio"), "fingerprint": suite_fp},
        "covering_N": {"value": sup("covering_N"), "fingerprint": suite_fp},
        "volume_growth_c": {"value": sup("max_dvol_c"), "fingerprint": suite_fp},
        "comparability_c1": {"value": sup("comparability"), "fingerprint": suite_fp},
        "existence_C1": {"value": min(r["existence_ratio"] for r in rows.values()),
                         "fingerprint": suite_fp},
    }
    baseline = RegressionBaseline(constants, rows)
    if out is not None:
        baseline.write(out / "baseline.json")
        ids = sorted(rows)
        write_csv(out / "members.csv",
                  {"id": ids, **{k: [rows[i][k] for i in ids] for k in
                                 ("max_t_sup_rm", "max_t23_sup_ric", "sobolev_ratio", "covering_N",
                                  "comparability")}},
                  {"id": "1", "max_t_sup_rm": "1", "max_t23_sup_ric": "length^(-2/3)",
                   "sobolev_ratio": "1", "covering_N": "1", "comparability": "1"})
    return baseline


# ---------------------------------------------------------------------------
# dispatch


def _manifest(cfg: ExperimentConfig) -> dict:
    echo = cfg.as_dict()
    echo.pop("output_dir")
    return {"schema_version": cfg.schema_version, "kind": cfg.kind,
            "fingerprint": cfg.fingerprint(), "config": echo}


def _metric(cfg: ExperimentConfig) -> WarpedMetric:
    return build_metric(cfg.profile, cfg.make_grid())


def run_experiment(cfg: ExperimentConfig, out: str | Path | None = None) -> tuple[Path, dict]:
    """Execute ``cfg`` and write its outputs; returns ``(output_dir, summary)``."""
    out = cfg.resolve_output(out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "manifest.json", _manifest(cfg))
    kind = cfg.kind
    an = cfg.analysis
    if kind == "flow":
        summary = flow_experiment(_metric(cfg), cfg.make_controls(), out)
    elif kind == "collapse_sweep":
        summary = collapse_sweep(_metric(cfg), cfg.make_controls(),
                                 tuple(cfg.sweep.get("collapse_factors", (1.0, 0.1, 0.01))), out)
        tol = float(cfg.tolerances.get("existence", 0.1))
        if summary["existence_spread"] > tol:
            raise InvariantViolation("existence time varies across collapse factors", summary)
    elif kind == "smoothing_sweep":
        sw = cfg.sweep
        summary = smoothing_sweep(tuple(sw.get("heights", (10.0, 100.0, 1000.0))),
                                  int(sw.get("n", 256)), float(sw.get("period_length", 4.0)),
                                  float(sw.get("r", 0.5)), float(sw.get("target_l2", 0.05)),
                                  cfg.workers, out)
        tol = float(cfg.tolerances.get("spread", 2.0))
        if summary["spread"] > tol:
            raise InvariantViolation("smoothing constant varies across heights", summary)
    elif kind == "moser_verify":
        s = cfg.suite
        summary = moser_verify(int(s.get("size", 100)), int(s["seed"]),
                               int(s.get("heat_problems", 10)), int(s.get("n", 128)), cfg.workers, out)
    elif kind == "sobolev":
        m = _metric(cfg)
        r = float(an["r"])
        tube = tube_at(m, int(an.get("center", 0)), r)
        est = sobolev_estimate(m, tube, restarts=int(an.get("restarts", 8)), seed=int(an.get("seed", 0)))
        vol = volume(m, tube)
        summary = {"A": est.A, "iterations": est.iterations, "converged": est.converged,
                   "restart_values": list(est.restart_values), "tube_volume": vol,
                   "volume_ratio": est.A / math.sqrt(r**4 / vol), "r": r}
        write_csv(out / "minimizer.csv", {"s": m.grid.s, "f": est.minimizer.values},
                  {"s": "coordinate", "f": "1"})
        write_json(out / "summary.json", summary)
    elif kind == "scan":
        m = _metric(cfg)
        r = float(an["r"])
        records = concentration_scan(m, r, tuple(an.get("factors", (1.0, 0.5, 0.25))))
        summary = {"max_ratio": {f"{k:g}": v for k, v in max_ratios(records).items()}, "r": r}
        if "epsilon" in an and "K" in an:
            summary["hypotheses"] = check_hypotheses(m, r, float(an["epsilon"]), float(an["K"])).as_dict()
        cols = {k: [getattr(rec, k) for rec in records]
                for k in ("center", "radius", "l2_curv", "volume", "ratio", "sobolev_proxy")}
        write_csv(out / "concentration.csv", cols,
                  {"center": "index", "radius": "length", "l2_curv": "1", "volume": "length^4",
                   "ratio": "1", "sobolev_proxy": "1"})
        write_json(out / "summary.json", summary)
    elif kind == "calibrate":
        s = cfg.suite
        members = s.get("members") or suites.default_calibration_suite(int(s.get("n", 128)))
        baseline = calibrate(members, int(s.get("heat_problems", 30)), int(s["seed"]),
                             int(s.get("heat_n", 128)), cfg.workers, out)
        summary = {"constants": {k: v["value"] for k, v in baseline.constants.items()}}
        if "baseline" in s:
            cmp = baseline.compare(RegressionBaseline.load(s["baseline"]),
                                   float(cfg.tolerances.get("drift", DEFAULT_DRIFT)))
            summary["comparison"] = cmp
            write_json(out / "summary.json", summary)
            if cmp["failing"]:
                raise InvariantViolation("constants drifted beyond tolerance", cmp)
        write_json(out / "summary.json", summary)
    else:  # pragma: no cover - validate() rejects unknown kinds
        raise ValueError(kind)
    return out, summary


def report(directory: str | Path) -> dict:
    """Re-render the plots of a finished run from its CSV files and return
    the manifest and summary."""
    directory = Path(directory)
    manifest = read_json(directory / "manifest.json")
    summary = read_json(directory / "summary.json")
    for csv_path in sorted(directory.rglob("timeseries.csv")):
        plot_csv(csv_path, csv_path.with_name("bounds.svg"), "time", ["t_sup_rm", "equivalence"],
                 title="scale-invariant bounds")
        plot_csv(csv_path, csv_path.with_name("concentration.svg"), "time",
                 ["concentration_max", "tube_l2_max"], title="curvature concentration", logy=True)
    return {"manifest": manifest, "summary": summary}
