import json
import math

import numpy as np
import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from ricci_smoothing.flow import FlowControls
from ricci_smoothing.geometry import FlatProduct, Grid, build_metric
from ricci_smoothing.harness import suites
from ricci_smoothing.harness.cli import main
from ricci_smoothing.harness.config import (
    OUTPUT_ROOT_ENV,
    ConfigError,
    ExperimentConfig,
    load_config,
    validate,
)
from ricci_smoothing.harness.experiments import (
    InvariantViolation,
    RegressionBaseline,
    RuntimeStop,
    check_hypotheses,
    collapse_sweep,
    epsilon_failure_height,
    run_experiment,
)
from ricci_smoothing.harness.records import read_csv, write_csv, write_json

FLOW = {
    "schema_version": 1,
    "kind": "flow",
    "grid": {"n": 64, "period_length": 8.0},
    "profile": {"family": "flat_product", "a0": 1.0, "b0": 1.0},
    "flow": {"t_end": 0.4, "tube_radius": 0.5},
}


def write_cfg(path, raw):
    path.write_text(yaml.safe_dump(raw))
    return path


# -- configuration ---------------------------------------------------------


@pytest.mark.parametrize("mutate, key", [
    (lambda d: d.pop("schema_version"), "schema_version"),
    (lambda d: d.update(kind="dance"), "kind"),
    (lambda d: d.pop("grid"), "grid"),
    (lambda d: d["grid"].update(n=4), "grid.n"),
    (lambda d: d["grid"].pop("period_length"), "grid.period_length"),
    (lambda d: d["grid"].update(period_length=-1), "grid.period_length"),
    (lambda d: d["flow"].pop("t_end"), "flow.t_end"),
    (lambda d: d["flow"].update(cfl_safety=3), "flow"),
    (lambda d: d["flow"].update(warp_speed=9), "flow"),
    (lambda d: d.update(tolerances={"drift": -0.1}), "tolerances.drift"),
    (lambda d: d.update(extra=1), "extra"),
    (lambda d: d["profile"].update(family="torus"), "profile"),
    (lambda d: d.update(workers=0), "workers"),
])
def test_validation_names_offending_key(mutate, key):
    raw = json.loads(json.dumps(FLOW))
    mutate(raw)
    with pytest.raises(ConfigError) as info:
        validate(raw)
    assert info.value.key == key


def test_randomized_suites_need_seed():
    with pytest.raises(ConfigError) as info:
        validate({"schema_version": 1, "kind": "moser_verify", "suite": {"size": 3}})
    assert info.value.key == "suite.seed"


def test_fingerprint_ignores_output_location():
    a = validate(dict(FLOW, output_dir="x"))
    b = validate(dict(FLOW, output_dir="y", workers=4))
    assert a.fingerprint() == b.fingerprint()
    c = validate(dict(FLOW, flow={"t_end": 0.3}))
    assert c.fingerprint() != a.fingerprint()


def test_output_resolution(monkeypatch, tmp_path):
    cfg = validate(FLOW)
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path))
    assert cfg.resolve_output().parent == tmp_path
    assert cfg.resolve_output(tmp_path / "z") == tmp_path / "z"


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("kind: [flow\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    good = write_cfg(tmp_path / "ok.yaml", FLOW)
    assert isinstance(load_config(good), ExperimentConfig)


# -- records ---------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=20))
def test_csv_roundtrip_exact(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("csv") / "x.csv"
    write_csv(path, {"v": values}, {"v": "length"})
    assert path.read_text().splitlines()[0] == "v [length]"
    back = read_csv(path)["v"]
    assert np.array_equal(back, np.array(values, dtype=float))


def test_json_handles_nonfinite(tmp_path):
    write_json(tmp_path / "a.json", {"x": math.inf, "y": np.float64(2.0), "z": np.arange(2)})
    assert json.loads((tmp_path / "a.json").read_text()) == {"x": "inf", "y": 2.0, "z": [0, 1]}


def test_csv_column_lengths_checked(tmp_path):
    with pytest.raises(ValueError):
        write_csv(tmp_path / "x.csv", {"a": [1.0], "b": [1.0, 2.0]}, {})


# -- hypotheses ------------------------------------------------------------


def test_hypotheses_on_sphere_product():
    m = build_metric(FlatProduct(1.0, 1.0), Grid(128, 8.0))
    v = check_hypotheses(m, 0.5, epsilon=1e3, K=1.0)
    assert v.max_ric == pytest.approx(1.0) and v.ric_ok and v.passed
    assert not check_hypotheses(m, 0.5, epsilon=1e3, K=0.9).passed
    assert v.predicted_horizon == pytest.approx(0.25)
    # tube L^2 is 32 pi^2 and the concentration form 4 r^4
    assert v.max_tube_l2 == pytest.approx(32 * math.pi**2)
    assert v.max_concentration == pytest.approx(4 * 0.5**4)
    assert not check_hypotheses(m, 0.5, epsilon=1.0, K=1.0).l2_ok
    assert check_hypotheses(m, 0.5, epsilon=1.0, K=1.0).concentration_ok
    with pytest.raises(ValueError):
        check_hypotheses(m, 1.5, 1.0, 1.0)


def test_epsilon_failure_height_bisection():
    a0 = 1e-6
    h = epsilon_failure_height(0.5, 0.05, a0, n=128)
    assert h is not None
    grid = Grid(128, 4.0)

    def l2(x):
        return suites.max_tube_l2(build_metric(dict(suites.bump_profile(x, 4.0, reference_n=128), a0=a0), grid), 0.5)

    assert l2(h) > 0.05 >= l2(h / 1.01)


# -- experiments -----------------------------------------------------------


def test_flow_experiment_outputs(tmp_path):
    out, summary = run_experiment(validate(FLOW), tmp_path / "run")
    assert summary["reached_t_end"] and summary["b2_final_min"] == pytest.approx(0.2, abs=1e-3)
    names = sorted(p.name for p in out.iterdir())
    assert names == ["bounds.svg", "concentration.svg", "manifest.json", "summary.json", "timeseries.csv"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["fingerprint"] == validate(FLOW).fingerprint()
    header = (out / "timeseries.csv").read_text().splitlines()[0]
    assert header.startswith("time [length^2],sup_rm [1/length^2]")


def test_flow_runtime_stop_is_recorded(tmp_path):
    raw = dict(FLOW, flow={"t_end": 0.4, "max_steps": 5})
    with pytest.raises(RuntimeStop):
        run_experiment(validate(raw), tmp_path / "r")
    assert json.loads((tmp_path / "r" / "summary.json").read_text())["stop_reason"] == "step_limit"


def test_collapse_sweep_constant_and_nonconstant():
    m = build_metric(FlatProduct(1.0, 1.0), Grid(64, 8.0))
    c = FlowControls(t_end=0.45, stop_on_equivalence=True)
    res = collapse_sweep(m, c)
    assert res["existence_spread"] == 0 and res["tracker_deviation"] < 1e-12
    m2 = build_metric({"family": "fourier", "seed": 9, "amplitude": 0.2}, Grid(64, 8.0))
    res2 = collapse_sweep(m2, c)
    assert res2["existence_spread"] < 0.1


def test_other_kinds_run(tmp_path):
    base = {"schema_version": 1, "grid": {"n": 128, "period_length": 8.0},
            "profile": {"family": "fourier", "seed": 2, "amplitude": 0.2}}
    _, s = run_experiment(validate(dict(base, kind="sobolev", analysis={"r": 0.5})), tmp_path / "s")
    assert s["A"] > 0 and s["converged"]
    _, s = run_experiment(validate(dict(base, kind="scan", analysis={"r": 0.5, "epsilon": 100, "K": 5})),
                          tmp_path / "c")
    assert set(s["max_ratio"]) == {"0.5", "0.25", "0.125"} and "hypotheses" in s
    raw = dict(base, kind="collapse_sweep", flow={"t_end": 0.05}, sweep={"collapse_factors": [1, 0.1]})
    _, s = run_experiment(validate(raw), tmp_path / "k")
    assert s["existence_spread"] == 0


def test_baseline_compare_and_roundtrip(tmp_path):
    a = RegressionBaseline({"x": {"value": 1.0, "fingerprint": "f"}, "y": {"value": 2.0, "fingerprint": "g"}})
    b = RegressionBaseline({"x": {"value": 1.05, "fingerprint": "f"}, "y": {"value": 3.0, "fingerprint": "g"}})
    cmp = a.compare(b)
    assert cmp["failing"] == ["y"] and cmp["drift"]["x"] == pytest.approx(0.05)
    a.write(tmp_path / "b.json")
    assert RegressionBaseline.load(tmp_path / "b.json").constants == a.constants


def test_calibration_needs_ten_members():
    from ricci_smoothing.harness.experiments import calibrate

    with pytest.raises(ValueError):
        calibrate(suites.default_calibration_suite(64)[:5])


def test_failing_member_aborts_calibration():
    from ricci_smoothing.harness.experiments import calibrate

    members = suites.default_calibration_suite(128)
    # sorted first, so calibration aborts before touching the others
    doomed = dict(members[-1], id="aa-doomed", max_steps=2)
    with pytest.raises(InvariantViolation, match="aa-doomed.*step_limit"):
        calibrate(members[:9] + [doomed], heat_problems=1)


# -- command line ----------------------------------------------------------


def test_cli_exit_codes(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "flow.yaml", FLOW)
    assert main(["flow", "run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    capsys.readouterr()
    assert main(["report", "--in", str(tmp_path / "o")]) == 0
    capsys.readouterr()

    assert main(["flow", "run", "--config", str(tmp_path / "nope.yaml")]) == 2
    record = json.loads(capsys.readouterr().err)
    assert record["error"] == "config" and record["details"]["key"] == "<file>"

    bad = write_cfg(tmp_path / "bad.yaml", dict(FLOW, grid={"n": 3, "period_length": 1}))
    assert main(["flow", "run", "--config", str(bad)]) == 2
    assert json.loads(capsys.readouterr().err)["details"]["key"] == "grid.n"

    wrong = write_cfg(tmp_path / "wrong.yaml", dict(FLOW, kind="sobolev", analysis={"r": 0.5}))
    assert main(["flow", "run", "--config", str(wrong)]) == 2
    capsys.readouterr()

    stop = write_cfg(tmp_path / "stop.yaml", dict(FLOW, flow={"t_end": 0.4, "max_steps": 3}))
    assert main(["flow", "run", "--config", str(stop), "--out", str(tmp_path / "s")]) == 3
    assert json.loads(capsys.readouterr().err)["error"] == "runtime_stop"

    assert main(["bogus"]) == 2
    capsys.readouterr()
    assert main(["report", "--in", str(tmp_path / "empty")]) == 2


def test_cli_invariant_violation_exit(tmp_path, capsys, monkeypatch):
    from ricci_smoothing.harness import experiments

    def broken(*args, **kwargs):
        raise InvariantViolation("inequality failed", {"violations": 1})

    monkeypatch.setattr(experiments, "moser_verify", broken)
    assert main(["moser", "verify", "--seeds", "2", "--seed", "0", "--out", str(tmp_path)]) == 1
    assert json.loads(capsys.readouterr().err) == {
        "error": "invariant", "message": "inequality failed", "details": {"violations": 1}}


def test_cli_moser_verify_and_env_root(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path))
    assert main(["moser", "verify", "--seeds", "3", "--seed", "5"]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["output_dir"].startswith(str(tmp_path))
    assert result["summary"]["violations"] == 0 and result["summary"]["adversarial_detected"]


def test_writes_stay_inside_output_dir(tmp_path):
    before = set(tmp_path.iterdir())
    run_experiment(validate(FLOW), tmp_path / "only")
    assert set(tmp_path.iterdir()) - before == {tmp_path / "only"}


@pytest.mark.parametrize("member_id", ["bump-h100-a0.1", "fourier-seed7"])
def test_calibration_measurements_invariant_under_rescaling(member_id):
    from ricci_smoothing.harness.experiments import calibration_member

    member = next(m for m in suites.default_calibration_suite(128) if m["id"] == member_id)
    grid = Grid(member["grid"]["n"], member["grid"]["period_length"])
    m = build_metric(member["profile"], grid)
    lam = 2.0
    scaled = dict(member, r=lam * member["r"],
                  profile={"family": "custom", "w": list(lam * m.w), "a": list(lam * m.a), "b": list(lam * m.b)})
    base, other = calibration_member(member), calibration_member(scaled)
    for key in ("max_t_sup_rm", "max_t23_sup_ric", "sobolev_ratio", "covering_N", "comparability",
                "existence_ratio", "comparison_bound"):
        if key == "max_t23_sup_ric":
            # t^(2/3)|Ric| has weight lam^(-2/3) under g -> lam^2 g
            assert other[key] * lam ** (2 / 3) == pytest.approx(base[key], rel=0.01)
        else:
            assert other[key] == pytest.approx(base[key], rel=0.01)
