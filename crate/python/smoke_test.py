"""Smoke test for the opnm_py extension.

Build and install first:
    pip install --no-build-isolation -e crates/python
then run with pytest or as a script.
"""
import json

import opnm_py

DEPHASING = {
    "model": {"type": "dephasing", "gamma": 1.0, "tau_c": 0.05},
    "scheme": {"preset": "xxx"},
    "initial_state": {"p": 1.0},
    "grid": {"t_max": 2.0, "n_points": 3},
    "oracle": {"kind": "gaussian"},
}


def test_joint_table_is_normalized():
    for model, scheme in [("dephasing", "xxx"), ("bosonic", "xzx"), ("bosonic", "zzz")]:
        table = opnm_py.joint_prob_perturbative(model, 1.0, 0.125, scheme, 0.8, 1.0, 1.0, 3)
        total = sum(v for plane in table for row in plane for v in row)
        assert abs(total - 1.0) < 1e-12


def test_dephasing_series_tracks_exact():
    total, per_order = opnm_py.cpf_perturbative("dephasing", 1.0, 0.05, "xxx", 1.0, 1.0, 1.0, 1.0, 3)
    exact, stderr = opnm_py.cpf_exact("gaussian", 1.0, 0.05, "xxx", 1.0, 1.0, 1.0, 1.0)
    assert stderr is None
    assert abs(per_order[0]) < 1e-12
    assert abs(total - exact) < 1e-3 * max(1.0, abs(exact)) + 5e-5


def test_zero_temperature_excited_outcome_is_markovian():
    total, _ = opnm_py.cpf_perturbative("bosonic", 1.0, 0.125, "xzx", 0.8, 1.0, 1.0, 1.0, 3)
    exact, _ = opnm_py.cpf_exact("pseudomode", 1.0, 0.125, "xzx", 0.8, 1.0, 1.0, 1.0)
    assert abs(total) < 1e-9 and abs(exact) < 1e-9


def test_simulate_returns_rows_and_csv():
    out = opnm_py.simulate(json.dumps(DEPHASING))
    assert len(out["rows"]) == 6
    assert out["csv"].startswith("# opnm ")
    serial = opnm_py.simulate(json.dumps(DEPHASING), parallel=False)
    assert serial["csv"] == out["csv"]
    rep = opnm_py.compare(json.dumps(DEPHASING), ["oracle.tolerance=0.01"])
    assert rep["passed"]


def test_errors_surface_as_exceptions():
    try:
        opnm_py.simulate(json.dumps(DEPHASING), ["model.gamma=-1"])
    except opnm_py.OpnmError as e:
        assert "model.gamma" in str(e)
    else:
        raise AssertionError("invalid config accepted")


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"{name}: ok")
