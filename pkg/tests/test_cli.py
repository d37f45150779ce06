import csv
import json

import numpy as np
import pytest

from socialmfg import ProblemInstance, make_model, residual_p1, stationary_residuals
from socialmfg.cli import (
    EXIT_CONFIG,
    EXIT_CONVERGENCE,
    EXIT_OK,
    EXIT_VERIFY,
    ConfigError,
    horizon_from_dict,
    main,
    parse_config,
)


def horizon_config(model="example1", **extra):
    cfg = {
        "command": "solve-horizon",
        "instance": {"s": 3, "N": 5, "m0": [1 / 3] * 3, "terminal_cost": [0, 1, 2], "model": {"name": model}},
    }
    cfg.update(extra)
    return cfg


def write(tmp_path, cfg, name="run.json"):
    path = tmp_path / name
    path.write_text(cfg if isinstance(cfg, str) else json.dumps(cfg))
    return str(path)


# --- parse_config ------------------------------------------------------------

def test_minimal_config_fills_defaults():
    cfg = parse_config(json.dumps(horizon_config()))
    assert cfg.seed == 0
    assert cfg.horizon.damping == 0.5
    assert cfg.inner.grad_tol == 1e-8
    assert cfg.output.dir == "out"


def test_mass_error_names_field():
    bad = horizon_config()
    bad["instance"]["m0"] = [0.3, 0.3, 0.3]
    with pytest.raises(ConfigError, match=r"instance\.m0"):
        parse_config(json.dumps(bad))


def test_unknown_model_lists_available():
    with pytest.raises(ConfigError) as info:
        parse_config(json.dumps(horizon_config(model="example9")))
    assert "example9" in str(info.value)
    for name in ("example1", "example1_variant", "example2", "example2_variant"):
        assert name in str(info.value)


def test_unknown_key_rejected_with_path():
    bad = horizon_config(horizon={"dampng": 0.3})
    with pytest.raises(ConfigError, match=r"horizon\.dampng"):
        parse_config(json.dumps(bad))


def test_json_syntax_error_has_position():
    with pytest.raises(ConfigError, match=r"line 2, column \d+"):
        parse_config('{"command": "verify",\n  oops}')


def test_dimension_mismatch():
    bad = horizon_config()
    bad["instance"]["terminal_cost"] = [0, 1]
    with pytest.raises(ConfigError, match="terminal_cost"):
        parse_config(json.dumps(bad))


def test_missing_horizon_fields():
    bad = horizon_config()
    del bad["instance"]["N"]
    with pytest.raises(ConfigError, match=r"instance\.N"):
        parse_config(json.dumps(bad))


def test_bad_model_params():
    bad = horizon_config()
    bad["instance"]["model"]["params"] = {"alpha1": -1.0}
    with pytest.raises(ConfigError):
        parse_config(json.dumps(bad))


# --- run -------------------------------------------------------------------------

def test_zero_model_horizon_writes_artifacts(tmp_path):
    out = tmp_path / "out"
    code = main(["--config", write(tmp_path, horizon_config("zero")), "--out", str(out), "--quiet"])
    assert code == EXIT_OK
    result = json.loads((out / "result.json").read_text())
    assert result["status"] == "converged"
    assert result["config"]["instance"]["model"]["name"] == "zero"
    with open(out / "trajectory.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6 * 3
    for state in ("1", "2", "3"):
        assert sum(r["state"] == state for r in rows) == 6
    assert {"time", "state", "m", "U", "P_1_1", "P_3_3"} <= set(rows[0])
    assert (out / "meta.json").exists()


def test_horizon_round_trip_residuals(tmp_path):
    cfg = horizon_config("example1_variant")
    main(["--config", write(tmp_path, cfg), "--out", str(tmp_path / "o"), "--quiet"])
    result = json.loads((tmp_path / "o" / "result.json").read_text())
    sol = horizon_from_dict(result["solution"])
    inst = ProblemInstance(3, 5, cfg["instance"]["m0"], [0, 1, 2], make_model("example1_variant"))
    cost_gap, evo_gap = residual_p1(sol, inst)
    assert abs(cost_gap - result["residuals"]["cost_recursion"]) <= 1e-12
    assert abs(evo_gap - result["residuals"]["evolution"]) <= 1e-12


def test_stationary_round_trip_and_csv(tmp_path):
    cfg = {"command": "solve-stationary", "instance": {"s": 3, "m0": [0.2, 0.3, 0.5], "model": {"name": "example2_variant"}}}
    out = tmp_path / "o"
    assert main(["--config", write(tmp_path, cfg), "--out", str(out), "--quiet"]) == EXIT_OK
    result = json.loads((out / "result.json").read_text())
    sol = result["solution"]
    res = stationary_residuals(sol["m_bar"], sol["u_bar"], sol["lambda_bar"], make_model("example2_variant"),
                               P=sol["strategy"])
    assert abs(res[0] - result["residuals"]["cost_equation"]) <= 1e-12
    assert abs(res[1] - result["residuals"]["distribution_equation"]) <= 1e-12
    with open(out / "stationary.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["m_1", "m_2", "m_3", "U_1", "U_2", "U_3", "lambda"]
    assert len(rows) == 2
    assert float(rows[1][3]) == 0.0


def test_determinism_and_seed_override(tmp_path):
    cfg = horizon_config("example1_variant", horizon={"multistart_count": 2}, seed=1)
    path = write(tmp_path, cfg)
    main(["--config", path, "--out", str(tmp_path / "a"), "--quiet"])
    main(["--config", path, "--out", str(tmp_path / "b"), "--quiet"])
    a = (tmp_path / "a" / "result.json").read_bytes()
    assert a == (tmp_path / "b" / "result.json").read_bytes()
    main(["--config", path, "--out", str(tmp_path / "c"), "--seed", "9", "--quiet"])
    assert json.loads((tmp_path / "c" / "result.json").read_text())["seed"] == 9


def test_verify_example1_passes(tmp_path):
    cfg = {"command": "verify", "instance": {"s": 2, "model": {"name": "example1"}}, "verify": {"samples": 20}}
    out = tmp_path / "o"
    assert main(["--config", write(tmp_path, cfg), "--out", str(out), "--quiet"]) == EXIT_OK
    result = json.loads((out / "result.json").read_text())
    assert result["status"] == "passed"
    for probe in result["probes"]:
        assert probe["passed"] is True
        assert "observed" in probe


def test_verify_failure_exit_code(tmp_path):
    # an impossible row-swap bound forces one failing probe
    cfg = {"command": "verify", "instance": {"s": 2, "model": {"name": "example2"}},
           "verify": {"samples": 10, "a6_bound": 0.0}}
    assert main(["--config", write(tmp_path, cfg), "--out", str(tmp_path / "o"), "--quiet"]) == EXIT_VERIFY


def test_oracle_command(tmp_path):
    cfg = {"command": "oracle", "oracle": {"resolution": 0.01},
           "instance": {"s": 2, "m0": [0.4, 0.6], "terminal_cost": [0, 1], "model": {"name": "example2"}}}
    out = tmp_path / "o"
    assert main(["--config", write(tmp_path, cfg), "--out", str(out), "--quiet"]) == EXIT_OK
    result = json.loads((out / "result.json").read_text())
    assert result["gap"] <= 1e-12


def test_oracle_unsupported_size(tmp_path, capsys):
    cfg = {"command": "oracle",
           "instance": {"s": 4, "m0": [0.25] * 4, "terminal_cost": [0, 1, 0, 1], "model": {"name": "zero"}}}
    out = tmp_path / "o"
    assert main(["--config", write(tmp_path, cfg), "--out", str(out), "--quiet"]) == EXIT_CONFIG
    assert "at most 3 states" in json.loads((out / "result.json").read_text())["error"]


def test_convergence_failure_persists_history(tmp_path):
    cfg = horizon_config("example2", horizon={"max_outer_iters": 2})
    cfg["instance"]["m0"] = [0.6, 0.3, 0.1]
    out = tmp_path / "o"
    assert main(["--config", write(tmp_path, cfg), "--out", str(out), "--quiet"]) == EXIT_CONVERGENCE
    result = json.loads((out / "result.json").read_text())
    assert result["status"] == "failed"
    assert len(result["residual_history"]) == 2


def test_config_error_exit_code(tmp_path, capsys):
    assert main(["--config", write(tmp_path, "{not json"), "--quiet"]) == EXIT_CONFIG
    assert "line 1" in capsys.readouterr().err
    assert main(["--config", str(tmp_path / "missing.json"), "--quiet"]) == EXIT_CONFIG
