"""Config validation, experiment execution, artifact formats, exit codes."""
import json
import math

import numpy as np
import pytest

from signopt.cli import main
from signopt.harness import (
    CHECKS,
    ConfigError,
    config_from_dict,
    execute_experiment,
    load_config,
)
from signopt.trace import CSV_HEADER, read_trace_csv

BASE = {
    "problem": {"kind": "least_squares", "d": 6, "n": 10, "seed": 5},
    "algo": "signsvrg_v1",
    "schedule": "cor1",
    "q": 1,
    "T": 300,
    "P": 64,
    "seeds": [1, 2, 3],
    "x1": {"gaussian": 1.0},
    "checks": ["svrg_grad_bound_v1", "update_count_bound", "comm_bits_bound"],
}


def _cfg(**over):
    doc = json.loads(json.dumps(BASE))
    doc.update(over)
    return doc


# ---------------------------------------------------------------- validation

def test_config_roundtrip():
    cfg = config_from_dict(_cfg())
    assert cfg.algo == "signsvrg_v1"
    assert cfg.q == 1.0
    assert cfg.seeds == (1, 2, 3)
    assert cfg.F == 32


@pytest.mark.parametrize(
    "patch,field",
    [
        ({"algo": "adam"}, "algo"),
        ({"schedule": "warmup"}, "schedule"),
        ({"schedule": "sec2"}, "schedule"),  # wrong algo for sec2
        ({"q": 3}, "q"),
        ({"T": 0}, "T"),
        ({"seeds": []}, "seeds"),
        ({"seeds": [1, 1]}, "seeds"),
        ({"checks": ["nope"]}, "checks"),
        ({"checks": ["regret_bound"]}, "checks"),  # check/algo mismatch
        ({"x1": "origin"}, "x1"),
        ({"F": 0}, "F"),
        ({"P": 0}, "P"),
        ({"bogus_key": 1}, "bogus_key"),
    ],
)
def test_config_rejections_name_the_field(patch, field):
    with pytest.raises(ConfigError) as err:
        config_from_dict(_cfg(**patch))
    assert err.value.field == field
    assert field in str(err.value)


def test_manual_schedule_requires_gamma_and_d():
    doc = _cfg(schedule="manual", checks=[])
    with pytest.raises(ConfigError) as err:
        config_from_dict(doc)
    assert err.value.field == "gamma"
    doc["gamma"] = 0.05
    with pytest.raises(ConfigError) as err:
        config_from_dict(doc)
    assert err.value.field == "D"
    doc["D"] = 0.4
    config_from_dict(doc)  # now fine


def test_q_inf_token():
    cfg = config_from_dict(_cfg(q="inf"))
    assert cfg.q == math.inf


def test_explicit_x1_wrong_length():
    cfg = config_from_dict(_cfg(x1=[0.0, 0.0]))
    with pytest.raises(ConfigError) as err:
        execute_experiment(cfg)
    assert err.value.field == "x1"


def test_alpha_needed_without_optimum():
    doc = _cfg(
        problem={"kind": "trig_nonconvex", "d": 4, "n": 6, "seed": 1, "lam": 0.1},
        schedule="cor2",
        checks=[],
    )
    with pytest.raises(ConfigError) as err:
        execute_experiment(config_from_dict(doc))
    assert err.value.field == "alpha"
    doc["alpha"] = 2.0
    execute_experiment(config_from_dict(doc))  # explicit distance unblocks it


# ---------------------------------------------------------------- execution

def test_execute_writes_all_artifacts(tmp_path):
    cfg = config_from_dict(_cfg())
    result = execute_experiment(cfg, tmp_path)
    assert result.all_hold
    assert sorted(p.name for p in tmp_path.iterdir()) == [
        "summary.json", "timing.json",
        "trace_seed1.csv", "trace_seed2.csv", "trace_seed3.csv",
    ]
    with open(tmp_path / "trace_seed1.csv") as fh:
        assert fh.readline().rstrip("\n") == CSV_HEADER
    doc = json.loads((tmp_path / "summary.json").read_text())
    assert doc["all_hold"] is True
    assert [r["name"] for r in doc["reports"]] == list(cfg.checks)
    assert doc["config"]["algo"] == "signsvrg_v1"
    assert doc["derived"]["gamma"] > 0
    assert doc["meta"]["package_version"]


def test_trace_csv_roundtrip(tmp_path):
    cfg = config_from_dict(_cfg(seeds=[4]))
    result = execute_experiment(cfg, tmp_path)
    tr = result.traces[0]
    back = read_trace_csv(tmp_path / "trace_seed4.csv")
    np.testing.assert_array_equal(back.t, tr.t)
    np.testing.assert_array_equal(back.f, tr.f)
    np.testing.assert_array_equal(back.gnorm1, tr.gnorm1)
    np.testing.assert_array_equal(back.gnorm_inf, tr.gnorm_inf)
    np.testing.assert_array_equal(back.k, tr.k)
    np.testing.assert_array_equal(back.dist_to_ref, tr.dist_to_ref)
    np.testing.assert_array_equal(back.bits_cum, tr.bits_cum)
    np.testing.assert_array_equal(back.flags, tr.flags)


def test_reruns_are_byte_identical(tmp_path):
    cfg = config_from_dict(_cfg())
    execute_experiment(cfg, tmp_path / "a")
    execute_experiment(cfg, tmp_path / "b")
    for name in ["summary.json", "trace_seed1.csv", "trace_seed2.csv", "trace_seed3.csv"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_x1_shared_across_seeds():
    result = execute_experiment(config_from_dict(_cfg()))
    f0 = [tr.f[0] for tr in result.traces]
    assert f0[0] == f0[1] == f0[2]  # same start point for every seed
    # but the trajectories differ
    assert not np.array_equal(result.traces[0].x_final, result.traces[1].x_final)


def test_every_check_has_an_owner():
    # the registry must only name checks the evaluators implement; smoke-run
    # one config per check family
    assert set(CHECKS) == {
        "svrg_grad_bound_v1", "svrg_grad_bound_v2", "svrg_gap_bound",
        "regret_bound", "final_gap_bound", "signgd_bound",
        "rate_bounds_v1", "rate_bounds_v2", "update_count_bound", "comm_bits_bound",
    }


def test_v2_and_rate_checks_run():
    doc = _cfg(algo="signsvrg_v2",
               checks=["svrg_grad_bound_v2", "rate_bounds_v2", "update_count_bound"])
    result = execute_experiment(config_from_dict(doc))
    assert [r.name for r in result.reports] == [
        "svrg_grad_bound_v2", "rate_max_bound", "update_count_bound",
    ]


def test_rate_v1_reported_as_single_disjunction():
    doc = _cfg(checks=["rate_bounds_v1"])
    result = execute_experiment(config_from_dict(doc))
    assert len(result.reports) == 1
    assert result.reports[0].name == "rate_v1_either_bound"


def test_sec2_regret_pipeline():
    doc = {
        "problem": {"kind": "abs_regression", "d": 4, "n": 10, "seed": 2},
        "algo": "signsgd_plus",
        "schedule": "sec2",
        "q": 2,
        "T": 1500,
        "seeds": [1, 2, 3, 4, 5],
        "x1": {"gaussian": 1.0},
        "checks": ["regret_bound", "final_gap_bound"],
    }
    result = execute_experiment(config_from_dict(doc))
    assert result.all_hold
    assert result.derived.g_inf is not None  # pulled from the problem
    assert result.derived.f_star_source == "optimum"


def test_signgd_f_star_fallback_to_lower_bound():
    doc = {
        "problem": {"kind": "trig_nonconvex", "d": 4, "n": 6, "seed": 1, "lam": 0.0},
        "algo": "signgd",
        "schedule": "cor1",
        "q": 2,
        "T": 200,
        "seeds": [1],
        "x1": "zeros",
        "checks": ["signgd_bound"],
    }
    result = execute_experiment(config_from_dict(doc))
    assert result.derived.f_star == -1.0
    assert result.derived.f_star_source == "lower_bound"
    assert result.all_hold


def test_signgd_f_star_numeric_fallback():
    doc = {
        "problem": {"kind": "logistic", "d": 3, "n": 8, "seed": 4},
        "algo": "signgd",
        "schedule": "cor1",
        "q": 1,
        "T": 100,
        "seeds": [1],
        "x1": "zeros",
        "checks": ["signgd_bound"],
    }
    result = execute_experiment(config_from_dict(doc))
    assert result.derived.f_star_source == "numeric"
    assert result.all_hold


# ---------------------------------------------------------------- cli exit codes

def _write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def test_cli_run_all_hold_exits_zero(tmp_path, capsys):
    code = main(["run", "--config", _write(tmp_path, _cfg()), "--out", str(tmp_path / "out")])
    out = capsys.readouterr().out
    assert code == 0
    assert "all checks hold" in out
    assert out.count("-> holds") == 3


def test_cli_run_violation_exits_two(tmp_path, capsys):
    # manual D far below the coupled schedule forces a refresh every step,
    # so the refresh-count cap at the scheduled period is provably exceeded
    doc = _cfg(schedule="manual", gamma=0.05, D=1e-6,
               checks=["update_count_bound"])
    code = main(["run", "--config", _write(tmp_path, doc), "--out", str(tmp_path / "out")])
    out = capsys.readouterr().out
    assert code == 2
    assert "VIOLATED" in out


def test_cli_run_config_error_exits_one(tmp_path, capsys):
    code = main(["run", "--config", _write(tmp_path, _cfg(algo="adam")),
                 "--out", str(tmp_path / "out")])
    err = capsys.readouterr().err
    assert code == 1
    assert "algo" in err


def test_cli_run_missing_file_exits_one(tmp_path, capsys):
    code = main(["run", "--config", str(tmp_path / "absent.json"),
                 "--out", str(tmp_path / "out")])
    assert code == 1


def test_cli_run_invalid_json_exits_one(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    assert main(["run", "--config", str(p), "--out", str(tmp_path / "out")]) == 1


def test_cli_verify_key_identity_small(capsys):
    assert main(["verify-key-identity", "--N", "20000", "--seed", "3"]) == 0
    out = capsys.readouterr().out
    assert "identity verified" in out


def test_cli_verify_key_identity_rejects_zero_amplitude(capsys):
    assert main(["verify-key-identity", "--N", "1000", "--G-values", "0,1"]) == 1


def test_cli_example1(capsys):
    assert main(["example1", "--d", "8", "--samples", "3000", "--seed", "1"]) == 0
    assert main(["example1", "--d", "8", "--samples", "1", "--seed", "1"]) == 1


def test_cli_nonconvergence_demo(capsys):
    assert main(["nonconvergence-demo", "--T", "3000", "--gamma", "0.01", "--seed", "0"]) == 0
    assert main(["nonconvergence-demo", "--T", "100", "--gamma", "-1", "--seed", "0"]) == 1
    # a huge step escapes the region where the gradient bound is valid
    assert main(["nonconvergence-demo", "--T", "200", "--gamma", "3.0", "--seed", "0"]) == 2
