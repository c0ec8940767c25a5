import json

import numpy as np
import pytest

from urnlab import cli


def run(argv, tmp_path, out=None):
    """Invoke the CLI in-process with --out under tmp_path."""
    target = str(out if out is not None else tmp_path / "out")
    return cli.main(list(argv) + ["--out", target]), target


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def test_simulate_writes_trajectory_and_summary(tmp_path):
    code, out = run(["simulate", "--feedback", "k^2", "k^2",
                     "--init", "1,1", "--steps", "1000", "--seed", "1"],
                    tmp_path)
    assert code == 0
    csv_lines = (tmp_path / "out/simulate/trajectory.csv").read_text().strip().splitlines()
    assert len(csv_lines) == 1002          # header + initial row + 1000 steps
    assert csv_lines[0].startswith("n,winner,x_1,x_2")
    summary = json.loads((tmp_path / "out/simulate/summary.json").read_text())
    assert summary["steps"] == 1000
    assert (tmp_path / "out/simulate/shares.png").exists()


def test_simulate_repeat_token_expands(tmp_path):
    code, _ = run(["simulate", "--feedback", "sqrt(k)", "x3",
                   "--init", "1,1,1", "--steps", "10", "--seed", "0"],
                  tmp_path)
    assert code == 0
    header = (tmp_path / "out/simulate/trajectory.csv").read_text().splitlines()[0]
    assert "x_3" in header


def test_simulate_deterministic_given_seed(tmp_path):
    run(["simulate", "--feedback", "k", "k", "--init", "2,3",
         "--steps", "200", "--seed", "7"], tmp_path, out=tmp_path / "a")
    run(["simulate", "--feedback", "k", "k", "--init", "2,3",
         "--steps", "200", "--seed", "7"], tmp_path, out=tmp_path / "b")
    a = (tmp_path / "a/simulate/trajectory.csv").read_bytes()
    b = (tmp_path / "b/simulate/trajectory.csv").read_bytes()
    assert a == b


def test_simulate_bad_expression_is_config_error(tmp_path, capsys):
    code, _ = run(["simulate", "--feedback", "k^^2", "k",
                   "--init", "1,1", "--steps", "10"], tmp_path)
    assert code == 2
    err = capsys.readouterr().err
    assert "SyntaxError" in err and "position" in err


def test_simulate_requires_steps_and_state(tmp_path):
    code, _ = run(["simulate", "--feedback", "k", "k", "--init", "1,1"],
                  tmp_path)
    assert code == 2
    code, _ = run(["simulate", "--feedback", "k", "k", "--steps", "5"],
                  tmp_path)
    assert code == 2


def test_simulate_rejects_mismatched_lengths(tmp_path):
    code, _ = run(["simulate", "--feedback", "k", "k",
                   "--init", "1,1,1", "--steps", "5"], tmp_path)
    assert code == 2


def test_simulate_rejects_init_and_shares_together(tmp_path):
    code, _ = run(["simulate", "--feedback", "k", "k", "--init", "1,1",
                   "--shares", "0.5,0.5", "--N", "10", "--steps", "5"],
                  tmp_path)
    assert code == 2


# ---------------------------------------------------------------------------
# embed
# ---------------------------------------------------------------------------

def test_embed_writes_jump_times(tmp_path):
    code, _ = run(["embed", "--feedback", "k", "k", "--init", "1,1",
                   "--t-max", "2.0", "--seed", "3"], tmp_path)
    assert code == 0
    lines = (tmp_path / "out/embed/embedding.csv").read_text().strip().splitlines()
    assert "t_n" in lines[0]
    summary = json.loads((tmp_path / "out/embed/summary.json").read_text())
    assert summary["exploded"] is None
    assert summary["t_max"] == 2.0


def test_embed_flags_explosion(tmp_path):
    code, _ = run(["embed", "--feedback", "k^2", "k^2", "--init", "1,1",
                   "--t-max", "100", "--seed", "5"], tmp_path)
    assert code == 0
    summary = json.loads((tmp_path / "out/embed/summary.json").read_text())
    assert summary["exploded"] is not None
    assert summary["exploded"]["agent"] in (0, 1)


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def test_analyze_exponential_monopoly_bounds(tmp_path, capsys):
    code, _ = run(["analyze", "--feedback", "exp(k)", "x3",
                   "--shares", "6/14,4/14,4/14", "--N", "14"], tmp_path)
    assert code == 0
    printed = capsys.readouterr().out
    report = json.loads((tmp_path / "out/analyze/report.json").read_text())
    t = report["bounds"]["tmon"]
    assert t["lower"] == pytest.approx(0.6516846293, abs=1e-9)
    assert t["upper"] == pytest.approx(0.7139208911, abs=1e-9)
    assert report["joint_verdict"] == "strong monopoly"
    assert "strong monopoly" in printed


def test_analyze_sublinear_deterministic_shares(tmp_path):
    code, _ = run(["analyze", "--feedback", "k^0.5", "2*k^0.5",
                   "--shares", "0.5,0.5", "--N", "4"], tmp_path)
    assert code == 0
    report = json.loads((tmp_path / "out/analyze/report.json").read_text())
    assert report["limit_shares"]["shares"] == pytest.approx([0.2, 0.8],
                                                             abs=1e-9)
    assert report["joint_verdict"] == "deterministic"
    assert (tmp_path / "out/analyze/report.png").exists()


def test_analyze_strong_monopoly_verdict(tmp_path):
    code, _ = run(["analyze", "--feedback", "k*log(k+1)^2", "x2",
                   "--shares", "0.5,0.5", "--N", "2"], tmp_path)
    assert code == 0
    report = json.loads((tmp_path / "out/analyze/report.json").read_text())
    assert report["joint_verdict"] == "strong monopoly"


# ---------------------------------------------------------------------------
# scaling
# ---------------------------------------------------------------------------

def test_scaling_ode_linear_is_constant(tmp_path):
    code, _ = run(["scaling", "ode", "--feedback", "k", "k",
                   "--shares", "0.3,0.7", "-T", "10", "--h", "0.01"],
                  tmp_path)
    assert code == 0
    rows = (tmp_path / "out/scaling_ode/path.csv").read_text().strip().splitlines()
    assert rows[0].startswith("t,Z_1,Z_2")
    first = [float(v) for v in rows[1].split(",")[1:3]]
    last = [float(v) for v in rows[-1].split(",")[1:3]]
    assert first == pytest.approx([0.3, 0.7], abs=1e-12)
    assert last == pytest.approx([0.3, 0.7], abs=1e-9)
    assert (tmp_path / "out/scaling_ode/path.png").exists()


def test_scaling_qvar_prints_frozen_value(tmp_path, capsys):
    code, _ = run(["scaling", "qvar", "--feedback", "sqrt(k)", "x3",
                   "--shares", "0.8,0.1,0.1", "-T", "10000"], tmp_path)
    assert code == 0
    out = capsys.readouterr().out
    assert "0.246231" in out
    assert (tmp_path / "out/scaling_qvar/qvar.csv").exists()


def test_scaling_fclt_deterministic(tmp_path):
    for sub in ("a", "b"):
        run(["scaling", "fclt", "--feedback", "k", "k",
             "--shares", "0.5,0.5", "-T", "2", "--h", "0.01",
             "--seed", "1"], tmp_path, out=tmp_path / sub)
    a = (tmp_path / "a/scaling_fclt/path.csv").read_bytes()
    b = (tmp_path / "b/scaling_fclt/path.csv").read_bytes()
    assert a == b


def test_scaling_beta_report(tmp_path, capsys):
    code, _ = run(["scaling", "beta", "--feedback", "sqrt(k)", "sqrt(k)",
                   "--shares", "0.25,0.75", "--beta", "0.7", "--N", "2000",
                   "-T", "0.5", "--seed", "2"], tmp_path)
    assert code == 0
    out = capsys.readouterr().out
    assert "deterministic_curve" in out
    rows = (tmp_path / "out/scaling_beta/beta.csv").read_text().strip().splitlines()
    assert "empirical_1" in rows[0] and "lln_1" in rows[0]


def test_scaling_beta_requires_exponent(tmp_path):
    code, _ = run(["scaling", "beta", "--feedback", "k", "k",
                   "--shares", "0.5,0.5", "-T", "1"], tmp_path)
    assert code == 2


# ---------------------------------------------------------------------------
# experiment
# ---------------------------------------------------------------------------

def test_experiment_list_prints_registry(tmp_path, capsys):
    assert cli.main(["experiment", "--list"]) == 0
    out = capsys.readouterr().out
    assert "tmon_e6_4_4:" in out
    assert "smon_xval_k3_532:" in out


def test_experiment_pass_exit_zero(tmp_path, capsys):
    code, _ = run(["experiment", "qvar_sqrt_0.2474"], tmp_path)
    assert code == 0
    out = capsys.readouterr().out
    assert "qvar_sqrt_0.2474: Pass" in out
    res = json.loads(
        (tmp_path / "out/qvar_sqrt_0.2474/result.json").read_text())
    assert res["verdict"] == "Pass"
    assert (tmp_path / "out/qvar_sqrt_0.2474/data.png").exists()


def test_experiment_fail_exit_three(tmp_path):
    # the quoted variance constant is unattainable; small runs still show it
    code, _ = run(["experiment", "khanin_variance_beta025",
                   "--replicas", "300"], tmp_path)
    assert code == 3
    res = json.loads(
        (tmp_path / "out/khanin_variance_beta025/result.json").read_text())
    assert res["verdict"] == "Fail"


def test_experiment_unknown_name_is_config_error(tmp_path, capsys):
    code, _ = run(["experiment", "does_not_exist"], tmp_path)
    assert code == 2
    assert "does_not_exist" in capsys.readouterr().err


def test_experiment_missing_name_is_config_error(tmp_path):
    code, _ = run(["experiment"], tmp_path)
    assert code == 2


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

def test_config_file_supplies_defaults(tmp_path):
    cfgf = tmp_path / "run.cfg"
    cfgf.write_text(
        "# simulation setup\n"
        "feedback = k^2\n"
        "feedback = k^2\n"
        "init = 1,1\n"
        "steps = 50\n"
        "seed = 4\n")
    code, _ = run(["simulate", "--config", str(cfgf)], tmp_path)
    assert code == 0
    lines = (tmp_path / "out/simulate/trajectory.csv").read_text().strip().splitlines()
    assert len(lines) == 52


def test_config_file_flags_take_precedence(tmp_path):
    cfgf = tmp_path / "run.cfg"
    cfgf.write_text("feedback = k\nfeedback = k\ninit = 1,1\n"
                    "steps = 50\nseed = 4\n")
    code, _ = run(["simulate", "--config", str(cfgf), "--steps", "10"],
                  tmp_path)
    assert code == 0
    lines = (tmp_path / "out/simulate/trajectory.csv").read_text().strip().splitlines()
    assert len(lines) == 12


def test_config_file_unknown_key_rejected(tmp_path, capsys):
    cfgf = tmp_path / "run.cfg"
    cfgf.write_text("wibble = 3\n")
    code, _ = run(["simulate", "--config", str(cfgf), "--feedback", "k", "k",
                   "--init", "1,1", "--steps", "5"], tmp_path)
    assert code == 2
    assert "wibble" in capsys.readouterr().err


def test_config_file_missing_is_config_error(tmp_path):
    code, _ = run(["simulate", "--config", str(tmp_path / "nope.cfg"),
                   "--feedback", "k", "k", "--init", "1,1", "--steps", "5"],
                  tmp_path)
    assert code == 2


# ---------------------------------------------------------------------------
# help surfaces
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("argv", [["--help"], ["simulate", "--help"],
                                  ["scaling", "--help"],
                                  ["experiment", "--help"]])
def test_help_exits_cleanly(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(argv)
    assert exc.value.code == 0
    assert "usage" in capsys.readouterr().out.lower()
