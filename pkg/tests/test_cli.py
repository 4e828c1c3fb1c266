import csv
import json

import pytest

from lbexperts.cli import main


def write_config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc, indent=2))
    return str(path)


def bandit_doc(n=3, T=60, **extra):
    doc = {"scenario": {"kind": "bandit", "num_experts": n, "horizon": T}, "learner": {"algorithm": "exp3lb"}, "replicates": 20, "seed": 7}
    doc.update(extra)
    return doc


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_run_writes_trace(tmp_path):
    c = write_config(tmp_path, bandit_doc())
    out = tmp_path / "out"
    assert main(["run", "--config", c, "--out", str(out), "--quiet"]) == 0
    rows = read_csv(out / "trace.csv")
    assert rows[0] == ["t", "action", "realized_loss", "p_1", "p_2", "p_3", "regret"]
    assert len(rows) == 61
    assert [int(r[0]) for r in rows[1:]] == list(range(1, 61))
    assert all(1 <= int(r[1]) <= 3 for r in rows[1:])
    assert all(abs(sum(float(x) for x in r[3:6]) - 1) < 1e-12 for r in rows[1:])


def test_run_single_expert_regret_zero(tmp_path):
    c = write_config(tmp_path, bandit_doc(n=1))
    out = tmp_path / "out"
    assert main(["run", "--config", c, "--out", str(out), "--quiet"]) == 0
    rows = read_csv(out / "trace.csv")
    assert {float(r[-1]) for r in rows[1:]} == {0.0}


def test_run_seed_override_changes_trace(tmp_path):
    c = write_config(tmp_path, bandit_doc())
    texts = []
    for seed in ("1", "1", "2"):
        out = tmp_path / f"o{len(texts)}"
        main(["run", "--config", c, "--out", str(out), "--seed", seed, "--quiet"])
        texts.append((out / "trace.csv").read_text())
    assert texts[0] == texts[1] != texts[2]


def test_estimate_writes_report_and_curve(tmp_path, capsys):
    c = write_config(tmp_path, bandit_doc())
    out = tmp_path / "est"
    assert main(["estimate", "--config", c, "--out", str(out), "--replicates", "30"]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert len(rep["per_replicate_regret"]) == 30
    assert rep["bound_check"]["passed"] is True
    assert {"mean_pseudo_regret", "std_error", "theoretical_bound", "bound_kind", "quantities", "eta_used", "beta_used"} <= set(rep)
    rows = read_csv(out / "regret_curve.csv")
    assert rows[0] == ["round", "mean_regret", "stderr", "bound"] and len(rows) == 61
    assert "PASS" in capsys.readouterr().out


def test_estimate_out_from_config_is_relative_to_config(tmp_path):
    c = write_config(tmp_path, bandit_doc(out="results"))
    assert main(["estimate", "--config", c, "--quiet"]) == 0
    assert (tmp_path / "results" / "report.json").exists()


def test_quiet_suppresses_output(tmp_path, capsys):
    c = write_config(tmp_path, bandit_doc())
    main(["estimate", "--config", c, "--out", str(tmp_path / "q"), "--quiet"])
    assert capsys.readouterr().out == ""


def test_sweep(tmp_path):
    c = write_config(tmp_path, bandit_doc(sweep={"parameter": "horizon", "values": [20, 40]}))
    out = tmp_path / "sw"
    assert main(["sweep", "--config", c, "--out", str(out), "--quiet"]) == 0
    rows = read_csv(out / "sweep.csv")
    assert rows[0] == ["parameter", "value", "mean_regret", "stderr", "bound", "passed"]
    assert [r[1] for r in rows[1:]] == ["20", "40"]
    assert main(["sweep", "--config", c, "--out", str(out), "--parameter", "num_experts", "--values", "2,4", "--quiet"]) == 0
    assert [r[1] for r in read_csv(out / "sweep.csv")[1:]] == ["2", "4"]


def test_sweep_without_values_is_invalid(tmp_path):
    c = write_config(tmp_path, bandit_doc())
    assert main(["sweep", "--config", c, "--out", str(tmp_path / "x"), "--quiet"]) == 2


def test_verify_subset_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"v{k}"
        assert main(["verify", "--seed", "3", "--only", "unbiasedness,correction_grid", "--out", str(out), "--quiet"]) == 0
        outs.append((out / "verify.json").read_bytes())
    assert outs[0] == outs[1]
    doc = json.loads(outs[0])
    assert sorted(c["name"] for c in doc["checks"]) == ["correction_grid", "unbiasedness"]


def test_verify_unknown_check(capsys):
    assert main(["verify", "--only", "nonsense", "--quiet"]) == 2
    assert "nonsense" in capsys.readouterr().err


def test_malformed_json_reports_line(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "scenario": {"kind": "bandit",\n  "num_experts": 2,,\n}\n')
    assert main(["run", "--config", str(path)]) == 2
    assert f"{path}:3:" in capsys.readouterr().err


def test_semantic_error_reports_line(tmp_path, capsys):
    text = '{\n  "scenario": {"kind": "bandit", "num_experts": 2, "horizon": 5},\n  "learner": {\n    "algorithm": "ucb"\n  }\n}\n'
    path = tmp_path / "sem.json"
    path.write_text(text)
    assert main(["estimate", "--config", str(path)]) == 2
    err = capsys.readouterr().err
    assert f"{path}:4:" in err and "ucb" in err


def test_unknown_field_reports_its_line(tmp_path, capsys):
    text = '{\n  "scenario": {"kind": "bandit", "num_experts": 2, "horizon": 5},\n  "replicate": 5\n}\n'
    path = tmp_path / "typo.json"
    path.write_text(text)
    assert main(["estimate", "--config", str(path)]) == 2
    assert f"{path}:3:" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["run"],
        ["run", "--config", "/nonexistent/cfg.json"],
        ["estimate", "--config", "CFG", "--replicates", "0"],
    ],
)
def test_invalid_input_exit_code(tmp_path, argv):
    c = write_config(tmp_path, bandit_doc())
    argv = [c if a == "CFG" else a for a in argv]
    assert main(argv) == 2


def test_failed_bound_check_exits_one(tmp_path, monkeypatch):
    import lbexperts.cli as cli
    from lbexperts.harness import BoundCheck

    monkeypatch.setattr(cli, "bound_check", lambda rep: BoundCheck(False, -1.0, rep.theoretical_bound + 1, rep.theoretical_bound))
    c = write_config(tmp_path, bandit_doc())
    assert main(["estimate", "--config", c, "--out", str(tmp_path / "f"), "--quiet"]) == 1
    assert json.loads((tmp_path / "f" / "report.json").read_text())["bound_check"]["passed"] is False


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "estimate" in capsys.readouterr().out
