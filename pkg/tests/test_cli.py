import json

import pytest

from nsocp import cli
from nsocp import corpus as cp


def write_problem(tmp_path, name, extra=None):
    doc = dict(cp.fixture_doc(name))
    doc.pop("note", None)
    if extra:
        doc.update(extra)
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def read_jsonl(path):
    with open(path, "r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def test_solve_halfline_auglag_exit_zero(tmp_path, capsys):
    problem = write_problem(tmp_path, "halfline-min")
    out = str(tmp_path / "run.jsonl")
    code = cli.main(["solve", "--problem", problem, "--method", "auglag",
                     "--x0", "5", "--out", out])
    assert code == 0
    lines = read_jsonl(out)
    assert lines[0]["record"] == "header"
    assert lines[0]["config"]["method"] == "auglag"
    assert lines[-1]["record"] == "footer"
    assert lines[-1]["status"] == "kkt"
    iterates = [l for l in lines if l["record"] == "iterate"]
    final = iterates[-1]["residuals"]
    assert max(final["stationarity"], final["feasibility"], final["complementarity"]) <= 1e-6


def test_solve_erratum_penalty_reports_divergence(tmp_path, capsys):
    problem = write_problem(tmp_path, "zz-erratum")
    out = str(tmp_path / "run.jsonl")
    code = cli.main(["solve", "--problem", problem, "--method", "penalty",
                     "--x0", "1", "--out", out,
                     "--config", "rho_growth=12", "--config", "max_outer=40"])
    assert code in (2, 3)
    err = capsys.readouterr().err
    assert "multiplier" in err


def test_solve_malformed_json_exit_one(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(SystemExit) as info:
        cli.main(["solve", "--problem", str(bad), "--method", "penalty"])
    assert info.value.code is not None and "error" in str(info.value.code)


def test_solve_bad_config_key(tmp_path):
    problem = write_problem(tmp_path, "halfline-min")
    with pytest.raises(SystemExit):
        cli.main(["solve", "--problem", problem, "--config", "bogus=1"])


def test_cq_command_matches_expected(tmp_path, capsys):
    problem = write_problem(tmp_path, "ex32")
    out = str(tmp_path / "verdicts.jsonl")
    code = cli.main(["cq", "--problem", problem, "--at", "0,0",
                     "--which", "ndg,weak-ndg", "--out", out])
    assert code == 0
    lines = read_jsonl(out)
    verdicts = {l["check"]: l["status"] for l in lines if l["record"] == "verdict"}
    assert verdicts == {"ndg": "VIOLATED", "weak-ndg": "HOLDS"}
    printed = capsys.readouterr().out
    assert "ndg: VIOLATED" in printed


def test_cq_command_sequential_conditions(tmp_path):
    problem = write_problem(tmp_path, "ex51")
    out = str(tmp_path / "v.jsonl")
    code = cli.main(["cq", "--problem", problem, "--at", "0",
                     "--which", "seq-crcq,seq-cpld,ndg,robinson", "--out", out])
    assert code == 0
    verdicts = {l["check"]: l["status"] for l in read_jsonl(out) if l["record"] == "verdict"}
    assert verdicts == {
        "seq-crcq": "HOLDS",
        "seq-cpld": "HOLDS",
        "ndg": "VIOLATED",
        "robinson": "VIOLATED",
    }


def test_cq_mismatch_sets_exit_four(tmp_path):
    problem = write_problem(tmp_path, "ex32", extra={"expected": {"ndg": True}})
    code = cli.main(["cq", "--problem", problem, "--at", "0,0", "--which", "ndg"])
    assert code == 4


def test_cq_infeasible_point_exit_one(tmp_path, capsys):
    problem = write_problem(tmp_path, "halfline-min")
    code = cli.main(["cq", "--problem", problem, "--at", "-2", "--which", "ndg"])
    assert code == 1
    assert "infeasible" in capsys.readouterr().err


def test_cq_replay_is_bitwise_deterministic(tmp_path):
    problem = write_problem(tmp_path, "ex42")
    out1 = str(tmp_path / "a.jsonl")
    out2 = str(tmp_path / "b.jsonl")
    argv = ["cq", "--problem", problem, "--at", "0,0", "--seed", "7"]
    assert cli.main(argv + ["--out", out1]) == 0
    assert cli.main(argv + ["--out", out2]) == 0
    a = [l for l in open(out1).read().splitlines() if '"verdict"' in l]
    b = [l for l in open(out2).read().splitlines() if '"verdict"' in l]
    assert a == b


def test_seed_env_override(tmp_path, monkeypatch):
    problem = write_problem(tmp_path, "ex42")
    out = str(tmp_path / "c.jsonl")
    monkeypatch.setenv("NSOCP_SEED", "99")
    assert cli.main(["cq", "--problem", problem, "--at", "0,0",
                     "--which", "ndg", "--seed", "3", "--out", out]) == 0
    header = read_jsonl(out)[0]
    assert header["seed"] == 99


def test_corpus_list_names(capsys):
    assert cli.main(["corpus", "list"]) == 0
    out = capsys.readouterr().out
    for name in ("ex31-padded", "ex32", "ex33", "zz-erratum", "ex41",
                 "ex42", "ex51", "ex52", "halfline-min"):
        assert name in out
    assert len([l for l in out.splitlines() if l.strip()]) >= 9


def test_corpus_run_filtered(capsys):
    assert cli.main(["corpus", "run", "--filter", "ex52", "--skip-smoke"]) == 0
    out = capsys.readouterr().out
    assert "ex52" in out
    assert "ex42" not in out
    assert "0 mismatches" in out


def test_float_rendering_has_17_digits():
    text = cli.dumps_line({"v": 0.1 + 0.2})
    assert "0.30000000000000004" in text
    assert cli.dumps_line({"v": 1.0}) == '{"v": 1.0}'
    assert cli.dumps_line({"v": float("inf")}) == '{"v": "inf"}'
