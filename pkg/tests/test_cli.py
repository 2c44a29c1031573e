import json
import math
import subprocess
import sys

import pytest

from bnmap.cli import main
from bnmap.network import serialize_network


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out else None), err


@pytest.fixture
def chain_file(tmp_path, chain):
    path = tmp_path / "chain.bn"
    path.write_text(serialize_network(chain))
    return path


def test_exact_pe(capsys, chain_file):
    code, out, _ = run(capsys, "exact", "pe", "--network", chain_file, "--evidence", "B=1")
    assert code == 0
    rec = out["records"][0]
    assert rec["probability"] == pytest.approx(0.52, abs=1e-15)
    assert rec["width"] == 1


def test_exact_mpe_and_map(capsys, chain_file):
    _, out, _ = run(capsys, "exact", "mpe", "--network", chain_file)
    assert out["records"][0]["assignment"] == {"A": "0", "B": "0"}
    _, out, _ = run(capsys, "exact", "map", "--network", chain_file, "--map", "B")
    assert out["records"][0]["assignment"] == {"B": "1"}


def test_solve(capsys, chain_file):
    code, out, _ = run(capsys, "solve", "--network", chain_file, "--map", "B", "--init", "mpe",
                       "--pf", "0", "--iters", "5", "--verify", "--trace")
    assert code == 0
    rec = out["records"][0]
    assert rec["best"] == {"B": "1"}
    assert rec["exact_log_probability"] == pytest.approx(math.log(0.52))
    assert len(rec["trace"]) == 5
    assert "wall_time" not in rec


def test_solve_needs_map(capsys, chain_file):
    code, _, err = run(capsys, "solve", "--network", chain_file)
    assert code == 2 and "MAP" in err


def test_marginals(capsys, chain_file):
    _, out, _ = run(capsys, "marginals", "--network", chain_file, "--evidence", "B=1", "--retracted")
    b = out["records"][0]["variables"]["B"]
    assert b["retracted"]["1"] == pytest.approx(0.52)
    assert b["marginal"]["1"] == pytest.approx(1.0)


def test_generate_and_solve_maxsat(capsys, tmp_path):
    prefix = tmp_path / "ms"
    code, out, _ = run(capsys, "generate", "maxsat", "--vars", 5, "--clauses", 7, "--seed", 2, "--out", prefix)
    assert code == 0
    assert (tmp_path / "ms.bn").exists() and (tmp_path / "ms.problem").exists() and (tmp_path / "ms.cnf").exists()
    code, out, _ = run(capsys, "width", "--network", tmp_path / "ms.bn", "--problem", tmp_path / "ms.problem")
    rec = out["records"][0]
    assert rec["constrained_width"] >= 5 and rec["unconstrained_width"] <= 3
    assert rec["reorder_check"]["widths_equal"]


def test_emajsat_threshold(capsys, tmp_path):
    prefix = tmp_path / "gates"
    run(capsys, "generate", "emajsat", "--formula", "(and (not (or x1 x2)) (not x3))", "--k", 1, "--out", prefix)
    _, out, _ = run(capsys, "exact", "map", "--network", tmp_path / "gates.bn", "--problem", tmp_path / "gates.problem")
    rec = out["records"][0]
    assert rec["assignment"] == {"x1": "F"}
    assert rec["threshold"] == "1/4"
    assert rec["exceeds_threshold"] is False


def test_missing_file_exit_2(capsys, tmp_path):
    code, _, err = run(capsys, "exact", "pe", "--network", tmp_path / "none.bn")
    assert code == 2 and "missing" in err


def test_bad_network_exit_2(capsys, tmp_path):
    path = tmp_path / "bad.bn"
    path.write_text("variable A states f t\ncpt A {\n row : 0.6 0.6\n}\n")
    code, _, err = run(capsys, "exact", "pe", "--network", path)
    assert code == 2 and "line 3" in err


def test_bad_evidence_exit_2(capsys, chain_file):
    code, _, _ = run(capsys, "exact", "pe", "--network", chain_file, "--evidence", "B=7")
    assert code == 2


def test_width_cap_exit_3(capsys, chain_file):
    code, _, err = run(capsys, "exact", "pe", "--network", chain_file, "--width-cap", 0)
    assert code == 3 and "guard" in err


def test_width_cap_env(capsys, chain_file, monkeypatch):
    monkeypatch.setenv("BNMAP_WIDTH_CAP", "0")
    code, _, _ = run(capsys, "exact", "mpe", "--network", chain_file)
    assert code == 3


def test_nonfinite_scores_are_strings(capsys, tmp_path):
    path = tmp_path / "det.bn"
    path.write_text("variable A states f t\ncpt A {\n row : 1 0\n}\n")
    _, out, _ = run(capsys, "exact", "pe", "--network", path, "--evidence", "A=t")
    assert out["records"][0]["log_probability"] == "-inf"
    assert out["records"][0]["probability"] == 0.0


def test_module_entry_point(chain_file):
    proc = subprocess.run([sys.executable, "-m", "bnmap", "exact", "pe", "--network", str(chain_file)],
                          capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout)["command"] == "exact"


def test_solve_matches_brute_force_on_maxsat(capsys, tmp_path):
    from bnmap.exact import brute_force_map, probability_of_evidence
    from bnmap.network import read_network
    from bnmap.problem import parse_problem

    prefix = tmp_path / "t5"
    run(capsys, "generate", "maxsat", "--vars", 4, "--clauses", 6, "--seed", 1, "--out", prefix)
    net = read_network(tmp_path / "t5.bn")
    prob = parse_problem((tmp_path / "t5.problem").read_text(), net)
    x, p = brute_force_map(net, prob.evidence, prob.map_vars)
    _, out, _ = run(capsys, "solve", "--network", tmp_path / "t5.bn", "--problem", tmp_path / "t5.problem",
                    "--init", "ml", "--scorer", "exact", "--pf", 0.3, "--iters", 100, "--seed", 7)
    rec = out["records"][0]
    assert rec["probability"] == pytest.approx(p, rel=1e-12)
    best = {net.index(k): net.state_index(net.index(k), v) for k, v in rec["best"].items()}
    # the reported assignment re-scores to the reported value
    assert probability_of_evidence(net, {**prob.evidence, **best}) == pytest.approx(p, rel=1e-12)


def test_width_with_map_flag(capsys, tmp_path):
    prefix = tmp_path / "t5_n8"
    run(capsys, "generate", "maxsat", "--vars", 8, "--clauses", 8, "--seed", 0, "--out", prefix)
    maps = ",".join(f"X{i}" for i in range(1, 9))
    _, out, _ = run(capsys, "width", "--network", tmp_path / "t5_n8.bn", "--map", maps)
    rec = out["records"][0]
    assert rec["constrained_width"] >= 8 and rec["unconstrained_width"] <= 3


def test_pe_without_evidence_is_one(capsys, tmp_path):
    run(capsys, "generate", "random", "--vars", 10, "--seed", 3, "--out", tmp_path / "r")
    _, out, _ = run(capsys, "exact", "pe", "--network", tmp_path / "r.bn")
    assert out["records"][0]["probability"] == pytest.approx(1.0, abs=1e-12)
