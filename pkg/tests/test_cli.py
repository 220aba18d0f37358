import json

import pytest

from bbmspace import cli


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def step_grid(tmp_path, capsys):
    path = tmp_path / "step.grid"
    code, _, _ = run(capsys, "gen", "--kind", "step", "--d", 1, "--n", 16, "--out", path)
    assert code == 0
    return path


def test_norm_prints_json(capsys, step_grid):
    code, out, _ = run(capsys, "norm", "--input", step_grid, "--mode", "bnb", "--s", 2)
    doc = json.loads(out)
    assert code == 0
    assert doc["b_norm"] == 0.5 and doc["witness_epsilon"] == 1.0
    assert doc["config"]["mode"] == "bnb"


def test_curve_writes_csv(tmp_path, capsys, step_grid):
    out_csv = tmp_path / "curve.csv"
    code, _, _ = run(capsys, "curve", "--input", step_grid, "--out", out_csv,
                     "--witness-out", tmp_path / "w.json")
    lines = out_csv.read_text().splitlines()
    assert code == 0 and lines[0].startswith("# config=")
    assert lines[1] == "epsilon,value,k,witness_anchor_list,exact"
    assert len(lines) == 2 + 16


def test_distance_report(tmp_path, capsys, step_grid):
    code, out, _ = run(capsys, "distance", "--input", step_grid, "--eps-cut", "0.25",
                       "--t", "0.125,0.0625")
    doc = json.loads(out)
    assert code == 0
    assert doc["tail_lower"] == 0.5 and doc["t_grid"] == [0.125, 0.0625]


def test_strict_flags_inconsistency(capsys, step_grid):
    # at n=16 the smallest t is under-resolved and the sandwich flag trips
    code, out, _ = run(capsys, "--strict", "distance", "--input", step_grid, "--t", "1/16")
    assert json.loads(out)["inconsistent"]
    assert code == 3
    code, _, _ = run(capsys, "distance", "--input", step_grid, "--t", "1/16")
    assert code == 0


def test_other_commands(tmp_path, capsys, step_grid):
    assert json.loads(run(capsys, "bmo", "--input", step_grid)[1])["bmo_norm"] == 0.5
    doc = json.loads(run(capsys, "bv-compare", "--input", step_grid)[1])
    assert doc["discrete_tv"] == 1.0
    doc = json.loads(run(capsys, "oracle-check", "--input", step_grid, "--eps", "1/2",
                         "--s", 1, "--mode", "exact")[1])
    assert doc["match"]
    code, out, _ = run(capsys, "mollify", "--input", step_grid, "--t", "1/8",
                       "--out", tmp_path / "m.grid")
    assert code == 0 and (tmp_path / "m.grid").exists()


def test_atoms_commands(tmp_path, capsys, rng):
    from bbmspace import formats
    from helpers import random_atom
    a = random_atom(rng, 2, 8)
    formats.write_atom(tmp_path / "a.json", a)
    formats.write_functional(tmp_path / "phi.json",
                             __import__("bbmspace.atoms").atoms.AtomicFunctional(((1.5, a),)),
                             [tmp_path / "a.json"])
    run(capsys, "gen", "--kind", "random", "--d", 2, "--n", 8, "--out", tmp_path / "f.grid")
    code, out, _ = run(capsys, "--strict", "atom-validate", "--atom", tmp_path / "a.json")
    assert code == 0 and json.loads(out)["valid"]
    code, out, _ = run(capsys, "atom-pair", "--input", tmp_path / "f.grid", "--atom", tmp_path / "a.json")
    assert code == 0 and json.loads(out)["bound_holds"]
    code, out, _ = run(capsys, "atom-pair", "--input", tmp_path / "f.grid",
                       "--functional", tmp_path / "phi.json")
    doc = json.loads(out)
    assert doc["bound_holds"] and doc["l1"] == 1.5


def test_config_precedence(tmp_path, capsys, step_grid):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"mode": "greedy", "s": 4}))
    doc = json.loads(run(capsys, "norm", "--input", step_grid, "--config", cfg, "--s", 1)[1])
    assert doc["config"]["mode"] == "greedy" and doc["config"]["s"] == 1


def test_bad_config(tmp_path, capsys, step_grid):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"colour": "red"}))
    code, _, err = run(capsys, "norm", "--input", step_grid, "--config", cfg)
    assert code == 2 and "colour" in err
    cfg.write_text(json.dumps({"s": "two"}))
    assert run(capsys, "norm", "--input", step_grid, "--config", cfg)[0] == 2


def test_usage_errors_are_json(capsys):
    code, _, err = run(capsys, "--json-errors", "gen", "--kind", "nope", "--out", "x")
    assert code == 2
    assert json.loads(err)["error"] == "usage"
    code, _, err = run(capsys, "norm")
    assert code == 2 and "--input" in err


def test_input_errors_exit_2(tmp_path, capsys, step_grid):
    code, _, err = run(capsys, "--json-errors", "norm", "--input", tmp_path / "missing.grid")
    assert code == 2 and json.loads(err)["error"] == "input"
    code, _, _ = run(capsys, "oracle-check", "--input", step_grid, "--eps", "1/16", "--limit", 4)
    assert code == 2


def test_outputs_byte_identical_across_threads(tmp_path, capsys):
    grid = tmp_path / "r.grid"
    run(capsys, "gen", "--kind", "random", "--d", 2, "--n", 12, "--seed", 5, "--out", grid)
    outs = []
    for threads in (1, 4):
        path = tmp_path / f"c{threads}.csv"
        run(capsys, "--threads", threads, "curve", "--input", grid, "--out", path)
        outs.append(path.read_text().split("\n", 1)[1])
    assert outs[0] == outs[1]


def test_gen_is_reproducible(tmp_path, capsys):
    for name in ("a", "b"):
        run(capsys, "gen", "--kind", "random", "--seed", 9, "--param", "blocks=4",
            "--out", tmp_path / f"{name}.grid")
    a = json.loads((tmp_path / "a.grid").read_text())
    b = json.loads((tmp_path / "b.grid").read_text())
    assert a["values"] == b["values"]
