import json

import pytest

from mintool.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr()


def test_verify_identities(capsys):
    code, out = run(capsys, "verify", "identities", "--samples", "2000")
    rep = json.loads(out.out)
    assert code == 0
    assert rep["schema_version"] == 1 and rep["seed"] == 0
    assert rep["violated"] is False


def test_verify_main_example(capsys):
    code, out = run(capsys, "verify", "main", "--k", "5", "--n", "2", "--samples", "20000", "--seed", "7")
    rep = json.loads(out.out)
    assert code == 0 and rep["seed"] == 7
    assert rep["report"]["min_gap"] >= -1e-9


def test_verify_lh_with_radius(capsys):
    code, out = run(capsys, "verify", "lh", "--R", "2", "--samples", "5000")
    assert code == 0
    assert json.loads(out.out)["report"]["min_gap"] > 0


def test_unknown_suite_is_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["verify", "nonsense"])
    assert info.value.code == 2


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"name": "bprops", "samples": 1000, "seed": 3}))
    code, out = run(capsys, "verify", "bprops", "--config", str(cfg))
    assert code == 0 and json.loads(out.out)["seed"] == 3
    cfg.write_text(json.dumps({"name": "bprops", "colour": "red"}))
    assert main(["verify", "bprops", "--config", str(cfg)]) == 2
    cfg.write_text(json.dumps({"name": "main"}))
    assert main(["verify", "bprops", "--config", str(cfg)]) == 2


def test_constants(capsys):
    code, out = run(capsys, "constants", "delta", "--k", "1.4142")
    assert code == 0 and json.loads(out.out)["value"] == pytest.approx(0.9)
    code, out = run(capsys, "constants", "mu", "--R", "1", "--samples", "5000")
    assert code == 0 and json.loads(out.out)["estimate"]["value"] > 0
    code, out = run(capsys, "constants", "tau", "--R", "0.5", "--samples", "5000")
    assert code == 0 and 0.5 < json.loads(out.out)["value"] <= 1.0


def test_constants_usage_errors(capsys):
    assert main(["constants", "delta"]) == 2
    assert main(["constants", "delta", "--k", "1.0"]) == 2


def test_solve_affine_writes_fields(tmp_path, capsys):
    code, out = run(capsys, "solve", "--boundary", "affine", "--nx", "15", "--out", str(tmp_path))
    rep = json.loads(out.out)
    assert code == 0
    assert rep["solve"]["el_residual_norm"] <= 1e-10
    for name in ("u.json", "u.bin", "v.json", "w.json", "solve.json"):
        assert (tmp_path / name).exists()


def test_solve_from_field_file(tmp_path, capsys):
    assert main(["solve", "--boundary", "holomorphic-phi", "--nx", "11", "--out", str(tmp_path / "a"),
                 "--format", "csv"]) == 0
    capsys.readouterr()
    code, out = run(capsys, "solve", "--boundary", str(tmp_path / "a" / "u.json"))
    assert code == 0 and json.loads(out.out)["grid"]["nx"] == 11


def test_solve_bad_boundary(capsys):
    assert main(["solve", "--boundary", "no-such-thing"]) == 2


def test_solve_divergence_exit_code(capsys):
    code, _ = run(capsys, "solve", "--boundary", "sine-bump", "--nx", "15", "--method", "descent", "--max-iter", "2")
    assert code == 1


def test_laminate_command(tmp_path, capsys):
    code, out = run(capsys, "laminate", "--t", "0.5", "--eps", "0.1", "--out", str(tmp_path))
    rep = json.loads(out.out)
    assert code == 0
    assert rep["audit"]["fraction_B"] >= 0.45 and rep["audit"]["fraction_C"] >= 0.45
    assert (tmp_path / "map.svg").read_text().startswith("<svg")
    assert (tmp_path / "map.json").exists()


def test_laminate_infeasible_and_bad_pair(capsys):
    code, out = run(capsys, "laminate", "--eps", "1e-4")
    assert code == 1 and json.loads(out.out)["minimal_epsilon"] > 1e-4
    assert main(["laminate", "--B", "[[1,0],[0,1]]", "--C", "[[0,0],[0,0]]"]) == 2
    assert main(["laminate", "--B", "not json"]) == 2


def test_laminate_h1h2(capsys):
    code, out = run(capsys, "laminate", "--h1h2")
    assert code == 0 and json.loads(out.out)["audit"]["distinct_gradients"] == 2


def test_compactness_command(tmp_path, capsys):
    code, out = run(capsys, "compactness", "--levels", "3", "--out", str(tmp_path))
    assert code == 0
    assert json.loads(out.out)["report"]["monotone"] is True
    assert (tmp_path / "compactness.csv").read_text().startswith("level,mesh")
    assert main(["compactness", "--levels", "1"]) == 2


def test_report_command(tmp_path, capsys):
    code, out = run(capsys, "report", "--samples", "1000", "--out", str(tmp_path))
    assert code == 0
    assert set(json.loads(out.out)["suites"]) >= {"identities", "bounds", "bprops", "main", "reg", "lh", "algebra"}
    assert (tmp_path / "report.csv").exists()


@pytest.mark.parametrize("argv", [
    ("verify", "bounds", "--samples", "2000", "--seed", "11"),
    ("constants", "lambda", "--R", "1", "--samples", "2000", "--seed", "4"),
    ("solve", "--boundary", "scherk", "--nx", "15"),
])
def test_byte_identical_reruns(capsys, argv):
    main(list(argv))
    first = capsys.readouterr().out
    main(list(argv))
    assert capsys.readouterr().out == first
