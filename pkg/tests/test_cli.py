import json
import os

import pytest

from sharpfronts.cli import EXIT_IO, EXIT_OK, EXIT_PRECONDITION, main


def _run(tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, out


def _summary(out):
    with open(out / "summary.json", encoding="utf-8") as fh:
        return json.load(fh)


def test_solve_writes_csv_and_sidecar(tmp_path):
    code, out = _run(tmp_path, "solve", "--model", "aronson.json", "--c", "1.0")
    assert code == EXIT_OK
    assert (out / "z.csv").exists() and (out / "z.meta.json").exists()
    lines = (out / "z.csv").read_text().splitlines()
    assert lines[0] == "phi,z"
    meta = json.loads((out / "z.meta.json").read_text())
    assert {"c", "ell", "zdot_at_top", "z0", "residual_sup", "seed_offset"} <= set(meta)


def test_negative_diffusivity_names_witness(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({
        "rho_bar": 1.0,
        "diffusivity": {"family": "linear", "params": {"a": 0.5, "b": -1.0}},
        "source": {"family": "power-at-top", "params": {"K": 1.0, "alpha": 1.0}},
        "tags": ["D", "g"],
    }))
    code, _ = _run(tmp_path, "solve", "--model", str(bad), "--c", "0")
    assert code == EXIT_PRECONDITION
    err = capsys.readouterr().err
    assert "rho=" in err and "D" in err


def test_eps_top_recorded(tmp_path):
    code, out = _run(tmp_path, "solve", "--model", "powers21", "--c", "0", "--eps-top", "1e-4")
    assert code == EXIT_OK
    assert json.loads((out / "z.meta.json").read_text())["seed_offset"] == pytest.approx(1e-4)


def test_classify_sharp_slope(tmp_path):
    code, out = _run(tmp_path, "classify", "--model", "powers21.json", "--c", "0")
    assert code == EXIT_OK
    cl = _summary(out)["classification"]
    assert cl["kind"] == "sharp"
    assert cl["front_slope"] == pytest.approx(-0.70711, abs=1e-5)


def test_cstar_matches_exact_wave(tmp_path):
    # D = 2 rho, g = rho (1 - rho) carries the exact wave phi = 1 - exp(xi/2)/2 at c = 1
    code, out = _run(tmp_path, "cstar", "--model", "aronson.json", "--lo", "0", "--hi", "2", "--tol", "1e-4")
    assert code == EXIT_OK
    s = _summary(out)
    assert s["c_star"] == pytest.approx(1.0, abs=2e-4)
    assert (out / "cstar.csv").exists()


def test_paste_range_and_seed(tmp_path):
    code, out = _run(tmp_path, "paste", "--model", "signchange.json", "--c", "0", "--pattern", "phi1", "--seed", "5")
    assert code == EXIT_OK
    s = _summary(out)
    assert s["paste"]["range"] == [0.0, 1.0]
    assert s["seed"] == 5 and s["paste"]["seed"] == 5
    assert s["paste"]["weak_residual_max"] <= 1e-5


def test_reruns_are_byte_identical(tmp_path):
    args = ("profile", "--model", "powers21", "--c", "0.2")
    _run(tmp_path, *args, name="a")
    _run(tmp_path, *args, name="b")
    for f in ("profile.csv", "profile.meta.json", "summary.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_unwritable_output_is_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code = main(["solve", "--model", "aronson", "--c", "1.0", "--out", os.path.join(blocker, "sub")])
    assert code == EXIT_IO


def test_missing_model_file_is_io_error(tmp_path):
    code, _ = _run(tmp_path, "solve", "--model", str(tmp_path / "nope.json"), "--c", "1.0")
    assert code == EXIT_IO


def test_sweep(tmp_path):
    code, out = _run(tmp_path, "sweep", "--model", "powers21", "--c-list=-0.1,0.1")
    assert code == EXIT_OK
    kinds = [r["kind"] for r in _summary(out)["runs"]]
    assert kinds == ["sharp", "classical"]
    assert sum(1 for p in out.iterdir() if p.name.startswith("c=")) == 2


def test_evolve_short_run(tmp_path):
    code, out = _run(tmp_path, "evolve", "--model", "powers21", "--c", "0", "--T", "0.1", "--dt", "0.05",
                     "--dx", "0.0078125", "--frames", "2")
    assert code == EXIT_OK
    s = _summary(out)
    assert s["sup_drift"] < 0.1
    assert (out / "trajectory.csv").read_text().startswith("t,x,rho\n")
