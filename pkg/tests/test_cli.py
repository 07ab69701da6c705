import json

import numpy as np
import pytest

from conformal_spectra.cli import main
from conformal_spectra.io import read_field


def _summary(out):
    return json.loads((out / "summary.json").read_text())


def test_spectrum(tmp_path):
    out = tmp_path / "s"
    rc = main(["spectrum", "--shape", "icosphere", "--refine", "0", "--count", "5", "--dump-matrices",
               "--out", str(out)])
    assert rc == 0
    s = _summary(out)
    assert s["subcommand"] == "spectrum" and s["mesh"]["n_vertices"] == 642
    assert (out / "stiffness.mtx").exists() and (out / "mass.mtx").exists()
    assert read_field(out / "eigvec_1.field", 642).shape == (642,)


def test_outputs_are_byte_identical(tmp_path):
    args = ["subgrad", "--shape", "icosphere", "--refine", "0", "--perturb", "0.3", "--seed", "3"]
    out = tmp_path / "a"
    assert main(args + ["--out", str(out)]) == 0
    first = {name: (out / name).read_bytes() for name in ("summary.json", "tau.field")}
    assert main(args + ["--out", str(out)]) == 0
    for name, data in first.items():
        assert (out / name).read_bytes() == data


def test_subgrad_round_sphere(tmp_path):
    assert main(["subgrad", "--out", str(tmp_path)]) == 0
    r = _summary(tmp_path)["result"]
    assert r["critical"] is True and r["n_candidates"] > 1


def test_flow_with_infinite_threshold(tmp_path):
    rc = main(["flow", "--perturb", "0.3", "--ps-eps", "inf", "--no-svg", "--out", str(tmp_path)])
    assert rc == 0
    r = _summary(tmp_path)["result"]
    assert r["status"] == "converged" and r["steps"] == 0
    assert (tmp_path / "trace.csv").exists() and not (tmp_path / "energy.svg").exists()


def test_short_flow_writes_artifacts(tmp_path):
    rc = main(["flow", "--shape", "unit_disk", "--refine", "0", "--kind", "steklov", "--perturb", "0.3",
               "--max-steps", "3", "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "factor_final.field").exists()
    assert list(tmp_path.glob("*.svg"))


def test_diagnose(tmp_path):
    assert main(["diagnose", "--out", str(tmp_path)]) == 0
    r = _summary(tmp_path)["result"]
    assert r["sphere_map"]["delta"] < 0.01
    assert r["energy_identity"]["gap"] < 1e-10
    assert r["bad_points"]["bound_respected"]


def test_factor_file(tmp_path):
    f = tmp_path / "f.field"
    f.write_text("\n".join(["1.0"] * 642) + "\n")
    assert main(["spectrum", "--factor", str(f), "--count", "3", "--out", str(tmp_path / "o")]) == 0


@pytest.mark.parametrize("argv,code", [
    (["spectrum", "--mesh", "/nonexistent.off"], 3),
    (["spectrum", "--kind", "steklov"], 1),
    (["bogus"], 1),
    (["flow", "--indices", "x"], 1),
    (["spectrum", "--config", "/nonexistent.ini"], 3),
])
def test_exit_codes(tmp_path, argv, code, capsys):
    assert main(argv + ["--out", str(tmp_path)] if argv != ["bogus"] else argv) == code


def test_bad_factor_file(tmp_path):
    f = tmp_path / "f.field"
    f.write_text("1.0\n2.0\n")
    assert main(["spectrum", "--factor", str(f), "--out", str(tmp_path)]) == 3


def _ini(tmp_path, text):
    path = tmp_path / "run.ini"
    path.write_text(text)
    return str(path)


def test_minmax_runs(tmp_path):
    cfg = _ini(tmp_path, "[mesh]\nsize = 2\n[minmax]\nnodes = 4\nmax_sweeps = 2\nend_perturb = 0.2\ncheck_endpoints = false\n[output]\nsvg = false\n")
    assert main(["minmax", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    r = _summary(tmp_path / "o")["result"]
    assert len(r["node_status"]) == 2
    assert r["c_estimate"] <= r["level_history"][0]
    assert (tmp_path / "o" / "trace.csv").exists()


def test_minmax_rejects_non_critical_endpoint(tmp_path):
    cfg = _ini(tmp_path, "[mesh]\nsize = 2\n[minmax]\nend_perturb = 2.0\n")
    assert main(["minmax", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_bundled_sphere_config(tmp_path):
    from conformal_spectra import data_path

    assert main(["spectrum", "--config", str(data_path("sphere_spectrum.ini")), "--out", str(tmp_path)]) == 0
    values = _summary(tmp_path)["result"]["values"]
    assert np.allclose(values[1:4], 2.0, rtol=0.01)


def test_missing_mesh_message(tmp_path, capsys):
    assert main(["spectrum", "--mesh", str(tmp_path / "gone.off"), "--out", str(tmp_path)]) == 3
    assert "gone.off" in capsys.readouterr().err
