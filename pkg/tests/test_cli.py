"""End-to-end tests for the command-line interface (in-process)."""

import hashlib
import json
import subprocess

import numpy as np
import pytest

from mimofb import (
    current_correlation,
    current_correlation_measurement_only,
    full_liouvillian,
    heterodyne_model,
    homodyne_model,
    save_model,
    save_state,
    steady_state,
)
from mimofb.cli import main, resolve_observables
from mimofb.errors import ParseError

from modelzoo import EXCITED, SM, SX, SY, SZ


@pytest.fixture
def homodyne_file(tmp_path):
    model = homodyne_model(SM, 0.3 * SY, eta=0.8)
    path = tmp_path / "model.toml"
    save_model(model, path)
    return path


@pytest.fixture
def heterodyne_file(tmp_path):
    model = heterodyne_model(SM, 0.3 * SX, 0.2 * SZ, eta=0.7, hamiltonian=0.4 * SX)
    path = tmp_path / "het.toml"
    save_model(model, path)
    return path


def read_csv(path):
    """Header comment lines, column names, and float rows ('nan' included)."""
    comments, columns, rows = [], None, []
    for line in path.read_text().splitlines():
        if line.startswith("#"):
            comments.append(line)
        elif columns is None:
            columns = line.split(",")
        else:
            rows.append([float(tok) for tok in line.split(",")])
    return comments, columns, rows


class TestValidate:
    def test_ok(self, homodyne_file, capsys):
        assert main(["validate", "--model", str(homodyne_file)]) == 0
        out = capsys.readouterr().out
        assert "dim = 2" in out
        assert "validation: OK" in out
        eta_line = next(l for l in out.splitlines() if l.startswith("efficiencies"))
        eta = float(eta_line.split("[")[1].rstrip("]"))
        assert abs(eta - 0.8) <= 1e-12

    def test_report_and_manifest(self, homodyne_file, tmp_path):
        outdir = tmp_path / "report"
        assert main(["validate", "--model", str(homodyne_file),
                     "--out", str(outdir)]) == 0
        assert (outdir / "validate.txt").exists()
        manifest = json.loads((outdir / "manifest.json").read_text())
        assert manifest["command"] == "validate"
        want = hashlib.sha256(homodyne_file.read_bytes()).hexdigest()
        assert manifest["model_sha256"] == want
        assert manifest["outputs"] == ["validate.txt"]

    def test_non_hermitian_h1_fails_validation(self, tmp_path, capsys):
        path = tmp_path / "bad.toml"
        path.write_text("""
[system]
dim = 2
H1 = [[[0.0, 0.0], [1.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]
""")
        assert main(["validate", "--model", str(path)]) == 1
        assert "system.H1" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["validate", "--model", str(tmp_path / "nope.toml")]) == 3
        assert "error" in capsys.readouterr().err

    def test_invalid_toml(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[system\n")
        assert main(["validate", "--model", str(path)]) == 3

    def test_hbar_override_can_break_efficiency(self, tmp_path, capsys):
        # M = sqrt(0.8) stored with hbar = 1; forcing hbar = 0.5 makes eta = 1.6
        model = homodyne_model(SM, 0.3 * SY, eta=0.8)
        path = tmp_path / "m.toml"
        save_model(model, path)
        assert main(["validate", "--model", str(path), "--hbar", "0.5"]) == 1
        assert "efficienc" in capsys.readouterr().err.lower()

    def test_hbar_override_consistent_value(self, tmp_path, capsys):
        model = homodyne_model(SM, 0.3 * SY, eta=0.8, hbar=2.0)
        path = tmp_path / "m.toml"
        save_model(model, path)
        # lowering hbar to 1.6 keeps eta = 0.8 * 2.0 / 1.6 = 1.0 legal
        assert main(["validate", "--model", str(path), "--hbar", "1.6"]) == 0
        assert "1.0" in capsys.readouterr().out


class TestLindbladCheck:
    def test_ok(self, heterodyne_file, capsys):
        assert main(["lindblad-check", "--model", str(heterodyne_file)]) == 0
        assert "OK" in capsys.readouterr().out

    def test_tolerance_failure(self, heterodyne_file, capsys):
        # this model's two generator constructions differ at roundoff level,
        # which an absurdly small tolerance must flag
        assert main(["lindblad-check", "--model", str(heterodyne_file),
                     "--tol", "1e-20"]) == 2
        assert "FAILED" in capsys.readouterr().out


class TestEvolve:
    def test_decay_of_excited_state(self, homodyne_file, tmp_path):
        rho0 = tmp_path / "rho0.toml"
        save_state(EXCITED, rho0)
        outdir = tmp_path / "evolve"
        assert main(["evolve", "--model", str(homodyne_file),
                     "--rho0", str(rho0), "--out", str(outdir),
                     "--t-final", "1.0", "--dt", "0.25",
                     "--observables", "n"]) == 0
        _, columns, rows = read_csv(outdir / "evolve.csv")
        assert columns == ["t", "n"]
        assert len(rows) == 5
        # the closed loop here still relaxes; against the library generator
        import scipy.linalg
        from mimofb import load_model
        gen = full_liouvillian(load_model(homodyne_file))
        prop = scipy.linalg.expm(gen.matrix * 1.0)
        rho1 = np.reshape(prop @ EXCITED.flatten(order="F"), (2, 2), order="F")
        assert abs(rows[-1][1] - rho1[1, 1].real) <= 1e-9

    def test_times_list_and_state_dump(self, homodyne_file, tmp_path):
        outdir = tmp_path / "evolve"
        assert main(["evolve", "--model", str(homodyne_file),
                     "--out", str(outdir), "--times", "0.0,0.5"]) == 0
        _, columns, rows = read_csv(outdir / "evolve.csv")
        assert columns[:3] == ["t", "re_0_0", "im_0_0"]
        assert len(rows) == 2
        assert rows[0][0] == 0.0 and rows[1][0] == 0.5
        # initial state defaults to the first basis state
        assert rows[0][1] == 1.0

    def test_out_required(self, homodyne_file, capsys):
        assert main(["evolve", "--model", str(homodyne_file)]) == 3
        assert "--out" in capsys.readouterr().err


class TestSme:
    def test_files_and_determinism(self, homodyne_file, tmp_path):
        args = ["sme", "--model", str(homodyne_file), "--t-final", "0.02",
                "--dt", "1e-3", "--n-traj", "3", "--seed", "5",
                "--observables", "sz"]
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        names = sorted(p.name for p in out1.iterdir())
        assert names == ["average.csv", "manifest.json", "traj_0000.csv",
                         "traj_0001.csv", "traj_0002.csv"]
        for name in ("traj_0000.csv", "traj_0002.csv", "average.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_csv_layout(self, homodyne_file, tmp_path):
        outdir = tmp_path / "sme"
        assert main(["sme", "--model", str(homodyne_file), "--t-final", "0.02",
                     "--dt", "1e-3", "--n-traj", "2", "--observables", "sz",
                     "--out", str(outdir)]) == 0
        comments, columns, rows = read_csv(outdir / "traj_0000.csv")
        assert columns == ["t", "re_sz", "im_sz", "y_1"]
        assert len(rows) == 21
        assert rows[0][1] == 1.0          # default rho0 is |0><0|, <sz> = +1
        assert all(r[2] == 0.0 for r in rows)
        assert np.isnan(rows[-1][3])      # no current after the last step
        assert not np.isnan(rows[-2][3])

    def test_averaged_only(self, homodyne_file, tmp_path):
        outdir = tmp_path / "sme"
        assert main(["sme", "--model", str(homodyne_file), "--t-final", "0.01",
                     "--dt", "1e-3", "--n-traj", "2", "--averaged-only",
                     "--out", str(outdir)]) == 0
        names = sorted(p.name for p in outdir.iterdir())
        assert names == ["average.csv", "manifest.json"]
        manifest = json.loads((outdir / "manifest.json").read_text())
        assert manifest["outputs"] == ["average.csv"]
        assert manifest["parameters"]["n_traj"] == 2


class TestCorrelate:
    def test_steady_state_values_match_library(self, heterodyne_file, tmp_path):
        outdir = tmp_path / "corr"
        assert main(["correlate", "--model", str(heterodyne_file),
                     "--taus", "0.0,0.3", "--out", str(outdir)]) == 0
        comments, columns, rows = read_csv(outdir / "correlation.csv")
        assert columns == ["tau", "C_1_1", "C_1_2", "C_2_1", "C_2_2"]
        assert any("delta_weight" in c for c in comments)
        model = heterodyne_model(SM, 0.3 * SX, 0.2 * SZ, eta=0.7,
                                 hamiltonian=0.4 * SX)
        rho = steady_state(full_liouvillian(model))
        want = current_correlation(model, rho, [0.0, 0.3])
        got = np.array(rows)[:, 1:].reshape(2, 2, 2)
        assert np.allclose(got, want.values, atol=1e-12)

    def test_no_feedback_and_state_file(self, heterodyne_file, tmp_path):
        rho = np.diag([0.25, 0.75]).astype(complex)
        rho_path = tmp_path / "rho.toml"
        save_state(rho, rho_path)
        outdir = tmp_path / "corr"
        assert main(["correlate", "--model", str(heterodyne_file),
                     "--rho", str(rho_path), "--taus", "0.2",
                     "--no-feedback", "--out", str(outdir)]) == 0
        _, _, rows = read_csv(outdir / "correlation.csv")
        model = heterodyne_model(SM, 0.3 * SX, 0.2 * SZ, eta=0.7,
                                 hamiltonian=0.4 * SX)
        want = current_correlation_measurement_only(model, rho, [0.2])
        got = np.array(rows)[0, 1:].reshape(2, 2)
        assert np.allclose(got, want.values[0], atol=1e-12)

    def test_degenerate_steady_state_fails(self, tmp_path, capsys):
        model = homodyne_model(SZ, np.zeros((2, 2)), eta=1.0)
        path = tmp_path / "qnd.toml"
        save_model(model, path)
        assert main(["correlate", "--model", str(path),
                     "--out", str(tmp_path / "c")]) == 1
        assert "null space" in capsys.readouterr().err


class TestObservables:
    def test_registry(self):
        named = resolve_observables("sx,sz,n", 2)
        assert [n for n, _ in named] == ["sx", "sz", "n"]
        assert np.array_equal(named[2][1], np.diag([0.0, 1.0]))

    def test_pauli_needs_dim_2(self):
        with pytest.raises(ParseError, match="dimension-2"):
            resolve_observables("sy", 3)

    def test_number_operator_any_dim(self):
        named = resolve_observables("n", 4)
        assert np.array_equal(named[0][1], np.diag([0.0, 1.0, 2.0, 3.0]))

    def test_unknown_token_treated_as_missing_file(self, homodyne_file, tmp_path, capsys):
        outdir = tmp_path / "evolve"
        assert main(["evolve", "--model", str(homodyne_file),
                     "--out", str(outdir), "--observables", "bogus"]) == 3


def test_console_script_smoke():
    proc = subprocess.run(["mimofb", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "mimofb" in proc.stdout
