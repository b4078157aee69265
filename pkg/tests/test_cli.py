import json
import time

import numpy as np
import pytest

from edmbranch import cli
from edmbranch.io import read_csv


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def limit_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("limit")
    code = run("solve-limit", "--m", 1, "--e", 0.6, "--n", 2000, "--rmax", 40, "--tol", 1e-8,
               "--out", out)
    return code, out


@pytest.fixture(scope="module")
def branch_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("branch")
    code = run("branch", "--m", 1, "--e", 0.6, "--eps-max", 1e-2, "--steps", 10, "--n", 2000,
               "--out", out)
    return code, out


def test_solve_limit_outputs(limit_run):
    code, out = limit_run
    assert code == 0
    cols = read_csv(out / "limit.csv")
    assert list(cols) == ["r", "phi", "chi", "tau", "zeta"]
    assert len(cols["r"]) == 2000
    man = json.loads((out / "manifest.json").read_text())
    assert man["provenance"]["limit_residual_sup"] < 1e-6
    assert man["grid"]["n"] == 2000


def test_csv_format(limit_run):
    _, out = limit_run
    text = (out / "limit.csv").read_text()
    assert text.endswith("\n")
    header, first = text.splitlines()[:2]
    assert header == "r,phi,chi,tau,zeta"
    for field in first.split(","):
        mantissa = field.lstrip("-").split("e")[0].replace(".", "").lstrip("0")
        assert float(field) == 0 or len(mantissa) <= 17
    vals = read_csv(out / "limit.csv")
    assert np.all(np.isfinite(vals["phi"]))


def test_no_temporary_files_left(limit_run):
    _, out = limit_run
    assert sorted(p.name for p in out.iterdir()) == ["limit.csv", "manifest.json"]


def test_strong_coupling_is_domain_error(tmp_path, capsys):
    assert run("solve-limit", "--m", 1, "--e", 1.0, "--out", tmp_path) == 2
    assert "weak coupling" in capsys.readouterr().err


def test_missing_flag_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("solve-limit", "--e", 0.6, "--out", tmp_path)
    assert exc.value.code == 64


def test_bad_grid_is_usage_error(tmp_path):
    assert run("solve-limit", "--m", 1, "--e", 0.6, "--n", 2, "--out", tmp_path) == 64


def test_branch_outputs(branch_run):
    code, out = branch_run
    assert code == 0
    summary = read_csv(out / "branch.csv")
    assert list(summary) == list(cli.BRANCH_COLUMNS)
    assert len(summary["eps"]) == 11
    assert summary["eps"][-1] == pytest.approx(1e-2)
    assert np.isnan(summary["adm_mass"][0]) and np.all(summary["adm_mass"][1:] > 0)
    phys = read_csv(out / "point_10_physical.csv")
    assert list(phys) == ["R", "Phi1", "Phi2", "A", "T", "V"]
    assert not (out / "point_0_physical.csv").exists()
    man = json.loads((out / "manifest.json").read_text())
    assert man["truncated"] is False
    assert len(man["provenance"]["residual_norms"]) == 11


def test_rerun_bit_identical(branch_run, tmp_path):
    _, out = branch_run
    assert run("rerun", out / "manifest.json", "--out", tmp_path / "again", "--check") == 0
    for f in out.glob("*.csv"):
        assert (tmp_path / "again" / f.name).read_bytes() == f.read_bytes()


def test_rerun_detects_tampering(tmp_path):
    out = tmp_path / "a"
    assert run("branch", "--m", 1, "--e", 0.6, "--eps-max", 0, "--steps", 1, "--n", 200,
               "--out", out) == 0
    man = json.loads((out / "manifest.json").read_text())
    man["outputs"][0]["sha256"] = "0" * 64
    (out / "manifest.json").write_text(json.dumps(man))
    assert run("rerun", out / "manifest.json", "--out", tmp_path / "b", "--check") == 1


def test_unreadable_manifest(tmp_path):
    bad = tmp_path / "m.json"
    bad.write_text("{not json")
    assert run("rerun", bad) == 64


def test_zero_eps_branch(tmp_path):
    assert run("branch", "--m", 1, "--e", 0.6, "--eps-max", 0, "--steps", 5, "--n", 500,
               "--out", tmp_path) == 0
    assert len(read_csv(tmp_path / "branch.csv")["eps"]) == 1


def test_empty_branch_exit_code(tmp_path, monkeypatch):
    import edmbranch.continuation as cont
    from edmbranch.newton import SolverError

    real = cont._correct

    def only_limit(eps, *a, **kw):
        if eps > 0:
            raise SolverError("forced")
        return real(eps, *a, **kw)

    monkeypatch.setattr(cont, "_correct", only_limit)
    code = run("branch", "--m", 1, "--e", 0.6, "--eps-max", 1e-2, "--steps", 2, "--n", 500,
               "--out", tmp_path)
    assert code == 3
    assert json.loads((tmp_path / "manifest.json").read_text())["truncated"] is True


def test_solver_failure_exit_code(tmp_path, monkeypatch):
    import edmbranch.continuation as cont
    from edmbranch.newton import SolverError

    def always(*a, **kw):
        raise SolverError("forced")

    monkeypatch.setattr(cont, "_correct", always)
    assert run("branch", "--m", 1, "--e", 0.6, "--eps-max", 1e-2, "--steps", 2, "--n", 500,
               "--out", tmp_path) == 1


def test_verify_quick(tmp_path, capsys):
    t0 = time.perf_counter()
    code = run("verify", "--quick", "--out", tmp_path)
    assert time.perf_counter() - t0 < 60
    assert code == 0
    report = json.loads((tmp_path / "verify_report.json").read_text())
    assert report["all_passed"]
    assert "FAIL" not in capsys.readouterr().out


def test_verify_mutation_fails(tmp_path, capsys):
    code = run("verify", "--quick", "--mutate", "k2", "--out", tmp_path)
    assert code == 1
    captured = capsys.readouterr()
    assert "scaling" in captured.err
