import csv
import io
import json

import numpy as np
import pytest

from transitlab.acceptance import load_fd_oracle
from transitlab.cli import EXIT_CHECK_FAILED, EXIT_COMPUTE, EXIT_CONFIG, EXIT_OK, main


def read_csv(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    header_lines = [ln[2:] for ln in lines if ln.startswith("# ")]
    body = [ln for ln in lines if not ln.startswith("#")]
    return json.loads("\n".join(header_lines)), list(csv.DictReader(io.StringIO("\n".join(body))))


def write_config(tmp_path, payload):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


# -- thin wrappers -------------------------------------------------------------------

def test_laplace_at_zero_is_one(tmp_path):
    out = tmp_path / "phi.csv"
    assert main(["laplace", "--d", "3", "--mu", "0", "--lambda", "0", "--out", str(out)]) == EXIT_OK
    prov, rows = read_csv(out)
    assert float(rows[0]["phi_re"]) == 1.0
    assert prov["command"] == "laplace"


def test_laplace_values(tmp_path):
    out = tmp_path / "phi.csv"
    assert main(["laplace", "--d", "4", "--lambda=-0.5,-0.1", "--out", str(out)]) == EXIT_OK
    _, rows = read_csv(out)
    assert [float(r["lambda"]) for r in rows] == [-0.5, -0.1]
    assert all(r["converged"] == "true" for r in rows)


def test_quartic_constants(tmp_path):
    out = tmp_path / "constants.json"
    assert main(["constants", "--d", "4", "--mu", "0", "--out", str(out)]) == EXIT_OK
    body = json.loads(out.read_text(encoding="utf-8"))["constants"]
    assert body["C_2/3"] == pytest.approx(1.6693, abs=2e-4)
    assert body["C_1/3"] == pytest.approx(0.5432, abs=2e-4)


def test_spectrum_matches_the_committed_oracle(tmp_path):
    out = tmp_path / "spectrum.json"
    assert main(["spectrum", "--d", "3", "--mu", "0", "--out", str(out)]) == EXIT_OK
    body = json.loads(out.read_text(encoding="utf-8"))
    assert body["fd_oracle"]["source"] == "committed file"
    assert body["spectral"]["eta0"] == pytest.approx(load_fd_oracle()[(3, 0.0)][0], rel=1e-6)
    assert body["passed"] is True


def test_density_with_a_truncated_window(tmp_path):
    out = tmp_path / "density.csv"
    cfg = write_config(tmp_path, {"version": 1, "density": {"d": 4, "mu": 0.0, "t_max": 18.0}})
    assert main(["density", "--config", cfg, "--out", str(out)]) == EXIT_OK
    prov, rows = read_csv(out)
    assert prov["config"]["t_max"] == 18.0
    t = np.array([float(r["t"]) for r in rows])
    assert t[-1] <= 18.0 and np.all(np.diff(t) > 0)
    summary = json.loads(out.with_suffix(".json").read_text(encoding="utf-8"))
    assert summary["density"]["mean"] == pytest.approx(1.6431309, rel=1e-5)


def test_density_window_too_short_is_a_compute_error(tmp_path):
    cfg = write_config(tmp_path, {"density": {"d": 4, "t_max": 3.0}})
    assert main(["density", "--config", cfg, "--out", str(tmp_path / "d.csv")]) == EXIT_COMPUTE
    assert not (tmp_path / "d.csv").exists()


# -- sampling -----------------------------------------------------------------------

def test_sample_reproduces_the_validation_draws(tmp_path, ctx, capsys):
    out = tmp_path / "limit.csv"
    assert main(["sample", "--d", "3", "--mu", "0", "--n", "500000", "--seed", "7", "--out", str(out)]) == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    prov, rows = read_csv(out)
    assert len(rows) == 500_000
    assert list(rows[0]) == ["value", "scheme", "seed", "steps", "boundary_correction"]
    values = np.array([float(r["value"]) for r in rows])
    assert np.array_equal(values, ctx.limit_samples(3, 0.0, 500_000))
    assert summary["mean"] == pytest.approx(9.952, abs=0.05)
    assert prov["seed"] == 7


def test_sample_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert main(["sample", "--d", "4", "--n", "300", "--seed", "3", "--out", str(path)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    assert b"\r" not in a.read_bytes()


def test_transit_sample_csv(tmp_path, capsys):
    out = tmp_path / "transit.csv"
    args = ["sample", "--family", "sine", "--eps", "0.05", "--n", "20000", "--out", str(out)]
    assert main(args) == EXIT_OK
    capsys.readouterr()
    _, rows = read_csv(out)
    assert len(rows) == 20_000
    assert list(rows[0]) == ["tau_raw", "tau_rescaled", "epsilon", "x0", "a", "seed", "exited_left"]
    r = rows[0]
    assert float(r["tau_rescaled"]) == float(r["tau_raw"]) * 0.05 ** (2 / 3)
    assert {row["exited_left"] for row in rows} <= {"true", "false"}


# -- convergence ----------------------------------------------------------------------

def test_single_noise_level_is_a_schema_error(tmp_path, capsys):
    assert main(["converge", "--family", "sine", "--eps", "0.1", "--out", str(tmp_path / "c.json")]) == EXIT_CONFIG
    assert "at least two" in capsys.readouterr().err


def test_cos2_distance_shrinks(tmp_path):
    out = tmp_path / "converge.json"
    code = main(["converge", "--family", "cos2", "--eps", "0.2,0.1", "--out", str(out)])
    report = json.loads(out.read_text(encoding="utf-8"))
    rows = {r["eps"]: r["ks"]["statistic"] for r in report["rows"]}
    assert rows[0.1] < rows[0.2]
    assert code == EXIT_OK and report["passed"]
    assert report["rows"][0]["ks"]["method"] == "asymptotic Kolmogorov distribution"


# -- validation -------------------------------------------------------------------------

def test_validate_is_byte_identical_across_runs(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert main(["validate", "--criteria", "3,4,5", "--out", str(path)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    report = json.loads(a.read_text(encoding="utf-8"))
    assert report["passed"] and {r["key"][0] for r in report["results"]} == {"3", "4", "5"}


def test_validate_catches_a_corrupted_constant(tmp_path):
    cfg = write_config(tmp_path, {"validate": {"constant_offsets": {"d3.c0": 1e-3}}})
    out = tmp_path / "bad.json"
    assert main(["validate", "--config", cfg, "--criteria", "3", "--out", str(out)]) == EXIT_CHECK_FAILED
    report = json.loads(out.read_text(encoding="utf-8"))
    assert not report["passed"]


# -- plumbing --------------------------------------------------------------------------------

def test_provenance_header(tmp_path):
    out = tmp_path / "phi.csv"
    main(["laplace", "--lambda=-0.1", "--out", str(out)])
    assert out.read_text(encoding="utf-8").startswith("# {")
    prov, _ = read_csv(out)
    assert {"git_revision", "config_hash", "seed", "tolerances", "package_version"} <= set(prov)
    assert len(prov["config_hash"]) == 64
    assert "out" not in prov["config"]


def test_flags_override_the_config_file(tmp_path):
    cfg = write_config(tmp_path, {"laplace": {"d": 4, "lambda": [-0.3]}})
    out = tmp_path / "phi.csv"
    assert main(["laplace", "--config", cfg, "--d", "3", "--out", str(out)]) == EXIT_OK
    prov, rows = read_csv(out)
    assert prov["config"]["d"] == 3 and float(rows[0]["lambda"]) == -0.3


@pytest.mark.parametrize("payload", [
    {"laplace": {"bogus": 1}},
    {"version": 99},
    {"laplace": {"d": 5}},
    {"laplace": {"tol": -1.0}},
    {"laplace": {"d": 3.5}},
    [1, 2],
])
def test_bad_config_exits_with_a_schema_error(tmp_path, payload):
    cfg = write_config(tmp_path, payload)
    assert main(["laplace", "--config", cfg]) == EXIT_CONFIG


def test_unreadable_config(tmp_path):
    assert main(["laplace", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG


def test_family_and_noise_go_together():
    assert main(["sample", "--family", "sine"]) == EXIT_CONFIG


def test_failed_write_leaves_no_partial_file(tmp_path, monkeypatch):
    import transitlab.cli as cli

    out = tmp_path / "phi.csv"
    out.write_text("previous contents", encoding="utf-8")

    def broken_replace(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(cli.os, "replace", broken_replace)
    with pytest.raises(OSError):
        main(["laplace", "--lambda=-0.1", "--out", str(out)])
    assert out.read_text(encoding="utf-8") == "previous contents"
    assert [p.name for p in tmp_path.iterdir()] == ["phi.csv"]
