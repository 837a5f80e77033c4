import json
import subprocess
import sys

import numpy as np
import pytest

from muskat3 import FluidParams, InvertibilityFailure
from muskat3 import bie, cli, io, verify
from muskat3.evolution import SimulationRecord

RUN_TOML = """\
seed = 0
[fluid]
rho = [1.0, 2.0, 3.0]
mu = [1.0, 2.0, 4.0]
[grid]
L = 20.0
N = 256
[stepper]
t_end = 0.5
snapshot_every = 2
[[initial.f]]
family = "gaussian-bump"
amplitude = 0.2
[[initial.h]]
family = "gaussian-bump"
amplitude = -0.1
width = 1.5
center = 1.0
"""


@pytest.fixture
def run_cfg(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text(RUN_TOML)
    return p


def read_records(path):
    return io.read_csv(path)


def test_simulate_outputs(run_cfg, tmp_path):
    out = tmp_path / "a"
    assert cli.main(["simulate", str(run_cfg), "--out", str(out)]) == 0
    cols, rows = read_records(out / "records.csv")
    assert cols == list(SimulationRecord.FIELDS)
    assert len(rows) > 0
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["event"] == "T_END" and meta["exit_code"] == 0
    assert float(meta["final_time"]) == 0.5
    snaps = sorted((out / "snapshots").glob("*.m3s"))
    assert snaps and all(io.load_snapshot(s).config_digest == meta["config_sha256"] for s in snaps)


def test_simulate_is_deterministic(run_cfg, tmp_path):
    for name in ("a", "b"):
        assert cli.main(["simulate", str(run_cfg), "--out", str(tmp_path / name)]) == 0
    for rel in ("records.csv", "metadata.json"):
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()
    for s in (tmp_path / "a" / "snapshots").iterdir():
        assert s.read_bytes() == (tmp_path / "b" / "snapshots" / s.name).read_bytes()


def test_resume_continues_bit_for_bit(run_cfg, tmp_path):
    full = tmp_path / "full"
    assert cli.main(["simulate", str(run_cfg), "--out", str(full)]) == 0
    snaps = sorted((full / "snapshots").glob("*.m3s"))
    mid = snaps[len(snaps) // 2]
    k = io.load_snapshot(mid).step
    assert cli.main(["resume", str(run_cfg), str(mid), "--out", str(tmp_path / "r")]) == 0
    cols, rows = read_records(full / "records.csv")
    _, rest = read_records(tmp_path / "r" / "records.csv")
    i = cols.index("step")
    assert rest == [r for r in rows if int(r[i]) > k]
    for s in (tmp_path / "r" / "snapshots").iterdir():
        assert s.read_bytes() == (full / "snapshots" / s.name).read_bytes()
    meta = json.loads((tmp_path / "r" / "metadata.json").read_text())
    assert meta["resumed_from_step"] == k


def test_resume_rejects_foreign_or_broken_snapshot(run_cfg, tmp_path):
    out = tmp_path / "a"
    assert cli.main(["simulate", str(run_cfg), "--out", str(out)]) == 0
    snap = sorted((out / "snapshots").glob("*.m3s"))[0]
    assert cli.main(["resume", str(run_cfg), str(snap), "--set", "stepper.rtol=1e-7"]) == 2
    bad = tmp_path / "bad.m3s"
    bad.write_bytes(b"garbage")
    assert cli.main(["resume", str(run_cfg), str(bad)]) == 2
    assert cli.main(["resume", str(run_cfg), str(tmp_path / "missing.m3s")]) == 2


@pytest.mark.parametrize("extra, code", [
    (["--set", "fluid.rho=[3.0, 2.0, 4.0]", "--set", "fluid.allow_rt_unstable=true"], 10),
    (["--set", "stepper.window_tol=1e-9", "--set", "grid.N=128"], 12),
    (["--set", "stepper.rtol=1e-15", "--set", "stepper.atol=1e-15",
      "--set", "stepper.dt_init=0.05", "--set", "stepper.dt_min=0.04"], 14),
])
def test_event_exit_codes(run_cfg, tmp_path, extra, code):
    assert cli.main(["simulate", str(run_cfg), "--out", str(tmp_path / "o")] + extra) == code
    meta = json.loads((tmp_path / "o" / "metadata.json").read_text())
    assert meta["exit_code"] == code


def test_collision_exit_code(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text(
        "[fluid]\nrho = [1.0, 10.0, 1.0]\nallow_rt_unstable = true\n"
        "[grid]\nL = 20.0\nN = 256\n"
        "[stepper]\nt_end = 5.0\ndt_init = 1e-3\nsnapshot_every = 0\nallow_rt_unstable = true\n"
        "[[initial.f]]\nfamily = 'gaussian-bump'\namplitude = -0.45\n"
        "[[initial.h]]\nfamily = 'gaussian-bump'\namplitude = 0.45\n")
    assert cli.main(["simulate", str(p), "--out", str(tmp_path / "o")]) == 11


def test_invertibility_exit_code(run_cfg, tmp_path, monkeypatch):
    def failing(*args, **kwargs):
        raise InvertibilityFailure("forced", cond=1e20)

    monkeypatch.setattr(bie, "solve", failing)
    assert cli.main(["simulate", str(run_cfg), "--out", str(tmp_path / "o")]) == 13


def test_config_and_usage_errors(run_cfg, tmp_path, capsys):
    assert cli.main(["simulate", str(run_cfg), "--set", "grid.dx=0.5"]) == 2
    assert "grid.dx" in capsys.readouterr().err
    assert cli.main(["simulate", str(run_cfg), "--set", "fluid.rho=[3.0, 2.0, 4.0]"]) == 2
    assert "fluid.rho" in capsys.readouterr().err
    assert cli.main(["simulate", str(tmp_path / "none.toml")]) == 2
    assert cli.main(["simulate"]) == 2
    assert cli.main(["bogus"]) == 2
    assert cli.main(["verify", "--set", "verify.omega='other'"]) == 2


def test_internal_error_exit_code(run_cfg, tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise RuntimeError("unexpected")

    monkeypatch.setattr(cli, "simulate", boom)
    assert cli.main(["simulate", str(run_cfg), "--out", str(tmp_path / "o")]) == 3


def test_verify_pass_and_fail(monkeypatch, capsys):
    base = ["verify", "--suite", "symbols", "--set", "grid.L=20.0", "--set", "grid.N=256"]
    assert cli.main(base) == 0
    assert "PASS" in capsys.readouterr().out
    monkeypatch.setattr(verify, "SYMBOL_TOL", 0.0)
    assert cli.main(base) == 1
    assert "FAILED" in capsys.readouterr().err


def test_verify_rellich_zero_density(capsys):
    args = ["verify", "--suite", "rellich", "--n-random", "2", "--set", "grid.L=20.0",
            "--set", "grid.N=128", "--set", "verify.omega='zero'"]
    assert cli.main(args) == 0
    out = capsys.readouterr().out
    assert out.count(" 0.000e+00 ") == 3


def test_dispersion_equal_viscosity_closed_form(tmp_path):
    path = tmp_path / "d.csv"
    assert cli.main(["dispersion", "--set", "dispersion.k=[0.0, 0.5, 2.0]", "--out", str(path)]) == 0
    cols, rows = io.read_csv(path)
    assert cols == ["k", "M11", "M12", "M21", "M22", "lam1_re", "lam1_im", "lam2_re", "lam2_im"]
    P = FluidParams()
    for r in rows:
        k, M11, M12, M21, M22, l1r, l1i, l2r, l2i = map(float, r)
        e = np.exp(-P.c_inf * k)
        ref = k * np.array([[P.theta1, P.theta2 * e], [P.theta1 * e, P.theta2]])
        assert np.max(np.abs(np.array([[M11, M12], [M21, M22]]) - ref)) <= 1e-15 * max(k, 1)
        assert l1i == 0.0 and l2i == 0.0
        assert np.allclose(sorted([l1r, l2r]), sorted(np.linalg.eigvals(ref).real), rtol=1e-14, atol=1e-300)


def test_dispersion_default_range(tmp_path):
    path = tmp_path / "d.csv"
    assert cli.main(["dispersion", "--set", "dispersion.n_k=5", "--out", str(path)]) == 0
    _, rows = io.read_csv(path)
    assert [float(r[0]) for r in rows] == [0.0, 2.5, 5.0, 7.5, 10.0]


def test_field_csv(run_cfg, tmp_path):
    out = tmp_path / "a"
    assert cli.main(["simulate", str(run_cfg), "--out", str(out)]) == 0
    snap = sorted((out / "snapshots").glob("*.m3s"))[-1]
    path = tmp_path / "f.csv"
    args = ["field", str(run_cfg), str(snap), "--out", str(path), "--set", "field.points=[[0.0, 3.0], [0.0, 0.55], [0.0, -2.0], [3.0, 1.0]]"]
    assert cli.main(args) == 0
    cols, rows = io.read_csv(path)
    assert cols == ["x", "y", "v1", "v2", "p", "region", "darcy_residual"]
    assert [r[5] for r in rows] == ["omega1", "omega2", "omega3", "near-interface"]
    assert rows[3][2:5] == ["", "", ""]
    assert all(float(r[6]) <= 1e-5 for r in rows[:3])


def test_field_rejects_bad_snapshot(run_cfg, tmp_path):
    bad = tmp_path / "bad.m3s"
    bad.write_bytes(io.SNAPSHOT_MAGIC + b"\x02\x00\x00\x00\x00\x00\x00\x00")
    assert cli.main(["field", str(run_cfg), str(bad)]) == 2


def test_entry_point_subprocess(run_cfg, tmp_path):
    outs = []
    for name in ("a", "b"):
        r = subprocess.run([sys.executable, "-m", "muskat3.cli", "simulate", str(run_cfg), "--out", str(tmp_path / name)],
                           capture_output=True, text=True)
        assert r.returncode == 0, r.stderr
        outs.append((tmp_path / name / "records.csv").read_bytes())
    assert outs[0] == outs[1]
