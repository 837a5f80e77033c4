"""Acceptance suite: one test per criterion, at the stated tolerances.

Run with ``pytest tests/test_acceptance.py``; a PASS/FAIL line per criterion is
printed in the terminal summary.
"""
import json
import subprocess
import sys
import time

import numpy as np
import pytest

from muskat3 import ConfigError, FluidParams, Grid, InterfaceState, VorticityDensity
from muskat3 import bie, fields, io, linear, verify
from muskat3.evolution import Event, StepperConfig, simulate

VISC = FluidParams(mu1=1.0, mu2=2.0, mu3=4.0)


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


@pytest.mark.criterion(1, "flat-interface symbols, L=40, N=1024, modes 1..32, rel err <= 1e-6, <= 30 s")
def test_criterion_1_symbols():
    with Timer() as t:
        checks = verify.symbols(Grid(40.0, 1024), FluidParams(c_inf=1.0), n_modes=32)
    names = {c.name.split(" ")[0] for c in checks}
    assert {"S'(0)", "S(0)", "T(0)", "T'(0)", "B(0)", "A(0)"} <= names
    assert all(c.tol == 1e-6 and c.passed for c in checks), verify.format_table(checks)
    assert t.elapsed <= 30.0


@pytest.mark.criterion(2, "operator identities on 20 random decayed states <= 1e-12, <= 60 s")
def test_criterion_2_identities():
    with Timer() as t:
        checks = verify.identities(Grid(40.0, 512), VISC, n_random=20)
    assert len(checks) == 8
    assert all(c.tol == 1e-12 and c.passed for c in checks), verify.format_table(checks)
    assert t.elapsed <= 60.0


@pytest.mark.criterion(3, "Rellich residuals <= 1e-8 on 10 pairs at N=1024, order >= 4 under doubling, <= 120 s")
def test_criterion_3_rellich():
    with Timer() as t:
        checks = verify.rellich(Grid(40.0, 1024), VISC, n_random=10)
        # the observed order is taken on grids where the residual is still above round-off
        worst = []
        for n in (64, 128, 256):
            g = Grid(20.0, n)
            rng = np.random.default_rng(3)
            X = verify.random_state(g, VISC, rng)
            w = verify.random_density(g, rng)
            worst.append(max(fields.rellich_residuals(X, w).relative))
    assert all(c.tol == 1e-8 and c.passed for c in checks), verify.format_table(checks)
    orders = [np.log2(a / b) for a, b in zip(worst, worst[1:])]
    assert min(orders) >= 4.0, orders
    assert t.elapsed <= 120.0


@pytest.mark.criterion(4, "BIE: equal-viscosity exactness 1e-14, Neumann series 1e-8, radius <= |a1 a2| + 1e-3")
def test_criterion_4_bie():
    g = Grid(20.0, 256)
    P = FluidParams()
    X = verify.random_state(g, P, np.random.default_rng(1))
    w = bie.solve_omega(X)
    assert np.max(np.abs(w.w1 - P.theta1 * X.fp)) <= 1e-14
    assert np.max(np.abs(w.w2 - P.theta2 * X.hp)) <= 1e-14

    Pm = FluidParams(mu1=1.0, mu2=3.0, mu3=1.0)  # a1 = -a2: mixed sign
    X = InterfaceState(g, Pm, 0.01 * np.exp(-g.x**2), np.zeros(g.N))
    sol = bie.solve(X)
    a = np.repeat(Pm.a_mu, g.N)
    term = np.concatenate([Pm.theta1 * X.fp, Pm.theta2 * X.hp])
    acc = term.copy()
    for _ in range(20):
        term = a * (sol.calA.matrix @ term)
        acc += term
    assert np.max(np.abs(acc - sol.omega.stacked())) <= 1e-8

    X0 = InterfaceState.flat(Grid(40.0, 1024), Pm)
    r = bie.neumann_radius(X0, Pm.a1, Pm.a2)
    assert r <= abs(Pm.a1 * Pm.a2) + 1e-3


def _decay_rate(g, P, m, which, amp):
    k = np.pi * m / g.L
    lam, V = np.linalg.eig(linear.dispersion_matrix(k, P).M)
    order = np.argsort(lam.real)
    lam, V = lam[order].real, V[:, order].real
    U = np.linalg.inv(V)  # rows are left eigenvectors
    v = V[:, which] / np.max(np.abs(V[:, which]))
    c = np.cos(k * g.x)
    X0 = InterfaceState(g, P, amp * v[0] * c, amp * v[1] * c)
    t_end = 1.0 / abs(lam[which])
    res = simulate(X0, StepperConfig(t_end=t_end, track_mode=m, snapshot_every=0))
    assert res.event is Event.T_END
    first, last = amp * v, [r for r in res.records if r.accepted][-1]
    coef0 = U[which] @ first
    coef1 = U[which] @ np.array([last.amp_f, last.amp_h])
    return np.log(coef1 / coef0) / last.time, lam[which]


@pytest.mark.criterion(5, "FD linearization vs dispersion matrix 1e-4 on 16 modes; nonlinear decay within 2%, N=512, <= 5 min")
def test_criterion_5_linear_dynamics():
    with Timer() as t:
        g = Grid(40.0, 512)
        for m in range(1, 17):
            Mfd = linear.fd_linearization(g, VISC, m)
            M = linear.dispersion_matrix(np.pi * m / g.L, VISC).M
            assert np.max(np.abs(Mfd - M)) <= 1e-4 * np.max(np.abs(M)), m
        g = Grid(20.0, 512)
        for which in (0, 1):
            rate, lam = _decay_rate(g, VISC, 8, which, 1e-3 * VISC.c_inf)
            assert abs(rate - lam) <= 0.02 * abs(lam), (which, rate, lam)
    assert t.elapsed <= 300.0


@pytest.mark.criterion(6, "fields: Darcy 1e-5, div/curl 1e-6, jump span 1e-6, jump recovery 1e-8, |v||z| bounded to 10L")
def test_criterion_6_fields():
    g = Grid(20.0, 512)
    checks = verify.darcy(g, VISC, n_probes=100) + verify.traces(g, VISC, n_random=3)
    by_name = {c.name: c for c in checks}
    assert by_name["Darcy residual (100 probes)"].tol == 1e-5
    assert by_name["divergence"].tol == 1e-6 and by_name["curl"].tol == 1e-6
    assert by_name["pressure jump span (upper)"].tol == 1e-6
    assert by_name["jump recovery (upper) (3 pairs)"].tol == 1e-8
    assert all(c.passed for c in checks), verify.format_table(checks)

    rng = np.random.default_rng(0)
    X = verify.random_state(g, VISC, rng)
    w = bie.solve_omega(X)
    w = VorticityDensity(w.w1 + verify.random_profile(g, rng, 0.1), w.w2)  # nonzero circulation
    ev = fields.FieldEvaluator(X, w, images=False)
    gamma = abs(float(np.sum(ev.W).real))
    bound = np.sum(np.abs(ev.W)) / np.pi
    R = np.max(np.abs(ev.Z))
    for ang in (0.0, np.pi / 4, np.pi / 2):
        for r in np.linspace(2 * g.L, 10 * g.L, 9):
            z = r * np.exp(1j * ang)
            v1, v2 = ev.velocity_at([z.real], [z.imag], check=False)
            vz = np.hypot(v1[0], v2[0]) * r
            assert vz <= bound * r / (r - R)
    assert abs(vz - gamma / np.pi) <= np.sum(np.abs(ev.W) * np.abs(ev.Z)) / (np.pi * (r - R))


@pytest.mark.criterion(7, "robustness: reversed densities rejected or event 10; forced approach ends with event 11, all finite")
def test_criterion_7_robustness():
    with pytest.raises(ConfigError) as exc:
        io.prepare(io.load_config(overrides=["fluid.rho=[3.0, 2.0, 4.0]"]))
    assert exc.value.field == "fluid.rho"

    g = Grid(20.0, 128)
    P = FluidParams(rho1=3.0, rho2=2.0, rho3=4.0)
    X = InterfaceState(g, P, 0.1 * np.exp(-g.x**2), np.zeros(g.N))
    res = simulate(X, StepperConfig(t_end=1.0))
    assert res.event is Event.RT_VIOLATION and int(res.event) == 10

    g = Grid(20.0, 256)
    P = FluidParams(rho1=1.0, rho2=10.0, rho3=1.0)
    X = InterfaceState(g, P, -0.45 * np.exp(-g.x**2), 0.45 * np.exp(-g.x**2))
    res = simulate(X, StepperConfig(t_end=5.0, allow_rt_unstable=True, dt_init=1e-3, snapshot_every=0))
    assert res.event is Event.COLLISION and int(res.event) == 11
    assert all(np.isfinite(r.gap) and r.gap > 0 for r in res.records)
    assert np.all(np.isfinite(res.final.f)) and np.all(np.isfinite(res.final.h))
    assert np.all(np.isfinite(res.final.w1)) and np.all(np.isfinite(res.final.w2))


@pytest.mark.criterion(8, "determinism: identical config gives byte-identical CSV and snapshots across two runs")
def test_criterion_8_determinism(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text(
        "[fluid]\nrho = [1.0, 2.0, 3.0]\nmu = [1.0, 2.0, 4.0]\n"
        "[grid]\nL = 20.0\nN = 256\n"
        "[stepper]\nt_end = 1.0\nsnapshot_every = 3\n"
        "[[initial.f]]\nfamily = 'gaussian-bump'\namplitude = 0.3\n"
        "[[initial.h]]\nfamily = 'cosine-mode'\namplitude = -0.1\nmode = 6\nwindow = 2.0\n")
    for name in ("a", "b"):
        r = subprocess.run([sys.executable, "-m", "muskat3.cli", "simulate", str(cfg), "--out", str(tmp_path / name)],
                           capture_output=True, text=True)
        assert r.returncode == 0, r.stderr
    a, b = tmp_path / "a", tmp_path / "b"
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    assert files == sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    assert sum(1 for f in files if f.suffix == ".m3s") >= 2
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes(), f
    assert json.loads((a / "metadata.json").read_text())["event"] == "T_END"
