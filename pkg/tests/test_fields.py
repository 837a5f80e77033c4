import numpy as np
import pytest

from muskat3 import FieldEvaluationRefused, FluidParams, Grid, InterfaceState, RegionMismatch, VorticityDensity
from muskat3 import bie, fields, verify


@pytest.fixture(scope="module")
def setup():
    g = Grid(20.0, 256)
    P = FluidParams(mu1=1, mu2=2, mu3=4)
    x = g.x
    X = InterfaceState(g, P, 0.3 * np.exp(-x**2), -0.2 * np.exp(-(x - 1) ** 2))
    sol = bie.solve(X)
    return X, sol.omega, fields.FieldEvaluator(X, sol.omega)


def _on_upper(ev, x0=5.0):
    return ev.X.c + ev.X.f[np.argmin(np.abs(ev.grid.x - x0))]


def test_zero_density_gives_rest_and_hydrostatic_pressure(setup):
    X, _, _ = setup
    P = X.params
    ev = fields.FieldEvaluator(X, VorticityDensity.zeros(X.grid.N))
    v1, v2 = ev.velocity_at([0.5, -3.0, 2.0], [3.0, 0.5, -2.0])
    assert np.all(v1 == 0.0) and np.all(v2 == 0.0)
    # continuity at x = 0 fixes the outer constants
    yf, yh = X.c + X.f[X.grid.N // 2], X.h[X.grid.N // 2]
    cases = ((1, 2.5, -P.rho1 * P.g * 2.5 + (P.rho1 - P.rho2) * P.g * yf),
             (2, 0.5, -P.rho2 * P.g * 0.5),
             (3, -1.5, -P.rho3 * P.g * -1.5 + (P.rho3 - P.rho2) * P.g * yh))
    for region, y, ref in cases:
        assert abs(ev.pressure_at(region, 3.0, y) - ref) <= 1e-10 * max(1.0, abs(ref))


def test_classify_regions(setup):
    _, _, ev = setup
    reg = ev.classify([0.0, 0.0, 0.0, 5.0], [3.0, 0.6, -2.0, _on_upper(ev)])
    assert list(reg) == [1, 2, 3, 0]


def test_refusals(setup):
    X, _, ev = setup
    with pytest.raises(FieldEvaluationRefused):
        ev.velocity_at([5.0], [_on_upper(ev)])
    with pytest.raises(FieldEvaluationRefused):
        ev.pressure_at(1, 5.0, _on_upper(ev))
    with pytest.raises(RegionMismatch):
        ev.pressure_at(1, 0.0, 0.6)
    with pytest.raises(ValueError):
        ev.pressure_at(4, 0.0, 3.0)
    with pytest.raises(ValueError):
        ev.trace_at("f", 3)


def test_velocity_is_periodic_with_images(setup):
    _, _, ev = setup
    L = ev.grid.L
    a = ev.velocity_at([1.3], [2.2])
    b = ev.velocity_at([1.3 + 2 * L], [2.2])
    assert np.max(np.abs(np.array(a) - np.array(b))) <= 1e-12


@pytest.mark.parametrize("iface, side, s", [("f", 1, 1), ("f", 2, -1), ("h", 2, 1), ("h", 3, -1)])
def test_trace_is_first_order_limit(setup, iface, side, s):
    X, w, _ = setup
    g = X.grid
    ev = fields.FieldEvaluator(X, w, refine=16)
    i = g.N // 2 + 3
    t1, t2 = ev.trace_at(iface, side)
    base = X.c + X.f[i] if iface == "f" else X.h[i]
    errs = []
    for eps in (g.dx / 2, g.dx / 4, g.dx / 8):
        v1, v2 = ev.velocity_at([g.x[i]], [base + s * eps], check=False)
        errs.append(np.hypot(v1[0] - t1[i], v2[0] - t2[i]))
    for a, b in zip(errs, errs[1:]):
        assert 1.8 <= a / b <= 2.2


def test_darcy_and_div_curl(setup):
    _, _, ev = setup
    rng = np.random.default_rng(5)
    pts = verify.interior_probes(ev, rng, 100, margin=3 * ev.grid.dx)
    assert {r for _, _, r in pts} == {1, 2, 3}
    assert max(ev.darcy_residual(r, x, y) for x, y, r in pts) <= 1e-5
    div, curl = ev.div_curl([p[0] for p in pts], [p[1] for p in pts])
    assert np.max(np.abs(div)) <= 1e-6 and np.max(np.abs(curl)) <= 1e-6


def test_pressure_jump_is_constant(setup):
    X, w, ev = setup
    assert max(fields.pressure_jump_span(ev)) <= 1e-6
    # negative control: a 1% error in the density shows up in the span
    bad = fields.FieldEvaluator(X, VorticityDensity(1.01 * w.w1, w.w2))
    assert max(fields.pressure_jump_span(bad)) >= 1e-4


def test_interface_pressures_match_interior_limit(setup):
    X, _, ev = setup
    g = X.grid
    p1, p2 = ev.interface_pressures("f")
    i = g.N // 2 + 20
    y = X.c + X.f[i]
    near = [ev.pressure_at(2, g.x[i], y - e, check=False) for e in (4e-3, 2e-3)]
    assert abs(2 * near[1] - near[0] - p2[i]) <= 1e-4 * max(1.0, abs(p2[i]))


def test_rellich_flat_gaussian():
    g = Grid(20.0, 256)
    X = InterfaceState.flat(g, FluidParams(mu1=1, mu2=2, mu3=4))
    w = VorticityDensity(np.exp(-g.x**2), np.zeros(g.N))
    assert max(fields.rellich_residuals(X, w).relative) <= 1e-8


def test_rellich_zero_density_is_exact(setup):
    X, _, _ = setup
    r = fields.rellich_residuals(X, VorticityDensity.zeros(X.grid.N))
    assert r.values == (0.0, 0.0, 0.0)


def test_rellich_residual_shrinks_spectrally():
    P = FluidParams(mu1=1, mu2=2, mu3=4)
    worst = []
    for n in (64, 128, 256):
        g = Grid(20.0, n)
        rng = np.random.default_rng(3)
        X = verify.random_state(g, P, rng)
        w = verify.random_density(g, rng)
        worst.append(max(fields.rellich_residuals(X, w).relative))
    assert worst[2] <= 1e-8
    assert worst[1] <= 1e-2 * worst[0] and worst[2] <= 1e-2 * worst[1]


def test_far_field_decay_without_images(setup):
    X, _, _ = setup
    g = X.grid
    w = verify.random_density(g, np.random.default_rng(0))
    ev = fields.FieldEvaluator(X, w, images=False)
    gamma = float(np.sum(ev.W).real)
    R = np.max(np.abs(ev.Z))
    moment = np.sum(np.abs(ev.W) * np.abs(ev.Z))
    for ang in (0.0, np.pi / 4, np.pi / 2):
        for r in (2 * g.L, 5 * g.L, 10 * g.L):
            z = r * np.exp(1j * ang)
            v1, v2 = ev.velocity_at([z.real], [z.imag], check=False)
            # |v| |z| -> |Gamma| / pi with an O(1/r) remainder bounded by the first moment
            assert abs(np.hypot(v1[0], v2[0]) * r - abs(gamma) / np.pi) <= moment / (np.pi * (r - R))


def test_functional_api_matches_evaluator(setup):
    X, w, ev = setup
    a = fields.velocity_at(X, w, [0.0], [3.0])
    b = ev.velocity_at([0.0], [3.0])
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    assert fields.classify(X, [0.0], [3.0])[0] == 1
    assert fields.pressure_at(X, w, 2, 0.0, 0.6) == ev.pressure_at(2, 0.0, 0.6)
