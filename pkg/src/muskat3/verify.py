"""Identity batteries run by ``muskat3 verify``.

Each suite returns a list of :class:`Check` rows (measured error vs tolerance).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bie, fields, kernels
from .grid import Grid
from .state import FluidParams, InterfaceState, VorticityDensity

SUITES = ("symbols", "identities", "rellich", "traces", "darcy")

SYMBOL_TOL = 1e-6
IDENTITY_TOL = 1e-12
RELLICH_TOL = 1e-8
TRACE_TOL = 1e-8
DARCY_TOL = 1e-5
DIVCURL_TOL = 1e-6
SPAN_TOL = 1e-6


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    measured: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.measured) and self.measured <= self.tol)


def random_profile(grid: Grid, rng, amplitude, n_bumps=3):
    """Sum of Gaussians placed well inside the window, so the profile is decayed."""
    x = grid.x
    L = grid.L
    out = np.zeros(grid.N)
    for _ in range(n_bumps):
        a = rng.uniform(-1.0, 1.0) * amplitude / n_bumps
        w = rng.uniform(0.5, 1.0) * min(2.0, L / 20.0)
        x0 = rng.uniform(-L / 4, L / 4)
        out += a * np.exp(-((x - x0) / w) ** 2)
    return out


def random_state(grid: Grid, params: FluidParams, rng, amplitude=0.3):
    a = amplitude * params.c_inf
    return InterfaceState(grid, params, random_profile(grid, rng, a), random_profile(grid, rng, a))


def random_density(grid: Grid, rng):
    return VorticityDensity(random_profile(grid, rng, 1.0), random_profile(grid, rng, 1.0))


def _rel(a, b):
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def _abs(a, b):
    return float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b))))


# ------------------------------------------------------------------ suites

def symbols(grid: Grid, params: FluidParams, n_modes=32, **_):
    """Flat-interface operators against their Fourier multipliers on cosine modes."""
    X0 = InterfaceState.flat(grid, params)
    x = grid.x
    S, T = kernels.layer_matrices(X0)
    Sp, Tp = kernels.layer_matrices(X0, primed=True)
    A, B = kernels.graph_matrices(grid, np.zeros(grid.N), hmat=bie._hilbert(grid))
    C1 = kernels.cd_matrix("C", 1, X0)
    D1 = kernels.cd_matrix("D", 1, X0)
    errs = {name: 0.0 for name in ("S'(0)", "S(0)", "T(0)", "T'(0)", "B(0)", "A(0)", "C_1(0)", "D_1(0)")}
    n_modes = min(n_modes, grid.N // 4)
    for m in range(1, n_modes + 1):
        k = np.pi * m / grid.L
        c, s = np.cos(k * x), np.sin(k * x)
        e = np.exp(-params.c_inf * k)
        pairs = {
            "S'(0)": (Sp @ c, e * c), "S(0)": (S @ c, -e * c),
            "T(0)": (T @ c, e * s), "T'(0)": (Tp @ c, e * s),
            "B(0)": (B @ c, s), "C_1(0)": (C1 @ c, e * c / params.c_inf), "D_1(0)": (D1 @ c, e * s),
        }
        for name, (got, ref) in pairs.items():
            errs[name] = max(errs[name], _rel(got, ref))
        errs["A(0)"] = max(errs["A(0)"], float(np.max(np.abs(A @ c))))
    return [Check("symbols", f"{name} on modes 1..{n_modes}", v, SYMBOL_TOL) for name, v in errs.items()]


def _identity_errors(X: InterfaceState, w):
    g = X.grid
    H = bie._hilbert(g)
    out = {}
    for name, u, up, upp in (("f", X.f, X.fp, X.fpp), ("h", X.h, X.hp, X.hpp)):
        A, B = kernels.graph_matrices(g, u, up, upp, hmat=H)
        B01 = kernels.bnm0_matrix(g, u, 0, 1, hmat=H)
        B11 = kernels.bnm0_matrix(g, u, 1, 1, hmat=H)
        Aw, Bw = A @ w, B @ w
        out[f"A({name}) = {name}' B01 - B11"] = _abs(up * (B01 @ w) - B11 @ w, Aw)
        out[f"B({name}) = B01 + {name}' B11"] = _abs(B01 @ w + up * (B11 @ w), Bw)
    S, T = kernels.layer_matrices(X)
    Sp, Tp = kernels.layer_matrices(X, primed=True)
    C1, D1 = kernels.cd_matrix("C", 1, X), kernels.cd_matrix("D", 1, X)
    C1p, D1p = kernels.cd_matrix("Cprime", 1, X), kernels.cd_matrix("Dprime", 1, X)
    c, f, h, fp, hp = X.c, X.f, X.h, X.fp, X.hp
    out["S via C_1, D_1"] = _abs(fp * (D1 @ w) - (c + f) * (C1 @ w) + C1 @ (h * w), S @ w)
    out["T via C_1, D_1"] = _abs(D1 @ w + (c + f) * fp * (C1 @ w) - fp * (C1 @ (h * w)), T @ w)
    out["S' via C'_1, D'_1"] = _abs(hp * (D1p @ w) + (c - h) * (C1p @ w) + C1p @ (f * w), Sp @ w)
    out["T' via C'_1, D'_1"] = _abs(D1p @ w - (c - h) * hp * (C1p @ w) - hp * (C1p @ (f * w)), Tp @ w)
    return out


def identities(grid: Grid, params: FluidParams, n_random=20, seed=0, **_):
    """Representations of the graph and coupling operators through B_{n,m}, C_m and D_m."""
    rng = np.random.default_rng(seed)
    worst = {}
    for _i in range(n_random):
        X = random_state(grid, params, rng)
        w = random_profile(grid, rng, 1.0)
        for k, v in _identity_errors(X, w).items():
            worst[k] = max(worst.get(k, 0.0), v)
    return [Check("identities", f"{k} ({n_random} states)", v, IDENTITY_TOL) for k, v in worst.items()]


def rellich(grid: Grid, params: FluidParams, n_random=10, seed=0, omega="random", **_):
    """Rellich-type trace identities for random (X, w); ``omega`` is 'random', 'solve' or 'zero'."""
    rng = np.random.default_rng(seed)
    worst = [0.0, 0.0, 0.0]
    for _i in range(n_random):
        X = random_state(grid, params, rng)
        if omega == "zero":
            w = VorticityDensity.zeros(grid.N)
        elif omega == "solve":
            w = bie.solve_omega(X)
        else:
            w = random_density(grid, rng)
        rel = fields.rellich_residuals(X, w).relative
        worst = [max(a, b) for a, b in zip(worst, rel)]
    names = ("upper outer layer", "middle layer", "lower outer layer")
    return [Check("rellich", f"{n} ({n_random} pairs)", v, RELLICH_TOL) for n, v in zip(names, worst)]


def traces(grid: Grid, params: FluidParams, n_random=3, seed=0, **_):
    """One-sided traces: consistency with the boundary operators and jump recovery."""
    rng = np.random.default_rng(seed)
    errs = {"jump recovery (upper)": 0.0, "jump recovery (lower)": 0.0,
            "normal continuity (upper)": 0.0, "normal continuity (lower)": 0.0,
            "trace vs A, B (upper)": 0.0, "trace vs A, B (lower)": 0.0}
    for _i in range(n_random):
        X = random_state(grid, params, rng)
        w = random_density(grid, rng)
        calA, calB = bie.assemble_both(X)
        A1, A2 = calA.apply(w)
        B1, B2 = calB.apply(w)
        ev = fields.FieldEvaluator(X, w, refine=1)
        for tag, iface, sides, slope, dens, Aj, Bj, sgn in (
                ("upper", "f", (1, 2), X.fp, w.w1, A1, B1, -1.0),
                ("lower", "h", (2, 3), X.hp, w.w2, A2, B2, -1.0)):
            (a1, a2), (b1, b2) = (ev.trace_at(iface, s) for s in sides)
            tang_a = a1 + slope * a2
            tang_b = b1 + slope * b2
            errs[f"jump recovery ({tag})"] = max(errs[f"jump recovery ({tag})"],
                                               _abs(0.5 * (tang_b - tang_a), dens))
            errs[f"normal continuity ({tag})"] = max(errs[f"normal continuity ({tag})"],
                                                   _abs(-slope * b1 + b2, -slope * a1 + a2))
            errs[f"trace vs A, B ({tag})"] = max(errs[f"trace vs A, B ({tag})"],
                                               _abs(tang_a, Aj + sgn * dens), _abs(-slope * a1 + a2, Bj))
    return [Check("traces", f"{k} ({n_random} pairs)", v, TRACE_TOL) for k, v in errs.items()]


def interior_probes(ev: fields.FieldEvaluator, rng, n, margin=None):
    """``n`` random points at least ``margin`` away from both interfaces, with their region."""
    g = ev.grid
    margin = 4.0 * g.dx if margin is None else margin
    X = ev.X
    top = X.c + float(np.max(X.f)) + 2.0
    bot = float(np.min(X.h)) - 2.0
    pts = []
    while len(pts) < n:
        x = rng.uniform(-g.L / 4, g.L / 4, size=4 * n)
        y = rng.uniform(bot, top, size=4 * n)
        reg = ev.classify(x, y)
        ok = (reg > 0) & (ev.distance(x, y) >= margin)
        pts.extend((float(a), float(b), int(r)) for a, b, r in zip(x[ok], y[ok], reg[ok]))
    return pts[:n]


def darcy(grid: Grid, params: FluidParams, n_probes=100, seed=0, **_):
    """Darcy's law, incompressibility and irrotationality of the reconstructed field."""
    rng = np.random.default_rng(seed)
    X = random_state(grid, params, rng)
    sol = bie.solve(X, keep_operators=False)
    ev = fields.FieldEvaluator(X, sol.omega)
    pts = interior_probes(ev, rng, n_probes)
    res = max(ev.darcy_residual(r, x, y) for x, y, r in pts)
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    div, curl = ev.div_curl(xs, ys)
    span_f, span_h = fields.pressure_jump_span(ev)
    return [
        Check("darcy", f"Darcy residual ({n_probes} probes)", res, DARCY_TOL),
        Check("darcy", "divergence", float(np.max(np.abs(div))), DIVCURL_TOL),
        Check("darcy", "curl", float(np.max(np.abs(curl))), DIVCURL_TOL),
        Check("darcy", "pressure jump span (upper)", span_f, SPAN_TOL),
        Check("darcy", "pressure jump span (lower)", span_h, SPAN_TOL),
    ]


_RUNNERS = {"symbols": symbols, "identities": identities, "rellich": rellich,
            "traces": traces, "darcy": darcy}


def run_suite(name, grid: Grid, params: FluidParams, **options):
    if name == "all":
        out = []
        for s in SUITES:
            out.extend(_RUNNERS[s](grid, params, **options))
        return out
    if name not in _RUNNERS:
        raise ValueError(f"unknown suite {name!r}; choose from {SUITES + ('all',)}")
    return _RUNNERS[name](grid, params, **options)


def format_table(checks):
    w = max([len(c.name) for c in checks] + [5])
    lines = [f"{'suite':<11} {'check':<{w}} {'measured':>11} {'tol':>9}  result"]
    for c in checks:
        lines.append(f"{c.suite:<11} {c.name:<{w}} {c.measured:11.3e} {c.tol:9.1e}  {'PASS' if c.passed else 'FAIL'}")
    return "\n".join(lines)
