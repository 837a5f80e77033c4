"""Density equation (1 - A_mu calA(X)) w = Theta X' and the interface velocity Phi = calB(X) w."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import linalg

from . import kernels
from .errors import InvertibilityFailure
from .grid import Grid, hilbert_matrix
from .state import FluidParams, InterfaceState, VorticityDensity

log = logging.getLogger(__name__)

COND_MAX = 1e12
RESIDUAL_TOL = 1e-10

__all__ = [
    "FluidParams", "InterfaceState", "VorticityDensity", "DiscreteBlockOperator", "BIESolution",
    "assemble", "assemble_both", "solve_omega", "solve", "compute_phi", "neumann_radius",
    "rayleigh_taylor", "resolvent_condition",
]


@lru_cache(maxsize=8)
def _hilbert(grid: Grid):
    H = hilbert_matrix(grid)
    H.setflags(write=False)
    return H


@dataclass
class DiscreteBlockOperator:
    """2x2 block quadrature matrix of calA(X) or calB(X)."""

    which: str
    blocks: tuple  # ((11, 12), (21, 22))
    state: InterfaceState = field(repr=False)

    @property
    def matrix(self) -> np.ndarray:
        return np.block([[self.blocks[0][0], self.blocks[0][1]],
                         [self.blocks[1][0], self.blocks[1][1]]])

    def apply(self, w: VorticityDensity):
        (a, b), (c, d) = self.blocks
        return a @ w.w1 + b @ w.w2, c @ w.w1 + d @ w.w2

    def __matmul__(self, w):
        return self.matrix @ np.asarray(w)


def assemble_both(X: InterfaceState):
    """(calA, calB) sharing one kernel evaluation per block."""
    H = _hilbert(X.grid)
    Af, Bf = kernels.graph_matrices(X.grid, X.f, X.fp, X.fpp, hmat=H)
    Ah, Bh = kernels.graph_matrices(X.grid, X.h, X.hp, X.hpp, hmat=H)
    S, T = kernels.layer_matrices(X, primed=False)
    Sp, Tp = kernels.layer_matrices(X, primed=True)
    calA = DiscreteBlockOperator("calA", ((Af, S), (Sp, Ah)), X)
    calB = DiscreteBlockOperator("calB", ((Bf, T), (Tp, Bh)), X)
    return calA, calB


def assemble(which, X: InterfaceState) -> DiscreteBlockOperator:
    if which not in ("calA", "calB"):
        raise ValueError(f"which must be 'calA' or 'calB', got {which!r}")
    calA, calB = assemble_both(X)
    return calA if which == "calA" else calB


@dataclass
class BIESolution:
    omega: VorticityDensity
    phi: tuple
    cond: float
    residual: float
    calA: DiscreteBlockOperator = field(repr=False, default=None)
    calB: DiscreteBlockOperator = field(repr=False, default=None)


def _rhs(X):
    p = X.params
    return np.concatenate([p.theta1 * X.fp, p.theta2 * X.hp])


def _system(X, calA):
    a = np.repeat(X.params.a_mu, X.grid.N)
    return np.eye(2 * X.grid.N) - a[:, None] * calA.matrix


def _inv_1norm(lu_piv, n, max_iter=5):
    """Hager-Higham estimate of ||M^-1||_1 from an LU factorization.

    Used instead of LAPACK's condition estimator, whose last bits were found to
    vary between otherwise identical processes.
    """
    x = np.full(n, 1.0 / n)
    est = 0.0
    for _ in range(max_iter):
        y = linalg.lu_solve(lu_piv, x)
        new = float(np.sum(np.abs(y)))
        if not np.isfinite(new):
            return np.inf
        if new <= est:
            break
        est = new
        z = linalg.lu_solve(lu_piv, np.where(y >= 0, 1.0, -1.0), trans=1)
        j = int(np.argmax(np.abs(z)))
        if abs(z[j]) <= z @ x:
            break
        x = np.zeros(n)
        x[j] = 1.0
    alt = (-1.0) ** np.arange(n) * (1.0 + np.arange(n) / max(n - 1, 1))
    alt_est = 2.0 * float(np.sum(np.abs(linalg.lu_solve(lu_piv, alt)))) / (3.0 * n)
    return max(est, alt_est)


def _cond_1norm(M, lu_piv):
    inv = _inv_1norm(lu_piv, M.shape[0])
    return float(np.linalg.norm(M, 1) * inv)


def solve(X: InterfaceState, cond_max=COND_MAX, keep_operators=True) -> BIESolution:
    """Solve for the density and evaluate Phi in one pass."""
    calA, calB = assemble_both(X)
    rhs = _rhs(X)
    scale = np.max(np.abs(rhs))
    if X.params.equal_viscosity:
        w = rhs.copy()
        cond, res = 1.0, 0.0
    else:
        M = _system(X, calA)
        try:
            lu, piv = linalg.lu_factor(M, check_finite=True)
        except (ValueError, linalg.LinAlgError) as exc:
            raise InvertibilityFailure(f"factorization failed: {exc}") from exc
        cond = _cond_1norm(M, (lu, piv))
        if not cond <= cond_max:
            radius = None
            if X.params.a1 * X.params.a2 < 0:
                try:
                    radius = neumann_radius(X, X.params.a1, X.params.a2)
                except InvertibilityFailure:
                    pass
            raise InvertibilityFailure(
                f"condition estimate {cond:.3e} exceeds {cond_max:.1e}"
                + ("" if radius is None else f"; Neumann radius estimate {radius:.4f}"),
                cond=cond, radius=radius)
        w = linalg.lu_solve((lu, piv), rhs)
        r = rhs - M @ w
        res = np.max(np.abs(r))
        for _ in range(3):
            if res <= RESIDUAL_TOL * scale:
                break
            w = w + linalg.lu_solve((lu, piv), r)
            r = rhs - M @ w
            res = np.max(np.abs(r))
        if not np.all(np.isfinite(w)) or (scale > 0 and res > RESIDUAL_TOL * scale):
            raise InvertibilityFailure(f"residual {res:.3e} above tolerance", cond=cond)
    omega = VorticityDensity.from_stacked(w)
    phi = calB.apply(omega)
    return BIESolution(omega, phi, float(cond), float(res),
                       calA if keep_operators else None, calB if keep_operators else None)


def solve_omega(X: InterfaceState, cond_max=COND_MAX) -> VorticityDensity:
    return solve(X, cond_max, keep_operators=False).omega


def compute_phi(X: InterfaceState, cond_max=COND_MAX):
    return solve(X, cond_max, keep_operators=False).phi


def rayleigh_taylor(X: InterfaceState, phi=None):
    """Pointwise Rayleigh-Taylor functions (R1, R2); the state is RT-stable iff both are < 0."""
    p = X.params
    if p.equal_viscosity:
        n = X.grid.N
        return np.full(n, p.theta1), np.full(n, p.theta2)
    if phi is None:
        phi = compute_phi(X)
    return p.theta1 + p.a1 * phi[0], p.theta2 + p.a2 * phi[1]


def neumann_radius(X: InterfaceState, a1, a2, iters=50, tol=1e-6, seed=0) -> float:
    """Power-iteration estimate of the spectral radius of the coupled Neumann operator.

    The operator is a1 a2 (1 - a1 A(f))^-1 S (1 - a2 A(h))^-1 S'.
    """
    if not (abs(a1) < 1 and abs(a2) < 1):
        raise ValueError("need |a1| < 1 and |a2| < 1")
    if a1 * a2 == 0:
        return 0.0
    grid = X.grid
    H = _hilbert(grid)
    Af, _ = kernels.graph_matrices(grid, X.f, X.fp, X.fpp, hmat=H)
    Ah, _ = kernels.graph_matrices(grid, X.h, X.hp, X.hpp, hmat=H)
    S, _ = kernels.layer_matrices(X, primed=False)
    Sp, _ = kernels.layer_matrices(X, primed=True)
    I = np.eye(grid.N)
    try:
        lu1 = linalg.lu_factor(I - a1 * Af)
        lu2 = linalg.lu_factor(I - a2 * Ah)
    except (ValueError, linalg.LinAlgError) as exc:
        raise InvertibilityFailure(f"inner resolvent factorization failed: {exc}") from exc

    def op(v):
        return a1 * a2 * linalg.lu_solve(lu1, S @ linalg.lu_solve(lu2, Sp @ v))

    v = np.random.default_rng(seed).standard_normal(grid.N)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        y = op(v)
        new = float(np.linalg.norm(y))
        if new == 0.0:
            return 0.0
        v = y / new
        if abs(new - est) <= tol * new:
            est = new
            break
        est = new
    return est


def resolvent_condition(X: InterfaceState, lam) -> float:
    """1-norm condition estimate of lam - calA(X)."""
    calA = assemble("calA", X)
    M = lam * np.eye(2 * X.grid.N) - calA.matrix
    return _cond_1norm(M, linalg.lu_factor(M))
