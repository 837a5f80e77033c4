"""Flat-interface dispersion relation and frozen-coefficient diagnostics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bie, kernels
from .grid import Grid
from .state import FluidParams, InterfaceState


@dataclass(frozen=True)
class DispersionMatrix:
    k: float
    M: np.ndarray
    eigenvalues: np.ndarray


def dispersion_matrix(k, params: FluidParams) -> DispersionMatrix:
    """Linear growth matrix of the flat state: d/dt (f_hat, h_hat) = M(k) (f_hat, h_hat).

    Built from the flat symbols: A_hat = [[0, -e], [e, 0]] and
    B_hat = -i sign(k) [[1, e], [e, 1]] with e = exp(-c_inf |k|), so
    M = |k| [[1, e], [e, 1]] (I - A_mu A_hat)^-1 Theta.
    """
    k = float(k)
    if not np.isfinite(k) or k < 0:
        raise ValueError(f"k must be finite and non-negative, got {k}")
    if k == 0.0:
        M = np.zeros((2, 2))
        return DispersionMatrix(0.0, M, np.zeros(2))
    e = np.exp(-params.c_inf * abs(k))
    Ahat = np.array([[0.0, -e], [e, 0.0]])
    res = np.eye(2) - np.diag(params.a_mu) @ Ahat
    M = abs(k) * np.array([[1.0, e], [e, 1.0]]) @ np.linalg.solve(res, np.diag(params.theta))
    lam = np.linalg.eigvals(M)
    lam = lam[np.lexsort((lam.imag, lam.real))]
    return DispersionMatrix(k, M, lam)


def fd_linearization(grid: Grid, params: FluidParams, mode: int, eps=1e-7) -> np.ndarray:
    """Finite-difference linearization of Phi at X = 0 on the cosine mode ``mode``.

    Column j holds the cosine coefficients of Phi for a perturbation eps*cos(kx)
    of interface j, divided by eps.
    """
    k = np.pi * mode / grid.L
    c = np.cos(k * grid.x)
    M = np.zeros((2, 2))
    z = np.zeros(grid.N)
    for j, (f, h) in enumerate([(eps * c, z), (z, eps * c)]):
        X = InterfaceState(grid, params, f, h)
        phi = bie.compute_phi(X)
        for i in range(2):
            M[i, j] = 2.0 * np.mean(phi[i] * c) / eps
    return M


@dataclass(frozen=True)
class PrincipalSymbol:
    """Frozen coefficients of alpha (-d^2/dx^2)^(1/2) + beta d/dx at one node."""

    alpha: float
    beta: float
    interface: str
    derived_by_analogy: bool


def _bnm11(grid, u):
    return kernels.bnm0_matrix(grid, u, 1, 1, hmat=bie._hilbert(grid))


def principal_symbol(X: InterfaceState, sol: bie.BIESolution = None, x0: int = None, interface="f"):
    """Frozen principal coefficients (alpha, beta) at node index ``x0``.

    For the upper interface:
      alpha = (Theta_1 + a_mu^1 Phi_1) / (1 + f'^2),
      beta  = B^0_{1,1}(f)[w1] + a_1(X) + a_mu^1 w1 / (1 + f'^2),
      a_1(X) = (c + f) C_1[w2] - C_1[h w2].
    The lower-interface version is obtained by f <-> h, c <-> -c,
    (Theta_1, a_mu^1) <-> (Theta_2, a_mu^2) and is flagged as derived by analogy.
    Passing ``x0=None`` returns whole profiles instead of node values.
    """
    if sol is None:
        sol = bie.solve(X, keep_operators=False)
    p = X.params
    grid = X.grid
    w1, w2 = sol.omega.w1, sol.omega.w2
    R1, R2 = bie.rayleigh_taylor(X, sol.phi)
    if interface == "f":
        alpha = R1 / (1.0 + X.fp**2)
        C1 = kernels.cd_matrix("C", 1, X)
        acoef = (X.c + X.f) * (C1 @ w2) - C1 @ (X.h * w2)
        beta = _bnm11(grid, X.f) @ w1 + acoef + p.a1 * w1 / (1.0 + X.fp**2)
        analog = False
    elif interface == "h":
        alpha = R2 / (1.0 + X.hp**2)
        C1p = kernels.cd_matrix("Cprime", 1, X)
        acoef = (X.h - X.c) * (C1p @ w1) - C1p @ (X.f * w1)
        beta = _bnm11(grid, X.h) @ w2 + acoef + p.a2 * w2 / (1.0 + X.hp**2)
        analog = True
    else:
        raise ValueError(f"interface must be 'f' or 'h', got {interface!r}")
    if x0 is None:
        return PrincipalSymbol(alpha, beta, interface, analog)
    return PrincipalSymbol(float(alpha[x0]), float(beta[x0]), interface, analog)


def default_k_grid(c_inf=1.0, n=200):
    return np.linspace(0.0, 20.0 / c_inf, n + 1)[1:]


def rt_region_scan(param_grid, k_grid=None):
    """Classify each parameter set at the flat state.

    Returns rows ``(params, rt_stable, spectral_gap)`` where ``spectral_gap`` is
    min over k of -max Re(lambda(k)) / |k|; positive means every flat mode decays.
    """
    rows = []
    for params in param_grid:
        ks = default_k_grid(params.c_inf) if k_grid is None else np.asarray(k_grid, dtype=float)
        stable = params.theta1 < 0 and params.theta2 < 0
        gaps = []
        for k in ks:
            if k <= 0:
                continue
            lam = dispersion_matrix(k, params).eigenvalues
            gaps.append(-np.max(lam.real) / abs(k))
        rows.append((params, bool(stable), float(np.min(gaps)) if gaps else float("nan")))
    return rows
