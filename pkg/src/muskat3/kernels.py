"""Quadrature of the interface integral operators.

Every operator is an integral over s in R of a kernel K(x, s) times w(x - s).
On the periodic grid the whole-line integral of a 2L-periodic density equals
the integral over one period of the image sum  sum_j K(x, s + 2Lj), and for all
kernels used here the image sum is available in closed form or as a rapidly
convergent series.  So no tail is dropped: the only discretisation error is the
trapezoid rule on a smooth periodic integrand.

Closed forms come from the periodic Cauchy kernel

    P(w) = sum_j 1/(w + 2Lj) = (pi/2L) cot(pi w / 2L),

with w = s + i*delta.  For the graph operators

    (u' s - delta)/(s^2 + delta^2) = Re[(u' - i) / (s + i delta)],
    (s + u' delta)/(s^2 + delta^2) = -Im[(u' - i) / (s + i delta)].

The 1/s part of a principal-value kernel is replaced by its periodic analogue
(pi/2L) cot(pi s/2L), whose principal-value integral against w is pi*H[w]
exactly (H = periodic Hilbert transform).  The remainder is smooth and its
diagonal value is the analytic s -> 0 limit.

All matrix builders return the full quadrature weights (1/pi and dx included),
so ``M @ w`` is the operator applied to ``w``.
"""
from __future__ import annotations

from enum import Enum

import numpy as np
from scipy.special import zeta

from .errors import InterfaceCollision
from .grid import Grid, hilbert_matrix

# image series in q/t^2 is summed only while q stays well inside the unit ball
IMAGE_RATIO_MAX = 0.25


class KernelKind(str, Enum):
    A_op = "A_op"
    B_op = "B_op"
    S = "S"
    Sprime = "Sprime"
    T = "T"
    Tprime = "Tprime"
    C = "C"
    Cprime = "Cprime"
    D = "D"
    Dprime = "Dprime"


def _kind(kind) -> KernelKind:
    try:
        return KernelKind(kind)
    except ValueError:
        raise ValueError(f"unknown kernel kind {kind!r}") from None


# --------------------------------------------------------------------- basics

def periodic_cauchy(w, L):
    """``sum_j 1/(w + 2Lj)`` (symmetric summation) for complex ``w``."""
    z = np.pi * np.asarray(w) / (2.0 * L)
    return (np.pi / (2.0 * L)) / np.tan(z)


def periodic_inverse(s, L):
    """Real periodic analogue of 1/s, zero at s = 0."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    nz = s != 0.0
    out[nz] = (np.pi / (2.0 * L)) / np.tan(np.pi * s[nz] / (2.0 * L))
    return out


def image_zeta(nu, sigma):
    """``sum_{j != 0} (j + sigma)^(-nu)`` for |sigma| <= 1/2 and integer nu >= 1."""
    sigma = np.asarray(sigma, dtype=float)
    if nu == 1:
        out = np.zeros_like(sigma)
        nz = sigma != 0.0
        out[nz] = np.pi / np.tan(np.pi * sigma[nz]) - 1.0 / sigma[nz]
        return out
    return zeta(nu, 1.0 + sigma) + (-1.0) ** nu * zeta(nu, 1.0 - sigma)


def _circulant_index(N):
    idx = np.arange(N)
    return (idx[:, None] - idx[None, :]) % N


def _offset_values(grid: Grid):
    """Wrapped offsets s_m for m = 0..N-1, in the order used by ``_circulant_index``."""
    N = grid.N
    m = (np.arange(N) + N // 2) % N - N // 2
    return m * grid.dx


def _image_series(grid: Grid, q_list, prefactor_nu, prefactor=None, rtol=1e-17, max_terms=400):
    """``sum_{j != 0} t^(-nu0) / prod_k (1 + q_k / t^2)`` at t = s + 2Lj, s = wrapped offsets.

    ``q_list`` holds matrices of q_k(x_i, s_ij) >= 0.  The expansion
    ``1/prod(1 + q_k/t^2) = sum_r (-1)^r h_r(q) t^(-2r)`` with complete
    homogeneous polynomials h_r converges since |t| >= L on every image.
    """
    L = grid.L
    N = grid.N
    if q_list:
        qmax = max(float(np.max(q)) for q in q_list)
        if qmax / L**2 >= IMAGE_RATIO_MAX:
            raise ValueError(
                f"profile differences too large for the periodic image series "
                f"(max delta^2/L^2 = {qmax / L**2:.3f} >= {IMAGE_RATIO_MAX}); enlarge the window"
            )
    sigma = _offset_values(grid) / (2.0 * L)
    cidx = _circulant_index(N)

    def z_matrix(nu):
        return ((2.0 * L) ** (-nu) * image_zeta(nu, sigma))[cidx]

    acc = z_matrix(prefactor_nu)
    if not q_list:
        return acc if prefactor is None else prefactor * acc
    m = len(q_list)
    # H[k] holds h_r(q_1..q_{k+1}) for the current r
    H_prev = [np.ones((N, N)) for _ in range(m)]
    scale = np.max(np.abs(acc)) + 1e-300
    for r in range(1, max_terms):
        H_cur = []
        below = None
        for k in range(m):
            val = q_list[k] * H_prev[k]
            if below is not None:
                val = val + below
            H_cur.append(val)
            below = val
        term = (-1.0) ** r * H_cur[-1] * z_matrix(prefactor_nu + 2 * r)
        acc = acc + term
        H_prev = H_cur
        if np.max(np.abs(term)) <= rtol * scale:
            break
    else:
        raise RuntimeError("image series did not converge")
    return acc if prefactor is None else prefactor * acc


# -------------------------------------------------------- graph self-operators

def _self_kernels(grid: Grid, u, up=None, upp=None):
    """Smooth remainders (A, B) of the graph kernels of ``u`` as quadrature matrices.

    The B remainder excludes the periodic 1/s part, which is handled by H.
    """
    if up is None:
        up = grid.derivative(u, check=False)
    if upp is None:
        upp = grid.derivative(u, order=2, check=False)
    s = grid.offsets()
    w = s + 1j * (u[:, None] - u[None, :])
    np.fill_diagonal(w, 1.0)
    Z = (up[:, None] - 1j) * periodic_cauchy(w, grid.L)
    KA = Z.real
    KB = -Z.imag - periodic_inverse(s, grid.L)
    den = 2.0 * (1.0 + up**2)
    np.fill_diagonal(KA, upp / den)
    np.fill_diagonal(KB, up * upp / den)
    wgt = grid.dx / np.pi
    return KA * wgt, KB * wgt


def graph_matrices(grid: Grid, u, up=None, upp=None, hmat=None):
    """Dense quadrature matrices of the two graph operators A(u) and B(u)."""
    A, Brem = _self_kernels(grid, u, up, upp)
    if hmat is None:
        hmat = hilbert_matrix(grid)
    return A, Brem + hmat


def apply_AB(kind, grid: Grid, u, w):
    """Apply A(u) or B(u) to ``w``; the singular part goes through the FFT Hilbert transform."""
    kind = _kind(kind)
    if kind not in (KernelKind.A_op, KernelKind.B_op):
        raise ValueError(f"apply_AB handles A_op/B_op, got {kind.value}")
    u = grid.check_window(u, "u")
    w = grid.check_window(w, "w")
    A, Brem = _self_kernels(grid, u)
    if kind is KernelKind.A_op:
        return A @ w
    return Brem @ w + grid.hilbert(w, check=False)


# ------------------------------------------------------------- layer operators

def _check_gap(X):
    if not X.gap > 0:
        raise InterfaceCollision(f"interfaces touch or cross: gap = {X.gap:.6g}")


def _cross_delta(X, primed):
    c = X.c
    if primed:
        return X.h[:, None] - c - X.f[None, :]
    return c + X.f[:, None] - X.h[None, :]


def layer_matrices(X, primed=False):
    """Quadrature matrices (S, T) of the coupling operators, or (S', T') if ``primed``."""
    _check_gap(X)
    grid = X.grid
    slope = X.hp if primed else X.fp
    w = grid.offsets() + 1j * _cross_delta(X, primed)
    Z = (slope[:, None] - 1j) * periodic_cauchy(w, grid.L)
    wgt = grid.dx / np.pi
    return Z.real * wgt, -Z.imag * wgt


def apply_layer(kind, X, w):
    kind = _kind(kind)
    table = {KernelKind.S: (False, 0), KernelKind.T: (False, 1),
             KernelKind.Sprime: (True, 0), KernelKind.Tprime: (True, 1)}
    if kind not in table:
        raise ValueError(f"apply_layer handles S/Sprime/T/Tprime, got {kind.value}")
    primed, which = table[kind]
    w = X.grid.check_window(w, "w")
    return layer_matrices(X, primed)[which] @ w


# ------------------------------------------------------------ B_{n,m} family

def bnm_matrix(grid: Grid, a, b):
    """Remainder matrix and Hilbert coefficient of B_{n,m}(a)[b, .].

    Returns ``(R, g0)`` such that the operator applied to w is
    ``R @ w + g0 * H[w]``.  ``a`` and ``b`` are sequences of m and n profiles.
    """
    a = [grid.as_profile(ai, "a") for ai in a]
    b = [grid.as_profile(bi, "b") for bi in b]
    n, m = len(b), len(a)
    L = grid.L
    s = grid.offsets()
    diag = np.eye(grid.N, dtype=bool)
    s_safe = np.where(diag, 1.0, s)

    da = [ai[:, None] - ai[None, :] for ai in a]
    db = [bi[:, None] - bi[None, :] for bi in b]

    # principal copy, s in [-L, L)
    K = 1.0 / s_safe
    for d in db:
        K = K * (d / s_safe)
    for d in da:
        K = K / (1.0 + (d / s_safe) ** 2)

    # images j != 0
    num = None
    for d in db:
        num = d if num is None else num * d
    K = K + _image_series(grid, [d**2 for d in da], n + 1, prefactor=num)

    ap = [grid.derivative(ai, check=False) for ai in a]
    app = [grid.derivative(ai, order=2, check=False) for ai in a]
    bp = [grid.derivative(bi, check=False) for bi in b]
    bpp = [grid.derivative(bi, order=2, check=False) for bi in b]
    N0 = np.ones(grid.N)
    for v in bp:
        N0 = N0 * v
    N1 = np.zeros(grid.N)
    for k in range(n):
        t = bpp[k].copy()
        for l in range(n):
            if l != k:
                t = t * bp[l]
        N1 = N1 + t
    D0 = np.ones(grid.N)
    corr = np.zeros(grid.N)
    for k in range(m):
        D0 = D0 * (1.0 + ap[k] ** 2)
        corr = corr + ap[k] * app[k] / (1.0 + ap[k] ** 2)
    g0 = N0 / D0

    K = K - g0[:, None] * periodic_inverse(s, L)
    K[diag] = (-0.5 * N1 + N0 * corr) / D0
    return K * (grid.dx / np.pi), g0


def apply_Bnm(n, m, a, b, w, grid: Grid):
    """Apply B_{n,m}(a_1..a_m)[b_1..b_n, w]."""
    if len(a) != m or len(b) != n:
        raise ValueError(f"expected {m} a-profiles and {n} b-profiles, got {len(a)} and {len(b)}")
    if n < 0 or m < 0:
        raise ValueError("n and m must be non-negative")
    for i, ai in enumerate(a):
        grid.check_window(ai, f"a[{i}]")
    for i, bi in enumerate(b):
        grid.check_window(bi, f"b[{i}]")
    w = grid.check_window(w, "w")
    R, g0 = bnm_matrix(grid, a, b)
    return R @ w + g0 * grid.hilbert(w, check=False)


def bnm0_matrix(grid: Grid, u, n, m, hmat=None):
    """Dense matrix of B^0_{n,m}(u) (all a_i = b_i = u)."""
    R, g0 = bnm_matrix(grid, [u] * m, [u] * n)
    if hmat is None:
        hmat = hilbert_matrix(grid)
    return R + g0[:, None] * hmat


# ---------------------------------------------------------- C_m / D_m family

def cd_matrix(kind, m, X):
    """Quadrature matrix of C_m, C'_m, D_m or D'_m evaluated at (X, ..., X)."""
    kind = _kind(kind)
    if kind not in (KernelKind.C, KernelKind.Cprime, KernelKind.D, KernelKind.Dprime):
        raise ValueError(f"cd_matrix handles C/Cprime/D/Dprime, got {kind.value}")
    if int(m) != m or m < 1:
        raise ValueError(f"order m must be a positive integer, got {m}")
    m = int(m)
    _check_gap(X)
    grid = X.grid
    L = grid.L
    primed = kind in (KernelKind.Cprime, KernelKind.Dprime)
    odd = kind in (KernelKind.D, KernelKind.Dprime)
    s = grid.offsets()
    delta = _cross_delta(X, primed)
    if m == 1:
        # closed-form image sums of 1/(t^2 + d^2) and t/(t^2 + d^2)
        a = np.pi * s / (2.0 * L)
        bb = np.pi * delta / (2.0 * L)
        den = np.sinh(bb) ** 2 + np.sin(a) ** 2
        if odd:
            K = (np.pi / (2.0 * L)) * np.sin(a) * np.cos(a) / den
        else:
            K = (np.pi / (2.0 * L)) * np.sinh(bb) * np.cosh(bb) / (delta * den)
    else:
        base = s**2 + delta**2
        K = (s if odd else 1.0) / base**m
        K = K + _image_series(grid, [delta**2] * m, 2 * m - 1 if odd else 2 * m)
    return K * (grid.dx / np.pi)


def apply_CD(kind, m, X, w):
    w = X.grid.check_window(w, "w")
    return cd_matrix(kind, m, X) @ w
