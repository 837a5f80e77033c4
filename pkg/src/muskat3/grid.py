"""Uniform periodic grid on [-L, L) with spectral calculus.

Profiles are plain float arrays of length ``N`` sampled at ``grid.x``.  They are
treated as one period of a 2L-periodic function, so every spectral operation is
exact for band-limited data.  A profile is admissible ("window-compatible") if it
is decayed at the window edge or if its periodic extension is spectrally
resolved; anything else raises :class:`WindowViolation`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import WindowViolation

DECAY_TOL = 1e-10
EDGE_FRACTION = 0.1
# relative size allowed for the top 10% of Fourier modes of a periodic profile
RESOLVED_TOL = 1e-10


@dataclass(frozen=True)
class Grid:
    """Uniform grid ``x_j = -L + j*dx``, ``j = 0..N-1``, ``dx = 2L/N``."""

    half_length: float
    n_nodes: int
    decay_tol: float = DECAY_TOL
    _k: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        L, N = float(self.half_length), int(self.n_nodes)
        if not np.isfinite(L) or L <= 0:
            raise ValueError(f"half_length must be positive, got {self.half_length}")
        if N != self.n_nodes or N < 16 or N % 2:
            raise ValueError(f"n_nodes must be an even integer >= 16, got {self.n_nodes}")
        object.__setattr__(self, "half_length", L)
        object.__setattr__(self, "n_nodes", N)
        k = np.fft.fftfreq(N, d=2.0 * L / N) * 2.0 * np.pi
        k.setflags(write=False)
        object.__setattr__(self, "_k", k)

    @property
    def L(self) -> float:
        return self.half_length

    @property
    def N(self) -> int:
        return self.n_nodes

    @property
    def dx(self) -> float:
        return 2.0 * self.half_length / self.n_nodes

    @property
    def x(self) -> np.ndarray:
        return -self.half_length + self.dx * np.arange(self.n_nodes)

    @property
    def wavenumbers(self) -> np.ndarray:
        """Physical wavenumbers ``k_m = pi*m/L`` in FFT order."""
        return self._k

    def offsets(self) -> np.ndarray:
        """Matrix of signed separations ``s_ij = x_i - x_j`` wrapped into [-L, L)."""
        N = self.n_nodes
        idx = np.arange(N)
        m = (idx[:, None] - idx[None, :] + N // 2) % N - N // 2
        return m * self.dx

    # ------------------------------------------------------------------ checks

    def as_profile(self, values, name="profile") -> np.ndarray:
        v = np.asarray(values, dtype=float)
        if v.shape != (self.n_nodes,):
            raise ValueError(f"{name} has shape {v.shape}, expected ({self.n_nodes},)")
        if not np.all(np.isfinite(v)):
            raise ValueError(f"{name} contains non-finite values")
        return v

    def edge_max(self, values) -> float:
        v = np.asarray(values)
        n_edge = max(1, int(round(EDGE_FRACTION * self.n_nodes / 2)))
        return float(max(np.max(np.abs(v[:n_edge])), np.max(np.abs(v[-n_edge:]))))

    def is_decayed(self, values, tol=None) -> bool:
        """Max of |values| over the outer 10% of nodes is below ``decay_tol``."""
        tol = self.decay_tol if tol is None else tol
        return self.edge_max(values) <= tol

    def spectral_tail(self, values) -> float:
        """Largest Fourier amplitude among the top 10% of wavenumbers, relative to max|values|."""
        v = np.asarray(values, dtype=float)
        scale = np.max(np.abs(v))
        if scale == 0.0:
            return 0.0
        c = np.abs(np.fft.rfft(v)) / self.n_nodes
        cut = int(0.4 * self.n_nodes)
        return float(np.max(c[cut:]) / scale)

    def is_resolved(self, values, tol=RESOLVED_TOL) -> bool:
        return self.spectral_tail(values) <= tol

    def window_ok(self, values) -> bool:
        return self.is_decayed(values) or self.is_resolved(values)

    def check_window(self, values, name="profile") -> np.ndarray:
        v = self.as_profile(values, name)
        if not self.window_ok(v):
            raise WindowViolation(
                f"{name} is not decayed at the window edge "
                f"(edge max {self.edge_max(v):.3e} > {self.decay_tol:.1e}) and its periodic "
                f"extension is not resolved (spectral tail {self.spectral_tail(v):.3e})"
            )
        return v

    # --------------------------------------------------------------- spectral

    def transform(self, values) -> np.ndarray:
        """Fourier coefficients ``c_m`` with ``values_j = sum_m c_m exp(i k_m (x_j + L))``."""
        return np.fft.fft(np.asarray(values, dtype=complex)) / self.n_nodes

    def inverse(self, coeffs) -> np.ndarray:
        return np.fft.ifft(np.asarray(coeffs) * self.n_nodes)

    def _multiplier(self, values, symbol, check):
        v = self.check_window(values) if check else self.as_profile(values)
        c = np.fft.rfft(v)
        k = self._k[: c.size].copy()
        k[-1] = abs(k[-1])
        mult = symbol(k)
        mult[-1] = 0.0  # Nyquist mode carries no sign information
        return np.fft.irfft(c * mult, n=self.n_nodes)

    def derivative(self, values, order=1, check=True) -> np.ndarray:
        """Spectral derivative of the periodic extension."""
        if order == 0:
            return self.as_profile(values)
        return self._multiplier(values, lambda k: (1j * k) ** order, check)

    def hilbert(self, values, check=True) -> np.ndarray:
        """Hilbert transform, symbol ``-i sign(k)``; the mean maps to zero."""
        return self._multiplier(values, lambda k: -1j * np.sign(k), check)

    def antiderivative(self, values, x0=0.0) -> np.ndarray:
        """``F(x_j) = int_{x0}^{x_j} values``; the mean contributes a linear term."""
        v = self.as_profile(values)
        c = np.fft.rfft(v)
        k = self._k[: c.size].copy()
        k[-1] = abs(k[-1])
        mean = c[0].real / self.n_nodes
        c[0] = 0.0
        c[-1] = 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            c[1:] = c[1:] / (1j * k[1:])
        F = np.fft.irfft(c, n=self.n_nodes)
        F0 = self.interpolate(F, x0)
        return F - F0 + mean * (self.x - x0)

    def integrate(self, values) -> float:
        """Trapezoidal (periodic) sum ``dx * sum(values)``."""
        return float(self.dx * np.sum(np.asarray(values, dtype=float)))

    def interpolate(self, values, xq) -> np.ndarray:
        """Trigonometric interpolant of ``values`` evaluated at arbitrary ``xq``."""
        v = np.asarray(values, dtype=float)
        xq = np.asarray(xq, dtype=float)
        N = self.n_nodes
        c = np.fft.rfft(v) / N
        k = np.abs(self._k[: c.size])
        phase = np.exp(1j * np.multiply.outer(xq + self.half_length, k))
        w = np.full(c.size, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return np.real(phase @ (w * c))

    def band_limit(self, values) -> np.ndarray:
        """Remove the Nyquist mode (makes a sampled profile exactly differentiable)."""
        c = np.fft.rfft(np.asarray(values, dtype=float))
        c[-1] = 0.0
        return np.fft.irfft(c, n=self.n_nodes)


def hilbert_matrix(grid: Grid) -> np.ndarray:
    """Dense circulant matrix of :meth:`Grid.hilbert`."""
    N = grid.N
    col = grid.hilbert(np.eye(N)[0], check=False)
    idx = np.arange(N)
    return col[(idx[:, None] - idx[None, :]) % N]
