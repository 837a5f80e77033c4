"""Physical parameters and sampled interface / density pairs."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InterfaceCollision
from .grid import Grid


@dataclass(frozen=True)
class FluidParams:
    """Densities, viscosities, permeability, gravity and the rest separation ``c_inf``.

    Fluid 1 sits above the upper interface, fluid 3 below the lower one.
    """

    rho1: float = 1.0
    rho2: float = 2.0
    rho3: float = 3.0
    mu1: float = 1.0
    mu2: float = 1.0
    mu3: float = 1.0
    k: float = 1.0
    g: float = 1.0
    c_inf: float = 1.0

    def __post_init__(self):
        for name in ("rho1", "rho2", "rho3", "mu1", "mu2", "mu3", "k", "g", "c_inf"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v <= 0:
                raise ValueError(f"{name} must be a positive finite number, got {getattr(self, name)}")
            object.__setattr__(self, name, v)

    @property
    def theta1(self) -> float:
        return (self.rho1 - self.rho2) * self.g * self.k / (self.mu1 + self.mu2)

    @property
    def theta2(self) -> float:
        return (self.rho2 - self.rho3) * self.g * self.k / (self.mu2 + self.mu3)

    @property
    def a1(self) -> float:
        return (self.mu1 - self.mu2) / (self.mu1 + self.mu2)

    @property
    def a2(self) -> float:
        return (self.mu2 - self.mu3) / (self.mu2 + self.mu3)

    @property
    def theta(self) -> np.ndarray:
        return np.array([self.theta1, self.theta2])

    @property
    def a_mu(self) -> np.ndarray:
        return np.array([self.a1, self.a2])

    @property
    def stably_stratified(self) -> bool:
        """True when rho3 > rho2 > rho1, i.e. both theta_i < 0."""
        return self.rho3 > self.rho2 > self.rho1

    @property
    def equal_viscosity(self) -> bool:
        return self.a1 == 0.0 and self.a2 == 0.0

    def mu(self, region: int) -> float:
        return (self.mu1, self.mu2, self.mu3)[region - 1]

    def rho(self, region: int) -> float:
        return (self.rho1, self.rho2, self.rho3)[region - 1]

    def m_constant(self) -> float:
        """Lower-bound constant of the viscosity-ordered case (logged only)."""
        a1, a2 = self.a1, self.a2
        if a1 == 0.0 or a2 == 0.0:
            return float("inf")
        return min((1 + a1) / abs(a1), (1 - a2) / abs(a2), abs(a1) * (1 - a1), abs(a2) * (1 + a2))

    def derived(self) -> dict:
        return {"theta1": self.theta1, "theta2": self.theta2, "a_mu1": self.a1, "a_mu2": self.a2}


class InterfaceState:
    """The pair X = (f, h): upper interface at ``c_inf + f``, lower at ``h``.

    Construction checks finiteness, the window predicate and ``gap > 0``.
    Derivatives are computed once on first use.
    """

    def __init__(self, grid: Grid, params: FluidParams, f, h, validate=True):
        self.grid = grid
        self.params = params
        if validate:
            f = grid.check_window(f, "f")
            h = grid.check_window(h, "h")
        else:
            f = grid.as_profile(f, "f")
            h = grid.as_profile(h, "h")
        self.f = f
        self.h = h
        if validate and not self.gap > 0:
            raise InterfaceCollision(f"interfaces touch or cross: gap = {self.gap:.6g}")

    @classmethod
    def flat(cls, grid, params):
        z = np.zeros(grid.N)
        return cls(grid, params, z, z)

    @property
    def c(self) -> float:
        return self.params.c_inf

    @cached_property
    def gap(self) -> float:
        return float(np.min(self.params.c_inf + self.f - self.h))

    @cached_property
    def fp(self):
        return self.grid.derivative(self.f, check=False)

    @cached_property
    def hp(self):
        return self.grid.derivative(self.h, check=False)

    @cached_property
    def fpp(self):
        return self.grid.derivative(self.f, order=2, check=False)

    @cached_property
    def hpp(self):
        return self.grid.derivative(self.h, order=2, check=False)

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.f, self.h])

    def with_profiles(self, f, h, validate=True):
        return InterfaceState(self.grid, self.params, f, h, validate=validate)

    def __repr__(self):
        return (f"InterfaceState(N={self.grid.N}, L={self.grid.L}, |f|={np.max(np.abs(self.f)):.3g}, "
                f"|h|={np.max(np.abs(self.h)):.3g}, gap={self.gap:.3g})")


@dataclass(frozen=True)
class VorticityDensity:
    """Sampled densities (omega_1 on the upper interface, omega_2 on the lower one)."""

    w1: np.ndarray
    w2: np.ndarray

    @classmethod
    def from_stacked(cls, w):
        w = np.asarray(w, dtype=float)
        n = w.size // 2
        return cls(w[:n].copy(), w[n:].copy())

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n), np.zeros(n))

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.w1, self.w2])
