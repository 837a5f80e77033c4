"""Flat-state growth rates: how viscosity contrast couples the two interfaces.

    python3 demos/dispersion.py
"""
import numpy as np

from muskat3 import FluidParams, linear

cases = {
    "equal viscosity": FluidParams(),
    "viscosity increasing downwards": FluidParams(mu1=1.0, mu2=2.0, mu3=4.0),
    "viscous middle layer": FluidParams(mu1=1.0, mu2=3.0, mu3=1.0),
}

ks = np.array([0.25, 0.5, 1.0, 2.0, 4.0])
for name, P in cases.items():
    print(f"\n{name}: theta = {P.theta1:.3f}, {P.theta2:.3f}  a_mu = {P.a1:.3f}, {P.a2:.3f}")
    print(f"{'k':>6} {'lam_fast':>10} {'lam_slow':>10} {'|M12|/|M11|':>12}")
    for k in ks:
        d = linear.dispersion_matrix(k, P)
        lam = np.sort(d.eigenvalues.real)
        print(f"{k:6.2f} {lam[0]:10.4f} {lam[1]:10.4f} {abs(d.M[0, 1] / d.M[0, 0]):12.3e}")

# the coupling dies off like exp(-c k): thin middle layers couple longer waves
for c in (0.5, 1.0, 2.0):
    P = FluidParams(mu1=1.0, mu2=2.0, mu3=4.0, c_inf=c)
    d = linear.dispersion_matrix(1.0, P)
    print(f"c_inf = {c}: |M12 / M11| at k = 1 is {abs(d.M[0, 1] / d.M[0, 0]):.3e}")

rows = linear.rt_region_scan([FluidParams(rho1=1, rho2=r, rho3=3) for r in (0.5, 1.5, 2.5, 3.5)])
print("\nrho2  stable  spectral gap")
for P, stable, gap in rows:
    print(f"{P.rho2:4.1f}  {str(stable):6}  {gap:.4f}")
