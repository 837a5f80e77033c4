"""Relaxation of two perturbed interfaces, with the run-time monitors.

    python3 demos/evolve_bumps.py
"""
import numpy as np

from muskat3 import FluidParams, Grid, InterfaceState
from muskat3.evolution import StepperConfig, simulate

g = Grid(20.0, 256)
P = FluidParams(mu1=1.0, mu2=2.0, mu3=4.0)
x = g.x
X0 = InterfaceState(g, P, 0.3 * np.exp(-x**2), -0.2 * np.exp(-((x - 1.0) / 1.5) ** 2))

res = simulate(X0, StepperConfig(t_end=4.0, snapshot_every=10))
acc = [r for r in res.records if r.accepted]
print(f"{res.event.name}: {res.message}")
print(f"{len(acc)} accepted steps, {len(res.records) - len(acc)} rejected")
print(f"{'t':>7} {'max|f|':>9} {'max|h|':>9} {'gap':>7} {'-max R1':>8} {'mass f':>11}")
for r in acc[:: max(1, len(acc) // 10)] + [acc[-1]]:
    print(f"{r.time:7.3f} {r.max_f:9.5f} {r.max_h:9.5f} {r.gap:7.4f} {-r.max_R1:8.4f} {r.mass_f:11.3e}")

# mass of each interface is conserved to integrator tolerance
drift = max(abs(r.mass_f - g.integrate(X0.f)) for r in acc)
print(f"max mass drift of f: {drift:.2e}")
