"""Velocity and pressure around a deformed three-layer state.

    python3 demos/velocity_field.py
"""
import numpy as np

from muskat3 import FluidParams, Grid, InterfaceState, bie, fields

g = Grid(20.0, 256)
P = FluidParams(mu1=1.0, mu2=2.0, mu3=4.0)
x = g.x
X = InterfaceState(g, P, 0.3 * np.exp(-x**2), -0.2 * np.exp(-((x - 1.0) / 1.5) ** 2))

sol = bie.solve(X)
print(f"density solve: cond ~ {sol.cond:.2e}, residual {sol.residual:.1e}")
ev = fields.FieldEvaluator(X, sol.omega)

print(f"\n{'x':>5} {'y':>5} {'region':>14} {'v1':>10} {'v2':>10} {'p':>10} {'darcy':>8}")
for xp in (-2.0, 0.0, 2.0):
    for yp in (2.5, 0.6, -1.5):
        reg = int(ev.classify(xp, yp)[0])
        if reg == 0:
            print(f"{xp:5.1f} {yp:5.1f} {fields.REGION_NAMES[0]:>14}")
            continue
        v1, v2 = ev.velocity_at([xp], [yp])
        p = ev.pressure_at(reg, xp, yp)
        print(f"{xp:5.1f} {yp:5.1f} {fields.REGION_NAMES[reg]:>14} {v1[0]:10.3e} {v2[0]:10.3e} "
              f"{p:10.4f} {ev.darcy_residual(reg, xp, yp):8.1e}")

span_f, span_h = fields.pressure_jump_span(ev)
print(f"\npressure jump spans along the interfaces: {span_f:.1e}, {span_h:.1e}")
r = fields.rellich_residuals(X, sol.omega)
print("Rellich residuals:", ", ".join(f"{v:.1e}" for v in r.relative))
