# Finite-volume solver against closed-form solutions.
import numpy as np

from degpar.problem import builtin_problem
from degpar.solver import Field, Grid, barenblatt, heat_gaussian, make_initial, solve, viscosity_sweep

# Burgers: the shock from a unit step moves at speed 1/2
burgers = builtin_problem("burgers_1d")
g = Grid((1024,), burgers.box)
tr = solve(burgers, g, 0.0, make_initial(burgers.initial, g), 0.5)
x, u = g.centers(0), tr.final.values
print("shock at", x[x > 0][np.argmax(u[x > 0] < 0.5)], "expected 0.25")
print("steps", tr.meta["steps"], "range", tr.meta["min"], tr.meta["max"])

# Heat equation against the spreading Gaussian
heat = builtin_problem("heat")
g = Grid((512,), heat.box)
tr = solve(heat, g, 0.0, make_initial(heat.initial, g), 0.1)
print("heat L2 error", np.sqrt(np.sum((tr.final.values - heat_gaussian(g, 0.1, 0.25)) ** 2) * g.dx[0]))

# Porous medium: start from the Barenblatt profile at t=0.1
pm = builtin_problem("porous_medium", {"m_pm": 2})
g = Grid((1024,), pm.box)
u0 = Field(make_initial(pm.initial, g).values, g, 0.1)
tr = solve(pm, g, 0.0, u0, 0.9)
print("barenblatt L1 error", np.abs(tr.final.values - barenblatt(g.centers(0), 1.0, 2.0, 0.5)).sum() * g.dx[0])

# Vanishing viscosity on the degenerate 2D example
tt = builtin_problem("tt_example", {"l": 1, "n": 1})
g = Grid((64, 64), tt.box)
for t in viscosity_sweep(tt, g, [0.08, 0.04, 0.02], make_initial(tt.initial, g), 0.1):
    print(f"eps={t.epsilon}: max={t.final.values.max():.4f} mass={t.final.integral():.6f}")
