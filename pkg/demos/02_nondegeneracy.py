# How often does the symbol nearly vanish?  Fit meas{L <= delta} ~ delta^alpha.
import numpy as np

from degpar.nondeg import estimate_alpha, fit_loglog, level_set_measure, symbol_value
from degpar.problem import builtin_problem

spec = builtin_problem("tt_example", {"l": 1, "n": 1})
print(spec.name, "interval", spec.interval)

# The symbol at one direction; time frequency comes first
xi = np.array([0.0, 0.0, 1.0])
lam = np.linspace(-1, 1, 5)
print(symbol_value(spec, xi, lam))  # |lam|, diffusion only

# Pure-diffusion direction: the level set scales like delta^(1/n)
deltas = np.geomspace(1e-4, 1e-1, 12)
for n in (1, 2, 4):
    s = builtin_problem("tt_example", {"l": 1, "n": n})
    meas = [level_set_measure(s, xi, d, (-1, 1), 10**5) for d in deltas]
    print(f"n={n} slope={fit_loglog(deltas, meas)[0]:.3f}")

# Supremum over the sphere, small sample for speed
rep = estimate_alpha(spec, n_sphere=1024, n_lambda=20_000, seed=0)
print(f"alpha_hat={rep.alpha_hat:.3f}  R^2={rep.r_squared:.4f}  elliptic={rep.elliptic}")

# An elliptic problem has no degenerate directions at all
print(estimate_alpha(builtin_problem("heat"), n_sphere=1024, n_lambda=10_000, seed=0).elliptic)
