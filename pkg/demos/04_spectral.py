# Littlewood-Paley blocks and what their decay says about smoothness.
import numpy as np

from degpar.solver import Grid
from degpar.spectral import (
    apply_multiplier,
    block_norms,
    build_partition,
    frequency_magnitude,
    marcinkiewicz_check,
    max_j,
    riesz_potential,
    sobolev_estimate,
)

# The partition of unity
P = build_partition(1, 10)
r = np.array([0.5, 3.0, 100.0, 500.0])
print(sum(P.block(j, r) for j in range(P.j_max + 1)))  # all ones

# A jump has H^s regularity for s < 1/2: block norms fall like 2^(-K/2)
grid = Grid((2**14,), ((-4.0, 4.0),))
x = grid.centers(0)
sp = block_norms(((x >= 0) & (x <= 1)).astype(float), build_partition(1, max_j(grid)), 2.0, grid)
print("indicator slope", round(sp.slope, 3), "R^2", round(sp.r_squared, 4))
print(sobolev_estimate(sp))

# A Gaussian decays faster than any power
sp = block_norms(np.exp(-(x**2) / 0.125), build_partition(1, 10), grid=grid)
print("gaussian super-algebraic:", sp.super_algebraic)

# Multipliers: a low-pass filter, then a Riesz potential on a 2D mode
g2 = Grid((64, 64), ((0, 1), (0, 1)))
X, Y = g2.mesh()
wave = np.cos(2 * np.pi * (3 * X + 4 * Y))
low = apply_multiplier(wave, (frequency_magnitude(g2) < 4).astype(float), g2)
print("low-pass removes |k|=5:", np.abs(low).max() < 1e-12)
print("riesz scales by 1/5:", np.allclose(riesz_potential(wave, 1.0, g2), wave / 5))

# Symbol conditions for L^p boundedness
print(marcinkiewicz_check(lambda z: z[:, 0] * z[:, 1] / (z**2).sum(1), 2).bound)
print(marcinkiewicz_check(lambda z: np.sqrt(np.sqrt((z**2).sum(1))), 2).violation)
