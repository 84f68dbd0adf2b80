"""Acceptance gate: one test per criterion, each at its stated tolerance.

Run alone with ``pytest tests/test_acceptance.py -v``; the PASS/FAIL lines are
listed under "acceptance criteria" at the end of the run.
"""

from fractions import Fraction

import numpy as np
import pytest

from degpar.exponents import proof_parameters, q_star, s_star, validate_exponent_identities
from degpar.nondeg import check_condition_implication, estimate_alpha, fit_loglog, level_set_measure
from degpar.pipeline import ExperimentConfig, run_pipeline
from degpar.problem import builtin_problem
from degpar.solver import Field, Grid, barenblatt, heat_gaussian, indicator_weight, make_initial, solve, velocity_average
from degpar.spectral import (
    apply_multiplier,
    block_norms,
    build_partition,
    frequency_magnitude,
    lq_norm,
    max_j,
    plancherel_sum,
)

pytestmark = pytest.mark.slow


def test_exponent_arithmetic(criterion):
    exact = {
        "q(1,2)": q_star(Fraction(1), 2) == Fraction(11, 6),
        "s(1,2)": s_star(Fraction(1), 2) == Fraction(5, 407),
        "q(1/2,3)": q_star(Fraction(1, 2), 3) == Fraction(25, 13),
        "s(1/2,3)": s_star(Fraction(1, 2), 3) == Fraction(9, 2983),
    }
    floats = {
        "q(1,2) float": abs(q_star(1.0, 2) - 11 / 6) <= 1e-12,
        "s(1,2) float": abs(s_star(1.0, 2) - 5 / 407) <= 1e-12,
        "q(1/2,3) float": abs(q_star(0.5, 3) - 25 / 13) <= 1e-12,
        "s(1/2,3) float": abs(s_star(0.5, 3) - 9 / 2983) <= 1e-12,
    }
    assert criterion(1, "exponent arithmetic", exact | floats)


def test_identity_suite(criterion):
    rng = np.random.default_rng(20240601)
    worst = {"sum_r_epsilon": 0.0, "decay_equals_s_star": 0.0, "lorentz_index": 0.0}
    positive = True
    for seed in range(1000):
        alpha = 3.0 * (1.0 - rng.random())
        d = int(rng.integers(2, 7))
        rep = validate_exponent_identities(alpha, d, trials=1, seed=seed)
        for k in worst:
            worst[k] = max(worst[k], rep.worst[k])
        positive &= rep.results["admissibility"]
    checks = {k: v <= 1e-12 for k, v in worst.items()} | {"omega - gamma eta > 0": positive}
    detail = ", ".join(f"{k}={v:.1e}" for k, v in worst.items())
    assert criterion(2, "exponent identities over 1000 draws", checks, detail)


def test_nondegeneracy_oracle(criterion):
    bands = {(1, 1): (0.45, 0.55), (2, 1): (0.20, 0.30), (1, 4): (0.20, 0.30)}
    got, checks = {}, {}
    for (l, n), (lo, hi) in bands.items():
        spec = builtin_problem("tt_example", {"l": l, "n": n})
        rep = estimate_alpha(spec, delta_min=1e-4, delta_max=1e-1, n_delta=12, n_sphere=4096, n_lambda=10**5, seed=0)
        got[l, n] = rep.alpha_hat
        checks[f"(l,n)=({l},{n})"] = lo <= rep.alpha_hat <= hi
    detail = ", ".join(f"({l},{n}): {a:.4f}" for (l, n), a in got.items())
    assert criterion(3, "fitted non-degeneracy exponent", checks, detail)


def test_separable_scaling(criterion):
    deltas = np.geomspace(1e-4, 1e-1, 12)
    slopes, checks = {}, {}
    for n in (1, 2, 4):
        spec = builtin_problem("tt_example", {"l": 1, "n": n})
        meas = [level_set_measure(spec, [0, 0, 1], d, (-1, 1), 10**5) for d in deltas]
        slopes[n] = fit_loglog(deltas, meas)[0]
        checks[f"n={n}"] = abs(slopes[n] - 1 / n) <= 0.03
    detail = ", ".join(f"n={n}: {s:.4f}" for n, s in slopes.items())
    assert criterion(4, "separable level-set scaling", checks, detail)


def _drift_rate(tr):
    mass = tr.meta["mass"]
    span = tr.times[-1] - tr.times[0]
    return max(abs(m - mass[0]) for m in mass) / span


def test_solver_oracles(criterion):
    checks, notes, runs = {}, [], []

    burgers = builtin_problem("burgers_1d")
    g = Grid((1024,), burgers.box)
    tr = solve(burgers, g, 0.0, make_initial(burgers.initial, g), 0.5)
    x, u = g.centers(0), tr.final.values
    xs = x[x > 0][np.argmax(u[x > 0] < 0.5)]
    checks["burgers shock"] = abs(xs - 0.25) <= 2 * g.dx[0]
    notes.append(f"shock {xs:.4f}")
    runs.append((tr, 0.0, 1.0))

    heat = builtin_problem("heat")
    g = Grid((512,), heat.box)
    u0 = make_initial(heat.initial, g)
    tr = solve(heat, g, 0.0, u0, 0.1)
    err = np.sqrt(np.sum((tr.final.values - heat_gaussian(g, 0.1, 0.25)) ** 2) * g.dx[0])
    checks["heat L2"] = err <= 5e-3
    notes.append(f"heat {err:.1e}")
    runs.append((tr, float(u0.values.min()), float(u0.values.max())))

    pm = builtin_problem("porous_medium", {"m_pm": 2})
    g = Grid((1024,), pm.box)
    u0 = make_initial(pm.initial, g)
    tr = solve(pm, g, 0.0, Field(u0.values, g, 0.1), 0.9)
    err = np.abs(tr.final.values - barenblatt(g.centers(0), 1.0, 2.0, 0.5)).sum() * g.dx[0]
    checks["barenblatt L1"] = err <= 2e-2 and tr.final.time == pytest.approx(1.0)
    notes.append(f"barenblatt {err:.1e}")
    runs.append((tr, 0.0, float(u0.values.max())))

    undershoot = max(max(lo - t.meta["min"], t.meta["max"] - hi) for t, lo, hi in runs)
    drift = max(_drift_rate(t) for t, _, _ in runs)
    checks["maximum principle"] = undershoot <= 1e-12
    checks["mass drift"] = drift <= 1e-10
    notes += [f"max-principle excess {max(undershoot, 0.0):.1e}", f"drift/time {drift:.1e}"]
    assert criterion(5, "solver oracles", checks, ", ".join(notes))


def test_kinetic_identity(criterion):
    rng = np.random.default_rng(11)
    m, M = -1.0, 2.0
    lam = np.linspace(m, M, 1000)
    g = Grid((64, 64), ((0, 1), (0, 1)))
    worst = 0.0
    for _ in range(20):
        u = m + (M - m) * rng.random(g.shape)
        avg = velocity_average(Field(u, g), indicator_weight(lam), lam).values
        worst = max(worst, float(np.max(np.abs(avg - (2 * u - m - M)))))
    assert criterion(6, "kinetic identity", {"max gap <= 1e-9": worst <= 1e-9}, f"max gap {worst:.1e}")


def _power_law(grid, beta, rng):
    r = frequency_magnitude(grid)
    noise = np.fft.fftn(rng.standard_normal(grid.shape))
    ghat = np.zeros(grid.shape, complex)
    nz = r > 0
    ghat[nz] = r[nz] ** -beta * noise[nz] / np.abs(noise[nz])
    return np.fft.ifftn(ghat).real


def test_spectral_suite(criterion):
    checks, notes = {}, []
    P = build_partition(2, 12)
    radii = np.linspace(0.0, 2.0 ** (P.j_max - 1), 10**4)
    total = P.block(0, radii) + sum(P.block(j, radii) for j in range(1, P.j_max + 1))
    gap = float(np.max(np.abs(total - 1)))
    checks["partition"] = gap <= 1e-12
    notes.append(f"partition {gap:.1e}")

    rng = np.random.default_rng(5)
    grid = Grid((128, 128), ((0, 1), (0, 2)))
    g = rng.standard_normal(grid.shape)
    pl = abs(plancherel_sum(g, grid) - np.sum(g**2) * grid.cell_volume) / (np.sum(g**2) * grid.cell_volume)
    checks["plancherel"] = pl <= 1e-10

    Pg = build_partition(2, max_j(grid))
    r = frequency_magnitude(grid)
    blocks = [apply_multiplier(g, Pg.block(j, r), grid) for j in range(Pg.j_max + 1)]
    ortho = max(abs(np.sum(blocks[a] * blocks[b]) * grid.cell_volume)
                for a in range(len(blocks)) for b in range(a + 2, len(blocks)))
    checks["orthogonality"] = ortho <= 1e-10
    notes.append(f"orthogonality {ortho:.1e}")

    line = Grid((2**14,), ((-4.0, 4.0),))
    x = line.centers(0)
    ind = block_norms(((x >= 0) & (x <= 1)).astype(float), build_partition(1, max_j(line)), 2.0, line)
    checks["indicator slope"] = abs(ind.slope - 0.5) <= 0.05
    notes.append(f"indicator {ind.slope:.3f}")

    for grid_b in (Grid((2**12,), ((0, 1),)), Grid((256, 256), ((0, 1), (0, 1)))):
        for beta in (1.0, 1.5, 2.0):
            sp = block_norms(_power_law(grid_b, beta, rng), build_partition(grid_b.dim, max_j(grid_b)), grid=grid_b)
            err = abs(sp.slope - (beta - grid_b.dim / 2))
            checks[f"power law d={grid_b.dim} beta={beta}"] = err <= 0.05

    worst = -np.inf
    for _ in range(100):
        psi = rng.standard_normal(grid.shape) * rng.exponential()
        psi = 0.5 * (psi + np.roll(np.flip(psi), 1, axis=(0, 1)))
        f = rng.standard_normal(grid.shape)
        lhs = lq_norm(apply_multiplier(f, psi, grid), grid, 2.0)
        worst = max(worst, lhs - (np.max(np.abs(psi)) * lq_norm(f, grid, 2.0) + 1e-10))
    checks["multiplier L2 bound"] = worst <= 0
    assert criterion(7, "spectral suite", checks, ", ".join(notes))


def test_end_to_end_pipeline(criterion, tmp_path):
    cfg = ExperimentConfig.from_dict({"problem": "tt_example", "params": {"l": 1, "n": 1},
                                      "cells": [128, 128], "seed": 7})
    assert len(cfg.viscosities) == 3
    reps = [run_pipeline(cfg, tmp_path / name) for name in ("first", "second")]
    same = (tmp_path / "first" / "report.json").read_bytes() == (tmp_path / "second" / "report.json").read_bytes()
    v = reps[0].verdict
    expected_star = float(s_star(reps[0].nondeg["alpha_hat"], 3))
    checks = {
        "byte-identical": same,
        "complete": reps[0].complete,
        "PASS": bool(v["pass"]),
        "s_hat >= s_star - 0.001": v["s_hat"] >= v["s_star"] - 0.001,
        "s_star at (alpha_hat, 3)": abs(v["s_star"] - expected_star) <= 1e-15,
        "lower-bound note": "lower bound" in reps[0].note,
    }
    detail = f"s_hat={v['s_hat']:.4f} s_star={v['s_star']:.3e} alpha_hat={reps[0].nondeg['alpha_hat']:.4f}"
    assert criterion(8, "end-to-end pipeline", checks, detail)


def test_condition_implication(criterion):
    rep = check_condition_implication(builtin_problem("tt_example", {"l": 1, "n": 1}), seed=0)
    row = rep.details["1.0"]
    ok = row["alpha_standard"] >= row["alpha_shell"] / 2 - 0.05
    detail = f"standard {row['alpha_standard']:.4f} >= shell/2 - 0.05 = {row['alpha_shell'] / 2 - 0.05:.4f}"
    assert criterion(9, "condition implication", {"bound": ok and rep.holds}, detail)
