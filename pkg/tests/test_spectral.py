import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from degpar.solver import Field, Grid
from degpar.spectral import (
    InsufficientResolution,
    apply_multiplier,
    block_norms,
    build_partition,
    frequency_magnitude,
    frequency_mesh,
    lq_norm,
    marcinkiewicz_check,
    max_j,
    plancherel_sum,
    raised_cosine_window,
    riesz_potential,
    smoothstep,
    sobolev_estimate,
)

G1 = Grid((256,), ((0.0, 1.0),))
G2 = Grid((64, 64), ((0.0, 1.0), (0.0, 1.0)))


def power_law_field(grid, beta, seed=0):
    """Real field with |ĝ(ξ)| = |ξ|^{-β} exactly and random phases."""
    r = frequency_magnitude(grid)
    noise = np.fft.fftn(np.random.default_rng(seed).standard_normal(grid.shape))
    ghat = np.zeros(grid.shape, complex)
    nz = r > 0
    ghat[nz] = r[nz] ** -beta * noise[nz] / np.abs(noise[nz])
    return np.fft.ifftn(ghat).real


def l2(v, grid):
    return lq_norm(v, grid, 2.0)


# partition


def test_smoothstep_ends_and_smoothness():
    assert smoothstep(0.0, 3) == 0 and smoothstep(1.0, 3) == 1
    assert smoothstep(0.5, 3) == pytest.approx(0.5)
    x = np.linspace(1e-4, 1e-2, 5)
    # C^N contact at 0: value is O(x^{N+1})
    assert np.all(smoothstep(x, 3) <= 70 * x**4)


def test_build_partition_rejects_small_j():
    with pytest.raises(ValueError):
        build_partition(2, 2)
    assert build_partition(2, 3).order == 3


def test_partition_inside_cap():
    P = build_partition(2, 6)
    assert P.block(0, 0.5) == 1
    assert all(P.block(j, 0.5) == 0 for j in range(1, 7))


@pytest.mark.parametrize("j", [1, 2, 3, 5])
def test_partition_at_dyadic_radius(j):
    P = build_partition(2, 7)
    r = 2.0**j
    assert P.block(j, r) + P.block(j + 1, r) == 1
    assert P.block(j, r) == P.psi(1.0) == 1


def test_partition_sum_on_radial_grid():
    P = build_partition(3, 8)
    r = np.linspace(0, 2.0 ** (8 - 1), 10**4)
    blocks = P.all_blocks(r)
    assert np.max(np.abs(blocks.sum(axis=0) - 1)) <= 1e-12
    assert blocks.min() >= 0 and blocks.max() <= 1
    assert (blocks > 0).sum(axis=0).max() <= 3


def test_psi_support():
    P = build_partition(2, 4)
    z = np.linspace(0, 4, 4001)
    vals = P.psi(z)
    assert np.all(vals[(z <= 0.5) | (z >= 2)] == 0)
    assert np.all(vals[(z > 0.55) & (z < 1.9)] > 0)


@settings(max_examples=200, deadline=None)
@given(r=st.floats(0, 2.0**9), d=st.integers(1, 4))
def test_partition_sum_property(r, d):
    P = build_partition(d, 10)
    assert abs(P.all_blocks(np.array([r])).sum() - 1) <= 1e-12


# multipliers


def test_identity_multiplier():
    g = np.random.default_rng(0).standard_normal(G2.shape)
    out = apply_multiplier(g, np.ones(G2.shape), G2)
    assert np.max(np.abs(out - g)) <= 1e-13


def test_shift_multiplier():
    g = np.random.default_rng(1).standard_normal(G2.shape)
    kx, ky = frequency_mesh(G2)
    psi = np.exp(-2j * np.pi * kx * G2.dx[0])
    out = apply_multiplier(g, psi, G2)
    assert np.max(np.abs(out - np.roll(g, 1, axis=0))) <= 1e-13


def test_multiplier_on_field_keeps_metadata():
    f = Field(np.random.default_rng(2).standard_normal(G1.shape), G1, 0.3)
    out = apply_multiplier(f, np.ones(G1.shape))
    assert isinstance(out, Field) and out.time == 0.3


def test_multiplier_rejects_non_hermitian():
    kx = frequency_mesh(G1)[0]
    psi = np.where(kx > 0, 1j, 0.0)
    with pytest.raises(ValueError, match="Hermitian"):
        apply_multiplier(np.ones(G1.shape), psi, G1)
    # complex output allowed when not forcing a real field
    out = apply_multiplier(np.ones(G1.shape), psi, G1, real=False)
    assert np.iscomplexobj(out)


def test_multiplier_rejects_bad_symbol():
    with pytest.raises(ValueError):
        apply_multiplier(np.ones(G1.shape), np.ones(10), G1)
    psi = np.ones(G1.shape)
    psi[3] = np.nan
    with pytest.raises(ValueError):
        apply_multiplier(np.ones(G1.shape), psi, G1)


def test_multiplier_l2_bound_random():
    rng = np.random.default_rng(3)
    for _ in range(100):
        grid = G1 if rng.random() < 0.5 else G2
        g = rng.standard_normal(grid.shape)
        psi = rng.uniform(-2, 2, grid.shape)
        out = apply_multiplier(g, psi, grid)
        # Hermitian part of psi has max modulus <= max|psi|
        assert l2(out, grid) <= np.max(np.abs(psi)) * l2(g, grid) + 1e-10


def test_plancherel():
    rng = np.random.default_rng(4)
    for grid in (G1, G2, Grid((128,), ((-4, 4),))):
        g = rng.standard_normal(grid.shape)
        assert plancherel_sum(g, grid) == pytest.approx(l2(g, grid) ** 2, rel=1e-10)


def test_riesz_single_mode():
    x, y = G2.mesh()
    g = np.cos(2 * np.pi * (3 * x + 4 * y))
    np.testing.assert_allclose(riesz_potential(g, 1.0, G2), g / 5, atol=1e-13)


def test_riesz_small_order_recovers_field():
    g = np.random.default_rng(5).standard_normal(G2.shape)
    g -= g.mean()
    assert np.max(np.abs(riesz_potential(g, 1e-12, G2) - g)) <= 1e-10


def test_riesz_smoothing_and_zero_mode():
    g = np.random.default_rng(6).standard_normal(G2.shape)
    out = riesz_potential(g, 1.0, G2)
    assert abs(out.mean()) <= 1e-14
    assert l2(out, G2) <= l2(g - g.mean(), G2)


@pytest.mark.parametrize("s", [0.0, 2.0, -1.0])
def test_riesz_order_range(s):
    with pytest.raises(ValueError):
        riesz_potential(np.zeros(G2.shape), s, G2)


# Marcinkiewicz


def test_marcinkiewicz_riesz_product_symbol():
    res = marcinkiewicz_check(lambda z: z[:, 0] * z[:, 1] / (z**2).sum(1), 2)
    assert not res.violation and np.isfinite(res.bound)
    assert 0.5 <= res.bound < 5


def test_marcinkiewicz_constant():
    res = marcinkiewicz_check(lambda z: np.ones(len(z)), 2)
    assert res.bound == 1 and not res.violation
    assert all(v == 0 for a, v in res.per_index.items() if sum(a) > 0)


def test_marcinkiewicz_unbounded():
    res = marcinkiewicz_check(lambda z: ((z**2).sum(1)) ** 0.25, 2)
    assert res.violation


def test_marcinkiewicz_non_finite():
    with pytest.raises(ValueError, match="non-finite"):
        marcinkiewicz_check(lambda z: np.full(len(z), np.inf), 2)


# block norms and regularity


def indicator_spectrum(n=2**14):
    grid = Grid((n,), ((-4.0, 4.0),))
    x = grid.centers(0)
    u = ((x >= 0) & (x <= 1)).astype(float)
    return block_norms(u, build_partition(1, max_j(grid)), 2.0, grid)


def test_indicator_slope():
    sp = indicator_spectrum()
    assert abs(sp.slope - 0.5) <= 0.05
    assert sp.r_squared > 0.99
    est = sobolev_estimate(sp)
    assert est.s_hat == pytest.approx(sp.slope)
    assert est.summability < 0.5


def test_gaussian_super_algebraic():
    grid = Grid((1024,), ((-4.0, 4.0),))
    x = grid.centers(0)
    sp = block_norms(np.exp(-(x**2) / 0.125), build_partition(1, max_j(grid)), grid=grid)
    assert sp.super_algebraic
    est = sobolev_estimate(sp)
    assert math.isinf(est.s_hat) and est.super_algebraic


@pytest.mark.parametrize("grid", [Grid((2**14,), ((0, 1),)), Grid((256, 256), ((0, 1), (0, 1)))])
def test_white_noise_slope(grid):
    u = np.random.default_rng(7).standard_normal(grid.shape)
    sp = block_norms(u, build_partition(grid.dim, max_j(grid)), grid=grid)
    assert abs(sp.slope + grid.dim / 2) <= 0.1


@pytest.mark.parametrize("beta", [1.0, 1.5, 2.0])
@pytest.mark.parametrize("grid", [Grid((2**12,), ((0, 1),)), Grid((256, 256), ((0, 1), (0, 1)))])
def test_power_law_slope(beta, grid):
    u = power_law_field(grid, beta)
    sp = block_norms(u, build_partition(grid.dim, max_j(grid)), grid=grid)
    assert abs(sp.slope - (beta - grid.dim / 2)) <= 0.05


def test_reconstruction_band_limited():
    grid = G2
    rng = np.random.default_rng(8)
    P = build_partition(2, max_j(grid))
    r = frequency_magnitude(grid)
    ghat = np.fft.fftn(rng.standard_normal(grid.shape))
    ghat[r > 2.0**P.j_max] = 0
    g = np.fft.ifftn(ghat).real
    total = sum(apply_multiplier(g, P.block(j, r), grid) for j in range(P.j_max + 1))
    assert l2(total - g, grid) <= 1e-10


def test_block_orthogonality():
    grid = G2
    g = np.random.default_rng(9).standard_normal(grid.shape)
    P = build_partition(2, max_j(grid))
    r = frequency_magnitude(grid)
    blocks = [apply_multiplier(g, P.block(j, r), grid) for j in range(P.j_max + 1)]
    for a in range(len(blocks)):
        for b in range(a + 2, len(blocks)):
            assert abs(np.sum(blocks[a] * blocks[b]) * grid.cell_volume) <= 1e-10


def test_block_norms_structure_and_csv():
    sp = indicator_spectrum(2**12)
    assert all(n >= 0 for n in sp.norms)
    assert sp.ks == list(range(1, len(sp.norms) + 1))
    rows = sp.csv_rows()
    assert rows[0][0] == 1 and len(rows[0]) == 4
    assert sp.truncated[-1] and not sp.informative[-1]
    d = sp.to_dict()
    assert d["box"] == [[-4.0, 4.0]] and d["cells"] == [2**12]


def test_block_norms_lq_spatial():
    sp1 = block_norms(power_law_field(G1, 1.5), build_partition(1, max_j(G1)), 1.0, G1)
    sp4 = block_norms(power_law_field(G1, 1.5), build_partition(1, max_j(G1)), 4.0, G1)
    assert sp1.q == 1.0 and sp4.q == 4.0
    assert sp1.norms != sp4.norms


def test_block_norms_j_max_too_large():
    with pytest.raises(InsufficientResolution):
        block_norms(np.zeros(G1.shape), build_partition(1, max_j(G1) + 1), grid=G1)


def test_sobolev_zero_field():
    sp = block_norms(np.zeros(G1.shape), build_partition(1, max_j(G1)), grid=G1)
    with pytest.raises(ValueError, match="vanish"):
        sobolev_estimate(sp)


def test_sobolev_needs_four_blocks():
    grid = Grid((32,), ((0, 1),))
    sp = block_norms(power_law_field(grid, 1.0), build_partition(1, max_j(grid)), grid=grid)
    with pytest.raises(InsufficientResolution):
        sobolev_estimate(sp)


def test_workers_do_not_change_norms(monkeypatch):
    u = power_law_field(G2, 1.5)
    a = block_norms(u, build_partition(2, max_j(G2)), grid=G2).norms
    monkeypatch.setenv("DEGPAR_WORKERS", "4")
    assert block_norms(u, build_partition(2, max_j(G2)), grid=G2).norms == a


def test_raised_cosine_window():
    w = raised_cosine_window(G2)
    assert w.shape == G2.shape
    assert w.min() >= 0 and w.max() == 1
    assert w[32, 32] == 1 and w[0, 0] < 0.01
    sp = block_norms(np.ones(G2.shape), build_partition(2, max_j(G2)), grid=G2, window="raised-cosine")
    assert sp.window == "raised-cosine"
    with pytest.raises(ValueError):
        block_norms(np.ones(G2.shape), build_partition(2, max_j(G2)), grid=G2, window="hann")
