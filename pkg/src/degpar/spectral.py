"""Littlewood-Paley machinery on periodic grids.

Frequencies are physical: integer multiples of 1/L per axis, matching the
transform convention û(ξ) = ∫ e^{-2πi<ξ,x>} u(x) dx.  The dyadic partition is
built from a polynomial smoothstep Φ (1 on |z| <= 1, 0 on |z| >= 2) with
Ψ(z) = Φ(z) - Φ(2z) and Ψ_0 = Φ, so that

    Ψ_0(|ξ|) + sum_{J=1}^{J_max} Ψ(2^{-J}|ξ|) = Φ(2^{-J_max}|ξ|).
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import comb

from .nondeg import _workers
from .solver import Field, Grid

FLOOR = 1e-13


class InsufficientResolution(ValueError):
    """Too few informative dyadic blocks, or J_max beyond the grid's reach."""


def smoothstep(x: ArrayLike, order: int) -> NDArray:
    """C^order polynomial step: 0 for x <= 0, 1 for x >= 1."""
    x = np.clip(np.asarray(x, float), 0.0, 1.0)
    n = order
    acc = np.zeros_like(x)
    for k in range(n + 1):
        acc += comb(n + k, k) * comb(2 * n + 1, n - k) * (-x) ** k
    return x ** (n + 1) * acc


@dataclass(frozen=True)
class DyadicPartition:
    d: int
    j_max: int
    order: int

    def phi(self, z: ArrayLike) -> NDArray:
        z = np.abs(np.asarray(z, float))
        return 1.0 - smoothstep(z - 1.0, self.order)

    def psi(self, z: ArrayLike) -> NDArray:
        z = np.asarray(z, float)
        return self.phi(z) - self.phi(2.0 * z)

    def block(self, j: int, radius: ArrayLike) -> NDArray:
        """Ψ_J(|ξ|); J = 0 gives the low-frequency cap."""
        radius = np.asarray(radius, float)
        if j == 0:
            return self.phi(radius)
        return self.psi(radius * 2.0 ** (-j))

    def all_blocks(self, radius: ArrayLike) -> NDArray:
        return np.stack([self.block(j, radius) for j in range(self.j_max + 1)])


def build_partition(d: int, j_max: int) -> DyadicPartition:
    """Dyadic partition with a C^{d+1} profile."""
    if j_max < 3:
        raise ValueError("J_max must be at least 3")
    if d < 1:
        raise ValueError("dimension must be positive")
    return DyadicPartition(d=d, j_max=int(j_max), order=d + 1)


def frequencies(grid: Grid) -> tuple[NDArray, ...]:
    return tuple(np.fft.fftfreq(n, d=h) for n, h in zip(grid.cells, grid.dx))


def frequency_mesh(grid: Grid) -> tuple[NDArray, ...]:
    return np.meshgrid(*frequencies(grid), indexing="ij")


def frequency_magnitude(grid: Grid) -> NDArray:
    return np.sqrt(sum(k**2 for k in frequency_mesh(grid)))


def nyquist(grid: Grid) -> float:
    return min(n / (2.0 * L) for n, L in zip(grid.cells, grid.lengths))


def max_j(grid: Grid) -> int:
    """Largest J with 2^J at or below the Nyquist frequency."""
    return int(math.floor(math.log2(nyquist(grid)) + 1e-12))


def _as_field(g, grid):
    if isinstance(g, Field):
        return g.values, g.grid
    if grid is None:
        raise ValueError("a grid is required for bare arrays")
    return np.asarray(g, float), grid


def _reflect(psi: NDArray) -> NDArray:
    """ψ(-ξ) on the FFT grid."""
    out = psi
    for ax in range(psi.ndim):
        out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
    return out


def apply_multiplier(g, psi: ArrayLike, grid: Grid | None = None, real: bool = True, tol: float = 1e-8):
    """A_ψ g = (ψ ĝ)^∨ on the periodic grid.

    ψ is sampled on the ``np.fft.fftfreq`` grid.  With ``real=True`` the
    symbol is replaced by its Hermitian part (ψ(ξ) + conj ψ(-ξ))/2, which
    removes round-off and the Nyquist alias; a symbol whose anti-Hermitian part
    exceeds ``tol * max|ψ|`` cannot produce a real field and is rejected.
    """
    values, grid = _as_field(g, grid)
    psi = np.asarray(psi)
    if psi.shape != values.shape:
        raise ValueError("symbol must be sampled on the field's frequency grid")
    if not np.all(np.isfinite(psi)):
        raise ValueError("symbol has non-finite samples")
    ghat = np.fft.fftn(values)
    if real:
        mirror = np.conj(_reflect(psi))
        defect = np.max(np.abs(psi - mirror)) if psi.size else 0.0
        scale = max(float(np.max(np.abs(psi))), 1e-300)
        if np.iscomplexobj(psi) and defect > tol * scale:
            raise ValueError("complex symbol is not Hermitian; output would not be real")
        psi = 0.5 * (psi + mirror)
        out = np.fft.ifftn(psi * ghat).real
    else:
        out = np.fft.ifftn(psi * ghat)
    if isinstance(g, Field):
        return Field(out, g.grid, g.time) if real else out
    return out


def riesz_potential(g, s: float, grid: Grid | None = None):
    """Multiplier |ξ|^{-s} with the zero mode annihilated."""
    values, grid = _as_field(g, grid)
    if not 0 < s < grid.dim:
        raise ValueError(f"Riesz order must lie in (0, {grid.dim})")
    r = frequency_magnitude(grid)
    psi = np.zeros_like(r)
    nz = r > 0
    psi[nz] = r[nz] ** (-s)
    return apply_multiplier(g, psi, grid)


def plancherel_sum(g, grid: Grid | None = None) -> float:
    """Σ |ĝ_k|^2 weighted so that it equals ||g||_2^2 on the torus."""
    values, grid = _as_field(g, grid)
    ghat = np.fft.fftn(values) * grid.cell_volume
    box = float(np.prod(grid.lengths))
    return float(np.sum(np.abs(ghat) ** 2) / box)


def lq_norm(values: NDArray, grid: Grid, q: float = 2.0) -> float:
    v = np.abs(values)
    if math.isinf(q):
        return float(v.max())
    return float((np.sum(v**q) * grid.cell_volume) ** (1.0 / q))


def raised_cosine_window(grid: Grid, taper: float = 0.25) -> NDArray:
    """Tensor Tukey window: flat in the middle, cosine ramps over `taper` of each side."""
    w = np.ones(grid.shape)
    for k in range(grid.dim):
        n = grid.cells[k]
        t = (np.arange(n) + 0.5) / n
        wk = np.ones(n)
        if taper > 0:
            lo = t < taper / 2
            hi = t > 1 - taper / 2
            wk[lo] = 0.5 * (1 - np.cos(2 * np.pi * t[lo] / taper))
            wk[hi] = 0.5 * (1 - np.cos(2 * np.pi * (1 - t[hi]) / taper))
        shape = [1] * grid.dim
        shape[k] = n
        w = w * wk.reshape(shape)
    return w


@dataclass
class MarcinkiewiczResult:
    bound: float
    violation: bool
    per_index: dict[tuple[int, ...], float]
    message: str = ""


def _partial(fn: Callable, x: NDArray, alpha: tuple[int, ...], rel: float) -> NDArray:
    """∂^alpha fn at points x (n, d) by nested central differences, step rel * |x_j|."""
    d = x.shape[1]
    terms = [(1.0, np.zeros(d))]
    for j, order in enumerate(alpha):
        h = rel * np.abs(x[:, j])
        for _ in range(order):
            new = []
            for w, off in terms:
                e = np.zeros(d)
                e[j] = 1.0
                new.append((w, off + e))
                new.append((-w, off - e))
            terms = new
    h = rel * np.abs(x)
    total = np.zeros(x.shape[0])
    for w, off in terms:
        total = total + w * fn(x + 0.5 * off * h)
    denom = np.prod([h[:, j] ** alpha[j] for j in range(d)], axis=0)
    return total / denom


def marcinkiewicz_check(
    psi: Callable[[NDArray], NDArray],
    d: int,
    decades: tuple[float, float] = (-3.0, 3.0),
    per_decade: int = 6,
    rel_step: float = 1e-4,
    margin: float = 1e-3,
    growth: float = 1.5,
) -> MarcinkiewiczResult:
    """Estimate C = max_{|α|<=d} sup |ξ^α ∂^α ψ(ξ)| on a log-spaced grid.

    `psi` maps points (n, d) to values (n,).  Coordinates are kept at least
    `margin` away from the axes.  The grid is split into radial decades; a
    supremum that keeps growing into the innermost or outermost decade
    (factor > `growth` over the interior decades) is reported as a violation.
    """
    mags = np.logspace(*decades, int(round((decades[1] - decades[0]) * per_decade)) + 1)
    mags = mags[mags >= margin]
    axis_vals = np.concatenate([-mags[::-1], mags])
    pts = np.stack(np.meshgrid(*([axis_vals] * d), indexing="ij"), axis=-1).reshape(-1, d)
    radius = np.max(np.abs(pts), axis=1)
    n_shell = max(int(round(decades[1] - decades[0])), 1)
    # one shell per decade; the endpoint sample joins the last decade
    shell = np.clip(np.floor(np.log10(radius) - decades[0]).astype(int), 0, n_shell - 1)
    per_index: dict[tuple[int, ...], float] = {}
    shell_sup = np.zeros(n_shell)
    for alpha in itertools.product(range(d + 1), repeat=d):
        if sum(alpha) > d:
            continue
        if sum(alpha) == 0:
            vals = np.abs(np.asarray(psi(pts), dtype=complex))
        else:
            deriv = _partial(psi, pts, alpha, rel_step)
            vals = np.abs(np.prod(pts**np.array(alpha), axis=1) * deriv)
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"non-finite symbol samples for multi-index {alpha}")
        per_index[alpha] = float(vals.max())
        np.maximum.at(shell_sup, shell, vals)
    bound = max(per_index.values())
    if n_shell < 3:
        raise ValueError("need at least three decades to detect growth")
    ref = max(float(shell_sup[1:-1].max()), 1e-300)
    violation = bool(shell_sup[-1] > growth * ref or shell_sup[0] > growth * ref)
    msg = "sup grows toward the edge of the sampled range (unbounded)" if violation else ""
    return MarcinkiewiczResult(bound=bound, violation=violation, per_index=per_index, message=msg)


@dataclass
class DyadicSpectrum:
    ks: list[int]
    norms: list[float]
    q: float
    informative: list[bool]
    truncated: list[bool]
    slope: float
    r_squared: float
    fit_range: tuple[int, int] | None
    super_algebraic: bool
    low_norm: float
    box: list[list[float]]
    cells: list[int]
    window: str | None = None
    extra: dict = field(default_factory=dict)

    @property
    def log2_norms(self) -> list[float]:
        return [math.log2(n) if n > 0 else -math.inf for n in self.norms]

    def to_dict(self) -> dict:
        return {
            "K": list(self.ks),
            "norms": list(self.norms),
            "log2_norms": self.log2_norms,
            "q": self.q,
            "informative": list(self.informative),
            "truncated": list(self.truncated),
            "slope": self.slope,
            "r_squared": self.r_squared,
            "fit_range": list(self.fit_range) if self.fit_range else None,
            "super_algebraic": self.super_algebraic,
            "low_norm": self.low_norm,
            "box": self.box,
            "cells": self.cells,
            "window": self.window,
            "window_offset": self.extra.get("window_offset", 0.0),
        }

    def csv_rows(self) -> list[tuple]:
        return [
            (k, n, l2, int(flag))
            for k, n, l2, flag in zip(self.ks, self.norms, self.log2_norms, self.informative)
        ]


def block_norms(
    g,
    partition: DyadicPartition,
    q: float = 2.0,
    grid: Grid | None = None,
    k_min: int = 1,
    window: str | None = None,
) -> DyadicSpectrum:
    """Per-block L^q norms ||A_{Ψ_K} g|| for K = 1..J_max and their decay slope.

    The returned ``slope`` is ŝ = -d log2||H_K|| / dK fitted over blocks that
    are above ``FLOOR`` times the largest block norm (the low-frequency cap
    included), not cut by the Nyquist frequency, and at least `k_min`.
    Blocks that drop below the floor mark the spectrum as super-algebraically
    decaying.  With ``window="raised-cosine"`` the far-field level is removed
    before tapering and reported as ``window_offset``.
    """
    values, grid = _as_field(g, grid)
    if q < 1:
        raise ValueError("q must be >= 1")
    if partition.j_max > max_j(grid):
        raise InsufficientResolution(f"J_max={partition.j_max} exceeds grid reach {max_j(grid)}")
    offset = 0.0
    if window == "raised-cosine":
        w = raised_cosine_window(grid)
        # constants lie in every Sobolev class; removing the far-field level keeps
        # the taper (only C^1) from imprinting its own algebraic tail
        offset = float(values[w < 1].mean()) if np.any(w < 1) else 0.0
        values = (values - offset) * w
    elif window is not None:
        raise ValueError(f"unknown window {window!r}")
    r = frequency_magnitude(grid)
    ghat = np.fft.fftn(values)
    nyq = nyquist(grid)
    ks = list(range(1, partition.j_max + 1))

    def one(k: int) -> float:
        return lq_norm(np.fft.ifftn(partition.block(k, r) * ghat).real, grid, q)

    # blocks are independent; map order keeps the result schedule-free
    nw = _workers()
    if nw > 1:
        with ThreadPoolExecutor(nw) as pool:
            norms = list(pool.map(one, ks))
    else:
        norms = [one(k) for k in ks]
    trunc = [2.0 ** (k + 1) > nyq * (1 + 1e-12) for k in ks]
    low = lq_norm(np.fft.ifftn(partition.block(0, r) * ghat).real, grid, q)
    # floor is relative to the field's scale, so the low-frequency cap counts too
    top = max(norms + [low])
    above = [n > FLOOR * top and top > 0 for n in norms]
    informative = [a and not t and k >= k_min for a, t, k in zip(above, trunc, ks)]
    below_floor = any((not a) and (not t) for a, t in zip(above, trunc)) and top > 0
    slope, r2, rng = math.nan, math.nan, None
    idx = [i for i, f in enumerate(informative) if f]
    if len(idx) >= 2:
        x = np.array([ks[i] for i in idx], float)
        y = np.log2([norms[i] for i in idx])
        b, a0 = np.polyfit(x, y, 1)
        resid = y - (b * x + a0)
        ss = np.sum((y - y.mean()) ** 2)
        r2 = float(1 - np.sum(resid**2) / ss) if ss > 0 else 1.0
        slope = float(-b)
        rng = (ks[idx[0]], ks[idx[-1]])
    return DyadicSpectrum(
        ks=ks, norms=norms, q=q, informative=informative, truncated=trunc, slope=slope, r_squared=r2,
        fit_range=rng, super_algebraic=below_floor, low_norm=low, box=[list(b) for b in grid.box],
        cells=list(grid.cells), window=window, extra={"window_offset": offset},
    )


@dataclass
class SobolevEstimate:
    s_hat: float
    summability: float
    super_algebraic: bool
    n_blocks: int

    def to_dict(self) -> dict:
        return {
            "s_hat": self.s_hat,
            "summability": self.summability,
            "super_algebraic": self.super_algebraic,
            "n_blocks": self.n_blocks,
        }


def sobolev_estimate(spectrum: DyadicSpectrum, step: float = 1e-3) -> SobolevEstimate:
    """Empirical regularity from a dyadic spectrum.

    ``s_hat`` is the fitted decay slope.  ``summability`` is the largest s on
    a grid of spacing `step` for which the weighted terms 2^{sK}||H_K|| are
    strictly decreasing over the informative blocks.  Super-algebraic spectra
    return +inf for both.
    """
    if not any(n > 0 for n in spectrum.norms):
        raise ValueError("all block norms vanish; regularity undefined")
    idx = [i for i, f in enumerate(spectrum.informative) if f]
    if spectrum.super_algebraic:
        return SobolevEstimate(math.inf, math.inf, True, len(idx))
    if len(idx) < 4:
        raise InsufficientResolution(f"only {len(idx)} informative blocks; need 4")
    logs = np.log2([spectrum.norms[i] for i in idx])
    ks = np.array([spectrum.ks[i] for i in idx], float)
    rates = -(np.diff(logs) / np.diff(ks))
    s_sum = round(math.ceil(float(rates.min()) / step - 1.0) * step, 12)
    return SobolevEstimate(float(spectrum.slope), float(s_sum), False, len(idx))
