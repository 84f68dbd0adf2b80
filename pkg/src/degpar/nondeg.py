"""Numerical estimation of the non-degeneracy exponent of a symbol.

For a unit vector ξ = (ξ0, ξ') in R^d (time first) the symbol is

    L(ξ, λ) = |ξ0 + <f(λ), ξ'>|^2 + <a(λ) ξ', ξ'>,

and the condition asks that sup_ξ meas{λ in I : L(ξ, λ) <= δ} <~ δ^α.
We estimate the supremum over a seeded low-discrepancy sample of the
hemisphere (L is even in ξ), sharpen it with a seeded local search and fit α
as the log-log slope of the sup-measures against δ.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.stats import qmc

from .problem import ProblemSpec

UNIT_TOL = 1e-12
WORKERS_ENV = "DEGPAR_WORKERS"


class NormalizationError(ValueError):
    """A direction passed to the symbol is not a unit vector."""


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def symbol_value(spec: ProblemSpec, xi: ArrayLike, lam: ArrayLike) -> NDArray:
    """L(ξ, λ) for a unit ξ in R^{d_x+1}; broadcasts over λ."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (spec.symbol_dim,):
        raise ValueError(f"direction must have {spec.symbol_dim} components")
    if abs(np.linalg.norm(xi) - 1.0) > UNIT_TOL:
        raise NormalizationError(f"|xi| = {np.linalg.norm(xi)!r} is not 1")
    lam = spec.check_state(lam)
    conv = spec.symbol_flux(lam) @ xi
    diff = np.einsum("...ij,i,j->...", spec.symbol_diffusion(lam), xi, xi)
    return conv**2 + diff


def lambda_grid(interval: tuple[float, float], n_lam: int) -> NDArray:
    """Midpoints of n_lam equal cells of the interval."""
    m, M = interval
    h = (M - m) / n_lam
    return m + h * (np.arange(n_lam) + 0.5)


def level_set_measure(
    spec: ProblemSpec, xi: ArrayLike, delta: float, interval: tuple[float, float] | None = None, n_lam: int = 10**5
) -> float:
    """Midpoint-count estimate of meas{λ in I : L(ξ, λ) <= δ}; error <= |I|/n_lam per boundary point."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    if n_lam < 1000:
        raise ValueError("n_lam must be at least 1000")
    interval = spec.interval if interval is None else interval
    lam = lambda_grid(interval, n_lam)
    vals = symbol_value(spec, xi, lam)
    return float(np.count_nonzero(vals <= delta)) * (interval[1] - interval[0]) / n_lam


class _SymbolTable:
    """Symbol coefficients sampled once on a λ grid, evaluated for many directions.

    mode "standard": L = (ξ0 + f.ξ')^2 + a ξ'.ξ'           (levels δ)
    mode "tt":       L = (ξ0 + f.ξ')^2 + (a ξ'.ξ')^2       (levels δ^2)
    """

    def __init__(self, spec: ProblemSpec, interval, n_lam: int, mode: str = "standard", radius: float = 1.0):
        self.radius = float(radius)
        lam = spec.check_state(lambda_grid(interval, n_lam))
        self.cell = (interval[1] - interval[0]) / n_lam
        self.n_lam = n_lam
        self.mode = mode
        self.flux = spec.symbol_flux(lam)  # (n, d)
        a = spec.diffusion_matrix(lam)  # (n, dx, dx)
        self.dx = a.shape[-1]
        self.diff = a.reshape(n_lam, -1)
        self.trivial_diff = not np.any(self.diff)

    def values(self, dirs: NDArray) -> NDArray:
        """(n_lam, n_dirs) symbol values at radius * dirs."""
        dirs = dirs * self.radius
        conv = self.flux @ dirs.T
        out = conv * conv
        if not self.trivial_diff:
            sp = dirs[:, 1:]
            outer = (sp[:, :, None] * sp[:, None, :]).reshape(len(dirs), -1)
            q = self.diff @ outer.T
            out += q * q if self.mode == "tt" else q
        return out

    def counts(self, dirs: NDArray, levels: NDArray, chunk: int = 32) -> NDArray:
        """(n_dirs, n_levels) integer counts of grid points with L <= level.

        `levels` must be increasing.
        """
        dirs = np.atleast_2d(dirs)
        nl = len(levels)

        def work(start):
            block = dirs[start : start + chunk]
            vals = self.values(block)
            idx = np.searchsorted(levels, vals, side="left")  # first level >= value
            idx += (np.arange(block.shape[0]) * (nl + 1))[None, :]
            binned = np.bincount(idx.ravel(), minlength=block.shape[0] * (nl + 1))
            return np.cumsum(binned.reshape(block.shape[0], nl + 1), axis=1)[:, :nl]

        starts = range(0, len(dirs), chunk)
        nw = _workers()
        if nw > 1 and len(dirs) > chunk:
            with ThreadPoolExecutor(nw) as pool:
                parts = list(pool.map(work, starts))
        else:
            parts = [work(s) for s in starts]
        if not parts:
            return np.zeros((0, nl), dtype=np.int64)
        return np.concatenate(parts, axis=0)


def hemisphere_directions(d: int, n: int, seed: int) -> NDArray:
    """n points of a scrambled Halton sequence mapped onto {ξ in S^{d-1} : ξ_1 >= 0}."""
    sampler = qmc.Halton(d=d, scramble=True, seed=seed)
    u = sampler.random(n)
    if d == 2:
        theta = math.pi * u[:, 0] - 0.5 * math.pi
        pts = np.column_stack([np.sin(theta), np.cos(theta)])
    elif d == 3:
        # Archimedes: uniform height and azimuth give uniform area
        z = 2.0 * u[:, 0] - 1.0
        phi = math.pi * u[:, 1]
        rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
        pts = np.column_stack([z, rho * np.sin(phi), rho * np.cos(phi)])
    else:
        from scipy.special import ndtri

        g = ndtri(np.clip(u, 1e-12, 1 - 1e-12))
        pts = g / np.linalg.norm(g, axis=1, keepdims=True)
    return _canonical(pts)


def _canonical(pts: NDArray) -> NDArray:
    pts = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    flip = pts[:, 1] < 0
    pts[flip] *= -1.0
    return pts


def _refine(table: _SymbolTable, levels: NDArray, base: NDArray, base_counts: NDArray, rng, top_k: int, rounds: int):
    """Seeded local search for the per-level maximiser; returns the new directions visited."""
    n0, d = base.shape
    scale0 = 2.0 * math.sqrt(2.0 * math.pi / max(n0, 1)) if d == 3 else 2.0 * math.pi / max(n0, 1)
    found = []
    for j in range(len(levels)):
        order = np.argsort(-base_counts[:, j], kind="stable")[:top_k]
        cur = base[order]
        cur_c = base_counts[order, j]
        scale = scale0
        lv = levels[j : j + 1]
        for _ in range(rounds):
            prop = cur[:, None, :] + scale * rng.standard_normal((len(cur), 6, d))
            prop = _canonical(prop.reshape(-1, d))
            pc = table.counts(prop, lv)[:, 0].reshape(len(cur), 6)
            best = np.argmax(pc, axis=1)
            better = pc[np.arange(len(cur)), best] > cur_c
            cur = np.where(better[:, None], prop.reshape(len(cur), 6, d)[np.arange(len(cur)), best], cur)
            cur_c = np.maximum(cur_c, pc[np.arange(len(cur)), best])
            scale *= 0.6
        found.append(cur)
    return np.concatenate(found, axis=0) if found else np.zeros((0, d))


@dataclass
class NondegReport:
    deltas: list[float]
    sup_measures: list[float]
    argmax: list[list[float]]
    alpha_hat: float
    r_squared: float
    elliptic: bool
    n_sphere: int
    n_lambda: int
    interval: tuple[float, float]
    resolution: float
    zero_count: int
    mode: str = "standard"
    radius: float = 1.0
    message: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "deltas": list(self.deltas),
            "sup_measures": list(self.sup_measures),
            "argmax": [list(map(float, x)) for x in self.argmax],
            "alpha_hat": self.alpha_hat,
            "r_squared": self.r_squared,
            "elliptic": self.elliptic,
            "n_sphere": self.n_sphere,
            "n_lambda": self.n_lambda,
            "interval": list(self.interval),
            "resolution": self.resolution,
            "zero_count": self.zero_count,
            "mode": self.mode,
            "radius": self.radius,
            "message": self.message,
        }


def fit_loglog(x: ArrayLike, y: ArrayLike) -> tuple[float, float, int]:
    """Least-squares slope of log y vs log x over y > 0; returns (slope, R^2, zeros)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    keep = y > 0
    zeros = int(np.count_nonzero(~keep))
    if keep.sum() < 2:
        return math.nan, math.nan, zeros
    lx, ly = np.log(x[keep]), np.log(y[keep])
    slope, icpt = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + icpt)
    ss = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else 1.0
    return float(slope), float(r2), zeros


def _sup_measures(spec, interval, deltas, n_sphere, n_lam, seed, mode="standard", radius=1.0, top_k=8, rounds=12):
    deltas = np.asarray(deltas, float)
    table = _SymbolTable(spec, interval, n_lam, mode, radius)
    levels = deltas**2 if mode == "tt" else deltas
    # coordinate axes join the quasi-random sample: degeneracies sit on them exactly
    base = np.concatenate([hemisphere_directions(spec.symbol_dim, n_sphere, seed), np.eye(spec.symbol_dim)])
    counts = table.counts(base, levels)
    rng = np.random.default_rng(seed)
    extra = _refine(table, levels, base, counts, rng, top_k, rounds)
    pool = np.concatenate([base, extra], axis=0)
    pool_counts = np.concatenate([counts, table.counts(extra, levels)], axis=0)
    best = np.argmax(pool_counts, axis=0)
    sup = pool_counts[best, np.arange(len(deltas))] * table.cell
    return sup, pool[best], table.cell


def estimate_alpha(
    spec: ProblemSpec,
    interval: tuple[float, float] | None = None,
    delta_min: float = 1e-4,
    delta_max: float = 1e-1,
    n_delta: int = 12,
    n_sphere: int = 4096,
    n_lambda: int = 10**5,
    seed: int = 0,
) -> NondegReport:
    """Fit the exponent α in sup_ξ meas{L(ξ, ·) <= δ} ~ δ^α.

    Returns α̂ = inf with ``elliptic=True`` when every sup-measure vanishes.
    """
    if not 0 < delta_min < delta_max < 1:
        raise ValueError("need 0 < delta_min < delta_max < 1")
    if n_sphere < 1000:
        raise ValueError("n_sphere must be at least 1000")
    if n_lambda < 1000:
        raise ValueError("n_lambda must be at least 1000")
    interval = tuple(map(float, spec.interval if interval is None else interval))
    deltas = np.geomspace(delta_min, delta_max, n_delta)
    sup, arg, cell = _sup_measures(spec, interval, deltas, n_sphere, n_lambda, seed)
    return _report(deltas, sup, arg, cell, n_sphere, n_lambda, interval, "standard", 1.0)


def _report(deltas, sup, arg, cell, n_sphere, n_lambda, interval, mode, radius) -> NondegReport:
    if not np.any(sup > 0):
        return NondegReport(
            deltas=deltas.tolist(), sup_measures=sup.tolist(), argmax=arg.tolist(), alpha_hat=math.inf,
            r_squared=math.nan, elliptic=True, n_sphere=n_sphere, n_lambda=n_lambda, interval=interval,
            resolution=cell, zero_count=len(deltas), mode=mode, radius=radius,
            message="all level sets empty: symbol bounded below on the sphere (elliptic)",
        )
    slope, r2, zeros = fit_loglog(deltas, sup)
    msg = "" if zeros == 0 else f"{zeros} empty level sets excluded from the fit"
    if math.isnan(slope):
        msg = "fewer than two nonempty level sets; slope undefined"
    return NondegReport(
        deltas=deltas.tolist(), sup_measures=sup.tolist(), argmax=arg.tolist(),
        alpha_hat=max(slope, 0.0) if not math.isnan(slope) else math.nan, r_squared=r2, elliptic=False,
        n_sphere=n_sphere, n_lambda=n_lambda, interval=interval, resolution=cell, zero_count=zeros,
        mode=mode, radius=radius, message=msg,
    )


@dataclass
class ImplicationReport:
    standard: NondegReport
    tt: dict[float, NondegReport]
    beta: float
    tolerance: float
    holds: bool
    details: dict

    def to_dict(self) -> dict:
        return {
            "standard": self.standard.to_dict(),
            "tt": {str(j): r.to_dict() for j, r in self.tt.items()},
            "beta": self.beta,
            "tolerance": self.tolerance,
            "holds": self.holds,
            "details": self.details,
        }


def check_condition_implication(
    spec: ProblemSpec,
    interval: tuple[float, float] | None = None,
    j_list=(1.0,),
    beta: float = 1.0,
    deltas: ArrayLike | None = None,
    n_sphere: int = 4096,
    n_lambda: int = 10**5,
    seed: int = 0,
    tolerance: float = 0.05,
) -> ImplicationReport:
    """Compare the dyadic-shell condition with the unit-sphere one.

    For each J the shell condition measures
    sup_{|ξ| = J} meas{λ : |<(1,f), ξ>|^2 + <a ξ', ξ'>^2 <= δ^2} and is fitted
    to δ^{α_J}; the unit-sphere estimate must then satisfy
    α̂ >= α_J/2 - tolerance.  The fitted constants against (δ/J^β)^{α_J} are
    reported per J.
    """
    interval = tuple(map(float, spec.interval if interval is None else interval))
    deltas = np.geomspace(1e-4, 1e-1, 12) if deltas is None else np.sort(np.asarray(deltas, float))
    if any(j < 1 for j in j_list):
        raise ValueError("dyadic magnitudes J must be >= 1")
    sup, arg, cell = _sup_measures(spec, interval, deltas, n_sphere, n_lambda, seed)
    std = _report(deltas, sup, arg, cell, n_sphere, n_lambda, interval, "standard", 1.0)
    tts, details, ok = {}, {}, True
    for j in j_list:
        sup_j, arg_j, _ = _sup_measures(spec, interval, deltas, n_sphere, n_lambda, seed, mode="tt", radius=float(j))
        rep = _report(deltas, sup_j, arg_j, cell, n_sphere, n_lambda, interval, "tt", float(j))
        tts[float(j)] = rep
        if rep.elliptic and std.elliptic:
            details[str(j)] = {"status": "both elliptic"}
            continue
        if rep.elliptic or math.isnan(rep.alpha_hat):
            details[str(j)] = {"status": "shell condition gives no finite slope"}
            continue
        lhs = std.alpha_hat
        rhs = 0.5 * rep.alpha_hat - tolerance
        holds = lhs >= rhs
        ok &= holds
        scale = (deltas / float(j) ** beta) ** rep.alpha_hat
        with np.errstate(divide="ignore", invalid="ignore"):
            const = np.where(sup_j > 0, sup_j / scale, 0.0)
        details[str(j)] = {
            "alpha_standard": lhs,
            "alpha_shell": rep.alpha_hat,
            "bound": rhs,
            "holds": bool(holds),
            "shell_constant_max": float(np.max(const)),
        }
    return ImplicationReport(standard=std, tt=tts, beta=beta, tolerance=tolerance, holds=bool(ok), details=details)

