"""Explicit vanishing-viscosity solver on periodic uniform grids.

The scheme advances

    u_t + div f(x, u) = sum_ij d_i d_j A_ij(u) + eps Lap u

with a local Lax-Friedrichs (Rusanov) numerical flux for the convection, a
Godunov-type interface flux where a 1D piecewise flux jumps, and second-order
centered differences for the diffusion.  The time step is fixed by the CFL
bound computed from the range of the initial datum.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .problem import ProblemSpec

log = logging.getLogger(__name__)


class ConfigurationError(ValueError):
    """Grid or time-step settings that the scheme cannot honour."""


class SolverBlowup(RuntimeError):
    """Non-finite values appeared during time stepping."""


@dataclass(frozen=True)
class Grid:
    cells: tuple[int, ...]
    box: tuple[tuple[float, float], ...]
    cfl: float = 0.9

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(int(n) for n in self.cells))
        object.__setattr__(self, "box", tuple((float(a), float(b)) for a, b in self.box))
        if len(self.cells) not in (1, 2) or len(self.box) != len(self.cells):
            raise ConfigurationError("grid must be 1D or 2D with one box interval per axis")
        for n in self.cells:
            if n < 16 or n & (n - 1):
                raise ConfigurationError(f"cell counts must be powers of two >= 16, got {n}")
        for a, b in self.box:
            if not b > a:
                raise ConfigurationError("empty box interval")
        if not 0 < self.cfl < 1:
            raise ConfigurationError("CFL safety factor must lie in (0, 1)")

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(b - a for a, b in self.box)

    @property
    def dx(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.lengths, self.cells))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.dx))

    def centers(self, axis: int = 0) -> NDArray:
        a, _ = self.box[axis]
        return a + self.dx[axis] * (np.arange(self.cells[axis]) + 0.5)

    def mesh(self) -> tuple[NDArray, ...]:
        return np.meshgrid(*(self.centers(k) for k in range(self.dim)), indexing="ij")

    def to_dict(self) -> dict:
        return {"cells": list(self.cells), "box": [list(b) for b in self.box], "cfl": self.cfl}


@dataclass
class Field:
    values: NDArray
    grid: Grid
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"field shape {self.values.shape} does not match grid {self.grid.shape}")

    def integral(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)


@dataclass(frozen=True)
class Trajectory:
    fields: tuple[Field, ...]
    epsilon: float
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        times = [f.time for f in self.fields]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("trajectory times must be strictly increasing")

    @property
    def grid(self) -> Grid:
        return self.fields[0].grid

    @property
    def times(self) -> list[float]:
        return [f.time for f in self.fields]

    @property
    def final(self) -> Field:
        return self.fields[-1]


def barenblatt(x: ArrayLike, t: float, m: float, C: float) -> NDArray:
    """1D Barenblatt profile of u_t = (u^m)_xx."""
    x = np.asarray(x, float)
    k = 1.0 / (m + 1.0)
    kappa = k * (m - 1.0) / (2.0 * m)
    core = C - kappa * x**2 * t ** (-2.0 * k)
    return t ** (-k) * np.clip(core, 0.0, None) ** (1.0 / (m - 1.0))


def heat_gaussian(grid: Grid, t: float, width: float, amplitude: float = 1.0, center=None) -> NDArray:
    """Heat-kernel evolution of amplitude * exp(-|x-c|^2 / (2 width^2)) under u_t = Lap u."""
    c = np.zeros(grid.dim) if center is None else np.asarray(center, float)
    var = width**2 + 2.0 * t
    r2 = sum((X - ck) ** 2 for X, ck in zip(grid.mesh(), c))
    return amplitude * (width**2 / var) ** (grid.dim / 2) * np.exp(-r2 / (2.0 * var))


def make_initial(descriptor: Mapping[str, Any], grid: Grid) -> Field:
    """Initial field from a named profile."""
    d = dict(descriptor)
    profile = d.get("profile")
    X = grid.mesh()
    if profile == "constant":
        vals = np.full(grid.shape, float(d["value"]))
    elif profile == "riemann":
        if grid.dim != 1:
            raise ValueError("riemann profile is 1D")
        x = X[0]
        lo = float(d.get("x_wrap", grid.box[0][0]))
        vals = np.where((x >= lo) & (x < float(d.get("x0", 0.0))), float(d["left"]), float(d["right"]))
    elif profile == "gaussian":
        vals = heat_gaussian(grid, 0.0, float(d["width"]), float(d.get("amplitude", 1.0)), d.get("center"))
    elif profile == "bump":
        c = d.get("center", [0.0] * grid.dim)
        r2 = sum((Xk - ck) ** 2 for Xk, ck in zip(X, c)) / float(d["radius"]) ** 2
        inside = r2 < 1.0
        vals = np.zeros(grid.shape)
        vals[inside] = np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
        vals *= float(d.get("amplitude", 1.0))
    elif profile == "barenblatt":
        vals = barenblatt(X[0], float(d["t0"]), float(d["m_pm"]), float(d["C"]))
    elif profile == "indicator":
        vals = np.where((X[0] >= float(d["lo"])) & (X[0] < float(d["hi"])), 1.0, 0.0)
    else:
        raise ValueError(f"unknown initial profile {profile!r}")
    return Field(vals, grid, 0.0)


class _Scheme:
    """Semi-discrete right-hand side for one (spec, grid, eps)."""

    def __init__(self, spec: ProblemSpec, grid: Grid, eps: float, u_range: tuple[float, float]):
        if grid.dim != spec.dim:
            raise ConfigurationError("grid dimension does not match the problem")
        self.spec, self.grid, self.eps = spec, grid, float(eps)
        self.dx = grid.dx
        lam = np.linspace(u_range[0], u_range[1], 2001)
        flux = spec.flux
        if flux.heterogeneous:
            x = grid.centers(0)
            self.k = flux.multiplier(x)
            self.k_next = np.roll(self.k, -1)
            self.jump = self.k != self.k_next
            b = flux.base.value(lam)[:, 0]
            self.theta = float(lam[np.argmin(b)])
            speeds = [float(np.max(np.abs(self.k))) * float(np.max(np.abs(flux.base.derivative(lam))))]
        else:
            speeds = list(np.max(np.abs(flux.derivative(lam)), axis=0))
        self.has_flux = any(s > 0 for s in speeds)
        a = spec.diffusion.value(lam)
        self.has_diff = bool(np.any(a))
        self.diagonal = spec.diffusion.is_diagonal
        self.diff_pairs = [
            (i, j) for i in range(grid.dim) for j in range(grid.dim) if np.any(a[:, i, j])
        ]
        diag_max = [float(np.max(a[:, k, k])) for k in range(grid.dim)]
        off = max((float(np.max(np.abs(a[:, i, j]))) for i, j in self.diff_pairs if i != j), default=0.0)
        rate = 0.0
        for k in range(grid.dim):
            h = self.dx[k]
            rate += speeds[k] / h + 2.0 * (diag_max[k] + off + self.eps) / h**2
        self.rate = rate
        self.speeds = speeds

    def dt_max(self) -> float:
        return math.inf if self.rate == 0 else self.grid.cfl / self.rate

    def rhs(self, u: NDArray) -> NDArray:
        out = np.zeros_like(u)
        spec = self.spec
        if self.has_flux:
            if spec.flux.heterogeneous:
                out -= self._hetero_divergence(u)
            else:
                F = spec.flux.value(u)
                S = np.abs(spec.flux.derivative(u))
                for k in range(self.grid.dim):
                    if self.speeds[k] == 0:
                        continue
                    up = np.roll(u, -1, axis=k)
                    Fk = F[..., k]
                    Sk = S[..., k]
                    num = 0.5 * (Fk + np.roll(Fk, -1, axis=k)) - 0.5 * np.maximum(Sk, np.roll(Sk, -1, axis=k)) * (up - u)
                    out -= (num - np.roll(num, 1, axis=k)) / self.dx[k]
        if self.has_diff:
            if self.diagonal:
                diag = spec.diffusion.primitive_diagonal(u)
                entries = {(k, k): diag[..., k] for k in range(self.grid.dim)}
            else:
                A = spec.diffusion.primitive(u)
                entries = {(i, j): A[..., i, j] for i, j in self.diff_pairs}
            for i, j in self.diff_pairs:
                Aij = entries[i, j]
                if i == j:
                    out += (np.roll(Aij, -1, axis=i) - 2.0 * Aij + np.roll(Aij, 1, axis=i)) / self.dx[i] ** 2
                else:
                    pp = np.roll(np.roll(Aij, -1, axis=i), -1, axis=j)
                    pm = np.roll(np.roll(Aij, -1, axis=i), 1, axis=j)
                    mp = np.roll(np.roll(Aij, 1, axis=i), -1, axis=j)
                    mm = np.roll(np.roll(Aij, 1, axis=i), 1, axis=j)
                    out += (pp - pm - mp + mm) / (4.0 * self.dx[i] * self.dx[j])
        if self.eps > 0:
            for k in range(self.grid.dim):
                out += self.eps * (np.roll(u, -1, axis=k) - 2.0 * u + np.roll(u, 1, axis=k)) / self.dx[k] ** 2
        return out

    def _hetero_divergence(self, u: NDArray) -> NDArray:
        base = self.spec.flux.base
        b = base.value(u)[:, 0]
        s = np.abs(base.derivative(u)[:, 0])
        up = np.roll(u, -1)
        kl, kr = self.k, self.k_next
        fl, fr = kl * b, kr * np.roll(b, -1)
        speed = np.maximum(np.abs(kl) * s, np.abs(kr) * np.roll(s, -1))
        num = 0.5 * (fl + fr) - 0.5 * speed * (up - u)
        if np.any(self.jump):
            th = self.theta
            ul, ur = u[self.jump], up[self.jump]
            g_left = kl[self.jump] * base.value(np.maximum(ul, th))[:, 0]
            g_right = kr[self.jump] * base.value(np.minimum(ur, th))[:, 0]
            num[self.jump] = np.maximum(g_left, g_right)
        return (num - np.roll(num, 1)) / self.dx[0]


def solve(
    spec: ProblemSpec,
    grid: Grid,
    eps: float,
    u0: Field | ArrayLike,
    T: float,
    save_times: Sequence[float] | None = None,
) -> Trajectory:
    """Advance u0 to time T with forward Euler under the CFL bound.

    The returned trajectory holds u0 followed by the fields at `save_times`
    (default ``[T]``).  ``meta`` records the time step, step count, the
    running min/max over all steps and the mass at each saved time.
    """
    if not T > 0:
        raise ConfigurationError("final time must be positive")
    if eps < 0:
        raise ConfigurationError("viscosity must be non-negative")
    field0 = u0 if isinstance(u0, Field) else Field(np.asarray(u0, float), grid, 0.0)
    u = field0.values.copy()
    if not np.all(np.isfinite(u)):
        raise ValueError("initial datum has non-finite values")
    spec.check_state(u)
    saves = sorted(float(t) for t in (save_times if save_times else [T]))
    if saves[-1] > T + 1e-15 or saves[0] <= 0:
        raise ConfigurationError("save times must lie in (0, T]")
    if abs(saves[-1] - T) > 1e-15:
        saves.append(float(T))
    if spec.homogeneous:
        lo, hi = float(u.min()), float(u.max())
        if hi == lo:
            hi = lo + 1e-12
    else:
        lo, hi = spec.interval
    scheme = _Scheme(spec, grid, eps, (lo, hi))
    dt = scheme.dt_max()
    if dt < 1e-12 * T:
        raise ConfigurationError(f"CFL time step {dt:.3e} underflows below 1e-12 * T")
    t0 = float(field0.time)
    fields = [Field(u.copy(), grid, t0)]
    mass = [float(u.sum() * grid.cell_volume)]
    umin, umax = float(u.min()), float(u.max())
    steps = 0
    t = t0
    for ts in saves:
        target = t0 + ts
        n = max(1, math.ceil((target - t) / dt - 1e-9)) if target > t else 0
        h = (target - t) / n if n else 0.0
        for _ in range(n):
            u = u + h * scheme.rhs(u)
            steps += 1
            lo_s, hi_s = float(u.min()), float(u.max())
            if not (math.isfinite(lo_s) and math.isfinite(hi_s)):
                raise SolverBlowup(f"non-finite values at step {steps}")
            umin, umax = min(umin, lo_s), max(umax, hi_s)
        t = target
        fields.append(Field(u.copy(), grid, t))
        mass.append(float(u.sum() * grid.cell_volume))
    meta = {
        "scheme": "forward Euler; local Lax-Friedrichs convection; centered div-div A(u) + eps Laplacian",
        "problem": spec.name,
        "dt": dt,
        "steps": steps,
        "min": umin,
        "max": umax,
        "mass": mass,
    }
    log.debug("solve %s eps=%g: %d steps, dt=%.3e", spec.name, eps, steps, dt)
    return Trajectory(tuple(fields), float(eps), meta)


def viscosity_sweep(
    spec: ProblemSpec,
    grid: Grid,
    eps_list: Sequence[float],
    u0: Field | ArrayLike,
    T: float,
    save_times: Sequence[float] | None = None,
) -> list[Trajectory]:
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise ValueError("empty viscosity list")
    if any(e < 0 for e in eps_list) or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("viscosities must be non-negative and strictly decreasing")
    return [solve(spec, grid, e, u0, T, save_times) for e in eps_list]


def kinetic_function(field: Field | ArrayLike, lam_grid: ArrayLike) -> NDArray:
    """h(x, λ) = sgn(u(x) - λ) with sgn(0) = 0; λ is the trailing axis."""
    u = field.values if isinstance(field, Field) else np.asarray(field, float)
    lam = np.asarray(lam_grid, float)
    return np.sign(u[..., None] - lam)


def indicator_weight(lam_grid: ArrayLike) -> NDArray:
    return np.ones_like(np.asarray(lam_grid, float))


def velocity_average(h: Field | NDArray, rho: ArrayLike, lam_grid: ArrayLike):
    """∫ ρ(λ) h(·, λ) dλ over the λ grid.

    For a kinetic array the trapezoid rule is used along the last axis.  For a
    :class:`Field` the sign kernel is integrated exactly against the
    piecewise-linear interpolant of ρ, so the jump at λ = u costs no accuracy;
    with ρ ≡ 1 the result is checked against the closed form 2u - m - M.
    """
    lam = np.asarray(lam_grid, float)
    rho = np.asarray(rho, float)
    if rho.shape != lam.shape or lam.ndim != 1 or lam.size < 2:
        raise ValueError("rho must be sampled on the (1D) lambda grid")
    if np.any(np.diff(lam) <= 0):
        raise ValueError("lambda grid must be increasing")
    if not isinstance(h, Field):
        h = np.asarray(h, float)
        if h.shape[-1] != lam.size:
            raise ValueError("kinetic array and lambda grid disagree")
        return np.trapezoid(h * rho, lam, axis=-1)
    u = np.clip(h.values, lam[0], lam[-1])
    m, M = lam[0], lam[-1]
    dl = np.diff(lam)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (rho[1:] + rho[:-1]) * dl)])
    j = np.clip(np.searchsorted(lam, u, side="right") - 1, 0, lam.size - 2)
    s = u - lam[j]
    slope = (rho[j + 1] - rho[j]) / dl[j]
    below = cum[j] + rho[j] * s + 0.5 * slope * s * s
    avg = 2.0 * below - cum[-1]
    if np.all(rho == 1.0):
        closed = 2.0 * u - m - M
        gap = float(np.max(np.abs(avg - closed)))
        if gap > 1e-9 * max(1.0, M - m):
            raise ArithmeticError(f"velocity average deviates from 2u-m-M by {gap:.3e}")
    return Field(avg, h.grid, h.time)


def compactness_diagnostic(trajs: Sequence[Trajectory], rho: ArrayLike, lam_grid: ArrayLike) -> list[dict]:
    """L1 distances of velocity averages between consecutive viscosity levels."""
    if len(trajs) < 2:
        raise ValueError("need at least two trajectories")
    grid = trajs[0].grid
    times = trajs[0].times
    for tr in trajs[1:]:
        if tr.grid != grid or len(tr.times) != len(times) or not np.allclose(tr.times, times, atol=1e-12):
            raise ValueError("trajectories must share grid and save times")
    rows = []
    for a, b in zip(trajs, trajs[1:]):
        for fa, fb in zip(a.fields, b.fields):
            va = velocity_average(fa, rho, lam_grid).values
            vb = velocity_average(fb, rho, lam_grid).values
            rows.append(
                {
                    "eps_coarse": a.epsilon,
                    "eps_fine": b.epsilon,
                    "time": fa.time,
                    "l1": float(np.abs(va - vb).sum() * grid.cell_volume),
                }
            )
    return rows


def centered_gradient(values: NDArray, grid: Grid, axis: int) -> NDArray:
    return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2.0 * grid.dx[axis])


def dissipation_diagnostic(traj: Trajectory, spec: ProblemSpec) -> dict:
    """L2 norms of B_k = sum_s d_s ∫_0^u σ_sk(w) dw at every saved time."""
    rows = []
    for f in traj.fields:
        S = spec.diffusion.sqrt_primitive(f.values)
        B = np.zeros(f.values.shape + (spec.dim,))
        for k in range(spec.dim):
            for s in range(spec.dim):
                if np.any(S[..., s, k]):
                    B[..., k] += centered_gradient(S[..., s, k], f.grid, s)
        rows.append(np.sqrt(np.sum(B**2, axis=tuple(range(spec.dim))) * f.grid.cell_volume))
    norms = np.array(rows)
    return {"epsilon": traj.epsilon, "times": traj.times, "norms": norms.tolist(), "max_norm": float(norms.max())}


def entropy_residual(spec: ProblemSpec, before: Field, after: Field, k: float) -> NDArray:
    """Cell-wise discrete Kruzkov residual for the constant k (informational).

    d_t |u-k| + div(sgn(u-k)(𝔣(u)-𝔣(k))) - sum_i d_ii |A_ii(u)-A_ii(k)|
    evaluated with the time-averaged field; positive values indicate entropy
    production of the wrong sign at grid scale.
    """
    if not spec.homogeneous or not spec.diffusion.is_diagonal:
        raise ValueError("entropy residual needs a homogeneous diagonal problem")
    grid = before.grid
    dt = after.time - before.time
    if not dt > 0:
        raise ValueError("fields must be in increasing time order")
    um = 0.5 * (before.values + after.values)
    res = (np.abs(after.values - k) - np.abs(before.values - k)) / dt
    sg = np.sign(um - k)
    q = sg[..., None] * (spec.flux.value(um) - spec.flux.value(np.array(k)))
    Au = spec.diffusion.primitive(um)
    Ak = spec.diffusion.primitive(np.array(k))
    for i in range(grid.dim):
        res += centered_gradient(q[..., i], grid, i)
        w = np.abs(Au[..., i, i] - Ak[i, i])
        res -= (np.roll(w, -1, axis=i) - 2 * w + np.roll(w, 1, axis=i)) / grid.dx[i] ** 2
    return res
