"""Coefficient models and the built-in problem library.

A problem is the homogeneous (or 1D piecewise-in-x) convection-diffusion law

    u_t + div f(x, u) = div div A(u),      A' = a,  a = sigma^2 >= 0,

posed on a state interval [m, M].  The symbol used by the non-degeneracy
estimator lives in d = d_x + 1 dimensions, with time as coordinate 0; see
:meth:`ProblemSpec.symbol_flux` and :meth:`ProblemSpec.symbol_diffusion`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate

PSD_TOL = 1e-10
STATE_TOL = 1e-12


class DomainError(ValueError):
    """A state value lies outside the problem's interval [m, M]."""


class NotPSDError(ValueError):
    """A diffusion matrix has an eigenvalue below -PSD_TOL."""


def matrix_sqrt(a: ArrayLike, lam: float | None = None) -> NDArray[np.float64]:
    """Symmetric PSD square root of a symmetric PSD matrix.

    Eigenvalues in [-PSD_TOL, 0) are clamped to zero; anything more negative
    raises :class:`NotPSDError`.  `lam` is only used to name the offending
    state in the error message.  Accepts stacks of matrices (..., n, n).
    """
    a = np.asarray(a, dtype=float)
    if a.shape[-1] != a.shape[-2]:
        raise ValueError(f"square matrix expected, got shape {a.shape}")
    if not np.allclose(a, np.swapaxes(a, -1, -2), atol=1e-14, rtol=0.0):
        raise ValueError("matrix is not symmetric")
    w, v = np.linalg.eigh(a)
    if np.any(w < -PSD_TOL):
        where = "" if lam is None else f" at lambda={lam!r}"
        raise NotPSDError(f"diffusion matrix not PSD{where}: min eigenvalue {w.min():.3e}")
    w = np.clip(w, 0.0, None)
    s = (v * np.sqrt(w)[..., None, :]) @ np.swapaxes(v, -1, -2)
    return 0.5 * (s + np.swapaxes(s, -1, -2))


def _power_primitive(lam: NDArray, p: float) -> NDArray:
    """Integral from 0 to lam of |w|**p dw."""
    return np.sign(lam) * np.abs(lam) ** (p + 1.0) / (p + 1.0)


@dataclass(frozen=True)
class FluxModel:
    """Convective flux 𝔣(x, λ) with values in R^{d_x}.

    kind
        ``"polynomial-power"``: 𝔣_k(λ) = c_k λ^{p+1}/(p+1), so f_k = c_k λ^p.
        ``"tabulated"``: 𝔣 sampled at `nodes` (shape (n, d_x)), cubic spline.
        ``"piecewise-in-x"``: 1D only; 𝔣(x, λ) = k(x) 𝔣_base(λ) with k
        piecewise constant over `pieces` = ((x_lo, x_hi, k), ...).
    """

    kind: str
    exponent: float = 1.0
    coefficients: tuple[float, ...] = (1.0,)
    nodes: tuple[float, ...] = ()
    values: tuple[tuple[float, ...], ...] = ()
    base: FluxModel | None = None
    pieces: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in ("polynomial-power", "tabulated", "piecewise-in-x"):
            raise ValueError(f"unknown flux kind {self.kind!r}")
        if self.kind == "tabulated":
            from scipy.interpolate import CubicSpline

            vals = np.asarray(self.values, dtype=float)
            if vals.ndim == 1:
                vals = vals[:, None]
            object.__setattr__(self, "_spline", CubicSpline(np.asarray(self.nodes, float), vals, axis=0))
        if self.kind == "piecewise-in-x":
            if self.base is None or self.base.kind == "piecewise-in-x" or self.base.dim != 1:
                raise ValueError("piecewise-in-x flux needs a homogeneous 1D base model")
            if not self.pieces:
                raise ValueError("piecewise-in-x flux needs at least one piece")

    @property
    def dim(self) -> int:
        if self.kind == "polynomial-power":
            return len(self.coefficients)
        if self.kind == "tabulated":
            return self._spline.c.shape[-1]
        return 1

    @property
    def heterogeneous(self) -> bool:
        return self.kind == "piecewise-in-x"

    def multiplier(self, x: ArrayLike) -> NDArray:
        """Spatial multiplier k(x); 1 for homogeneous models."""
        x = np.asarray(x, dtype=float)
        if not self.heterogeneous:
            return np.ones_like(x)
        k = np.full(x.shape, np.nan)
        last = len(self.pieces) - 1
        for i, (lo, hi, kval) in enumerate(self.pieces):
            inside = (x >= lo) & ((x < hi) | ((x == hi) & (i == last)))
            k = np.where(inside, kval, k)
        if np.any(np.isnan(k)):
            raise DomainError("point outside every flux piece")
        return k

    def value(self, lam: ArrayLike, x: ArrayLike | None = None) -> NDArray:
        """𝔣(x, λ), shape lam.shape + (d_x,)."""
        lam = np.asarray(lam, dtype=float)
        if self.kind == "polynomial-power":
            c = np.asarray(self.coefficients, float)
            p = self.exponent
            return (lam ** (p + 1.0) / (p + 1.0))[..., None] * c
        if self.kind == "tabulated":
            return self._spline(lam)
        k = self.multiplier(0.0 if x is None else x)
        return k[..., None] * self.base.value(lam)

    def derivative(self, lam: ArrayLike, x: ArrayLike | None = None) -> NDArray:
        """f = ∂λ𝔣(x, λ), shape lam.shape + (d_x,)."""
        lam = np.asarray(lam, dtype=float)
        if self.kind == "polynomial-power":
            c = np.asarray(self.coefficients, float)
            return (lam ** self.exponent)[..., None] * c
        if self.kind == "tabulated":
            return self._spline(lam, 1)
        k = self.multiplier(0.0 if x is None else x)
        return k[..., None] * self.base.derivative(lam)


@dataclass(frozen=True)
class DiffusionModel:
    """Diffusion matrix a(λ) (d_x x d_x), its primitive A and square root σ.

    kind
        ``"diagonal-power"``: a = diag(c_k |λ|^p).
        ``"constant-matrix"``: a = `matrix` for every λ.
        ``"tabulated"``: matrices `values` (n, d, d) at `nodes`, linearly
        interpolated entrywise (convex combinations keep PSD).
    """

    kind: str
    exponent: float = 0.0
    coefficients: tuple[float, ...] = (0.0,)
    matrix: tuple[tuple[float, ...], ...] = ()
    nodes: tuple[float, ...] = ()
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in ("diagonal-power", "constant-matrix", "tabulated"):
            raise ValueError(f"unknown diffusion kind {self.kind!r}")
        if self.kind == "diagonal-power" and any(c < 0 for c in self.coefficients):
            raise NotPSDError("negative diagonal diffusion coefficient")
        if self.kind == "constant-matrix":
            matrix_sqrt(np.asarray(self.matrix, float))
        if self.kind == "tabulated":
            vals = np.asarray(self.values, float)
            nodes = np.asarray(self.nodes, float)
            if vals.ndim != 3 or vals.shape[0] != nodes.size or np.any(np.diff(nodes) <= 0):
                raise ValueError("tabulated diffusion needs increasing nodes and (n, d, d) values")
            for lam, v in zip(nodes, vals):
                matrix_sqrt(v, lam)

    @property
    def dim(self) -> int:
        if self.kind == "diagonal-power":
            return len(self.coefficients)
        if self.kind == "constant-matrix":
            return len(self.matrix)
        return np.asarray(self.values).shape[-1]

    @property
    def is_diagonal(self) -> bool:
        if self.kind == "diagonal-power":
            return True
        m = np.asarray(self.matrix if self.kind == "constant-matrix" else self.values, float)
        off = m - np.eye(m.shape[-1]) * np.diagonal(m, axis1=-2, axis2=-1)[..., None, :]
        return not np.any(off)

    def value(self, lam: ArrayLike) -> NDArray:
        """a(λ), shape lam.shape + (d_x, d_x)."""
        lam = np.asarray(lam, dtype=float)
        if self.kind == "diagonal-power":
            c = np.asarray(self.coefficients, float)
            diag = np.abs(lam)[..., None] ** self.exponent * c
            return diag[..., None] * np.eye(c.size)
        if self.kind == "constant-matrix":
            return np.broadcast_to(np.asarray(self.matrix, float), lam.shape + (self.dim, self.dim)).copy()
        return self._interp(lam)

    def _interp(self, lam: NDArray) -> NDArray:
        nodes = np.asarray(self.nodes, float)
        vals = np.asarray(self.values, float)
        flat = vals.reshape(nodes.size, -1)
        out = np.stack([np.interp(lam, nodes, flat[:, j]) for j in range(flat.shape[1])], axis=-1)
        return out.reshape(lam.shape + vals.shape[1:])

    def primitive(self, lam: ArrayLike) -> NDArray:
        """A(λ) = ∫_0^λ a(w) dw, shape lam.shape + (d_x, d_x)."""
        lam = np.asarray(lam, dtype=float)
        if self.kind == "diagonal-power":
            c = np.asarray(self.coefficients, float)
            diag = _power_primitive(lam, self.exponent)[..., None] * c
            return diag[..., None] * np.eye(c.size)
        if self.kind == "constant-matrix":
            return lam[..., None, None] * np.asarray(self.matrix, float)
        return self._tabulated_primitive(lam)

    def primitive_diagonal(self, lam: ArrayLike) -> NDArray:
        """Diagonal of A(λ), shape lam.shape + (d_x,); cheaper than :meth:`primitive`."""
        lam = np.asarray(lam, dtype=float)
        if self.kind == "diagonal-power":
            return _power_primitive(lam, self.exponent)[..., None] * np.asarray(self.coefficients, float)
        return np.diagonal(self.primitive(lam), axis1=-2, axis2=-1)

    def _tabulated_primitive(self, lam: NDArray) -> NDArray:
        # the interpolant is piecewise linear, so its primitive is exact piecewise quadratic
        nodes = np.asarray(self.nodes, float)
        vals = np.asarray(self.values, float)
        knots = np.unique(np.concatenate([nodes, [0.0]]))
        kv = self._interp(knots)
        seg = 0.5 * (kv[1:] + kv[:-1]) * np.diff(knots)[:, None, None]
        cum = np.concatenate([np.zeros((1,) + vals.shape[1:]), np.cumsum(seg, axis=0)])
        cum -= cum[np.searchsorted(knots, 0.0)]
        j = np.clip(np.searchsorted(knots, lam, side="right") - 1, 0, knots.size - 2)
        lo = knots[j]
        dl = (lam - lo)[..., None, None]
        a_lo = kv[j]
        slope = (kv[j + 1] - kv[j]) / np.diff(knots)[j][..., None, None]
        return cum[j] + a_lo * dl + 0.5 * slope * dl**2

    def sqrt(self, lam: ArrayLike) -> NDArray:
        """σ(λ), the symmetric PSD square root of a(λ)."""
        lam = np.asarray(lam, dtype=float)
        if self.kind == "diagonal-power":
            c = np.asarray(self.coefficients, float)
            diag = np.abs(lam)[..., None] ** (0.5 * self.exponent) * np.sqrt(c)
            return diag[..., None] * np.eye(c.size)
        if self.kind == "constant-matrix":
            s = matrix_sqrt(np.asarray(self.matrix, float))
            return np.broadcast_to(s, lam.shape + s.shape).copy()
        return matrix_sqrt(self._interp(lam))

    def sqrt_primitive(self, lam: ArrayLike, tol: float = 1e-10) -> NDArray:
        """S(λ) = ∫_0^λ σ(w) dw, shape lam.shape + (d_x, d_x)."""
        lam = np.asarray(lam, dtype=float)
        if self.kind == "diagonal-power":
            c = np.asarray(self.coefficients, float)
            diag = _power_primitive(lam, 0.5 * self.exponent)[..., None] * np.sqrt(c)
            return diag[..., None] * np.eye(c.size)
        if self.kind == "constant-matrix":
            return lam[..., None, None] * matrix_sqrt(np.asarray(self.matrix, float))
        d = self.dim
        out = np.empty(lam.shape + (d, d))
        uniq, inv = np.unique(lam.ravel(), return_inverse=True)
        res = np.empty((uniq.size, d, d))
        for n, v in enumerate(uniq):
            for i in range(d):
                for j in range(i, d):
                    res[n, i, j] = integrate.quad(
                        lambda w: self.sqrt(w)[i, j], 0.0, v, epsabs=tol, epsrel=tol, limit=200
                    )[0]
                    res[n, j, i] = res[n, i, j]
        out[...] = res[inv].reshape(out.shape)
        return out


@dataclass(frozen=True)
class ProblemSpec:
    """A convection-diffusion problem on the state interval [m, M]."""

    name: str
    dim: int
    flux: FluxModel
    diffusion: DiffusionModel
    interval: tuple[float, float]
    initial: Mapping[str, Any] = field(default_factory=dict)
    box: tuple[tuple[float, float], ...] = ()
    max_principle: bool = False
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("spatial dimension must be 1 or 2")
        m, M = self.interval
        if not m < M:
            raise ValueError(f"empty state interval [{m}, {M}]")
        if self.flux.dim != self.dim or self.diffusion.dim != self.dim:
            raise ValueError("coefficient model dimension does not match the problem")
        if self.flux.heterogeneous and self.dim != 1:
            raise ValueError("heterogeneous flux is supported in 1D only")
        if self.max_principle:
            xs = [0.5 * (lo + hi) for lo, hi, _ in self.flux.pieces] or [None]
            for x in xs:
                ends = self.flux.value(np.array([m, M]), None if x is None else np.array([x, x]))
                if np.max(np.abs(ends)) > 1e-12:
                    raise ValueError("max-principle problem needs 𝔣(m) = 𝔣(M) = 0")

    @property
    def symbol_dim(self) -> int:
        return self.dim + 1

    @property
    def homogeneous(self) -> bool:
        return not self.flux.heterogeneous

    def check_state(self, lam: ArrayLike) -> NDArray:
        lam = np.asarray(lam, dtype=float)
        m, M = self.interval
        if np.any(lam < m - STATE_TOL) or np.any(lam > M + STATE_TOL):
            raise DomainError(f"state outside [{m}, {M}]")
        return lam

    def flux_value(self, lam: ArrayLike, x: ArrayLike | None = None) -> NDArray:
        return self.flux.value(self.check_state(lam), x)

    def flux_derivative(self, lam: ArrayLike, x: ArrayLike | None = None) -> NDArray:
        return self.flux.derivative(self.check_state(lam), x)

    def diffusion_matrix(self, lam: ArrayLike) -> NDArray:
        return self.diffusion.value(self.check_state(lam))

    def symbol_flux(self, lam: ArrayLike) -> NDArray:
        """(1, f(λ)) in (t, x) symbol coordinates, shape lam.shape + (d,)."""
        f = self.flux_derivative(lam)
        return np.concatenate([np.ones(f.shape[:-1] + (1,)), f], axis=-1)

    def symbol_diffusion(self, lam: ArrayLike) -> NDArray:
        """a(λ) padded with a zero time row and column, shape lam.shape + (d, d)."""
        a = self.diffusion_matrix(lam)
        out = np.zeros(a.shape[:-2] + (self.dim + 1, self.dim + 1))
        out[..., 1:, 1:] = a
        return out


def eval_flux_derivative(spec: ProblemSpec, lam: float, x: ArrayLike | None = None) -> NDArray:
    """f(x, λ) = ∂λ𝔣 as a vector in R^{d_x}."""
    if spec.flux.heterogeneous and x is None:
        raise ValueError("heterogeneous flux needs a point x")
    return spec.flux_derivative(np.asarray(lam, float), None if x is None else np.asarray(x, float))


def _natural(params: Mapping[str, Any], key: str, default: int) -> int:
    v = params.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
        raise ValueError(f"parameter {key} must be a positive integer, got {v!r}")
    return int(v)


def _tt_example(params):
    l = _natural(params, "l", 1)
    n = _natural(params, "n", 1)
    bound = float(params.get("M", 1.0))
    return ProblemSpec(
        name="tt_example",
        dim=2,
        flux=FluxModel("polynomial-power", exponent=l, coefficients=(1.0, 0.0)),
        diffusion=DiffusionModel("diagonal-power", exponent=n, coefficients=(0.0, 1.0)),
        interval=(-bound, bound),
        initial={"profile": "bump", "center": [0.0, 0.0], "radius": 0.3, "amplitude": 1.0},
        box=((-0.5, 0.5), (-0.5, 0.5)),
        params={"l": l, "n": n, "M": bound},
    )


def _burgers(params):
    return ProblemSpec(
        name="burgers_1d",
        dim=1,
        flux=FluxModel("polynomial-power", exponent=1, coefficients=(1.0,)),
        diffusion=DiffusionModel("diagonal-power", exponent=0, coefficients=(0.0,)),
        interval=(0.0, 1.0),
        initial={"profile": "riemann", "left": 1.0, "right": 0.0, "x0": 0.0, "x_wrap": -1.0},
        box=((-2.0, 2.0),),
    )


def _heat(params):
    d = params.get("d_x", 1)
    if d not in (1, 2):
        raise ValueError("heat needs d_x in {1, 2}")
    return ProblemSpec(
        name="heat",
        dim=d,
        flux=FluxModel("polynomial-power", exponent=1, coefficients=(0.0,) * d),
        diffusion=DiffusionModel("constant-matrix", matrix=tuple(tuple(r) for r in np.eye(d))),
        interval=(0.0, 1.0),
        initial={"profile": "gaussian", "center": [0.0] * d, "width": 0.25, "amplitude": 1.0},
        box=((-4.0, 4.0),) * d,
        params={"d_x": d},
    )


def _porous_medium(params):
    mpm = params.get("m_pm", 2)
    if isinstance(mpm, bool) or not mpm > 1:
        raise ValueError("porous medium exponent m_pm must exceed 1")
    mpm = float(mpm)
    return ProblemSpec(
        name="porous_medium",
        dim=1,
        flux=FluxModel("polynomial-power", exponent=1, coefficients=(0.0,)),
        diffusion=DiffusionModel("diagonal-power", exponent=mpm - 1.0, coefficients=(mpm,)),
        interval=(0.0, float(params.get("M", 2.0))),
        initial={"profile": "barenblatt", "m_pm": mpm, "t0": 0.1, "C": 0.5},
        box=((-6.0, 6.0),),
        params={"m_pm": mpm},
    )


def _heterogeneous(params):
    kl = float(params.get("k_L", 1.0))
    kr = float(params.get("k_R", 2.0))
    if kl <= 0 or kr <= 0:
        raise ValueError("flux multipliers must be positive")
    lo, hi = -1.0, 1.0
    return ProblemSpec(
        name="heterogeneous_flux_1d",
        dim=1,
        flux=FluxModel(
            "piecewise-in-x",
            base=FluxModel("polynomial-power", exponent=1, coefficients=(1.0,)),
            pieces=((lo, 0.0, kl), (0.0, hi, kr)),
        ),
        diffusion=DiffusionModel("diagonal-power", exponent=0, coefficients=(0.0,)),
        interval=(0.0, 1.0),
        initial={"profile": "bump", "center": [-0.5], "radius": 0.3, "amplitude": 1.0},
        box=((lo, hi),),
        params={"k_L": kl, "k_R": kr},
    )


_LIBRARY = {
    "tt_example": _tt_example,
    "burgers_1d": _burgers,
    "heat": _heat,
    "porous_medium": _porous_medium,
    "heterogeneous_flux_1d": _heterogeneous,
}


def builtin_names() -> Sequence[str]:
    return tuple(_LIBRARY)


def builtin_problem(name: str, params: Mapping[str, Any] | None = None) -> ProblemSpec:
    """Look up a named problem.

    ``tt_example`` is returned in the rotated coordinates y1 = x1 + x2,
    y2 = x1 - x2, where it reads u_t + (u^{l+1}/(l+1))_{y1} = (|u|^n u/(n+1))_{y2 y2}.
    """
    try:
        factory = _LIBRARY[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(_LIBRARY)}") from None
    return factory(dict(params or {}))
