"""Closed-form regularity exponents and interpolation parameters.

For a symbol that is non-degenerate with exponent ``alpha`` in dimension
``d`` (time included), velocity averages of the entropy solution lie in
W^{s,q}_loc for every q < q_star and s < s_star.  This module evaluates those
exponents together with the auxiliary parameters of the dyadic K-interpolation
argument that produces them, and checks the algebraic identities linking
them.

Rational inputs (``int`` or :class:`fractions.Fraction`) are evaluated in
exact arithmetic; floats fall back to floating point.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from fractions import Fraction
from numbers import Rational
from typing import Union

import numpy as np

Number = Union[int, float, Fraction]


def _coerce(alpha: Number, d: int) -> Number:
    if isinstance(d, bool) or not isinstance(d, (int, np.integer)) or d < 2:
        raise ValueError(f"dimension d must be an integer >= 2, got {d!r}")
    if isinstance(alpha, bool):
        raise TypeError("alpha must be a number")
    if isinstance(alpha, Rational):
        alpha = Fraction(alpha)
    else:
        alpha = float(alpha)
        if not np.isfinite(alpha):
            raise ValueError("alpha must be finite")
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    return alpha


def theta_star(alpha: Number, d: int) -> Number:
    """Lorentz interpolation index alpha/(alpha + 2(d+3)); alpha = 0 allowed."""
    if alpha == 0:
        return Fraction(0)
    a = _coerce(alpha, d)
    return a / (a + 2 * (d + 3))


def q_star(alpha: Number, d: int) -> Number:
    """Integrability exponent (2 alpha + 2(2d+6)) / (2 alpha + 2d + 6)."""
    a = _coerce(alpha, d)
    return (2 * a + 2 * (2 * d + 6)) / (2 * a + 2 * d + 6)


def s_star(alpha: Number, d: int) -> Number:
    """Guaranteed Sobolev order of velocity averages."""
    a = _coerce(alpha, d)
    return a**2 * (a + 4) / ((3 * a + 8) * ((a + 4) * (a + 2 * (d + 1)) + 2 * a))


def c_star(alpha: Number, d: int) -> Number:
    """Largest admissible slack c; equals 2 s_star / alpha."""
    a = _coerce(alpha, d)
    return 2 * a * (a + 4) / ((3 * a + 8) * ((a + 4) * (a + 2 * (d + 1)) + 2 * a))


class InvalidSlackError(ValueError):
    """The slack parameter c exceeds c_star."""


@dataclass(frozen=True)
class ExponentSet:
    alpha: Number
    d: int
    c: Number
    q_star: Number
    s_star: Number
    theta_star: Number
    c_star: Number
    r: Number
    epsilon: Number
    eta: Number
    omega: Number
    gamma: Number

    @property
    def exact(self) -> bool:
        return isinstance(self.alpha, Fraction)

    def check(self) -> None:
        """Raise AssertionError if a structural invariant fails."""
        assert 1 < self.q_star <= 2
        assert 0 < self.s_star < Fraction(1, 3)
        assert self.r + self.epsilon < 1
        assert self.omega - self.gamma * self.eta > 0
        assert abs(self.q_star - 2 / (1 + self.theta_star)) <= 1e-12

    def to_dict(self) -> dict:
        """JSON-ready record: floats everywhere, plus exact strings when rational."""
        raw = asdict(self)
        out = {k: (float(v) if k != "d" else v) for k, v in raw.items()}
        out["exact"] = self.exact
        if self.exact:
            out["rational"] = {k: str(v) for k, v in raw.items() if k != "d"}
        return out


def proof_parameters(alpha: Number, d: int, c: Number | None = None) -> ExponentSet:
    """All interpolation parameters for slack ``c`` (default ``c_star``).

    r = (alpha+4)/(3 alpha+8) - c,  epsilon = (2 alpha+4)/(alpha+4) r + 2c,
    eta = 2/(alpha+2(d+3)),  omega = 2r/(alpha+4),
    gamma = (alpha+2(d+3))/(alpha+2(d+2)) (c + r alpha/(alpha+4)).
    """
    a = _coerce(alpha, d)
    cs = c_star(a, d)
    if c is None:
        c = cs
    elif isinstance(a, Fraction) and isinstance(c, Rational) and not isinstance(c, bool):
        c = Fraction(c)
    else:
        c = float(c)
        a = float(a)
        cs = float(cs)
    if c <= 0:
        raise ValueError(f"slack c must be positive, got {c!r}")
    if c > cs:
        raise InvalidSlackError(f"slack c={float(c):.6g} exceeds c_star={float(cs):.6g}")
    r = (a + 4) / (3 * a + 8) - c
    eps = (2 * a + 4) / (a + 4) * r + 2 * c
    eta = 2 / (a + 2 * (d + 3))
    omega = 2 * r / (a + 4)
    gamma = (a + 2 * (d + 3)) / (a + 2 * (d + 2)) * (c + r * a / (a + 4))
    return ExponentSet(
        alpha=a,
        d=d,
        c=c,
        q_star=q_star(a, d),
        s_star=s_star(a, d),
        theta_star=theta_star(a, d),
        c_star=cs,
        r=r,
        epsilon=eps,
        eta=eta,
        omega=omega,
        gamma=gamma,
    )


def interpolated_decay(params: ExponentSet) -> Number:
    """Decay rate alpha/(alpha+2(d+2)) (r alpha/(alpha+4) + c) of the block norms."""
    a, d = params.alpha, params.d
    return a / (a + 2 * (d + 2)) * (params.r * a / (a + 4) + params.c)


@dataclass
class IdentityReport:
    alpha: float
    d: int
    trials: int
    results: dict[str, bool]
    worst: dict[str, float]

    @property
    def passed(self) -> bool:
        return all(self.results.values())


def validate_exponent_identities(
    alpha: Number, d: int, trials: int = 100, seed: int = 0, tol: float = 1e-12
) -> IdentityReport:
    """Check the four parameter identities over random admissible slacks.

    1. r + epsilon = 1 - c alpha/(alpha+4)
    2. at c = c_star the interpolated decay rate equals s_star
    3. 1/q_star = (1 - theta_star)/2 + theta_star
    4. omega - gamma eta > 0
    """
    a = _coerce(alpha, d)
    rng = np.random.default_rng(seed)
    cs = c_star(a, d)
    worst = {"sum_r_epsilon": 0.0, "decay_equals_s_star": 0.0, "lorentz_index": 0.0, "admissibility": np.inf}
    for u in 1.0 - rng.random(trials):
        c = cs * u if not isinstance(a, Fraction) else cs * Fraction(u)
        p = proof_parameters(a, d, c)
        err = abs(p.r + p.epsilon - (1 - p.c * p.alpha / (p.alpha + 4)))
        worst["sum_r_epsilon"] = max(worst["sum_r_epsilon"], float(err))
        worst["admissibility"] = min(worst["admissibility"], float(p.omega - p.gamma * p.eta))
    top = proof_parameters(a, d)
    worst["decay_equals_s_star"] = float(abs(interpolated_decay(top) - top.s_star))
    worst["lorentz_index"] = float(abs(1 / top.q_star - ((1 - top.theta_star) / 2 + top.theta_star)))
    results = {
        "sum_r_epsilon": worst["sum_r_epsilon"] <= tol,
        "decay_equals_s_star": worst["decay_equals_s_star"] <= tol,
        "lorentz_index": worst["lorentz_index"] <= tol,
        "admissibility": trials == 0 or worst["admissibility"] > 0,
    }
    return IdentityReport(alpha=float(a), d=d, trials=trials, results=results, worst=worst)
