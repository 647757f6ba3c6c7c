"""One-dimensional ingredients: the odd profile g, potentials, 1-D solutions.

The profile has the power tail g(t) = 2 - t^(2-k) for t >= 1 and a smooth
bridge on (-1, 1).  The bridge is defined through its derivative

    g'(t) = (k - 2) * (t^2 + A * bump(t))^((1 - k) / 2),

which is even, positive, and equal to the tail derivative for |t| >= 1
because the bump vanishes to all orders at t = +-1.  The amplitude A is
fixed by requiring that the bridge integral of g' over [0, 1] equals 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import ellipj, ellipk

from .quadrature import (QuadratureSpec, cumulative_integral, gauss_legendre,
                         integrate_interval)

K_FLOOR = 1e-3
BRACKET = (1e-6, 1e6)
CACHE_PANELS = 1024
LOCAL_ORDER = 12


class BracketError(RuntimeError):
    """The bridge amplitude could not be bracketed."""


def _scalar_or_array(t, out):
    return float(out) if np.ndim(t) == 0 else out


def bump(t):
    """exp(-1 / (1 - t^2)) on (-1, 1), zero elsewhere."""
    x = np.asarray(t, dtype=float)
    inside = np.abs(x) < 1
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        val = np.where(inside, np.exp(-1.0 / np.where(inside, 1 - x * x, 1.0)), 0.0)
    return _scalar_or_array(t, val)


def bump_prime(t):
    x = np.asarray(t, dtype=float)
    inside = np.abs(x) < 1
    d = np.where(inside, 1 - x * x, 1.0)
    with np.errstate(over="ignore", invalid="ignore"):
        val = np.where(inside, np.asarray(bump(x)) * (-2 * x / (d * d)), 0.0)
    return _scalar_or_array(t, val)


def check_k(k: float, floor: float = K_FLOOR) -> float:
    k = float(k)
    if not k > 2:
        raise ValueError(f"the exponent must satisfy k > 2 (got k={k})")
    if k < 2 + floor:
        raise ValueError(f"k={k} is below the admissibility floor 2 + {floor}")
    return k


def _m(t, A):
    return t * t + A * np.asarray(bump(t))


def g_prime(t, k: float, A: float):
    """(k - 2) * m(t)^((1 - k)/2) with m(t) = t^2 + A * bump(t)."""
    if not k > 2:
        raise ValueError(f"the exponent must satisfy k > 2 (got k={k})")
    if not A > 0:
        raise ValueError("bridge amplitude must be positive")
    x = np.asarray(t, dtype=float)
    return _scalar_or_array(t, (k - 2) * _m(x, A) ** ((1 - k) / 2))


def g_second(t, k: float, A: float):
    x = np.asarray(t, dtype=float)
    m = _m(x, A)
    dm = 2 * x + A * np.asarray(bump_prime(x))
    return _scalar_or_array(t, (k - 2) * 0.5 * (1 - k) * m ** ((-1 - k) / 2) * dm)


def bridge_integral(k: float, A: float, spec: QuadratureSpec | None = None):
    """Integral of g' over [0, 1]; returns ``(value, error_estimate)``."""
    spec = spec or QuadratureSpec(tol=1e-13)
    return integrate_interval(lambda t: g_prime(t, k, A), 0.0, 1.0, spec)


def solve_bridge_amplitude(k: float, tol: float = 1e-10,
                           bracket: tuple[float, float] = BRACKET,
                           max_expansions: int = 12,
                           max_iter: int = 400) -> float:
    """Amplitude A* with |integral_0^1 g'(t; A*) dt - 1| <= tol.

    Bisection in log A; the bracket is widened by factors of 100 until the
    decreasing map A -> integral straddles 1.
    """
    k = check_k(k)
    spec = QuadratureSpec(tol=min(tol / 10, 1e-12), atol=0.0)

    def residual(A):
        return bridge_integral(k, A, spec)[0] - 1.0

    lo, hi = bracket
    r_lo, r_hi = residual(lo), residual(hi)
    for _ in range(max_expansions):
        if r_lo > 0 > r_hi:
            break
        if r_lo <= 0:
            lo /= 100
            r_lo = residual(lo)
        if r_hi >= 0:
            hi *= 100
            r_hi = residual(hi)
    else:
        if not r_lo > 0 > r_hi:
            raise BracketError(
                f"no sign change of the bridge residual on [{lo:g}, {hi:g}] "
                f"(residuals {r_lo:g}, {r_hi:g})")
    for _ in range(max_iter):
        mid = math.sqrt(lo * hi)
        r = residual(mid)
        if abs(r) <= tol:
            return mid
        if r > 0:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1 < 1e-15:
            break
    raise BracketError(f"bisection stalled at A={mid!r} with residual {r:g}")


@dataclass
class Profile:
    """The odd profile g for a given exponent k.

    Values on (-1, 1) come from a cached table of integrals of g' at
    ``CACHE_PANELS + 1`` equispaced nodes of [0, 1], completed by a
    fixed-order Gauss-Legendre integral from the nearest node below.
    """

    k: float
    A: float
    bridge_residual: float
    _nodes: np.ndarray = field(repr=False, default=None)
    _table: np.ndarray = field(repr=False, default=None)

    @classmethod
    def build(cls, k: float, tol: float = 1e-10) -> "Profile":
        k = check_k(k)
        A = solve_bridge_amplitude(k, tol)
        value, _ = bridge_integral(k, A)
        nodes = np.linspace(0.0, 1.0, CACHE_PANELS + 1)
        table = cumulative_integral(lambda t: g_prime(t, k, A), nodes,
                                    QuadratureSpec(tol=1e-14, atol=1e-17))
        return cls(k, A, value - 1.0, nodes, table)

    def g_prime(self, t):
        return g_prime(t, self.k, self.A)

    def g_second(self, t):
        return g_second(t, self.k, self.A)

    def inv_g_prime(self, t):
        """1 / g'(t), computed without forming g'."""
        x = np.asarray(t, dtype=float)
        return _scalar_or_array(t, _m(x, self.A) ** ((self.k - 1) / 2) / (self.k - 2))

    def _bridge(self, s):
        # s in [0, 1)
        j = np.minimum((s * CACHE_PANELS).astype(int), CACHE_PANELS - 1)
        left = self._nodes[j]
        xg, wg = gauss_legendre(LOCAL_ORDER)
        half = 0.5 * (s - left)
        pts = (left + half)[:, None] + half[:, None] * xg
        return self._table[j] + half * (self.g_prime(pts) @ wg)

    def g(self, t):
        x = np.asarray(t, dtype=float)
        s = np.abs(x).ravel()
        out = np.empty_like(s)
        tail = s >= 1
        out[tail] = 2.0 - s[tail] ** (2.0 - self.k)
        if (~tail).any():
            out[~tail] = self._bridge(s[~tail])
        out = np.sign(x.ravel()) * out
        return _scalar_or_array(t, out.reshape(x.shape))

    __call__ = g

    @property
    def C1(self) -> float:
        return 8.0 / (self.k * (self.k - 2))

    def inverse_slope_integral(self, R: float = 1.0, spec: QuadratureSpec | None = None):
        """Integral of 1/g' over [0, R]; returns ``(value, error_estimate)``."""
        spec = spec or QuadratureSpec(tol=1e-13)
        return integrate_interval(self.inv_g_prime, 0.0, R, spec,
                                  breakpoints=(1.0,))

    @property
    def C2(self) -> float:
        return 8.0 * self.inverse_slope_integral(1.0)[0] - self.C1


@dataclass(frozen=True)
class Potential:
    """A nonnegative C^2 potential with the derivatives used downstream."""

    G: Callable
    dG: Callable
    d2G: Callable
    _sqrtG_second: Callable
    admissible: tuple[float, float]
    name: str = "potential"

    def _check(self, s):
        x = np.asarray(s, dtype=float)
        lo, hi = self.admissible
        if np.any((x <= lo) | (x >= hi)):
            raise ValueError(
                f"(sqrt G)'' requested outside the admissible interval ({lo}, {hi})")
        return x

    def sqrtG_second(self, s):
        return self._sqrtG_second(self._check(s))

    def sqrtG(self, s):
        return np.sqrt(self.G(s))

    def sqrtG_prime(self, s):
        x = self._check(s)
        return self.dG(x) / (2 * np.sqrt(self.G(x)))


def allen_cahn_potential() -> Potential:
    """G(s) = (1 - s^2)^2 / 4, for which -(sqrt G)'' = 1 on (-1, 1)."""
    return Potential(
        G=lambda s: (1 - np.asarray(s) ** 2) ** 2 / 4,
        dG=lambda s: -np.asarray(s) * (1 - np.asarray(s) ** 2),
        d2G=lambda s: 3 * np.asarray(s) ** 2 - 1,
        _sqrtG_second=lambda s: -np.ones_like(np.asarray(s, dtype=float)),
        admissible=(-1.0, 1.0),
        name="allen-cahn",
    )


@dataclass(frozen=True)
class HConstant:
    K: float
    interval: tuple[float, float]


def hypothesis_H_constant(G: Potential, interval: tuple[float, float],
                          samples: int = 1001) -> HConstant | None:
    """Smallest -(sqrt G)'' on a uniform grid of ``interval``.

    Returns None when the minimum is not positive, i.e. the uniform
    concavity hypothesis fails on the sampled range.
    """
    a, b = map(float, interval)
    lo, hi = G.admissible
    if not (lo < a <= b < hi):
        raise ValueError(f"interval [{a}, {b}] is not inside ({lo}, {hi})")
    s = np.array([0.5 * (a + b)]) if samples == 1 else np.linspace(a, b, samples)
    K = float(np.min(-np.asarray(G.sqrtG_second(s))))
    if not K > 0:
        return None
    return HConstant(K, (a, b))


SQRT2 = math.sqrt(2.0)


def kink():
    """tanh(x / sqrt 2) and its derivative: the 1-D Allen-Cahn heteroclinic."""

    def u(x):
        return np.tanh(np.asarray(x, dtype=float) / SQRT2)

    def du(x):
        return (1 - u(x) ** 2) / SQRT2

    return u, du


def snoidal_wave(m: float = 0.5):
    """Periodic Allen-Cahn solution a * sn(x / sqrt(1 + m) | m).

    With a^2 = 2m / (1 + m) this solves u'' = -u + u^3.  It is bounded
    and nonconstant but not stable, and 1/2 u'^2 - G(u) equals the
    negative constant returned as the third element.
    """
    if not 0 < m < 1:
        raise ValueError("elliptic parameter must lie in (0, 1)")
    amp = math.sqrt(2 * m / (1 + m))
    b = 1 / math.sqrt(1 + m)

    def u(x):
        sn, _, _, _ = ellipj(b * np.asarray(x, dtype=float), m)
        return amp * sn

    def du(x):
        _, cn, dn, _ = ellipj(b * np.asarray(x, dtype=float), m)
        return amp * b * cn * dn

    # at the crest u = amp, u' = 0
    gap = -(1 - amp ** 2) ** 2 / 4
    period = 4 * ellipk(m) / b
    u.period = period
    return u, du, gap
