"""Integral quantities over balls: growth of the counterexample, energies
of solutions, and the measured constants of the deficit bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .fields import ScalarField, separable_majorant
from .profile import Potential
from .quadrature import (DEFAULT_SPEC, DimensionError, QuadratureSpec, Region,
                         ball_volume, integrate)


def _radii(radii, minimum=0.0):
    r = np.asarray(radii, dtype=float)
    if r.ndim != 1 or len(r) == 0:
        raise ValueError("radii must be a non-empty 1-D sequence")
    if np.any(np.diff(r) <= 0):
        raise ValueError("radii must be strictly ascending")
    if r[0] < minimum or r[0] <= 0:
        raise ValueError(f"radii must be >= {minimum} and positive (got {r[0]})")
    return r


def geometric_radii(r_min: float = 1.0, r_max: float = 128.0,
                    ratio: float = math.sqrt(2)) -> np.ndarray:
    """r_min * ratio^j up to r_max (inclusive, within rounding)."""
    if not (r_min > 0 and r_max >= r_min and ratio > 1):
        raise ValueError("need 0 < r_min <= r_max and ratio > 1")
    n = int(math.floor(math.log(r_max / r_min) / math.log(ratio) + 1e-9))
    r = r_min * ratio ** np.arange(n + 1)
    if abs(r[-1] / r_max - 1) < 1e-12:
        r[-1] = r_max
    return r


def cumulative_ball_integrals(f, N: int, radii, spec: QuadratureSpec,
                              breaks: Sequence[float] = ()):
    """Integrals of f over B_R for each R, assembled from disjoint annuli."""
    radii = _radii(radii)
    pieces, errs = [], []
    prev = 0.0
    for R in radii:
        region = Region.ball(R, N) if prev == 0.0 else Region.annulus(prev, R, N)
        local = [b for b in breaks if prev < b < R]
        v, e = integrate(f, region, spec, local)
        pieces.append(np.atleast_1d(v))
        errs.append(np.atleast_1d(e))
        prev = R
    values = np.cumsum(np.array(pieces), axis=0)
    errors = np.cumsum(np.array(errs), axis=0)
    return values, errors


# -- growth of the counterexample ------------------------------------------

class InsufficientSpan(ValueError):
    pass


@dataclass
class GrowthSeries:
    radii: np.ndarray
    values: np.ndarray
    errors: np.ndarray = None
    C1: float = math.nan
    C2: float = math.nan
    k: float = math.nan
    N: int = 0
    mode: str = "synthetic"
    fitted_slope: float = math.nan

    def __post_init__(self):
        self.radii = np.asarray(self.radii, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.errors is None:
            self.errors = np.zeros_like(self.values)

    @property
    def bound(self) -> np.ndarray:
        """C1 R^k + C2, the closed-form majorant of the slab integral."""
        return self.C1 * self.radii ** self.k + self.C2

    @property
    def local_slopes(self) -> np.ndarray:
        if len(self.radii) < 2:
            return np.full(len(self.radii), math.nan)
        return np.gradient(np.log(self.values), np.log(self.radii))

    def bound_violations(self, factor: float = 10.0) -> np.ndarray:
        """Excess of each value over the bound plus ``factor`` error estimates."""
        return self.values - (self.bound + factor * self.errors)


def fit_exponent(series, window: tuple[float, float] | None = None) -> float:
    """Least-squares slope of log(value) against log(R).

    By default only the last decade of radii (R >= R_max / 10) is used;
    ``window`` selects an explicit closed range instead.  At least five
    radii must fall in the window and the series must span a decade.
    """
    r = np.asarray(series.radii, dtype=float)
    v = np.asarray(series.values, dtype=float)
    if len(r) < 5 or r.max() < 10 * r.min() * (1 - 1e-12):
        raise InsufficientSpan("need at least 5 radii spanning one decade")
    if window is None:
        lo, hi = r.max() / 10 * (1 - 1e-12), r.max()
    else:
        lo, hi = window[0] * (1 - 1e-12), window[1] * (1 + 1e-12)
    sel = (r >= lo) & (r <= hi)
    if sel.sum() < 5:
        raise InsufficientSpan(f"only {int(sel.sum())} radii in the fit window")
    if np.any(v[sel] <= 0):
        raise ValueError("log-log fit needs positive values")
    x, y = np.log(r[sel]), np.log(v[sel])
    x = x - x.mean()
    return float(np.dot(x, y - y.mean()) / np.dot(x, x))


def growth_series(phi: ScalarField, sigma: ScalarField, radii,
                  spec: QuadratureSpec = DEFAULT_SPEC, mode: str = "ball",
                  window: tuple[float, float] | None = None) -> GrowthSeries:
    """Integrals of (phi sigma)^2 over B_R (``ball``) or the slab majorant
    4 * (integral of H^2) * (integral of 1/g' over (-R, R)) (``slab``).
    """
    radii = _radii(radii, minimum=1.0)
    profile = phi.info.get("profile")
    if profile is None:
        raise ValueError("phi does not carry its profile; build it with counterexample()")
    N = phi.dim
    if mode == "ball":
        if N > 3:
            raise DimensionError("ball mode requires N <= 3; use slab mode")

        def integrand(x):
            return (phi(x) * sigma(x)) ** 2

        integrand.dim = N
        values, errors = cumulative_ball_integrals(integrand, N, radii, spec)
        values, errors = values[:, 0], errors[:, 0]
    elif mode == "slab":
        majorant = separable_majorant(phi)
        out = [integrate(majorant, Region.slab(R, N), spec, (-1.0, 1.0)) for R in radii]
        values = np.array([v for v, _ in out])
        errors = np.array([e for _, e in out])
    else:
        raise ValueError(f"unknown growth mode {mode!r}")
    series = GrowthSeries(radii, values, errors, profile.C1, profile.C2,
                          profile.k, N, mode)
    try:
        series.fitted_slope = fit_exponent(series, window)
    except InsufficientSpan:
        pass
    return series


# -- energies of solutions ---------------------------------------------------

def modica_check(u: ScalarField, G: Potential, points) -> float:
    """Largest value of |grad u|^2 / 2 - G(u) over the sample points."""
    points = np.asarray(points, dtype=float)
    grad = u.gradient(points)
    excess = 0.5 * np.sum(grad * grad, axis=-1) - G.G(u(points))
    return float(np.max(excess))


@dataclass
class EnergyLedger:
    R: float
    N: int
    dirichlet: float
    potential: float
    deficit: float
    weighted_deficit: float
    error: np.ndarray = field(default=None, repr=False)

    @property
    def energy(self) -> float:
        return self.dirichlet + self.potential

    @property
    def phi_R(self) -> float:
        return self.R ** (1 - self.N) * self.energy

    @property
    def ratio(self) -> float:
        if not self.potential > 0:
            raise ZeroDivisionError(f"potential energy vanishes on B_{self.R}")
        return self.dirichlet / self.potential


def energy_densities(u: ScalarField, G: Potential):
    """Pointwise [|grad u|^2/2, G(u), G - |grad u|^2/2, (G - |grad u|^2/2) sqrt G]."""

    def dens(x):
        grad = u.gradient(x)
        kin = 0.5 * np.sum(grad * grad, axis=-1)
        pot = np.asarray(G.G(u(x)), dtype=float)
        pot = np.broadcast_to(pot, kin.shape)
        gap = pot - kin
        return np.stack([kin, pot, gap, gap * np.sqrt(pot)], axis=-1)

    dens.dim = u.dim
    return dens


def energy_ledgers(u: ScalarField, G: Potential, radii,
                   spec: QuadratureSpec = DEFAULT_SPEC) -> list[EnergyLedger]:
    radii = _radii(radii)
    if u.dim > 3:
        raise DimensionError("energy ledgers need ball quadrature (N <= 3)")
    values, errors = cumulative_ball_integrals(energy_densities(u, G), u.dim,
                                               radii, spec)
    return [EnergyLedger(float(R), u.dim, *map(float, v), error=e)
            for R, v, e in zip(radii, values, errors)]


def energy_ledger(u: ScalarField, G: Potential, R: float,
                  spec: QuadratureSpec = DEFAULT_SPEC) -> EnergyLedger:
    return energy_ledgers(u, G, [R], spec)[0]


def monotonicity_check(u: ScalarField, G: Potential, radii,
                       spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Smallest consecutive difference Phi(R_{i+1}) - Phi(R_i)."""
    ledgers = energy_ledgers(u, G, radii, spec)
    phis = np.array([L.phi_R for L in ledgers])
    if len(phis) < 2:
        return math.inf
    return float(np.min(np.diff(phis)))


def ratio_series(u: ScalarField, G: Potential, radii,
                 spec: QuadratureSpec = DEFAULT_SPEC) -> list[tuple[float, float]]:
    """Dirichlet over potential energy on each ball."""
    return [(L.R, L.ratio) for L in energy_ledgers(u, G, radii, spec)]


# -- deficit bounds ------------------------------------------------------------

def holder_constant(C1: float, N: int) -> float:
    """C1^(2/3) |B_1|^(1/3): the constant the Holder step attaches to R^(N - 4/3)."""
    return C1 ** (2 / 3) * ball_volume(N) ** (1 / 3)


def holder_bound(C1: float, N: int, R: float) -> float:
    """(C1 R^(N-2))^(2/3) * (|B_1| R^N)^(1/3)."""
    return (C1 * R ** (N - 2)) ** (2 / 3) * (ball_volume(N) * R ** N) ** (1 / 3)


def cutoff_constant(M: float, K: float, N: int) -> float:
    """M (2^N - 1) |B_1| / (2K), the weighted-deficit constant from the cutoff argument."""
    return M * (2 ** N - 1) * ball_volume(N) / (2 * K)


def holder_fields(u: ScalarField, G: Potential) -> tuple[ScalarField, ScalarField]:
    """alpha = (deficit * sqrt G)^(2/3) and beta = (deficit / G)^(1/3), pointwise.

    Their product is the pointwise deficit G(u) - |grad u|^2 / 2.
    """

    def gap(x):
        grad = u.gradient(x)
        pot = np.asarray(G.G(u(x)), dtype=float)
        return pot - 0.5 * np.sum(grad * grad, axis=-1), pot

    def alpha(x):
        d, pot = gap(x)
        return np.cbrt(d * np.sqrt(pot)) ** 2

    def beta(x):
        d, pot = gap(x)
        return np.cbrt(d / pot)

    return ScalarField(u.dim, alpha), ScalarField(u.dim, beta)


def _trend(radii, q, atol):
    """Log-log slope of |q| over the last decade; 0 when q is below ``atol``."""
    sel = radii >= radii.max() / 10 * (1 - 1e-12)
    qs = np.abs(q[sel])
    if qs.max() <= atol or sel.sum() < 2:
        return 0.0
    x = np.log(radii[sel])
    y = np.log(np.maximum(qs, atol))
    x = x - x.mean()
    return float(np.dot(x, y - y.mean()) / np.dot(x, x))


class DeficitBounds(NamedTuple):
    C1_measured: float
    C2_measured: float
    pass_i: bool
    pass_ii: bool
    C1_theory: float = math.nan
    C2_theory: float = math.nan


def deficit_bound_check(ledgers: Sequence[EnergyLedger], N: int, K: float,
                        M: float | None = None, atol: float = 1e-9,
                        max_trend: float = 0.1) -> DeficitBounds:
    """Measured constants of weighted_deficit <= C1 R^(N-2) and
    deficit <= C2 R^(N-4/3).

    A bound passes when the normalised quotients are finite and show no
    growth over the last decade of radii.  When the sup M of G(u) is given,
    the measured constants must also respect the values produced by the
    cutoff and Holder arguments, M (2^N - 1)|B_1| / 2K and its Holder image.
    """
    if len(ledgers) < 5:
        raise ValueError("need ledgers at >= 5 radii")
    if not K > 0:
        raise ValueError("hypothesis constant K must be positive")
    R = np.array([L.R for L in ledgers])
    qi = np.array([L.weighted_deficit for L in ledgers]) / R ** (N - 2)
    qii = np.array([L.deficit for L in ledgers]) / R ** (N - 4 / 3)
    C1m, C2m = float(np.max(qi)), float(np.max(qii))
    ok_i = bool(np.all(np.isfinite(qi)) and _trend(R, qi, atol) <= max_trend)
    ok_ii = bool(np.all(np.isfinite(qii)) and _trend(R, qii, atol) <= max_trend)
    C1t = C2t = math.nan
    if M is not None:
        C1t = cutoff_constant(M, K, N)
        C2t = holder_constant(C1t, N)
        ok_i = ok_i and C1m <= C1t + atol
        ok_ii = ok_ii and C2m <= C2t + atol
    return DeficitBounds(C1m, C2m, ok_i, ok_ii, C1t, C2t)


def holder_replay(ledgers: Sequence[EnergyLedger], N: int) -> float:
    """Deficit constant implied by the weighted bound through Holder.

    Takes C1 = max weighted_deficit / R^(N-2) and returns the largest
    holder_bound(C1, N, R) / R^(N-4/3); on exact power data this is
    holder_constant(C1, N).
    """
    R = np.array([L.R for L in ledgers])
    C1 = float(np.max(np.array([L.weighted_deficit for L in ledgers]) / R ** (N - 2)))
    return float(max(holder_bound(C1, N, r) / r ** (N - 4 / 3) for r in R))


def ratio_envelope(C2: float, c0: float, R):
    """2 C2 / (c0 R^(1/3)): the bound on 1 - ratio when the deficit is at most
    C2 R^(N-4/3) and the integral of |grad u|^2 is at least c0 R^(N-1)."""
    return 2 * C2 / (c0 * np.asarray(R, dtype=float) ** (1 / 3))


class LowerBound(NamedTuple):
    c_measured: float
    R0_measured: float
    quotients: np.ndarray = None

    @property
    def passed(self) -> bool:
        return bool(self.c_measured > 0)


def lower_bound_from_quotients(radii, q) -> LowerBound:
    """Floor of the quotients after the first radius from which every
    quotient stays above half of its running maximum."""
    radii = np.asarray(radii, dtype=float)
    q = np.asarray(q, dtype=float)
    ok = q >= 0.5 * np.maximum.accumulate(q)
    # first index i with ok[j] for all j >= i
    bad = np.flatnonzero(~ok)
    i0 = int(bad[-1]) + 1 if len(bad) else 0
    if i0 >= len(q):
        return LowerBound(0.0, math.inf, q)
    return LowerBound(float(np.min(q[i0:])), float(radii[i0]), q)


def lower_bound_check(u: ScalarField, radii,
                      spec: QuadratureSpec = DEFAULT_SPEC) -> LowerBound:
    """c = min of (integral of |grad u|^2 over B_R) / R^(N-1) for R >= R0."""
    radii = _radii(radii)
    if radii[-1] < 4 * radii[0]:
        raise ValueError("largest radius must be at least 4 times the smallest")

    def dens(x):
        grad = u.gradient(x)
        return np.sum(grad * grad, axis=-1)

    dens.dim = u.dim
    values, _ = cumulative_ball_integrals(dens, u.dim, radii, spec)
    return lower_bound_from_quotients(radii, values[:, 0] / radii ** (u.dim - 1))
