"""Deterministic quadrature over intervals, balls, annuli and slabs.

Intervals use adaptive composite Gauss-Legendre with an order-doubling
error estimate on every panel.  Balls and annuli (N <= 3) are split into a
radial integral, done with the same adaptive rule against the weight
r^(N-1), and a spherical mean: the two-point "sphere" for N=1, a periodic
trapezoid rule for N=2, and adaptive Gauss-Legendre in the polar angle
times a periodic trapezoid in azimuth for N=3.  Slabs R^(N-1) x (-R, R)
are only accepted for separable integrands whose transverse factor has a
known integral.

Integrands are vectorised callables: they receive an array of points with
the coordinate on the last axis (or a flat array of abscissae for 1-D
integrals) and return one value per point, optionally with a trailing
component axis.  Vector-valued integrands share nodes across components.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

EPS = np.finfo(float).eps
MAX_ANGULAR_NODES = 1 << 16


class QuadratureError(RuntimeError):
    """Tolerance could not be met within the configured subdivision limit."""


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    """Orders, limits and tolerance for every integral in the package.

    ``tol`` is relative to the magnitude of the integral (the largest
    component for vector integrands); ``atol`` is an absolute floor.
    """

    radial_order: int = 16
    angular_order: int = 32
    max_subdivisions: int = 4096
    tol: float = 1e-12
    atol: float = 1e-15

    def __post_init__(self):
        if self.radial_order < 2 or self.angular_order < 2:
            raise ValueError("quadrature orders must be >= 2")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.atol < 0:
            raise ValueError("absolute tolerance must be non-negative")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")

    def tightened(self, factor: float) -> "QuadratureSpec":
        return QuadratureSpec(self.radial_order, self.angular_order,
                              self.max_subdivisions, self.tol * factor,
                              self.atol * factor)


DEFAULT_SPEC = QuadratureSpec()


@dataclass(frozen=True)
class Region:
    """Integration domain.

    ``kind`` is one of ``ball``, ``annulus``, ``slab``, ``interval``; the
    meaning of ``lo``/``hi`` is (0, R), (R1, R2), (-R, R) and (a, b).
    """

    kind: str
    dim: int
    lo: float
    hi: float

    def __post_init__(self):
        if self.kind not in ("ball", "annulus", "slab", "interval"):
            raise ValueError(f"unknown region kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if not self.lo < self.hi:
            raise ValueError(f"empty region: lo={self.lo} >= hi={self.hi}")
        if self.kind == "annulus" and self.lo <= 0:
            raise ValueError("annulus radii must be positive")
        if self.kind == "interval" and self.dim != 1:
            raise ValueError("intervals are one-dimensional")

    @classmethod
    def ball(cls, R: float, dim: int) -> "Region":
        if not R > 0:
            raise ValueError("ball radius must be positive")
        return cls("ball", dim, 0.0, float(R))

    @classmethod
    def annulus(cls, R1: float, R2: float, dim: int) -> "Region":
        return cls("annulus", dim, float(R1), float(R2))

    @classmethod
    def slab(cls, R: float, dim: int) -> "Region":
        if not R > 0:
            raise ValueError("slab half-width must be positive")
        return cls("slab", dim, -float(R), float(R))

    @classmethod
    def interval(cls, a: float, b: float) -> "Region":
        return cls("interval", 1, float(a), float(b))

    @property
    def radius(self) -> float:
        return self.hi


@dataclass(frozen=True)
class SeparableField:
    """Integrand T(y) * A(x_N) with a closed-form transverse integral.

    ``transverse`` acts on the first N-1 coordinates, ``axial`` on the last.
    ``transverse_integral`` is the exact value of the integral of T over
    R^(N-1) (1 by convention when N = 1).
    """

    dim: int
    transverse: Callable
    transverse_integral: float
    axial: Callable

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.transverse(x[..., :-1]) * self.axial(x[..., -1])


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def ball_volume(N: int) -> float:
    """Lebesgue measure of the unit ball in R^N."""
    return math.pi ** (N / 2) / math.gamma(N / 2 + 1)


def _as_batch(vals, npts):
    vals = np.asarray(vals, dtype=float)
    if vals.ndim == 0:
        vals = np.full(npts, float(vals))
    return vals.reshape(npts, -1)


def _pointwise(f):
    """Wrap ``f`` so constant outputs broadcast over the point array."""
    def g(x):
        out = np.asarray(f(x), dtype=float)
        lead = np.shape(x)[:-1]
        if out.shape[:len(lead)] != lead:
            out = np.broadcast_to(out, lead + out.shape[len(lead):])
        return out
    return g


def _panel_rules(f, lo, hi, n):
    """Gauss-Legendre sums of order n and 2n on each panel [lo_i, hi_i]."""
    x1, w1 = gauss_legendre(n)
    x2, w2 = gauss_legendre(2 * n)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    t1 = mid[:, None] + half[:, None] * x1
    t2 = mid[:, None] + half[:, None] * x2
    P = len(lo)
    vals = _as_batch(f(np.concatenate([t1.ravel(), t2.ravel()])), P * 3 * n)
    v1 = vals[:P * n].reshape(P, n, -1)
    v2 = vals[P * n:].reshape(P, 2 * n, -1)
    q1 = half[:, None] * np.einsum("j,pjc->pc", w1, v1)
    q2 = half[:, None] * np.einsum("j,pjc->pc", w2, v2)
    floor = 50 * EPS * half[:, None] * np.einsum("j,pjc->pc", w2, np.abs(v2))
    err = np.maximum(np.abs(q2 - q1), floor)
    if not (np.all(np.isfinite(q2)) and np.all(np.isfinite(err))):
        raise QuadratureError("integrand produced non-finite values")
    return q2, err, floor


def _adaptive_panels(f, edges, n, tol, atol, max_panels):
    """Globally adaptive bisection of the panels delimited by ``edges``.

    Returns ordered panel bounds with their values and error estimates.
    """
    lo = np.asarray(edges[:-1], dtype=float)
    hi = np.asarray(edges[1:], dtype=float)
    q, e, fl = _panel_rules(f, lo, hi, n)
    length = hi[-1] - lo[0]
    while True:
        total = q.sum(axis=0)
        err = e.sum(axis=0)
        target = max(atol, tol * float(np.max(np.abs(total))))
        if np.all(err <= target):
            return lo, hi, q, e
        share = target * (hi - lo) / length
        # panels already at the roundoff floor cannot improve by splitting
        bad = np.any((e > share[:, None]) & (e > fl), axis=1)
        if not bad.any():
            return lo, hi, q, e
        if len(lo) + int(bad.sum()) > max_panels:
            raise QuadratureError(
                f"tolerance {target:.3e} not met with {len(lo)} panels "
                f"(error estimate {float(err.max()):.3e})")
        blo, bhi = lo[bad], hi[bad]
        bmid = 0.5 * (blo + bhi)
        nlo = np.concatenate([blo, bmid])
        nhi = np.concatenate([bmid, bhi])
        nq, ne, nfl = _panel_rules(f, nlo, nhi, n)
        keep = ~bad
        lo = np.concatenate([lo[keep], nlo])
        hi = np.concatenate([hi[keep], nhi])
        q = np.concatenate([q[keep], nq])
        e = np.concatenate([e[keep], ne])
        fl = np.concatenate([fl[keep], nfl])
        order = np.argsort(lo, kind="stable")
        lo, hi, q, e, fl = lo[order], hi[order], q[order], e[order], fl[order]


def _exact_sum(q):
    """Correctly rounded column sums, independent of panel order."""
    return np.array([math.fsum(col) for col in q.T])


def _finish(values, scalar):
    return float(values[0]) if scalar else values


def _edges(a, b, breakpoints):
    inner = sorted(float(t) for t in breakpoints if a < t < b)
    return [a] + inner + [b]


def _is_scalar_output(f, probe):
    out = np.asarray(f(probe), dtype=float)
    return out.ndim <= 1


def integrate_interval(f: Callable, a: float, b: float,
                       spec: QuadratureSpec = DEFAULT_SPEC,
                       breakpoints: Sequence[float] = ()):
    """Adaptive Gauss-Legendre integral of ``f`` over [a, b].

    Returns ``(value, error_estimate)``; both are arrays when ``f`` returns
    a trailing component axis.
    """
    a, b = float(a), float(b)
    if not a < b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    scalar = _is_scalar_output(f, np.array([0.5 * (a + b)]))
    _, _, q, e = _adaptive_panels(f, _edges(a, b, breakpoints),
                                  spec.radial_order, spec.tol, spec.atol,
                                  spec.max_subdivisions)
    return _finish(_exact_sum(q), scalar), _finish(_exact_sum(e), scalar)


def cumulative_integral(f: Callable, nodes: Sequence[float],
                        spec: QuadratureSpec = DEFAULT_SPEC) -> np.ndarray:
    """Integral of a scalar ``f`` from nodes[0] to each node.

    Every node is a panel breakpoint, so each increment is an independent
    adaptive sum over panels lying inside one node interval.
    """
    nodes = np.asarray(nodes, dtype=float)
    lo, hi, q, _ = _adaptive_panels(f, list(nodes), spec.radial_order,
                                    spec.tol, spec.atol,
                                    max(spec.max_subdivisions, 4 * len(nodes)))
    which = np.searchsorted(nodes, lo, side="right") - 1
    steps = np.zeros(len(nodes) - 1)
    for j in range(len(nodes) - 1):
        steps[j] = math.fsum(q[which == j, 0])
    return np.concatenate([[0.0], np.cumsum(steps)])


# -- spherical means -----------------------------------------------------

class _InnerError:
    """Largest relative error reported by a spherical-mean evaluation."""

    def __init__(self):
        self.rel = 0.0

    def note(self, err, scale):
        if scale > 0:
            self.rel = max(self.rel, float(err) / scale)


def _circle_mean_sum(f, r, M, offset):
    theta = (np.arange(M) + offset) * (2 * np.pi / M)
    pts = np.stack([r[:, None] * np.cos(theta), r[:, None] * np.sin(theta)],
                   axis=-1)
    vals = np.asarray(f(pts), dtype=float).reshape(len(r), M, -1)
    return vals.mean(axis=1)


def _circle_integral(f, r, spec, tracker):
    """Integral over the circle of radius r_i (times 2*pi, without r)."""
    M = spec.angular_order
    T = _circle_mean_sum(f, r, M, 0.0)
    while True:
        T2 = 0.5 * (T + _circle_mean_sum(f, r, M, 0.5))
        diff = float(np.max(np.abs(T2 - T)))
        scale = float(np.max(np.abs(T2)))
        M *= 2
        T = T2
        if diff <= max(spec.atol, spec.tol * scale):
            tracker.note(diff, scale)
            return 2 * np.pi * T
        if M > MAX_ANGULAR_NODES:
            raise QuadratureError("angular trapezoid rule did not converge")


def _sphere_integral(f, r, spec, tracker):
    """Integral over the unit-sphere directions of f(r_i * omega)."""
    nr = len(r)

    def azimuthal(theta):
        # theta: (m,) polar nodes -> (m, nr * c) azimuthal integrals * sin
        st, ct = np.sin(theta), np.cos(theta)

        def ring(M, offset):
            phi = (np.arange(M) + offset) * (2 * np.pi / M)
            rs = r[None, :, None] * st[:, None, None]
            pts = np.stack([rs * np.cos(phi), rs * np.sin(phi),
                            np.broadcast_to(r[None, :, None] * ct[:, None, None],
                                            rs.shape[:2] + (M,))], axis=-1)
            vals = np.asarray(f(pts), dtype=float)
            vals = vals.reshape(len(theta), nr, M, -1)
            return vals.mean(axis=2)

        M = max(4, spec.angular_order // 4)
        T = ring(M, 0.0)
        while True:
            T2 = 0.5 * (T + ring(M, 0.5))
            diff = float(np.max(np.abs(T2 - T)))
            scale = float(np.max(np.abs(T2)))
            M *= 2
            T = T2
            if diff <= max(spec.atol, spec.tol * scale):
                break
            if M > MAX_ANGULAR_NODES:
                raise QuadratureError("azimuthal trapezoid rule did not converge")
        out = 2 * np.pi * T * st[:, None, None]
        return out.reshape(len(theta), -1)

    _, _, q, e = _adaptive_panels(azimuthal, [0.0, 0.5 * np.pi, np.pi],
                                  spec.radial_order, spec.tol, spec.atol,
                                  spec.max_subdivisions)
    val = _exact_sum(q)
    tracker.note(float(np.max(_exact_sum(e))), float(np.max(np.abs(val))))
    return val.reshape(nr, -1)


def _radial_integrand(f, N, spec, tracker):
    inner = spec.tightened(0.1)

    def h(r):
        r = np.asarray(r, dtype=float)
        if N == 1:
            vals = (_as_batch(f(r[:, None]), len(r))
                    + _as_batch(f(-r[:, None]), len(r)))
            return vals
        if N == 2:
            return r[:, None] * _circle_integral(f, r, inner, tracker)
        return (r ** 2)[:, None] * _sphere_integral(f, r, inner, tracker)

    return h


def _check_dim(f, region):
    dim = getattr(f, "dim", None)
    if dim is not None and dim != region.dim:
        raise DimensionError(
            f"integrand has dimension {dim}, region has dimension {region.dim}")


def integrate(f: Callable, region: Region, spec: QuadratureSpec = DEFAULT_SPEC,
              radial_breaks: Sequence[float] = ()):
    """Integral of ``f`` over ``region``; returns ``(value, error_estimate)``.

    ``radial_breaks`` lists radii (or abscissae, for slabs and intervals)
    where the integrand is only Lipschitz; they become panel boundaries.
    """
    _check_dim(f, region)
    N = region.dim
    if region.kind == "interval":
        g = f
        if getattr(f, "dim", None) == 1:
            def g(t):
                return f(np.asarray(t)[:, None])
        return integrate_interval(g, region.lo, region.hi, spec, radial_breaks)

    if region.kind == "slab":
        if not isinstance(f, SeparableField):
            raise ValueError("slab integration requires a SeparableField integrand")
        value, err = integrate_interval(f.axial, region.lo, region.hi, spec,
                                        radial_breaks)
        return f.transverse_integral * value, abs(f.transverse_integral) * err

    if N > 3:
        raise DimensionError("ball and annulus quadrature is available for N <= 3 only")
    f = _pointwise(f)
    probe = np.zeros((1, N))
    probe[0, -1] = 0.5 * (region.lo + region.hi)
    scalar = np.asarray(f(probe), dtype=float).ndim <= 1
    tracker = _InnerError()
    h = _radial_integrand(f, N, spec, tracker)
    _, _, q, e = _adaptive_panels(h, _edges(region.lo, region.hi, radial_breaks),
                                  spec.radial_order, spec.tol, spec.atol,
                                  spec.max_subdivisions)
    value = _exact_sum(q)
    err = _exact_sum(e) + tracker.rel * np.abs(value)
    return _finish(value, scalar), _finish(err, scalar)


def norm_p(f: Callable, region: Region, p: float,
           spec: QuadratureSpec = DEFAULT_SPEC,
           radial_breaks: Sequence[float] = ()) -> float:
    """L^p norm (integral of |f|^p, to the power 1/p) over ``region``."""
    if not p >= 1:
        raise ValueError("p must be >= 1")

    def powered(x):
        return np.abs(f(x)) ** p

    powered.dim = getattr(f, "dim", None)
    value, _ = integrate(powered, region, spec, radial_breaks)
    return float(value) ** (1.0 / p)
