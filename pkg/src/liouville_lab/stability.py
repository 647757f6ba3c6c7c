"""Second variation of the energy and the sqrt(G)-weighted identity.

Test functions are compactly supported fields with analytic gradients.
Integrals run over the ball that contains the support, with panel
boundaries at the radii where a test function is only Lipschitz.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .fields import ScalarField
from .profile import Potential
from .quadrature import (DEFAULT_SPEC, QuadratureSpec, Region, ball_volume,
                         integrate)


@dataclass
class TestFunction(ScalarField):
    __test__ = False  # not a pytest class

    support_radius: float = 1.0
    breaks: tuple = ()

    def region(self) -> Region:
        return Region.ball(self.support_radius, self.dim)


def _norm(x):
    return np.sqrt(np.sum(x * x, axis=-1))


def _psi(x):
    with np.errstate(divide="ignore", over="ignore"):
        safe = np.where(x > 0, x, 1.0)
        return np.where(x > 0, np.exp(-1.0 / safe), 0.0), \
            np.where(x > 0, np.exp(-1.0 / safe) / (safe * safe), 0.0)


def smooth_step(r, a: float, b: float):
    """C-infinity radial profile: 1 on [0, a], 0 on [b, inf); returns value and derivative."""
    P, dP = _psi(b - r)
    Q, dQ = _psi(r - a)
    s = P + Q
    return P / s, (-dP * Q - P * dQ) / (s * s)


def smooth_cutoff(rho: float, N: int, inner: float = 0.5) -> TestFunction:
    """Radial C-infinity cutoff equal to 1 on B_{inner*rho} and 0 outside B_rho."""
    a = inner * rho

    def fn(x):
        return smooth_step(_norm(x), a, rho)[0]

    def grad(x):
        r = _norm(x)
        _, ds = smooth_step(r, a, rho)
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(r > 0, ds / np.where(r > 0, r, 1.0), 0.0)
        return scale[..., None] * x

    return TestFunction(N, fn, grad, support_radius=float(rho))


def radial_cutoff(R: float, N: int) -> TestFunction:
    """1 on B_R, 2 - |x|/R on B_2R minus B_R, 0 outside: a Lipschitz cutoff."""
    if not R > 0:
        raise ValueError("cutoff radius must be positive")

    def fn(x):
        r = _norm(x)
        return np.where(r <= R, 1.0, np.where(r <= 2 * R, 2.0 - r / R, 0.0))

    def grad(x):
        r = _norm(x)
        on = (r > R) & (r < 2 * R)
        scale = np.where(on, -1.0 / (R * np.where(on, r, 1.0)), 0.0)
        return scale[..., None] * x

    return TestFunction(N, fn, grad, support_radius=2.0 * R, breaks=(float(R),))


def product_test_function(cutoff: TestFunction, field_: ScalarField) -> TestFunction:
    """cutoff * field, with the product-rule gradient."""

    def fn(x):
        return cutoff(x) * field_(x)

    def grad(x):
        return (cutoff.gradient(x) * field_(x)[..., None]
                + cutoff(x)[..., None] * field_.gradient(x))

    return TestFunction(cutoff.dim, fn, grad, support_radius=cutoff.support_radius,
                        breaks=cutoff.breaks)


def _trig_gauss(N, rng, rho):
    n_cos = int(rng.integers(1, 4))
    n_gauss = int(rng.integers(1, 3))
    c0 = rng.uniform(-1, 1)
    amps = rng.uniform(-1, 1, n_cos)
    freqs = rng.normal(0, 0.8, (n_cos, N))
    phases = rng.uniform(0, 2 * np.pi, n_cos)
    heights = rng.uniform(-2, 2, n_gauss)
    centers = rng.uniform(-0.6 * rho, 0.6 * rho, (n_gauss, N))
    widths = rng.uniform(0.4, 2.0, n_gauss)

    def fn(x):
        arg = x @ freqs.T + phases
        d2 = np.sum((x[..., None, :] - centers) ** 2, axis=-1)
        return (c0 + np.cos(arg) @ amps
                + np.exp(-0.5 * d2 / widths ** 2) @ heights)

    def grad(x):
        arg = x @ freqs.T + phases
        g = -(np.sin(arg) * amps) @ freqs
        diff = x[..., None, :] - centers
        w = heights * np.exp(-0.5 * np.sum(diff ** 2, axis=-1) / widths ** 2) / widths ** 2
        return g - np.sum(w[..., None] * diff, axis=-2)

    return ScalarField(N, fn, grad)


def random_test_functions(N: int, count: int, seed: int,
                          max_support: float = 8.0) -> list[TestFunction]:
    """Seeded corpus: smooth radial cutoffs times trigonometric terms and
    off-centre Gaussian bumps, all supported in B_{max_support}."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        rho = rng.uniform(0.4, 1.0) * max_support
        cut = smooth_cutoff(rho, N, inner=rng.uniform(0.2, 0.7))
        out.append(product_test_function(cut, _trig_gauss(N, rng, rho)))
    return out


def support_violation(v: TestFunction, samples: int = 200, seed: int = 0) -> float:
    """Largest |v| sampled just outside the support radius and on its sphere."""
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(samples, v.dim))
    d /= _norm(d)[:, None]
    rho = v.support_radius
    pts = np.concatenate([d * rho, d * rho * (1 + 1e-6), d * rho * 1.5])
    return float(np.max(np.abs(v(pts))))


def _integrate_over(v: TestFunction, integrand, spec):
    integrand.dim = v.dim
    return integrate(integrand, v.region(), spec, v.breaks)


def quadratic_form_Q(u: ScalarField, G: Potential, v: TestFunction,
                     spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Integral of |grad v|^2 + G''(u) v^2 over the support ball of v."""
    if u.dim != v.dim:
        raise ValueError("solution and test function live in different dimensions")

    def dens(x):
        gv = v.gradient(x)
        vv = v(x)
        return np.sum(gv * gv, axis=-1) + G.d2G(u(x)) * vv * vv

    return float(_integrate_over(v, dens, spec)[0])


def lemma_identity_sides(u: ScalarField, G: Potential, mu: TestFunction,
                         spec: QuadratureSpec = DEFAULT_SPEC,
                         mutate: bool = False) -> tuple[float, float]:
    """Q(sqrt(G(u)) mu) and the weighted integral it equals for solutions.

    The right side is the integral of G(u)|grad mu|^2 plus
    2 (G(u) - |grad u|^2/2) (sqrt G)''(u) sqrt(G(u)) mu^2.  ``mutate`` drops
    the second term, which should make the check fail for solutions with a
    nonzero pointwise deficit.
    """

    def dens(x):
        uu = u(x)
        gu = u.gradient(x)
        m = mu(x)
        gm = mu.gradient(x)
        pot = G.G(uu)
        w = np.sqrt(pot)
        gw = (G.sqrtG_prime(uu) * m)[..., None] * gu + w[..., None] * gm
        lhs = np.sum(gw * gw, axis=-1) + G.d2G(uu) * (w * m) ** 2
        rhs = pot * np.sum(gm * gm, axis=-1)
        if not mutate:
            gap = pot - 0.5 * np.sum(gu * gu, axis=-1)
            rhs = rhs + 2 * gap * G.sqrtG_second(uu) * w * m * m
        return np.stack([lhs, rhs], axis=-1)

    value, _ = _integrate_over(mu, dens, spec)
    return float(value[0]), float(value[1])


def lemma_identity_gap(u: ScalarField, G: Potential, mu: TestFunction,
                       spec: QuadratureSpec = DEFAULT_SPEC,
                       mutate: bool = False) -> float:
    """|LHS - RHS| / (|LHS| + |RHS| + 1) for the identity above."""
    lhs, rhs = lemma_identity_sides(u, G, mu, spec, mutate)
    return abs(lhs - rhs) / (abs(lhs) + abs(rhs) + 1.0)


class InequalitySides(NamedTuple):
    gradient_term: float    # integral of G(u) |grad mu|^2
    deficit_term: float     # integral of deficit * (-2 (sqrt G)'') * sqrt G * mu^2
    h_bound: float          # 2K * integral of deficit * sqrt G * mu^2 (nan without K)

    @property
    def slack(self) -> float:
        return self.gradient_term - self.deficit_term


def lemma_inequality(u: ScalarField, G: Potential, mu: TestFunction,
                     spec: QuadratureSpec = DEFAULT_SPEC,
                     K: float | None = None) -> InequalitySides:
    """Both sides of the stability criterion for one mu."""

    def dens(x):
        uu = u(x)
        gu = u.gradient(x)
        m = mu(x)
        gm = mu.gradient(x)
        pot = G.G(uu)
        w = np.sqrt(pot)
        gap = pot - 0.5 * np.sum(gu * gu, axis=-1)
        return np.stack([pot * np.sum(gm * gm, axis=-1),
                         gap * (-2 * G.sqrtG_second(uu)) * w * m * m,
                         gap * w * m * m], axis=-1)

    value, _ = _integrate_over(mu, dens, spec)
    h = 2 * K * float(value[2]) if K is not None else float("nan")
    return InequalitySides(float(value[0]), float(value[1]), h)


def stability_equivalence_check(u: ScalarField, G: Potential,
                                mus: Sequence[TestFunction],
                                spec: QuadratureSpec = DEFAULT_SPEC,
                                slack: float = 1e-8) -> bool:
    """True when every mu satisfies the stability criterion up to -slack."""
    return all(lemma_inequality(u, G, mu, spec).slack >= -slack for mu in mus)


def _sup_on_ball(f, N: int, radius: float, per_axis: int = 41) -> float:
    axis = np.linspace(-radius, radius, per_axis)
    grid = np.stack(np.meshgrid(*([axis] * N), indexing="ij"), axis=-1).reshape(-1, N)
    grid = grid[_norm(grid) <= radius]
    return float(np.max(f(grid)))


class CutoffReplay(NamedTuple):
    lhs: float       # integral of G(u)/R^2 over B_2R minus B_R
    rhs: float       # M (2^N - 1) |B_1| R^(N-2)
    chained: float   # 2K * integral over B_R of deficit * sqrt G
    M: float


def cutoff_bound_replay(u: ScalarField, G: Potential, R: float, K: float,
                        spec: QuadratureSpec = DEFAULT_SPEC,
                        M: float | None = None) -> CutoffReplay:
    """Replay the cutoff estimate: lhs <= rhs, and lhs >= chained for stable u.

    M defaults to the largest G(u) on a lattice sample of B_2R.
    """
    N = u.dim
    if N > 3:
        raise ValueError("cutoff replay needs ball quadrature (N <= 3)")

    def pot(x):
        return np.asarray(G.G(u(x)), dtype=float)

    if M is None:
        M = _sup_on_ball(pot, N, 2 * R)

    def shell(x):
        return pot(x) / R ** 2

    shell.dim = N
    lhs, _ = integrate(shell, Region.annulus(R, 2 * R, N), spec)

    def weighted(x):
        gu = u.gradient(x)
        p = pot(x)
        return (p - 0.5 * np.sum(gu * gu, axis=-1)) * np.sqrt(p)

    weighted.dim = N
    wd, _ = integrate(weighted, Region.ball(R, N), spec)
    rhs = M * (2 ** N - 1) * ball_volume(N) * R ** (N - 2)
    return CutoffReplay(float(lhs), float(rhs), 2 * K * float(wd), float(M))
