"""N-dimensional fields: the counterexample pair, its flux, lifted 1-D solutions.

Fields are vectorised: evaluators take an array whose last axis holds the
N coordinates and return one value (or one N-vector) per point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .profile import Potential, Profile
from .quadrature import SeparableField


@dataclass
class ScalarField:
    dim: int
    fn: Callable
    grad: Callable | None = None
    info: dict = field(default_factory=dict, repr=False)

    def __call__(self, x):
        return self.fn(np.asarray(x, dtype=float))

    def gradient(self, x):
        if self.grad is None:
            raise AttributeError("field has no analytic gradient")
        return self.grad(np.asarray(x, dtype=float))


@dataclass
class VectorField:
    dim: int
    fn: Callable

    def __call__(self, x):
        return self.fn(np.asarray(x, dtype=float))


def _check_points(x, dim):
    if x.shape[-1] != dim:
        raise ValueError(f"expected points with {dim} coordinates, got shape {x.shape}")
    return x


def gaussian_H(N: int) -> ScalarField:
    """pi^(-(N-1)/4) exp(-|y|^2/2) on R^(N-1); its square integrates to 1.

    For N = 1 there are no transverse variables and H is identically 1.
    """
    if N < 1:
        raise ValueError("dimension must be >= 1")
    d = N - 1
    if d == 0:
        def fn(y):
            y = np.asarray(y, dtype=float)
            lead = y.shape[:-1] if y.ndim else ()
            return np.ones(lead) if lead else 1.0
        return ScalarField(0, fn, lambda y: np.zeros(np.shape(y)))
    c = math.pi ** (-d / 4)

    def fn(y):
        y = _check_points(np.asarray(y, dtype=float), d)
        return c * np.exp(-0.5 * np.sum(y * y, axis=-1))

    def grad(y):
        return -y * fn(y)[..., None]

    return ScalarField(d, fn, grad)


def counterexample(N: int, profile: Profile) -> tuple[ScalarField, ScalarField]:
    """The pair phi = H(y) / sqrt(g'(x_N)), sigma = g(x_N) on R^N."""
    H = gaussian_H(N)

    def phi(x):
        x = _check_points(x, N)
        return H(x[..., :-1]) * np.sqrt(profile.inv_g_prime(x[..., -1]))

    def phi_grad(x):
        x = _check_points(x, N)
        t = x[..., -1]
        root = np.sqrt(profile.inv_g_prime(t))
        gy = H.gradient(x[..., :-1]) * root[..., None]
        gt = -0.5 * H(x[..., :-1]) * profile.g_second(t) * root ** 3
        return np.concatenate([gy, gt[..., None]], axis=-1)

    def sigma(x):
        x = _check_points(x, N)
        return profile.g(x[..., -1])

    def sigma_grad(x):
        x = _check_points(x, N)
        out = np.zeros(x.shape)
        out[..., -1] = profile.g_prime(x[..., -1])
        return out

    info = {"profile": profile, "H": H}
    return (ScalarField(N, phi, phi_grad, info),
            ScalarField(N, sigma, sigma_grad, dict(info)))


def flux(phi: ScalarField, sigma: ScalarField) -> VectorField:
    """Pointwise phi^2 * grad(sigma)."""
    if phi.dim != sigma.dim:
        raise ValueError("phi and sigma live in different dimensions")
    return VectorField(phi.dim, lambda x: phi(x)[..., None] ** 2 * sigma.gradient(x))


def nested_flux(phi: ScalarField, sigma: ScalarField, h: float) -> VectorField:
    """phi^2 times a central-difference gradient of sigma.

    Differentiating this field again gives the nested finite-difference
    divergence, which does not benefit from the closed form of the flux.
    """
    return VectorField(phi.dim, lambda x: phi(x)[..., None] ** 2 * fd_gradient(sigma, x, h))


def default_step(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return 1e-3 * np.maximum(1.0, np.max(np.abs(p), axis=-1))


def _step(p, h):
    h = default_step(p) if h is None else np.asarray(h, dtype=float)
    if np.any(h <= 0):
        raise ValueError("finite-difference step must be positive")
    return h


def fd_gradient(f: Callable, p, h=None) -> np.ndarray:
    """Second-order central-difference gradient of a scalar field."""
    p = np.asarray(p, dtype=float)
    h = _step(p, h)
    out = np.empty(p.shape)
    for i in range(p.shape[-1]):
        e = np.zeros(p.shape[-1])
        e[i] = 1.0
        step = np.asarray(h)[..., None] * e
        out[..., i] = (np.asarray(f(p + step)) - np.asarray(f(p - step))) / (2 * h)
    return out


def divergence_residual(F: Callable, p, h=None):
    """Central-difference divergence sum_i (F_i(p + h e_i) - F_i(p - h e_i)) / 2h."""
    p = np.asarray(p, dtype=float)
    h = _step(p, h)
    total = np.zeros(p.shape[:-1])
    for i in range(p.shape[-1]):
        e = np.zeros(p.shape[-1])
        e[i] = 1.0
        step = np.asarray(h)[..., None] * e
        total = total + (np.asarray(F(p + step))[..., i]
                         - np.asarray(F(p - step))[..., i]) / (2 * h)
    return float(total) if total.ndim == 0 else total


def observed_order(err_h, err_h2) -> float:
    """log2 of the ratio of aggregate (RMS) errors at steps h and h/2."""
    a = math.sqrt(float(np.mean(np.square(err_h))))
    b = math.sqrt(float(np.mean(np.square(err_h2))))
    if b == 0.0:
        return math.inf if a > 0 else math.nan
    return math.log2(a / b)


def gradient_order(field_: ScalarField, points, h: float = 1e-2) -> float:
    """Observed convergence order of central differences toward the analytic gradient."""
    points = np.asarray(points, dtype=float)
    exact = field_.gradient(points)
    e1 = fd_gradient(field_, points, h) - exact
    e2 = fd_gradient(field_, points, h / 2) - exact
    return observed_order(e1, e2)


def lift_1d(u: Callable, du: Callable, N: int) -> ScalarField:
    """U(x) = u(x_N) with gradient (0, ..., 0, u'(x_N))."""

    def fn(x):
        return u(_check_points(x, N)[..., -1])

    def grad(x):
        x = _check_points(x, N)
        out = np.zeros(x.shape)
        out[..., -1] = du(x[..., -1])
        return out

    return ScalarField(N, fn, grad)


def scaled(field_: ScalarField, c: float) -> ScalarField:
    """x -> U(c x), with the chain-rule gradient."""
    grad = None
    if field_.grad is not None:
        def grad(x):
            return c * field_.gradient(c * x)
    return ScalarField(field_.dim, lambda x: field_(c * x), grad)


def constant_field(N: int, c: float) -> ScalarField:
    return ScalarField(N, lambda x: np.full(np.shape(x)[:-1], float(c)),
                       lambda x: np.zeros(np.shape(x)))


def laplacian(U: Callable, p, h: float = 1e-2) -> np.ndarray:
    """Fourth-order central-difference Laplacian."""
    p = np.asarray(p, dtype=float)
    total = -30.0 * p.shape[-1] * np.asarray(U(p))
    for i in range(p.shape[-1]):
        e = np.zeros(p.shape[-1])
        e[i] = h
        total = total + (16.0 * (np.asarray(U(p + e)) + np.asarray(U(p - e)))
                         - (np.asarray(U(p + 2 * e)) + np.asarray(U(p - 2 * e))))
    return total / (12 * h * h)


def laplacian_residual(U: Callable, G: Potential, p, h: float = 1e-2):
    """Laplacian of U minus G'(U), by finite differences."""
    p = np.asarray(p, dtype=float)
    return laplacian(U, p, h) - G.dG(np.asarray(U(p)))


def separable_majorant(phi: ScalarField, bound: float = 4.0) -> SeparableField:
    """bound * H(y)^2 / g'(x_N): dominates (phi sigma)^2 whenever sigma^2 < bound."""
    profile, H = phi.info["profile"], phi.info["H"]
    N = phi.dim
    return SeparableField(N, lambda y: H(y) ** 2, 1.0,
                          lambda t: bound * profile.inv_g_prime(t))
