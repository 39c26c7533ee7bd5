"""Parametric null models and their kernel-smoothed counterparts.

Density families (von Mises-Fisher, uniform, Gaussian, independent products)
carry ``pdf``, ``sample`` and a maximum likelihood ``fit``. Regression
families carry ``mean``, ``variance`` and a least squares ``fit``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

import numpy as np
from scipy.special import ive

from .estimators import (
    DirLinSample,
    DirSample,
    directional_kernel_matrix,
    linear_kernel_matrix,
    locpoly_weights,
)
from .kernels import DirectionalKernel
from .sphere import (
    ProductRule,
    QuadratureRule,
    RngStream,
    as_directions,
    line_quadrature,
    sample_uniform_sphere,
    sphere_quadrature,
    surface_area,
)

__all__ = [
    "FitResult",
    "VonMisesFisher",
    "UniformSphere",
    "Gaussian",
    "ProductDensity",
    "ConstantRegression",
    "LinearRegression",
    "vmf_density",
    "vmf_sample",
    "vmf_fit",
    "fit_constant_regression",
    "bessel_ratio",
    "R_functional",
    "default_rule",
    "smooth_density",
    "smooth_density_grid",
    "smooth_regression",
]

KAPPA_CAP = 1e6


def _gen(rng) -> np.random.Generator:
    return rng.generator() if isinstance(rng, RngStream) else rng


@dataclass(frozen=True)
class FitResult:
    model: Any
    theta: dict
    loglik: float
    converged: bool = True
    iterations: int = 0


def bessel_ratio(d: int, kappa):
    """``A_d(kappa) = I_{d/2}(kappa) / I_{d/2-1}(kappa)``, the mean resultant length
    of a von Mises-Fisher law in R^d."""
    kappa = np.asarray(kappa, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = ive(0.5 * d, kappa) / ive(0.5 * d - 1.0, kappa)
    return np.where(kappa == 0, 0.0, out)


def _log_vmf_const(q: int, kappa: float) -> float:
    if kappa == 0:
        return -np.log(surface_area(q))
    nu = 0.5 * (q - 1)
    return nu * np.log(kappa) - (nu + 1.0) * np.log(2.0 * np.pi) - (np.log(ive(nu, kappa)) + kappa)


@dataclass(frozen=True)
class VonMisesFisher:
    """von Mises-Fisher law on S^q with mean direction ``mu`` and
    concentration ``kappa``."""

    mu: np.ndarray
    kappa: float

    def __post_init__(self):
        object.__setattr__(self, "mu", as_directions(self.mu)[0])
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        object.__setattr__(self, "kappa", float(self.kappa))

    domain = "sphere"

    @property
    def q(self) -> int:
        return self.mu.size - 1

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return _log_vmf_const(self.q, self.kappa) + self.kappa * (x @ self.mu)

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def sample(self, n: int, rng) -> np.ndarray:
        return vmf_sample(self.mu, self.kappa, n, rng)

    @classmethod
    def fit(cls, data) -> FitResult:
        return vmf_fit(data)

    @property
    def theta(self) -> dict:
        return {"mu": self.mu.tolist(), "kappa": self.kappa}


@dataclass(frozen=True)
class UniformSphere:
    q: int
    domain = "sphere"

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], 1.0 / surface_area(self.q))

    def sample(self, n: int, rng) -> np.ndarray:
        return sample_uniform_sphere(self.q, n, _gen(rng))

    @classmethod
    def fit(cls, data) -> FitResult:
        x = as_directions(data)
        q = x.shape[1] - 1
        return FitResult(cls(q), {}, -x.shape[0] * np.log(surface_area(q)))

    @property
    def theta(self) -> dict:
        return {}


@dataclass(frozen=True)
class Gaussian:
    mean: float = 0.0
    sd: float = 1.0
    domain = "line"

    def __post_init__(self):
        if not self.sd > 0:
            raise ValueError("sd must be positive")

    def pdf(self, y):
        z = (np.asarray(y, dtype=float) - self.mean) / self.sd
        return np.exp(-0.5 * z * z) / (self.sd * np.sqrt(2.0 * np.pi))

    def sample(self, n: int, rng) -> np.ndarray:
        return self.mean + self.sd * _gen(rng).standard_normal(n)

    @classmethod
    def fit(cls, data) -> FitResult:
        y = np.asarray(data, dtype=float).ravel()
        m, s = float(y.mean()), float(y.std())
        if s == 0.0:
            return FitResult(None, {"mean": m, "sd": 0.0}, np.inf, converged=False)
        model = cls(m, s)
        return FitResult(model, model.theta, float(np.sum(np.log(model.pdf(y)))))

    @property
    def theta(self) -> dict:
        return {"mean": self.mean, "sd": self.sd}


@dataclass(frozen=True)
class ProductDensity:
    """Independent product ``f_1(x) f_2(y)`` on a product domain."""

    first: Any
    second: Any
    domain = "product"

    def pdf(self, x, y):
        return self.first.pdf(x) * self.second.pdf(y)

    def pdf_grid(self, x_nodes, y_nodes) -> np.ndarray:
        return np.outer(self.first.pdf(x_nodes), self.second.pdf(y_nodes))

    def sample(self, n: int, rng):
        rng = rng if isinstance(rng, RngStream) else None
        if rng is None:
            raise TypeError("ProductDensity.sample needs an RngStream")
        return self.first.sample(n, rng.child(0)), self.second.sample(n, rng.child(1))

    def fit_like(self, first_data, second_data) -> FitResult:
        """Refit both factors within their own families."""
        a = type(self.first).fit(first_data)
        b = type(self.second).fit(second_data)
        ok = a.converged and b.converged and a.model is not None and b.model is not None
        model = ProductDensity(a.model, b.model) if ok else None
        return FitResult(
            model,
            {"first": a.theta, "second": b.theta},
            a.loglik + b.loglik,
            converged=ok,
            iterations=a.iterations + b.iterations,
        )

    @property
    def theta(self) -> dict:
        return {"first": self.first.theta, "second": self.second.theta}


def vmf_density(mu, kappa: float, x):
    return VonMisesFisher(mu, kappa).pdf(x)


def _best_fisher_angles(kappa: float, n: int, gen: np.random.Generator) -> np.ndarray:
    # Best & Fisher (1979) wrapped-Cauchy envelope; rho written without cancellation
    root = np.sqrt(1.0 + 4.0 * kappa * kappa)
    tau = 1.0 + root
    tau_m2 = 4.0 * kappa * kappa / (root + 1.0)
    rho = tau * tau_m2 / (tau + np.sqrt(2.0 * tau)) / (2.0 * kappa)
    r = (1.0 + rho * rho) / (2.0 * rho)
    out = np.empty(n)
    filled = 0
    while filled < n:
        m = max(16, int(1.3 * (n - filled)))
        u1, u2, u3 = gen.random((3, m))
        z = np.cos(np.pi * u1)
        f = (1.0 + r * z) / (r + z)
        c = kappa * (r - f)
        with np.errstate(divide="ignore"):
            ok = (c * (2.0 - c) - u2 > 0) | (np.log(c / u2) + 1.0 - c >= 0)
        theta = np.sign(u3[ok] - 0.5) * np.arccos(np.clip(f[ok], -1.0, 1.0))
        take = min(theta.size, n - filled)
        out[filled : filled + take] = theta[:take]
        filled += take
    return out


def _wood_cosines(kappa: float, d: int, n: int, gen: np.random.Generator) -> np.ndarray:
    # Wood (1994) rejection scheme for the component along mu
    b = (d - 1.0) / (2.0 * kappa + np.sqrt(4.0 * kappa * kappa + (d - 1.0) ** 2))
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + (d - 1.0) * np.log(1.0 - x0 * x0)
    out = np.empty(n)
    filled = 0
    while filled < n:
        m = max(16, int(1.3 * (n - filled)))
        z = gen.beta(0.5 * (d - 1), 0.5 * (d - 1), m)
        u = gen.random(m)
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        ok = kappa * w + (d - 1.0) * np.log(1.0 - x0 * w) - c >= np.log(u)
        w = w[ok]
        take = min(w.size, n - filled)
        out[filled : filled + take] = w[:take]
        filled += take
    return out


def _frame(mu: np.ndarray) -> np.ndarray:
    """Orthogonal matrix whose first column is ``mu``."""
    s = 1.0 if mu[0] >= 0 else -1.0
    v = mu.copy()
    v[0] += s
    Q = np.eye(mu.size) - 2.0 * np.outer(v, v) / (v @ v)
    Q[:, 0] *= -s
    return Q


def vmf_sample(mu, kappa: float, n: int, rng) -> np.ndarray:
    """``n`` i.i.d. von Mises-Fisher draws as an ``(n, q+1)`` array.

    Best-Fisher rejection on the circle, Wood's algorithm for q >= 2.
    """
    mu = as_directions(mu)[0]
    gen = _gen(rng)
    d = mu.size
    if kappa == 0:
        return sample_uniform_sphere(d - 1, n, gen)
    if d == 2:
        theta = _best_fisher_angles(kappa, n, gen) + np.arctan2(mu[1], mu[0])
        return np.column_stack([np.cos(theta), np.sin(theta)])
    w = _wood_cosines(kappa, d, n, gen)
    v = gen.standard_normal((n, d - 1))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    local = np.column_stack([w, np.sqrt(np.maximum(1.0 - w * w, 0.0))[:, None] * v])
    return local @ _frame(mu).T


def _solve_kappa(d: int, rbar: float, tol: float = 1e-12) -> tuple[float, int, bool]:
    if rbar >= bessel_ratio(d, KAPPA_CAP):
        return KAPPA_CAP, 0, True
    lo, hi = 0.0, KAPPA_CAP
    k = rbar * (d - rbar * rbar) / (1.0 - rbar * rbar)
    for it in range(1, 101):
        a = float(bessel_ratio(d, k))
        err = a - rbar
        if abs(err) < tol:
            return k, it, True
        if err > 0:
            hi = k
        else:
            lo = k
        deriv = 1.0 - a * a - (d - 1.0) * a / k if k > 0 else 1.0 / d
        step = k - err / deriv if deriv > 0 else np.nan
        k = step if lo < step < hi else 0.5 * (lo + hi)
    return k, 100, abs(float(bessel_ratio(d, k)) - rbar) < 1e-8


def vmf_fit(data) -> FitResult:
    """Maximum likelihood fit of a von Mises-Fisher law.

    The mean direction is the normalized resultant; ``kappa`` solves
    ``A_{q+1}(kappa) = Rbar`` by Newton steps safeguarded with bisection and is
    capped at 1e6.
    """
    x = as_directions(data.points if isinstance(data, DirSample) else data)
    n, d = x.shape
    S = x.sum(axis=0)
    norm = np.linalg.norm(S)
    if norm < 1e-12 * n:
        raise ValueError("resultant vector is zero; mean direction undefined")
    mu = S / norm
    rbar = min(norm / n, 1.0)
    kappa, it, ok = _solve_kappa(d, rbar)
    model = VonMisesFisher(mu, kappa)
    loglik = n * _log_vmf_const(d - 1, kappa) + kappa * norm
    return FitResult(model, model.theta, float(loglik), converged=ok, iterations=it)


@dataclass(frozen=True)
class ConstantRegression:
    """``m(x) = c`` with homoscedastic noise variance ``sigma2``."""

    c: float
    sigma2: float = 0.0

    def mean(self, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], self.c)

    def variance(self, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], self.sigma2)

    def sample_responses(self, directions, rng) -> np.ndarray:
        m = self.mean(directions)
        return m + np.sqrt(self.sigma2) * _gen(rng).standard_normal(m.shape)

    @classmethod
    def fit(cls, sample: DirLinSample) -> FitResult:
        return fit_constant_regression(sample)

    @property
    def theta(self) -> dict:
        return {"c": self.c, "sigma2": self.sigma2}


@dataclass(frozen=True)
class LinearRegression:
    """``m(x) = b0 + b'x`` in ambient coordinates, homoscedastic noise."""

    intercept: float
    slope: np.ndarray
    sigma2: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "slope", np.asarray(self.slope, dtype=float))

    def mean(self, x):
        return self.intercept + np.asarray(x, dtype=float) @ self.slope

    def variance(self, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], self.sigma2)

    def sample_responses(self, directions, rng) -> np.ndarray:
        m = self.mean(directions)
        return m + np.sqrt(self.sigma2) * _gen(rng).standard_normal(m.shape)

    @classmethod
    def fit(cls, sample: DirLinSample) -> FitResult:
        X = np.column_stack([np.ones(sample.n), sample.directions])
        beta, *_ = np.linalg.lstsq(X, sample.responses, rcond=None)
        resid = sample.responses - X @ beta
        model = cls(float(beta[0]), beta[1:], float(np.mean(resid**2)))
        return FitResult(model, model.theta, _gauss_loglik(resid))

    @property
    def theta(self) -> dict:
        return {"intercept": self.intercept, "slope": self.slope.tolist(), "sigma2": self.sigma2}


def _gauss_loglik(resid: np.ndarray) -> float:
    s2 = float(np.mean(resid**2))
    if s2 == 0.0:
        return np.inf
    return float(-0.5 * resid.size * (np.log(2.0 * np.pi * s2) + 1.0))


def fit_constant_regression(sample: DirLinSample) -> FitResult:
    """Least squares (Gaussian MLE) fit of ``m = c``: ``c`` is the response mean."""
    y = sample.responses
    # the rounded mean of a constant vector can differ from the constant by an ulp
    c = float(y[0]) if np.all(y == y[0]) else float(np.mean(y))
    resid = y - c
    model = ConstantRegression(c, float(np.mean(resid**2)))
    return FitResult(model, model.theta, _gauss_loglik(resid))


def default_rule(model, resolution: int | None = None):
    """Quadrature rule matching a model's domain."""
    if model.domain == "sphere":
        q = model.q
        res = resolution or {1: 512, 2: 64, 3: 16}.get(q, 16)
        return sphere_quadrature(q, res)
    if model.domain == "line":
        return line_quadrature(model.mean - 12.0 * model.sd, model.mean + 12.0 * model.sd, resolution or 512)
    if model.domain == "product":
        return ProductRule(default_rule(model.first), default_rule(model.second))
    raise ValueError(f"unknown domain {model.domain!r}")


def R_functional(f: Callable, rule) -> float:
    """``R(f) = int f^2`` by quadrature.

    For a :class:`ProductRule`, ``f`` receives the two node sets and must
    return the ``(N1, N2)`` grid of values.
    """
    if isinstance(rule, ProductRule):
        return rule.integrate(np.asarray(f(rule.first.nodes, rule.second.nodes)) ** 2)
    return rule.integrate(np.asarray(f(rule.nodes)) ** 2)


def _smoothing_matrix(rule: QuadratureRule, h: float, kernel, x) -> np.ndarray:
    if rule.domain == "sphere":
        return directional_kernel_matrix(rule.nodes, x, h, kernel) * rule.weights
    return linear_kernel_matrix(rule.nodes, x, h, kernel) * rule.weights


def _pdf_grid(model, a, b):
    if hasattr(model, "pdf_grid"):
        return model.pdf_grid(a, b)
    A = np.repeat(np.asarray(a), len(b), axis=0) if np.ndim(a) == 2 else np.repeat(a, len(b))
    B = np.tile(b, (len(a), 1)) if np.ndim(b) == 2 else np.tile(b, len(a))
    return model.pdf(A, B).reshape(len(a), len(b))


def smooth_density_grid(model, bandwidths, kernels, first_nodes, second_nodes=None, rule=None):
    """Kernel-smoothed density ``L_h f``, ``LK_{h,g} f`` or ``LL_{h1,h2} f``.

    One-component models return an array over ``first_nodes``; product-domain
    models return an ``(m1, m2)`` grid over ``first_nodes x second_nodes``.
    For non-product joint densities the full double quadrature is done as
    ``S_1 F S_2'`` with ``F`` the density on the rule's grid.
    """
    rule = rule or default_rule(model)
    if model.domain != "product":
        (h,), (k,) = np.atleast_1d(bandwidths), np.atleast_1d(kernels)
        return _smoothing_matrix(rule, h, k, first_nodes) @ model.pdf(rule.nodes)
    h1, h2 = bandwidths
    k1, k2 = kernels
    if isinstance(model, ProductDensity):
        a = _smoothing_matrix(rule.first, h1, k1, first_nodes) @ model.first.pdf(rule.first.nodes)
        b = _smoothing_matrix(rule.second, h2, k2, second_nodes) @ model.second.pdf(rule.second.nodes)
        return np.outer(a, b)
    S1 = _smoothing_matrix(rule.first, h1, k1, first_nodes)
    S2 = _smoothing_matrix(rule.second, h2, k2, second_nodes)
    return S1 @ _pdf_grid(model, rule.first.nodes, rule.second.nodes) @ S2.T


def model_is_directional(model, component: int = 0) -> bool:
    if model.domain == "product":
        part = model.first if component == 0 else model.second
        return part.domain == "sphere"
    return model.domain == "sphere"


def _as_nodes(v, directional: bool) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.atleast_2d(v) if directional else np.atleast_1d(v)


def smooth_density(model, bandwidths, kernels, x, y=None, rule=None) -> float:
    """Smoothed parametric density at one point ``x`` (or pair ``(x, y)``)."""
    x = _as_nodes(x, model_is_directional(model, 0))
    if y is None:
        return float(smooth_density_grid(model, bandwidths, kernels, x, rule=rule)[0])
    y = _as_nodes(y, model_is_directional(model, 1))
    return float(smooth_density_grid(model, bandwidths, kernels, x, y, rule=rule)[0, 0])


def smooth_regression(model, directions, h: float, L: DirectionalKernel, p: int, x):
    """Local polynomial smoothing of a parametric regression function,
    ``sum_i W^p_{n,i}(x) m_theta(X_i)``."""
    pts = directions.points if isinstance(directions, DirSample) else np.asarray(directions, dtype=float)
    W = locpoly_weights(pts, h, L, p, x)
    m = model.mean(pts)
    return W @ m if W.ndim == 2 else float(W @ m)
