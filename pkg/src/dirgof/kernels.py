"""Directional and linear kernels and their smoothing constants.

A directional kernel is a profile ``L: [0, inf) -> [0, inf)`` applied to
``(1 - x'y) / h^2``; a linear kernel is an ordinary symmetric density ``K``.
"""

from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import roots_jacobi

from .sphere import surface_area

__all__ = [
    "IntegrationError",
    "DirectionalKernel",
    "LinearKernel",
    "SmoothingConstants",
    "VON_MISES",
    "EPANECHNIKOV_DIR",
    "GAUSSIAN",
    "UNIFORM",
    "directional_kernel",
    "linear_kernel",
    "lambda_hq",
    "lambda_q",
    "c_hq",
    "varphi_q",
    "nu_d_sq",
    "nu_l_sq",
    "R_K",
    "smoothing_constants",
]


class IntegrationError(ArithmeticError):
    """Numerical integration failed or produced a degenerate value."""


def _quad(f, a, b, points=None, epsrel=1e-12, limit=400) -> float:
    if points is not None:
        points = sorted({float(p) for p in points if a < p < b})
        if not points:
            points = None
    if np.isinf(b) and points is not None:
        head = _quad(f, a, points[-1], points[:-1] or None, epsrel, limit)
        return head + _quad(f, points[-1], b, None, epsrel, limit)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(f, a, b, points=points, epsabs=0.0, epsrel=epsrel, limit=limit)
        except integrate.IntegrationWarning as exc:
            raise IntegrationError(str(exc).strip().splitlines()[0]) from exc
    if not np.isfinite(val):
        raise IntegrationError("integral is not finite")
    return float(val)


@dataclass(frozen=True, eq=False)
class DirectionalKernel:
    """Kernel profile ``L`` for directional smoothing.

    ``r_max`` bounds the region where ``L`` is numerically nonzero (``inf``
    is allowed but slower); ``breakpoints`` lists kinks or jumps in ``r``.
    """

    label: str
    func: Callable[[np.ndarray], np.ndarray]
    r_max: float = np.inf
    breakpoints: tuple[float, ...] = ()
    log_func: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        probe = np.linspace(0.0, min(self.r_max, 50.0), 257)
        if np.any(np.asarray(self.func(probe)) < 0):
            raise ValueError(f"kernel {self.label!r} takes negative values")

    def __call__(self, r):
        return self.func(np.asarray(r, dtype=float))

    def log(self, r):
        r = np.asarray(r, dtype=float)
        if self.log_func is not None:
            return self.log_func(r)
        with np.errstate(divide="ignore"):
            return np.log(self.func(r))

    def squared(self) -> DirectionalKernel:
        f = self.func
        return DirectionalKernel(
            f"{self.label}^2", lambda r: f(r) ** 2, self.r_max, self.breakpoints
        )

    def __repr__(self) -> str:
        return f"DirectionalKernel({self.label!r})"


@dataclass(frozen=True, eq=False)
class LinearKernel:
    """Symmetric unit-mass kernel ``K`` on the real line.

    ``half_width`` is the radius outside which ``K`` is numerically zero.
    Unit mass is checked by quadrature on construction.
    """

    label: str
    func: Callable[[np.ndarray], np.ndarray]
    half_width: float
    breakpoints: tuple[float, ...] = ()

    def __post_init__(self):
        a = self.half_width
        mass = _quad(self.func, -a, a, self.breakpoints)
        if abs(mass - 1.0) > 1e-10:
            raise ValueError(f"kernel {self.label!r} integrates to {mass!r}, not 1")
        u = np.linspace(0.0, a, 101)
        if not np.allclose(self.func(u), self.func(-u), rtol=1e-12, atol=1e-300):
            raise ValueError(f"kernel {self.label!r} is not symmetric")

    def __call__(self, u):
        return self.func(np.asarray(u, dtype=float))

    def __repr__(self) -> str:
        return f"LinearKernel({self.label!r})"


VON_MISES = DirectionalKernel(
    "vonmises", lambda r: np.exp(-r), r_max=745.0, log_func=lambda r: -r
)
EPANECHNIKOV_DIR = DirectionalKernel(
    "epanechnikov", lambda r: np.clip(1.0 - r, 0.0, None), r_max=1.0, breakpoints=(1.0,)
)
GAUSSIAN = LinearKernel(
    "gaussian", lambda u: np.exp(-0.5 * u**2) / np.sqrt(2.0 * np.pi), half_width=38.0
)
UNIFORM = LinearKernel(
    "uniform",
    lambda u: np.where(np.abs(u) <= 0.5, 1.0, 0.0),
    half_width=0.5,
    breakpoints=(-0.5, 0.5),
)

_DIRECTIONAL = {"vonmises": VON_MISES, "epanechnikov": EPANECHNIKOV_DIR}
_LINEAR = {"gaussian": GAUSSIAN, "uniform": UNIFORM}


def directional_kernel(label: str) -> DirectionalKernel:
    try:
        return _DIRECTIONAL[label]
    except KeyError:
        raise ValueError(f"unknown directional kernel {label!r}") from None


def linear_kernel(label: str) -> LinearKernel:
    try:
        return _LINEAR[label]
    except KeyError:
        raise ValueError(f"unknown linear kernel {label!r}") from None


def _effective_r_max(L: DirectionalKernel) -> float:
    # past ~70 the von Mises profile is below 1e-30 relative to L(0)
    return min(L.r_max, 70.0) if L.label == "vonmises" else L.r_max


@functools.lru_cache(maxsize=None)
def lambda_hq(L: DirectionalKernel, h: float, q: int) -> float:
    """Finite-bandwidth normalizer ``lambda_{h,q}(L)``.

    Evaluated in the polar angle ``theta`` between ``x`` and ``y``, where the
    integrand ``L(2 sin^2(theta/2) / h^2) sin^(q-1)(theta)`` is smooth; this is
    the ``r`` integral after the change of variables ``r = (1 - cos theta)/h^2``.
    """
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    h = float(h)

    def integrand(theta):
        return L(2.0 * np.sin(0.5 * theta) ** 2 / h**2) * np.sin(theta) ** (q - 1)

    upper = np.pi
    r_max = L.r_max
    if np.isfinite(r_max) and r_max * h * h < 2.0:
        upper = 2.0 * np.arcsin(h * np.sqrt(0.5 * r_max))
    points = [2.0 * np.arcsin(h * np.sqrt(0.5 * b)) for b in L.breakpoints if b * h * h < 2.0]
    val = _quad(integrand, 0.0, upper, points)
    if val <= 0.0:
        raise IntegrationError(f"kernel {L.label!r} has zero mass at h={h}")
    return surface_area(q - 1) * val / h**q


@functools.lru_cache(maxsize=None)
def lambda_q(L: DirectionalKernel, q: int, squared: bool = False) -> float:
    """Limit constant ``lambda_q(L) = 2^(q/2-1) omega_{q-1} int L(r) r^(q/2-1) dr``.

    With ``squared=True`` the kernel is replaced by ``L^2``. Uses ``r = s^2``
    so the integrand ``2 L(s^2) s^(q-1)`` has no endpoint singularity.
    """
    f = L.func
    if squared:
        g = lambda s: 2.0 * f(s * s) ** 2 * s ** (q - 1)  # noqa: E731
    else:
        g = lambda s: 2.0 * f(s * s) * s ** (q - 1)  # noqa: E731
    upper = np.sqrt(_effective_r_max(L))
    val = _quad(g, 0.0, upper, [np.sqrt(b) for b in L.breakpoints])
    if val <= 0.0:
        raise IntegrationError(f"kernel {L.label!r} has zero mass")
    return 2.0 ** (0.5 * q - 1.0) * surface_area(q - 1) * val


def c_hq(L: DirectionalKernel, h: float, q: int) -> float:
    """Normalizing constant ``c_{h,q}(L) = 1 / (lambda_{h,q}(L) h^q)``."""
    return 1.0 / (lambda_hq(L, float(h), q) * float(h) ** q)


def varphi_q(L: DirectionalKernel, r, rho, q: int, n_theta: int = 96):
    """The kernel cross term ``phi_q(r, rho)``.

    For q=1 it is the two-point sum; for q >= 2 the integral over ``theta``
    with weight ``(1 - theta^2)^((q-3)/2)`` uses Gauss-Jacobi nodes, which
    absorb the endpoint singularity at q=2 (Chebyshev case).
    """
    r = np.asarray(r, dtype=float)
    rho = np.asarray(rho, dtype=float)
    cross = 2.0 * np.sqrt(r * rho)
    if q == 1:
        return L(np.maximum(r + rho - cross, 0.0)) + L(r + rho + cross)
    a = 0.5 * (q - 3)
    theta, w = roots_jacobi(n_theta, a, a)
    arg = (r + rho)[..., None] - theta * cross[..., None]
    return L(np.maximum(arg, 0.0)) @ w


def _gamma_q(q: int) -> float:
    if q == 1:
        return 2.0**-0.5
    return surface_area(q - 1) * surface_area(q - 2) ** 2 * 2.0 ** (1.5 * q - 3.0)


def _panels(upper: float, breaks, width: float = 0.25, order: int = 24):
    edges = np.union1d(np.arange(0.0, upper, width), [b for b in breaks if 0 < b < upper])
    edges = np.append(edges, upper)
    x, w = np.polynomial.legendre.leggauss(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = (lo + 0.5 * (hi - lo) * (x + 1.0)).ravel()
    weights = (0.5 * (hi - lo) * w).ravel()
    return nodes, weights


@functools.lru_cache(maxsize=None)
def _nu_d_sq(L: DirectionalKernel, q: int, mc_seed: int) -> tuple[float, bool]:
    # substitutions r = s^2, rho = t^2 turn r^(q/2-1) dr into 2 s^(q-1) ds
    s_max = np.sqrt(_effective_r_max(L))
    sq_breaks = [np.sqrt(b) for b in L.breakpoints]
    t, wt = _panels(s_max, sq_breaks)
    s, ws = _panels(2.0 * s_max, sq_breaks)
    S, T = s[:, None], t[None, :]
    approximate = False
    if q == 1:
        phi = L(np.maximum((S - T) ** 2, 0.0)) + L((S + T) ** 2)
    elif q <= 3:
        a = 0.5 * (q - 3)
        theta, wth = roots_jacobi(64, a, a)
        phi = np.empty((s.size, t.size))
        for k, th in enumerate(theta):
            phi_k = L(np.maximum(S * S + T * T - 2.0 * th * S * T, 0.0))
            if k == 0:
                phi[:] = wth[k] * phi_k
            else:
                phi += wth[k] * phi_k
    else:
        # first coordinate of a uniform point on S^(q-1) has density
        # proportional to (1 - theta^2)^((q-3)/2); draws are paired with
        # their negatives since that density is even
        approximate = True
        t, wt = _panels(s_max, sq_breaks, width=0.5, order=16)
        s, ws = _panels(2.0 * s_max, sq_breaks, width=0.5, order=16)
        S, T = s[:, None], t[None, :]
        gen = np.random.Generator(np.random.Philox(mc_seed))
        z = gen.standard_normal((512, q))
        theta = z[:, 0] / np.linalg.norm(z, axis=1)
        theta = np.concatenate([theta, -theta])
        scale = surface_area(q - 1) / surface_area(q - 2)
        phi = np.zeros((s.size, t.size))
        for th in theta:
            phi += L(np.maximum(S * S + T * T - 2.0 * th * S * T, 0.0))
        phi *= scale / theta.size
    inner = phi @ (2.0 * t ** (q - 1) * L(t * t) * wt)
    outer = np.sum(2.0 * s ** (q - 1) * inner**2 * ws)
    return _gamma_q(q) * lambda_q(L, q) ** -4 * outer, approximate


def nu_d_sq(L: DirectionalKernel, q: int, with_flag: bool = False, mc_seed: int = 20180):
    """Directional variance constant ``nu_d^2`` of the limit laws.

    Deterministic for q <= 3. For q > 3 the inner ``theta`` integral is a
    seeded Monte Carlo average and the value is approximate; pass
    ``with_flag=True`` to get ``(value, approximate)``.
    """
    val, approx = _nu_d_sq(L, q, mc_seed)
    if val <= 0.0 or not np.isfinite(val):
        raise IntegrationError(f"nu_d^2 is degenerate for kernel {L.label!r}, q={q}")
    return (val, approx) if with_flag else val


def _autoconvolution(K: LinearKernel, v: float) -> float:
    a = K.half_width
    lo, hi = max(-a, -a - v), min(a, a - v)
    if hi <= lo:
        return 0.0
    pts = list(K.breakpoints) + [b - v for b in K.breakpoints]
    return _quad(lambda u: K.func(u) * K.func(u + v), lo, hi, pts)


@functools.lru_cache(maxsize=None)
def nu_l_sq(K: LinearKernel) -> float:
    """Linear variance constant ``int [int K(u) K(u+v) du]^2 dv``."""
    a = K.half_width
    b = K.breakpoints
    pts = [x - y for x in b for y in b]
    # the autoconvolution is even in v
    val = 2.0 * _quad(lambda v: _autoconvolution(K, v) ** 2, 0.0, 2.0 * a, pts, epsrel=1e-11)
    if val <= 0.0:
        raise IntegrationError(f"nu_l^2 is degenerate for kernel {K.label!r}")
    return val


@functools.lru_cache(maxsize=None)
def R_K(K: LinearKernel) -> float:
    """Roughness ``int K(u)^2 du``."""
    a = K.half_width
    return _quad(lambda u: K.func(u) ** 2, -a, a, K.breakpoints)


@dataclass(frozen=True)
class SmoothingConstants:
    q: int
    lambda_L: float
    lambda_L2: float
    nu_d_sq: float
    approximate: bool = False

    @property
    def bias_ratio(self) -> float:
        """``lambda_q(L^2) / lambda_q(L)^2``, the leading variance of the KDE."""
        return self.lambda_L2 / self.lambda_L**2


@functools.lru_cache(maxsize=None)
def smoothing_constants(L: DirectionalKernel, q: int) -> SmoothingConstants:
    nu, approx = nu_d_sq(L, q, with_flag=True)
    return SmoothingConstants(
        q=q,
        lambda_L=lambda_q(L, q),
        lambda_L2=lambda_q(L, q, squared=True),
        nu_d_sq=nu,
        approximate=approx,
    )
