"""Smoothing-based test statistics for directional data.

=====  ==========================================  ===========================
name   null hypothesis                             class
=====  ==========================================  ===========================
T1     directional density is parametric           DirectionalDensityTest
T2     directional-linear density is parametric    DirLinDensityTest
T3     direction and scalar are independent        DirLinIndependenceTest
T4     directional-directional density parametric  DirDirDensityTest
T5     two directions are independent              DirDirIndependenceTest
T6     regression function is parametric           RegressionTest
=====  ==========================================  ===========================

Every statistic is an integrated squared difference evaluated by a fixed
quadrature rule; every class exposes ``statistic(data)`` and ``run(data)``,
the latter returning a :class:`TestOutcome` with the asymptotic calibration.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.stats import norm

from .estimators import (
    DirDirSample,
    DirLinSample,
    DirSample,
    directional_kernel_matrix,
    linear_kernel_matrix,
    locpoly_weights,
)
from .kernels import (
    GAUSSIAN,
    VON_MISES,
    DirectionalKernel,
    LinearKernel,
    R_K,
    nu_l_sq,
    smoothing_constants,
)
from .models import ProductDensity, _pdf_grid, default_rule, smooth_density_grid
from .sphere import ProductRule, QuadratureRule, line_quadrature, sphere_quadrature

__all__ = [
    "DegenerateScaleError",
    "Asymptotics",
    "TestOutcome",
    "PitmanDeviation",
    "pitman_shift",
    "sphere_rule_for",
    "line_rule_for",
    "t1_statistic",
    "t1_asymptotics",
    "t2_statistic",
    "t2_asymptotics",
    "t3_statistic",
    "t3_asymptotics",
    "t4_statistic",
    "t4_asymptotics",
    "t5_statistic",
    "t5_asymptotics",
    "t6_statistic",
    "t6_asymptotics",
    "DirectionalDensityTest",
    "DirLinDensityTest",
    "DirLinIndependenceTest",
    "DirDirDensityTest",
    "DirDirIndependenceTest",
    "RegressionTest",
]


class DegenerateScaleError(ValueError):
    """The asymptotic variance is zero, so the statistic cannot be standardized."""


@dataclass(frozen=True)
class Asymptotics:
    """Normal limit ``rate * (T - center) -> N(mean_shift, variance)``."""

    center: float
    variance: float
    rate: float
    rate_label: str = ""

    @property
    def scale(self) -> float:
        return math.sqrt(self.variance)

    def threshold(self, alpha: float) -> float:
        """Asymptotic critical value of the statistic at level ``alpha``."""
        return self.center + norm.isf(alpha) * self.scale / self.rate

    def standardize(self, statistic):
        if self.variance <= 0:
            raise DegenerateScaleError("asymptotic variance is zero")
        return self.rate * (np.asarray(statistic) - self.center) / self.scale


@dataclass(frozen=True)
class TestOutcome:
    statistic: float
    center: float
    scale: float
    rate: float
    standardized: float
    p_asymptotic: float
    rate_label: str = ""
    metadata: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    @classmethod
    def from_asymptotics(cls, statistic: float, asym: Asymptotics | None, metadata=None):
        if asym is None or asym.variance <= 0:
            # degenerate null (e.g. zero residual variance): no standardization
            return cls(statistic, math.nan, 0.0, math.nan, math.nan, math.nan, "", dict(metadata or {}))
        z = float(asym.standardize(statistic))
        return cls(statistic, asym.center, asym.scale, asym.rate, z, float(norm.sf(z)),
                   asym.rate_label, dict(metadata or {}))

    def reject(self, alpha: float) -> bool:
        return self.p_asymptotic < alpha

    def asdict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PitmanDeviation:
    """Mean-zero perturbation ``Delta`` defining local alternatives."""

    func: Callable
    rate_exponent: float = 0.5


def pitman_shift(delta: PitmanDeviation | Callable, rule) -> float:
    """``R(Delta) = int Delta^2``, the mean shift of the limit under local
    alternatives. Raises ``ValueError`` if ``Delta`` does not integrate to 0."""
    f = delta.func if isinstance(delta, PitmanDeviation) else delta
    if isinstance(rule, ProductRule):
        vals = np.asarray(f(rule.first.nodes, rule.second.nodes), dtype=float)
    else:
        vals = np.asarray(f(rule.nodes), dtype=float)
    mass = rule.integrate(vals)
    if abs(mass) > 1e-6:
        raise ValueError(f"deviation integrates to {mass:.3g}, not 0")
    return rule.integrate(vals**2)


# -- quadrature defaults ----------------------------------------------------


def sphere_rule_for(q: int, h: float) -> QuadratureRule:
    """Default rule on S^q, refined so node spacing stays below ``h / 4``."""
    if q == 1:
        return sphere_quadrature(1, max(512, math.ceil(8.0 * math.pi / h)))
    if q == 2:
        return sphere_quadrature(2, max(64, math.ceil(4.0 * math.pi / h)))
    if q == 3:
        return sphere_quadrature(3, max(16, math.ceil(2.0 * math.pi / h)))
    raise ValueError(f"no deterministic rule for q={q}")


def line_rule_for(values, g: float, n_nodes: int = 256) -> QuadratureRule:
    """Gauss-Legendre rule on ``[min - 5(g+s), max + 5(g+s)]``, ``s`` the
    sample standard deviation; refined so mean spacing stays below ``g / 2``."""
    y = np.asarray(values, dtype=float)
    pad = 5.0 * (g + float(y.std()))
    lo, hi = float(y.min()) - pad, float(y.max()) + pad
    n_nodes = max(n_nodes, math.ceil(math.pi * (hi - lo) / g))
    return line_quadrature(lo, hi, n_nodes)


# -- statistic primitives ---------------------------------------------------


def _kde_nodes(points, nodes, h, L) -> np.ndarray:
    return directional_kernel_matrix(points, nodes, h, L).mean(axis=1)


def t1_statistic(sample, h: float, L: DirectionalKernel, model, rule=None) -> float:
    """``int (f_h - L_h f_theta)^2`` over S^q."""
    X = sample.points if isinstance(sample, DirSample) else np.asarray(sample, dtype=float)
    rule = rule or sphere_rule_for(X.shape[1] - 1, h)
    S = directional_kernel_matrix(rule.nodes, rule.nodes, h, L) * rule.weights
    diff = _kde_nodes(X, rule.nodes, h, L) - S @ model.pdf(rule.nodes)
    return rule.integrate(diff**2)


def t1_asymptotics(n: int, h: float, q: int, constants, R_f: float) -> Asymptotics:
    """Center ``(n h^q)^{-1} lambda_q(L^2)/lambda_q(L)^2``, variance
    ``2 nu_d^2 R(f)``, rate ``n h^{q/2}``."""
    return Asymptotics(
        center=constants.bias_ratio / (n * h**q),
        variance=2.0 * constants.nu_d_sq * R_f,
        rate=n * h ** (0.5 * q),
        rate_label="n h^(q/2)",
    )


def _dirlin_grids(sample: DirLinSample, h, g, L, K, rule: ProductRule):
    A = directional_kernel_matrix(sample.directions, rule.first.nodes, h, L)
    B = linear_kernel_matrix(sample.responses, rule.second.nodes, g, K)
    return A, B


def t2_statistic(sample: DirLinSample, h, g, L, K, model, rule: ProductRule | None = None) -> float:
    """``int int (f_{h,g} - LK_{h,g} f_theta)^2`` over S^q x R."""
    rule = rule or ProductRule(sphere_rule_for(sample.q, h), line_rule_for(sample.responses, g))
    A, B = _dirlin_grids(sample, h, g, L, K, rule)
    # the smoothing integral over R must cover the model's support, not the data's
    smoothing = ProductRule(rule.first, default_rule(model.second)) if isinstance(model, ProductDensity) else rule
    target = smooth_density_grid(model, (h, g), (L, K), rule.first.nodes, rule.second.nodes, rule=smoothing)
    return rule.integrate((A @ B.T / sample.n - target) ** 2)


def t2_asymptotics(n, h, g, q, constants, R_K_val, nu_l, R_f) -> Asymptotics:
    return Asymptotics(
        center=constants.bias_ratio * R_K_val / (n * h**q * g),
        variance=2.0 * constants.nu_d_sq * nu_l * R_f,
        rate=n * math.sqrt(h**q * g),
        rate_label="n (h^q g)^(1/2)",
    )


def _independence_from_grids(A, B, rule: ProductRule) -> float:
    n = A.shape[1]
    joint = A @ B.T / n
    diff = joint - np.outer(A.mean(axis=1), B.mean(axis=1))
    return rule.integrate(diff**2)


DATA_CHUNK = 20_000


def _independence_chunked(make_A, make_B, n: int, rule: ProductRule, chunk: int = DATA_CHUNK) -> float:
    """Independence statistic accumulated over blocks of observations.

    ``make_A(sl)`` and ``make_B(sl)`` return the kernel matrices of the
    observations in slice ``sl``; memory stays at O(nodes * chunk).
    """
    if n <= chunk:
        return _independence_from_grids(make_A(slice(0, n)), make_B(slice(0, n)), rule)
    joint = a = b = None
    for start in range(0, n, chunk):
        sl = slice(start, min(start + chunk, n))
        A, B = make_A(sl), make_B(sl)
        if joint is None:
            joint, a, b = A @ B.T, A.sum(axis=1), B.sum(axis=1)
        else:
            joint += A @ B.T
            a += A.sum(axis=1)
            b += B.sum(axis=1)
    diff = joint / n - np.outer(a / n, b / n)
    return rule.integrate(diff**2)


class PermutationKernel:
    """T3/T5 under permutations of the second component, in O(n^2) per draw.

    With ``G1 = A' W1 A`` and ``G2 = B' W2 B`` (``W`` the quadrature weights),
    permuting the second sample by ``pi`` gives

        n^2 T = sum_kl G1[k,l] G2[pi k, pi l] - 2 n u'v[pi] + n^2 R1 R2

    where ``u = A' W1 a``, ``v = B' W2 b`` and ``a``, ``b``, ``R1``, ``R2``
    come from the marginal estimates, which permutations leave unchanged.
    """

    def __init__(self, A, B, rule: ProductRule):
        n = A.shape[1]
        w1, w2 = rule.first.weights, rule.second.weights
        a, b = A.mean(axis=1), B.mean(axis=1)
        self.n = n
        self.G1 = A.T @ (w1[:, None] * A)
        self.G2 = B.T @ (w2[:, None] * B)
        self.u = A.T @ (w1 * a)
        self.v = B.T @ (w2 * b)
        self.const = float(w1 @ a**2) * float(w2 @ b**2)

    def __call__(self, perm=None) -> float:
        G2, v = self.G2, self.v
        if perm is not None:
            G2 = G2[np.ix_(perm, perm)]
            v = v[perm]
        n = self.n
        val = np.sum(self.G1 * G2) / n**2 - 2.0 * float(self.u @ v) / n + self.const
        return max(val, 0.0)


def t3_statistic(sample: DirLinSample, h, g, L, K, rule: ProductRule | None = None) -> float:
    """``int int (f_{h,g} - f_h f_g)^2`` over S^q x R."""
    rule = rule or ProductRule(sphere_rule_for(sample.q, h), line_rule_for(sample.responses, g))
    return _independence_chunked(
        lambda sl: directional_kernel_matrix(sample.directions[sl], rule.first.nodes, h, L),
        lambda sl: linear_kernel_matrix(sample.responses[sl], rule.second.nodes, g, K),
        sample.n, rule,
    )


def t3_asymptotics(n, h, g, q, constants, R_K_val, nu_l, R_fX, R_fY) -> Asymptotics:
    """Center ``A_n`` (joint bias minus the two marginal bias terms)."""
    ratio = constants.bias_ratio
    A_n = ratio * R_K_val / (n * h**q * g) - ratio * R_fY / (n * h**q) - R_K_val * R_fX / (n * g)
    return Asymptotics(
        center=A_n,
        variance=2.0 * constants.nu_d_sq * nu_l * R_fX * R_fY,
        rate=n * math.sqrt(h**q * g),
        rate_label="n (h^q g)^(1/2)",
    )


def _dirdir_grids(sample: DirDirSample, h1, h2, L, rule: ProductRule):
    A = directional_kernel_matrix(sample.first, rule.first.nodes, h1, L)
    B = directional_kernel_matrix(sample.second, rule.second.nodes, h2, L)
    return A, B


def t4_statistic(sample: DirDirSample, h1, h2, L, model, rule: ProductRule | None = None) -> float:
    """``int int (f_{h1,h2} - LL_{h1,h2} f_theta)^2`` over S^q1 x S^q2."""
    rule = rule or ProductRule(sphere_rule_for(sample.q1, h1), sphere_rule_for(sample.q2, h2))
    A, B = _dirdir_grids(sample, h1, h2, L, rule)
    target = smooth_density_grid(model, (h1, h2), (L, L), rule.first.nodes, rule.second.nodes, rule=rule)
    return rule.integrate((A @ B.T / sample.n - target) ** 2)


def t4_asymptotics(n, h1, h2, constants1, constants2, R_f) -> Asymptotics:
    q1, q2 = constants1.q, constants2.q
    hh = h1**q1 * h2**q2
    return Asymptotics(
        center=constants1.bias_ratio * constants2.bias_ratio / (n * hh),
        variance=2.0 * constants1.nu_d_sq * constants2.nu_d_sq * R_f,
        rate=n * math.sqrt(hh),
        rate_label="n (h1^q1 h2^q2)^(1/2)",
    )


def t5_statistic(sample: DirDirSample, h1, h2, L, rule: ProductRule | None = None) -> float:
    """``int int (f_{h1,h2} - f_h1 f_h2)^2`` over S^q1 x S^q2."""
    rule = rule or ProductRule(sphere_rule_for(sample.q1, h1), sphere_rule_for(sample.q2, h2))
    return _independence_chunked(
        lambda sl: directional_kernel_matrix(sample.first[sl], rule.first.nodes, h1, L),
        lambda sl: directional_kernel_matrix(sample.second[sl], rule.second.nodes, h2, L),
        sample.n, rule,
    )


def t5_asymptotics(n, h1, h2, constants1, constants2, R_f1, R_f2) -> Asymptotics:
    """Center ``B_n`` (joint bias minus the two marginal bias terms)."""
    q1, q2 = constants1.q, constants2.q
    r1, r2 = constants1.bias_ratio, constants2.bias_ratio
    hh = h1**q1 * h2**q2
    B_n = r1 * r2 / (n * hh) - r1 * R_f2 / (n * h1**q1) - r2 * R_f1 / (n * h2**q2)
    return Asymptotics(
        center=B_n,
        variance=2.0 * constants1.nu_d_sq * constants2.nu_d_sq * R_f1 * R_f2,
        rate=n * math.sqrt(hh),
        rate_label="n (h1^q1 h2^q2)^(1/2)",
    )


def _t6_from_weights(W, kde, residuals, rule, weight_vals) -> float:
    disc = W @ residuals
    return rule.integrate(disc**2 * kde * weight_vals)


def _t6_local_constant_chunked(directions, resid, h, L, rule, weight_vals, chunk: int = DATA_CHUNK) -> float:
    """Local constant T6 accumulated over blocks of observations.

    With ``S0 = sum_i L_h(x, X_i)`` and ``S1 = sum_i L_h(x, X_i) e_i`` the
    integrand is ``(S1 / S0)^2 (S0 / n) w``; nodes where every kernel
    weight underflows contribute nothing.
    """
    n = resid.size
    num = np.zeros(len(rule))
    den = np.zeros(len(rule))
    for start in range(0, n, chunk):
        sl = slice(start, min(start + chunk, n))
        Kx = directional_kernel_matrix(directions[sl], rule.nodes, h, L)
        num += Kx @ resid[sl]
        den += Kx.sum(axis=1)
    pos = den > 0
    vals = np.zeros(len(rule))
    vals[pos] = num[pos] ** 2 / (den[pos] * n) * weight_vals[pos]
    return rule.integrate(vals)


def t6_statistic(sample: DirLinSample, h, L, p, model, weight=None, rule=None) -> float:
    """``int (m_{h,p} - L_{h,p} m_theta)^2 f_h w`` over S^q.

    The difference of the two smoothers is the smoother applied to the
    parametric residuals ``Y_i - m_theta(X_i)``.
    """
    rule = rule or sphere_rule_for(sample.q, h)
    W = locpoly_weights(sample.directions, h, L, p, rule.nodes)
    kde = _kde_nodes(sample.directions, rule.nodes, h, L)
    wv = np.ones(len(rule)) if weight is None else np.asarray(weight(rule.nodes), dtype=float)
    resid = sample.responses - model.mean(sample.directions)
    return _t6_from_weights(W, kde, resid, rule, wv)


def t6_asymptotics(n, h, q, constants, int_sigma2_w: float, R_sigma2_w: float) -> Asymptotics:
    """Center ``(n h^q)^{-1} lambda_q(L^2)/lambda_q(L)^2 int sigma^2 w``,
    variance ``2 nu_d^2 R(sigma^2 w)``, rate ``n h^{q/2}``."""
    asym = Asymptotics(
        center=constants.bias_ratio * int_sigma2_w / (n * h**q),
        variance=2.0 * constants.nu_d_sq * R_sigma2_w,
        rate=n * h ** (0.5 * q),
        rate_label="n h^(q/2)",
    )
    if asym.variance <= 0:
        raise DegenerateScaleError("sigma^2 w is identically zero; variance is degenerate")
    return asym


# -- test objects -----------------------------------------------------------


def _fit_or_raise(family_fit, *args):
    res = family_fit(*args)
    if not res.converged or res.model is None:
        raise ArithmeticError("null model fit did not converge")
    return res


class _DensityTestBase:
    composite: bool
    null: Any

    def fit_null(self, data):
        """Model the statistic compares against: fitted (composite) or fixed."""
        raise NotImplementedError

    def mode(self) -> str:
        return "composite" if self.composite else "simple"


class DirectionalDensityTest(_DensityTestBase):
    """T1: is a directional density in a parametric family?

    Parameters
    ----------
    h : float
        Bandwidth.
    null : density model on S^q
        Under ``composite=True`` only its family is used and parameters are
        re-estimated from the data; otherwise it is the fixed null.
    """

    name = "T1"

    def __init__(self, h: float, null, kernel: DirectionalKernel = VON_MISES,
                 composite: bool = True, rule: QuadratureRule | None = None):
        self.h = float(h)
        self.null = null
        self.kernel = kernel
        self.composite = composite
        self.q = null.q
        self.rule = rule or sphere_rule_for(self.q, self.h)
        self._S = directional_kernel_matrix(self.rule.nodes, self.rule.nodes, self.h, kernel) * self.rule.weights

    def fit_null(self, data):
        if not self.composite:
            return self.null
        return _fit_or_raise(type(self.null).fit, data).model

    def statistic(self, data, model=None) -> float:
        X = data.points if isinstance(data, DirSample) else np.asarray(data, dtype=float)
        model = model if model is not None else self.fit_null(X)
        diff = _kde_nodes(X, self.rule.nodes, self.h, self.kernel) - self._S @ model.pdf(self.rule.nodes)
        return self.rule.integrate(diff**2)

    def asymptotics(self, n: int, model) -> Asymptotics:
        R_f = self.rule.integrate(model.pdf(self.rule.nodes) ** 2)
        return t1_asymptotics(n, self.h, self.q, smoothing_constants(self.kernel, self.q), R_f)

    def simulate(self, model, n: int, rng):
        return model.sample(n, rng)

    def run(self, data) -> TestOutcome:
        X = data.points if isinstance(data, DirSample) else np.asarray(data, dtype=float)
        model = self.fit_null(X)
        stat = self.statistic(X, model)
        meta = {"test": self.name, "n": len(X), "h": self.h, "kernel": self.kernel.label,
                "mode": self.mode(), "theta": model.theta}
        return TestOutcome.from_asymptotics(stat, self.asymptotics(len(X), model), meta)


class DirLinDensityTest(_DensityTestBase):
    """T2: is a directional-linear density in a parametric family?"""

    name = "T2"

    def __init__(self, h: float, g: float, null, L: DirectionalKernel = VON_MISES,
                 K: LinearKernel = GAUSSIAN, composite: bool = True,
                 sphere_rule: QuadratureRule | None = None,
                 line_rule: QuadratureRule | None = None):
        self.h, self.g = float(h), float(g)
        self.null, self.L, self.K, self.composite = null, L, K, composite
        self.q = null.first.q
        self.sphere_rule = sphere_rule or sphere_rule_for(self.q, self.h)
        self.line_rule = line_rule
        self._S = directional_kernel_matrix(self.sphere_rule.nodes, self.sphere_rule.nodes, self.h, L) * self.sphere_rule.weights

    def _rule(self, sample: DirLinSample) -> ProductRule:
        return ProductRule(self.sphere_rule, self.line_rule or line_rule_for(sample.responses, self.g))

    def fit_null(self, data: DirLinSample):
        if not self.composite:
            return self.null
        return _fit_or_raise(self.null.fit_like, data.directions, data.responses).model

    def _target(self, model, rule: ProductRule) -> np.ndarray:
        a = self._S @ model.first.pdf(rule.first.nodes)
        lr = default_rule(model.second)
        b = (linear_kernel_matrix(lr.nodes, rule.second.nodes, self.g, self.K) * lr.weights) @ model.second.pdf(lr.nodes)
        return np.outer(a, b)

    def statistic(self, data: DirLinSample, model=None) -> float:
        model = model if model is not None else self.fit_null(data)
        rule = self._rule(data)
        A, B = _dirlin_grids(data, self.h, self.g, self.L, self.K, rule)
        return rule.integrate((A @ B.T / data.n - self._target(model, rule)) ** 2)

    def asymptotics(self, n: int, model) -> Asymptotics:
        R_f = self.sphere_rule.integrate(model.first.pdf(self.sphere_rule.nodes) ** 2)
        lr = default_rule(model.second)
        R_f *= lr.integrate(model.second.pdf(lr.nodes) ** 2)
        return t2_asymptotics(n, self.h, self.g, self.q, smoothing_constants(self.L, self.q),
                              R_K(self.K), nu_l_sq(self.K), R_f)

    def simulate(self, model, n: int, rng) -> DirLinSample:
        x, y = model.sample(n, rng)
        return DirLinSample(x, y)

    def run(self, data: DirLinSample) -> TestOutcome:
        model = self.fit_null(data)
        stat = self.statistic(data, model)
        meta = {"test": self.name, "n": data.n, "h": self.h, "g": self.g,
                "kernel": [self.L.label, self.K.label], "mode": self.mode(), "theta": model.theta}
        return TestOutcome.from_asymptotics(stat, self.asymptotics(data.n, model), meta)


class DirLinIndependenceTest:
    """T3: are a direction and a scalar independent?

    ``R_fX`` and ``R_fY`` enter only the asymptotic calibration. When not
    given, they are replaced by the plug-in ``int f_h^2`` and ``int f_g^2``
    of the marginal kernel density estimates.
    """

    name = "T3"

    def __init__(self, h: float, g: float, L: DirectionalKernel = VON_MISES,
                 K: LinearKernel = GAUSSIAN, sphere_rule: QuadratureRule | None = None,
                 line_rule: QuadratureRule | None = None, q: int = 1,
                 R_fX: float | None = None, R_fY: float | None = None):
        self.h, self.g, self.L, self.K, self.q = float(h), float(g), L, K, q
        self.sphere_rule = sphere_rule or sphere_rule_for(q, self.h)
        self.line_rule = line_rule
        self.R_fX, self.R_fY = R_fX, R_fY

    def _rule(self, sample: DirLinSample) -> ProductRule:
        return ProductRule(self.sphere_rule, self.line_rule or line_rule_for(sample.responses, self.g))

    def grids(self, data: DirLinSample):
        rule = self._rule(data)
        A, B = _dirlin_grids(data, self.h, self.g, self.L, self.K, rule)
        return A, B, rule

    def statistic(self, data: DirLinSample) -> float:
        return t3_statistic(data, self.h, self.g, self.L, self.K, self._rule(data))

    def asymptotics(self, n: int, R_fX: float, R_fY: float) -> Asymptotics:
        return t3_asymptotics(n, self.h, self.g, self.q, smoothing_constants(self.L, self.q),
                              R_K(self.K), nu_l_sq(self.K), R_fX, R_fY)

    def run(self, data: DirLinSample) -> TestOutcome:
        A, B, rule = self.grids(data)
        stat = _independence_from_grids(A, B, rule)
        R_fX = self.R_fX if self.R_fX is not None else rule.first.integrate(A.mean(axis=1) ** 2)
        R_fY = self.R_fY if self.R_fY is not None else rule.second.integrate(B.mean(axis=1) ** 2)
        meta = {"test": self.name, "n": data.n, "h": self.h, "g": self.g,
                "kernel": [self.L.label, self.K.label], "R_fX": R_fX, "R_fY": R_fY}
        return TestOutcome.from_asymptotics(stat, self.asymptotics(data.n, R_fX, R_fY), meta)


class DirDirDensityTest(_DensityTestBase):
    """T4: is a directional-directional density in a parametric family?"""

    name = "T4"

    def __init__(self, h1: float, h2: float, null, L: DirectionalKernel = VON_MISES,
                 composite: bool = True, rule: ProductRule | None = None):
        self.h1, self.h2 = float(h1), float(h2)
        self.null, self.L, self.composite = null, L, composite
        self.q1, self.q2 = null.first.q, null.second.q
        self.rule = rule or ProductRule(sphere_rule_for(self.q1, self.h1), sphere_rule_for(self.q2, self.h2))
        r1, r2 = self.rule.first, self.rule.second
        self._S1 = directional_kernel_matrix(r1.nodes, r1.nodes, self.h1, L) * r1.weights
        self._S2 = directional_kernel_matrix(r2.nodes, r2.nodes, self.h2, L) * r2.weights

    def fit_null(self, data: DirDirSample):
        if not self.composite:
            return self.null
        return _fit_or_raise(self.null.fit_like, data.first, data.second).model

    def _target(self, model) -> np.ndarray:
        r1, r2 = self.rule.first, self.rule.second
        if isinstance(model, ProductDensity):
            return np.outer(self._S1 @ model.first.pdf(r1.nodes), self._S2 @ model.second.pdf(r2.nodes))
        return self._S1 @ _pdf_grid(model, r1.nodes, r2.nodes) @ self._S2.T

    def statistic(self, data: DirDirSample, model=None) -> float:
        model = model if model is not None else self.fit_null(data)
        A, B = _dirdir_grids(data, self.h1, self.h2, self.L, self.rule)
        return self.rule.integrate((A @ B.T / data.n - self._target(model)) ** 2)

    def asymptotics(self, n: int, model) -> Asymptotics:
        R_f = self.rule.integrate(_pdf_grid(model, self.rule.first.nodes, self.rule.second.nodes) ** 2)
        return t4_asymptotics(n, self.h1, self.h2, smoothing_constants(self.L, self.q1),
                              smoothing_constants(self.L, self.q2), R_f)

    def simulate(self, model, n: int, rng) -> DirDirSample:
        a, b = model.sample(n, rng)
        return DirDirSample(a, b)

    def run(self, data: DirDirSample) -> TestOutcome:
        model = self.fit_null(data)
        stat = self.statistic(data, model)
        meta = {"test": self.name, "n": data.n, "h1": self.h1, "h2": self.h2,
                "kernel": self.L.label, "mode": self.mode(), "theta": model.theta}
        return TestOutcome.from_asymptotics(stat, self.asymptotics(data.n, model), meta)


class DirDirIndependenceTest:
    """T5: are two directions independent? Plug-in ``R`` values as in T3."""

    name = "T5"

    def __init__(self, h1: float, h2: float, L: DirectionalKernel = VON_MISES,
                 q1: int = 1, q2: int = 1, rule: ProductRule | None = None,
                 R_f1: float | None = None, R_f2: float | None = None):
        self.h1, self.h2, self.L, self.q1, self.q2 = float(h1), float(h2), L, q1, q2
        self.rule = rule or ProductRule(sphere_rule_for(q1, self.h1), sphere_rule_for(q2, self.h2))
        self.R_f1, self.R_f2 = R_f1, R_f2

    def grids(self, data: DirDirSample):
        A, B = _dirdir_grids(data, self.h1, self.h2, self.L, self.rule)
        return A, B, self.rule

    def statistic(self, data: DirDirSample) -> float:
        return t5_statistic(data, self.h1, self.h2, self.L, self.rule)

    def asymptotics(self, n: int, R_f1: float, R_f2: float) -> Asymptotics:
        return t5_asymptotics(n, self.h1, self.h2, smoothing_constants(self.L, self.q1),
                              smoothing_constants(self.L, self.q2), R_f1, R_f2)

    def run(self, data: DirDirSample) -> TestOutcome:
        A, B, rule = self.grids(data)
        stat = _independence_from_grids(A, B, rule)
        R_f1 = self.R_f1 if self.R_f1 is not None else rule.first.integrate(A.mean(axis=1) ** 2)
        R_f2 = self.R_f2 if self.R_f2 is not None else rule.second.integrate(B.mean(axis=1) ** 2)
        meta = {"test": self.name, "n": data.n, "h1": self.h1, "h2": self.h2,
                "kernel": self.L.label, "R_f1": R_f1, "R_f2": R_f2}
        return TestOutcome.from_asymptotics(stat, self.asymptotics(data.n, R_f1, R_f2), meta)


class RegressionTest:
    """T6: is the regression of a scalar on a direction parametric?

    Parameters
    ----------
    h : float
        Bandwidth of the local polynomial smoother.
    null : regression model
        Family used for re-estimation under ``composite=True``.
    p : {0, 1}
        Local constant or local linear smoother.
    weight : callable, optional
        Nonnegative weight ``w(x)`` on the sphere; defaults to 1.
    """

    name = "T6"

    def __init__(self, h: float, null, L: DirectionalKernel = VON_MISES, p: int = 0,
                 composite: bool = True, weight: Callable | None = None,
                 rule: QuadratureRule | None = None, q: int = 1):
        self.h, self.null, self.L, self.p, self.composite = float(h), null, L, p, composite
        self.q = q
        self.rule = rule or sphere_rule_for(q, self.h)
        self.weight = weight
        self._w = (np.ones(len(self.rule)) if weight is None
                   else np.asarray(weight(self.rule.nodes), dtype=float))
        self._design_cache: tuple | None = None

    def fit_null(self, data: DirLinSample):
        if not self.composite:
            return self.null
        return _fit_or_raise(type(self.null).fit, data).model

    def design(self, directions: np.ndarray):
        """Smoother weights and KDE at the rule nodes; cached per direction set."""
        cache = self._design_cache
        if cache is not None and cache[0] is directions:
            return cache[1], cache[2]
        W = locpoly_weights(directions, self.h, self.L, self.p, self.rule.nodes)
        kde = _kde_nodes(directions, self.rule.nodes, self.h, self.L)
        self._design_cache = (directions, W, kde)
        return W, kde

    def statistic(self, data: DirLinSample, model=None) -> float:
        model = model if model is not None else self.fit_null(data)
        resid = data.responses - model.mean(data.directions)
        if self.p == 0 and data.n > DATA_CHUNK:
            return _t6_local_constant_chunked(data.directions, resid, self.h, self.L, self.rule, self._w)
        W, kde = self.design(data.directions)
        return _t6_from_weights(W, kde, resid, self.rule, self._w)

    def asymptotics(self, n: int, model) -> Asymptotics:
        s2w = model.variance(self.rule.nodes) * self._w
        return t6_asymptotics(n, self.h, self.q, smoothing_constants(self.L, self.q),
                              self.rule.integrate(s2w), self.rule.integrate(s2w**2))

    def run(self, data: DirLinSample) -> TestOutcome:
        model = self.fit_null(data)
        stat = self.statistic(data, model)
        meta = {"test": self.name, "n": data.n, "h": self.h, "p": self.p,
                "kernel": self.L.label, "mode": "composite" if self.composite else "simple",
                "theta": model.theta}
        try:
            asym = self.asymptotics(data.n, model)
        except DegenerateScaleError:
            asym = None
        return TestOutcome.from_asymptotics(stat, asym, meta)
