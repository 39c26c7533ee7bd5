"""Geometry of the unit sphere S^q embedded in R^(q+1).

Points are stored in ambient coordinates. Samples are ``(n, q+1)`` arrays;
single points may be wrapped in :class:`UnitVector` when validation matters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln, roots_jacobi

__all__ = [
    "UnitVector",
    "TangentBasis",
    "QuadratureRule",
    "ProductRule",
    "RngStream",
    "surface_area",
    "as_directions",
    "tangent_basis",
    "tangent_coordinates",
    "sphere_quadrature",
    "mc_sphere_quadrature",
    "line_quadrature",
    "sample_uniform_sphere",
    "angles_to_circle",
    "circle_to_angles",
]

NORM_TOL = 1e-6


def surface_area(q: int) -> float:
    """Surface area of S^q, ``2 pi^((q+1)/2) / Gamma((q+1)/2)``.

    ``q = 0`` gives 2, the counting measure of {-1, 1}.
    """
    if q < 0:
        raise ValueError(f"q must be >= 0, got {q}")
    return float(np.exp(np.log(2.0) + 0.5 * (q + 1) * np.log(np.pi) - gammaln(0.5 * (q + 1))))


def as_directions(points, q: int | None = None, tol: float = NORM_TOL) -> np.ndarray:
    """Validate and renormalize an array of directions.

    Rows with norm in ``[1 - tol, 1 + tol]`` are rescaled to unit norm,
    anything else raises ``ValueError``. A 1-d input is treated as one point.
    """
    x = np.array(points, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValueError(f"directions must have shape (n, q+1) with q >= 1, got {x.shape}")
    if q is not None and x.shape[1] != q + 1:
        raise ValueError(f"expected {q + 1} coordinates for S^{q}, got {x.shape[1]}")
    norms = np.linalg.norm(x, axis=1)
    bad = np.flatnonzero(np.abs(norms - 1.0) > tol)
    if bad.size:
        i = int(bad[0])
        raise ValueError(f"row {i} has norm {norms[i]:.8g}; not a unit vector")
    # rows already unit to within a few ulps are kept bit-for-bit (idempotence)
    norms[np.abs(norms - 1.0) <= 8 * np.finfo(float).eps] = 1.0
    return x / norms[:, None]


@dataclass(frozen=True)
class UnitVector:
    """A point on S^q."""

    coords: np.ndarray

    def __post_init__(self):
        x = as_directions(self.coords)[0]
        x.setflags(write=False)
        object.__setattr__(self, "coords", x)

    @property
    def q(self) -> int:
        return self.coords.size - 1

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)


@dataclass(frozen=True)
class TangentBasis:
    base_point: np.ndarray
    columns: np.ndarray  # (q+1, q), orthonormal and orthogonal to base_point


def _householder_vector(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # v = x + s e1 with s = sign(x0); the reflection I - 2vv'/v'v sends e1 to -s x
    s = np.where(x[..., 0] >= 0, 1.0, -1.0)
    v = x.copy()
    v[..., 0] += s
    return v, s


def tangent_basis(x) -> TangentBasis:
    """Orthonormal basis ``B_x`` of the tangent space at ``x``.

    Built from the Householder reflection that maps ``e_1`` to ``+-x``; the
    remaining columns of the reflection span the orthogonal complement of ``x``.
    """
    x = as_directions(x)[0]
    v, _ = _householder_vector(x)
    H = np.eye(x.size) - 2.0 * np.outer(v, v) / (v @ v)
    return TangentBasis(base_point=x, columns=H[:, 1:])


def tangent_coordinates(points: np.ndarray, base: np.ndarray) -> np.ndarray:
    """Coordinates ``(X_i - x)' B_x`` for every base point ``x``.

    Parameters
    ----------
    points : (n, q+1) array
    base : (m, q+1) array of base points

    Returns
    -------
    (m, n, q) array
    """
    v, _ = _householder_vector(np.asarray(base, dtype=float))
    vv = np.einsum("mj,mj->m", v, v)
    proj = points @ v.T  # (n, m)
    # X'(I - 2vv'/v'v)[:, 1:] ; x'B_x = 0 so subtracting x changes nothing
    return points[None, :, 1:] - 2.0 * (proj.T / vv[:, None])[:, :, None] * v[:, None, 1:]


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and nonnegative weights approximating an integral.

    ``domain`` is ``"sphere"`` (nodes are ``(N, q+1)`` unit vectors) or
    ``"line"`` (nodes are a 1-d array on ``[lower, upper]``).
    """

    domain: str
    nodes: np.ndarray
    weights: np.ndarray
    q: int | None = None
    lower: float | None = None
    upper: float | None = None
    exact: bool = True  # False for Monte Carlo rules

    def __len__(self) -> int:
        return len(self.weights)

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def integrate_function(self, f: Callable) -> float:
        return self.integrate(f(self.nodes))


@dataclass(frozen=True)
class ProductRule:
    """Tensor product of two rules; nodes are all pairs, weights multiply."""

    first: QuadratureRule
    second: QuadratureRule

    @property
    def domain(self) -> str:
        return "product"

    def __len__(self) -> int:
        return len(self.first) * len(self.second)

    @property
    def weights(self) -> np.ndarray:
        return np.outer(self.first.weights, self.second.weights)

    def integrate(self, values) -> float:
        """Integrate a ``(len(first), len(second))`` grid of values."""
        values = np.asarray(values)
        return float(self.first.weights @ values @ self.second.weights)

    def integrate_function(self, f: Callable) -> float:
        return self.integrate(f(self.first.nodes, self.second.nodes))


def _circle_rule(resolution: int) -> QuadratureRule:
    theta = 2.0 * np.pi * np.arange(resolution) / resolution
    nodes = np.column_stack([np.cos(theta), np.sin(theta)])
    weights = np.full(resolution, 2.0 * np.pi / resolution)
    return QuadratureRule("sphere", nodes, weights, q=1)


def sphere_quadrature(q: int, resolution: int = 64) -> QuadratureRule:
    """Deterministic product rule on S^q for ``q`` in {1, 2, 3}.

    q=1 is the periodic trapezoid with ``resolution`` equispaced angles. For
    q >= 2 the first coordinate ``t`` gets Gauss-Jacobi nodes for the weight
    ``(1 - t^2)^((q-2)/2)`` and the remaining coordinates live on a scaled
    S^(q-1) rule. q=2 uses ``resolution`` nodes in ``t`` times ``2 *
    resolution`` azimuths; q=3 nests that once more.
    """
    if resolution < 8:
        raise ValueError("resolution must be >= 8")
    if q == 1:
        return _circle_rule(resolution)
    if q not in (2, 3):
        raise ValueError(
            f"no deterministic rule for q={q}; use mc_sphere_quadrature for q > 3"
        )
    a = 0.5 * (q - 2)
    t, wt = roots_jacobi(resolution, a, a)
    inner = _circle_rule(2 * resolution) if q == 2 else sphere_quadrature(q - 1, resolution)
    r = np.sqrt(1.0 - t**2)
    nodes = np.concatenate(
        [
            np.repeat(t, len(inner))[:, None],
            (r[:, None, None] * inner.nodes[None, :, :]).reshape(-1, q),
        ],
        axis=1,
    )
    weights = np.outer(wt, inner.weights).ravel()
    return QuadratureRule("sphere", nodes, weights, q=q)


def mc_sphere_quadrature(q: int, n_nodes: int, rng: RngStream) -> QuadratureRule:
    """Monte Carlo rule: i.i.d. uniform nodes, equal weights ``omega_q / n``."""
    if n_nodes < 100:
        raise ValueError("n_nodes must be >= 100")
    nodes = sample_uniform_sphere(q, n_nodes, rng)
    weights = np.full(n_nodes, surface_area(q) / n_nodes)
    return QuadratureRule("sphere", nodes, weights, q=q, exact=False)


def line_quadrature(lower: float, upper: float, n_nodes: int = 256) -> QuadratureRule:
    """Gauss-Legendre rule on ``[lower, upper]``."""
    if not upper > lower:
        raise ValueError("upper must exceed lower")
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    half = 0.5 * (upper - lower)
    return QuadratureRule(
        "line", lower + half * (x + 1.0), half * w, lower=float(lower), upper=float(upper)
    )


def sample_uniform_sphere(q: int, n: int, rng: RngStream | np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. uniform points on S^q (normalized Gaussian vectors)."""
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    z = gen.standard_normal((n, q + 1))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def angles_to_circle(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    return np.column_stack([np.cos(theta), np.sin(theta)])


def circle_to_angles(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.arctan2(x[:, 1], x[:, 0])


@dataclass(frozen=True)
class RngStream:
    """Reproducible, splittable random stream.

    Backed by the counter-based Philox generator. Children are keyed by
    appending integers to the spawn key, so ``RngStream(s).child(i)`` and
    ``RngStream(s).child(j)`` are independent for ``i != j`` and each is
    reproducible on its own regardless of evaluation order.
    """

    seed: int
    key: tuple[int, ...] = field(default=())

    def child(self, stream: int) -> RngStream:
        return RngStream(self.seed, self.key + (int(stream),))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.key)
        return np.random.Generator(np.random.Philox(ss))
