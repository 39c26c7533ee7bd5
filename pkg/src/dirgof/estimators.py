"""Kernel density and local polynomial regression estimators on the sphere."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .kernels import DirectionalKernel, LinearKernel, c_hq
from .sphere import as_directions, tangent_coordinates

__all__ = [
    "RankDeficiencyError",
    "DirSample",
    "DirLinSample",
    "DirDirSample",
    "Bandwidths",
    "directional_kernel_matrix",
    "linear_kernel_matrix",
    "kde_dir",
    "kde_linear",
    "kde_dirlin",
    "kde_dirlin_grid",
    "kde_dirdir",
    "kde_dirdir_grid",
    "locpoly_weights",
    "locpoly_regress",
    "check_bandwidths",
]

NODE_BLOCK = 4096
SINGULAR_RTOL = 1e-10


class RankDeficiencyError(np.linalg.LinAlgError):
    """The local polynomial design is singular at an evaluation point."""

    def __init__(self, point, message="singular local design"):
        self.point = np.asarray(point)
        super().__init__(f"{message} at x = {np.array2string(self.point, precision=6)}")


@dataclass(frozen=True)
class DirSample:
    points: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", as_directions(self.points))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def q(self) -> int:
        return self.points.shape[1] - 1


@dataclass(frozen=True)
class DirLinSample:
    directions: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        x = as_directions(self.directions)
        y = np.asarray(self.responses, dtype=float).ravel()
        if y.size != x.shape[0]:
            raise ValueError(f"{x.shape[0]} directions but {y.size} responses")
        object.__setattr__(self, "directions", x)
        object.__setattr__(self, "responses", y)

    def with_responses(self, responses) -> DirLinSample:
        """Same directions (the identical array, already validated), new responses."""
        y = np.asarray(responses, dtype=float).ravel()
        if y.size != self.n:
            raise ValueError(f"{self.n} directions but {y.size} responses")
        new = object.__new__(DirLinSample)
        object.__setattr__(new, "directions", self.directions)
        object.__setattr__(new, "responses", y)
        return new

    @property
    def n(self) -> int:
        return self.responses.size

    @property
    def q(self) -> int:
        return self.directions.shape[1] - 1


@dataclass(frozen=True)
class DirDirSample:
    first: np.ndarray
    second: np.ndarray

    def __post_init__(self):
        a, b = as_directions(self.first), as_directions(self.second)
        if a.shape[0] != b.shape[0]:
            raise ValueError(f"components have lengths {a.shape[0]} and {b.shape[0]}")
        object.__setattr__(self, "first", a)
        object.__setattr__(self, "second", b)

    @property
    def n(self) -> int:
        return self.first.shape[0]

    @property
    def q1(self) -> int:
        return self.first.shape[1] - 1

    @property
    def q2(self) -> int:
        return self.second.shape[1] - 1


@dataclass(frozen=True)
class Bandwidths:
    h: float
    g: float | None = None

    def __post_init__(self):
        for name in ("h", "g"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"bandwidth {name} must be positive, got {v}")


def _points(sample) -> np.ndarray:
    if isinstance(sample, DirSample):
        return sample.points
    return np.asarray(sample, dtype=float)


def _check_dim(points: np.ndarray, x: np.ndarray):
    if points.shape[1] != x.shape[-1]:
        raise ValueError(
            f"dimension mismatch: sample lives in R^{points.shape[1]}, "
            f"evaluation point in R^{x.shape[-1]}"
        )


def directional_kernel_matrix(points, nodes, h: float, L: DirectionalKernel) -> np.ndarray:
    """``L_h(x_j, X_i) = c_{h,q}(L) L((1 - x_j'X_i) / h^2)`` as an ``(m, n)`` array."""
    points = _points(points)
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    _check_dim(points, nodes)
    q = points.shape[1] - 1
    c = c_hq(L, h, q)
    out = np.empty((nodes.shape[0], points.shape[0]))
    for start in range(0, nodes.shape[0], NODE_BLOCK):
        blk = slice(start, start + NODE_BLOCK)
        r = np.maximum(1.0 - nodes[blk] @ points.T, 0.0) / (h * h)
        out[blk] = c * L(r)
    return out


def linear_kernel_matrix(values, nodes, g: float, K: LinearKernel) -> np.ndarray:
    """``K((y_j - Y_i) / g) / g`` as an ``(m, n)`` array."""
    values = np.asarray(values, dtype=float).ravel()
    nodes = np.asarray(nodes, dtype=float).ravel()
    return K((nodes[:, None] - values[None, :]) / g) / g


def kde_dir(sample, h: float, L: DirectionalKernel, x):
    """Directional KDE ``(1/n) sum_i L_h(x, X_i)``.

    Returns a scalar for a single evaluation point and an array otherwise.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    vals = directional_kernel_matrix(sample, np.atleast_2d(x), h, L).mean(axis=1)
    return float(vals[0]) if single else vals


def kde_linear(values, g: float, K: LinearKernel, y):
    y = np.asarray(y, dtype=float)
    vals = linear_kernel_matrix(values, np.atleast_1d(y), g, K).mean(axis=1)
    return float(vals[0]) if y.ndim == 0 else vals


def kde_dirlin(sample: DirLinSample, h, g, L, K, x, y):
    """Directional-linear KDE at paired points ``(x_k, y_k)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    single = x.ndim == 1
    A = directional_kernel_matrix(sample.directions, np.atleast_2d(x), h, L)
    B = linear_kernel_matrix(sample.responses, np.atleast_1d(y), g, K)
    vals = (A * B).mean(axis=1)
    return float(vals[0]) if single else vals


def kde_dirlin_grid(sample: DirLinSample, h, g, L, K, x_nodes, y_nodes) -> np.ndarray:
    """Directional-linear KDE on the grid ``x_nodes x y_nodes``."""
    A = directional_kernel_matrix(sample.directions, x_nodes, h, L)
    B = linear_kernel_matrix(sample.responses, y_nodes, g, K)
    return A @ B.T / sample.n


def kde_dirdir(sample: DirDirSample, h1, h2, L, x1, x2):
    """Directional-directional KDE at paired points ``(x1_k, x2_k)``."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    single = x1.ndim == 1
    A = directional_kernel_matrix(sample.first, np.atleast_2d(x1), h1, L)
    B = directional_kernel_matrix(sample.second, np.atleast_2d(x2), h2, L)
    vals = (A * B).mean(axis=1)
    return float(vals[0]) if single else vals


def kde_dirdir_grid(sample: DirDirSample, h1, h2, L, x1_nodes, x2_nodes) -> np.ndarray:
    A = directional_kernel_matrix(sample.first, x1_nodes, h1, L)
    B = directional_kernel_matrix(sample.second, x2_nodes, h2, L)
    return A @ B.T / sample.n


def _local_log_weights(points, nodes, h, L):
    r = np.maximum(1.0 - nodes @ points.T, 0.0) / (h * h)
    logw = L.log(r)
    top = logw.max(axis=1, keepdims=True)
    empty = ~np.isfinite(top[:, 0])
    if empty.any():
        raise RankDeficiencyError(nodes[np.flatnonzero(empty)[0]], "no sample point within kernel support")
    # rescaling by the row maximum leaves the weights' ratios intact
    return np.exp(logw - top)


def locpoly_weights(directions, h: float, L: DirectionalKernel, p: int, x) -> np.ndarray:
    """Local constant (p=0) or local linear (p=1) weights ``W^p_{n,i}(x)``.

    For ``p=1`` the design rows are ``(1, (X_i - x)' B_x)`` and the normal
    equations are solved through an SVD; a smallest singular value below
    ``1e-10`` times the largest raises :class:`RankDeficiencyError`.

    Returns an ``(n,)`` array for one point or ``(m, n)`` for ``m`` points.
    """
    if p not in (0, 1):
        raise ValueError("p must be 0 or 1")
    points = _points(directions)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    nodes = np.atleast_2d(x)
    _check_dim(points, nodes)
    n = points.shape[0]
    out = np.empty((nodes.shape[0], n))
    block = max(1, min(NODE_BLOCK, 4_000_000 // (n * points.shape[1])))
    for start in range(0, nodes.shape[0], block):
        blk = slice(start, start + block)
        w = _local_log_weights(points, nodes[blk], h, L)
        if p == 0:
            out[blk] = w / w.sum(axis=1, keepdims=True)
            continue
        t = tangent_coordinates(points, nodes[blk])  # (m, n, q)
        Z = np.concatenate([np.ones(t.shape[:2] + (1,)), t], axis=2)
        M = np.einsum("mni,mn,mnj->mij", Z, w, Z)
        U, s, Vt = np.linalg.svd(M)
        bad = s[:, -1] < SINGULAR_RTOL * s[:, 0]
        if bad.any():
            raise RankDeficiencyError(nodes[blk][np.flatnonzero(bad)[0]])
        # a = M^{-1} e_1, then W_i = w_i z_i'a
        a = np.einsum("mji,mj,mj->mi", Vt, 1.0 / s, U[:, 0, :])
        out[blk] = w * np.einsum("mni,mi->mn", Z, a)
    return out[0] if single else out


def locpoly_regress(sample: DirLinSample, h: float, L: DirectionalKernel, p: int, x):
    """Local polynomial estimate ``sum_i W^p_{n,i}(x) Y_i``."""
    W = locpoly_weights(sample.directions, h, L, p, x)
    return W @ sample.responses if W.ndim == 2 else float(W @ sample.responses)


def check_bandwidths(n: int, h: float, q: int, g: float | None = None) -> list[str]:
    """Warn when bandwidths look inconsistent with the usual rate conditions.

    Never raises: emits ``RuntimeWarning`` for ``n h^q < 1`` and, when ``g``
    is given, for ``h^q / g`` outside ``[0.1, 10]``. Returns the messages.
    """
    msgs = []
    if n * h**q < 1.0:
        msgs.append(f"n h^q = {n * h**q:.3g} < 1: bandwidth too small for the sample size")
    if g is not None and not 0.1 <= h**q / g <= 10.0:
        msgs.append(f"h^q / g = {h**q / g:.3g} outside [0.1, 10]")
    for m in msgs:
        warnings.warn(m, RuntimeWarning, stacklevel=2)
    return msgs
