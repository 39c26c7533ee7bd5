"""Brute-force evaluations of the statistics on the circle, in angle coordinates.

Every integral is a plain Riemann/trapezoid sum on a dense uniform grid, every
normalizing constant is computed the same way, and estimators are written
out from their definitions. Nothing here imports the package under test.
"""

import numpy as np

N_THETA = 2048
THETA = 2 * np.pi * np.arange(N_THETA) / N_THETA
D_THETA = 2 * np.pi / N_THETA
Y = np.linspace(-14.0, 14.0, 5601)
D_Y = Y[1] - Y[0]
W_Y = np.full(Y.size, D_Y)
W_Y[[0, -1]] *= 0.5


def vm_profile(a, b, h):
    """``exp(-(1 - cos(a - b)) / h^2)`` for angle arrays ``a`` (rows) and ``b`` (columns)."""
    return np.exp(-(1 - np.cos(np.subtract.outer(a, b))) / h**2)


def vm_constant(h):
    return 1.0 / (np.sum(np.exp(-(1 - np.cos(THETA)) / h**2)) * D_THETA)


def gauss(u):
    return np.exp(-0.5 * u * u) / np.sqrt(2 * np.pi)


def kde_circle(angles, h):
    return vm_constant(h) * vm_profile(THETA, angles, h).mean(axis=1)


def kde_line(y, g):
    return gauss(np.subtract.outer(Y, y) / g).mean(axis=1) / g


def vmf_circle(mu_angle, kappa):
    shape = np.exp(kappa * np.cos(THETA - mu_angle))
    return shape / (shape.sum() * D_THETA)


def normal_line(m, s):
    return gauss((Y - m) / s) / s


def smooth_circle(f_vals, h):
    return vm_constant(h) * vm_profile(THETA, THETA, h) @ f_vals * D_THETA


def smooth_line(f_vals, g):
    return (gauss(np.subtract.outer(Y, Y) / g) / g) @ (f_vals * W_Y)


def t1(angles, h, f_vals):
    return np.sum((kde_circle(angles, h) - smooth_circle(f_vals, h)) ** 2) * D_THETA


def _joint_circle_line(angles, y, h, g):
    A = vm_constant(h) * vm_profile(THETA, angles, h)
    B = gauss(np.subtract.outer(Y, y) / g) / g
    return A @ B.T / len(angles)


def _int2(grid, w2):
    return float(np.sum(grid * w2[None, :]) * D_THETA)


def t2(angles, y, h, g, fx_vals, fy_vals):
    target = np.outer(smooth_circle(fx_vals, h), smooth_line(fy_vals, g))
    return _int2((_joint_circle_line(angles, y, h, g) - target) ** 2, W_Y)


def t3(angles, y, h, g):
    diff = _joint_circle_line(angles, y, h, g) - np.outer(kde_circle(angles, h), kde_line(y, g))
    return _int2(diff**2, W_Y)


def _joint_torus(a1, a2, h1, h2):
    A = vm_constant(h1) * vm_profile(THETA, a1, h1)
    B = vm_constant(h2) * vm_profile(THETA, a2, h2)
    return A @ B.T / len(a1)


def t4(a1, a2, h1, h2, f1_vals, f2_vals):
    target = np.outer(smooth_circle(f1_vals, h1), smooth_circle(f2_vals, h2))
    return _int2((_joint_torus(a1, a2, h1, h2) - target) ** 2, np.full(N_THETA, D_THETA))


def t5(a1, a2, h1, h2):
    diff = _joint_torus(a1, a2, h1, h2) - np.outer(kde_circle(a1, h1), kde_circle(a2, h2))
    return _int2(diff**2, np.full(N_THETA, D_THETA))


def t6(angles, y, h, fitted, p=0, weight=None):
    """``fitted`` holds ``m_theta(X_i)``; ``weight`` is ``w`` on the grid."""
    resid = np.asarray(y) - np.asarray(fitted)
    K = vm_profile(THETA, angles, h)
    if p == 0:
        W = K / K.sum(axis=1, keepdims=True)
    else:
        W = np.empty_like(K)
        for k, th in enumerate(THETA):
            t = np.sin(angles - th)  # tangent coordinate of X_i at x
            Z = np.column_stack([np.ones_like(t), t])
            M = Z.T @ (K[k][:, None] * Z)
            a = np.linalg.solve(M, [1.0, 0.0])
            W[k] = K[k] * (Z @ a)
    w = np.ones(N_THETA) if weight is None else weight
    return float(np.sum((W @ resid) ** 2 * kde_circle(angles, h) * w) * D_THETA)
