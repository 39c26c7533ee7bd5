import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import iv

from dirgof.sphere import (
    ProductRule,
    RngStream,
    UnitVector,
    angles_to_circle,
    as_directions,
    circle_to_angles,
    line_quadrature,
    mc_sphere_quadrature,
    sample_uniform_sphere,
    sphere_quadrature,
    surface_area,
    tangent_basis,
    tangent_coordinates,
)


@pytest.mark.parametrize("q, expected", [(1, 2 * math.pi), (2, 4 * math.pi), (3, 2 * math.pi**2), (0, 2.0)])
def test_surface_area(q, expected):
    assert surface_area(q) == pytest.approx(expected, rel=1e-14)


def test_as_directions_renormalizes_within_tolerance():
    x = as_directions([[1 + 5e-7, 0.0], [0.0, 1.0]])
    assert np.allclose(np.linalg.norm(x, axis=1), 1.0, atol=1e-12)


def test_as_directions_rejects_far_rows():
    with pytest.raises(ValueError, match="row 1"):
        as_directions([[1.0, 0.0], [0.0, 1.1]])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_as_directions_idempotent(seed, q):
    x = np.random.default_rng(seed).standard_normal((20, q + 1))
    once = as_directions(x / np.linalg.norm(x, axis=1, keepdims=True))
    assert np.array_equal(as_directions(once), once)
    assert np.max(np.abs(np.linalg.norm(once, axis=1) - 1)) < 1e-12


def test_unit_vector():
    u = UnitVector(np.array([0.0, 2e-7 + 1.0]))
    assert np.linalg.norm(np.asarray(u)) == pytest.approx(1.0, abs=1e-12)
    assert u.q == 1


def test_tangent_basis_axis_cases():
    B = tangent_basis(np.array([0.0, 0.0, 1.0])).columns
    assert np.allclose(B.T @ B, np.eye(2), atol=1e-12)
    assert np.allclose(B @ B.T, np.diag([1.0, 1.0, 0.0]), atol=1e-12)
    B1 = tangent_basis(np.array([1.0, 0.0])).columns
    assert B1.shape == (2, 1)
    assert abs(B1[0, 0]) < 1e-15 and abs(abs(B1[1, 0]) - 1.0) < 1e-15


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_tangent_basis_identities(q, seed):
    gen = np.random.default_rng(seed)
    x = gen.standard_normal(q + 1)
    x /= np.linalg.norm(x)
    B = tangent_basis(x).columns
    assert np.max(np.abs(B.T @ B - np.eye(q))) < 1e-10
    assert np.max(np.abs(B @ B.T - (np.eye(q + 1) - np.outer(x, x)))) < 1e-10


def test_tangent_coordinates_match_basis():
    gen = np.random.default_rng(3)
    X = gen.standard_normal((6, 3))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    base = gen.standard_normal((2, 3))
    base /= np.linalg.norm(base, axis=1, keepdims=True)
    t = tangent_coordinates(X, base)
    for k in range(2):
        B = tangent_basis(base[k]).columns
        assert np.allclose(t[k], (X - base[k]) @ B, atol=1e-14)


def test_circle_rule_examples():
    r = sphere_quadrature(1, 256)
    assert abs(r.weights.sum() - 2 * math.pi) < 1e-12
    r = sphere_quadrature(1, 128)
    assert abs(r.integrate(r.nodes[:, 0] ** 2) - math.pi) < 1e-12


def test_sphere_rule_second_moment():
    r = sphere_quadrature(2, 64)
    assert abs(r.integrate(r.nodes[:, 2] ** 2) - surface_area(2) / 3) < 1e-8
    assert abs(r.weights.sum() - surface_area(2)) < 1e-10


def test_three_sphere_rule():
    r = sphere_quadrature(3, 16)
    assert abs(r.weights.sum() - surface_area(3)) < 1e-10
    assert abs(r.integrate(r.nodes[:, 0] ** 2) - surface_area(3) / 4) < 1e-8


def test_sphere_rule_rejects_high_dimension():
    with pytest.raises(ValueError):
        sphere_quadrature(4, 16)


@pytest.mark.parametrize("kappa", [0.0, 0.5, 1.0, 4.0, 10.0])
def test_trapezoid_is_spectral(kappa):
    r = sphere_quadrature(1, 512)
    assert abs(r.integrate(np.exp(kappa * r.nodes[:, 0])) - 2 * math.pi * iv(0, kappa)) < 1e-10 * iv(0, kappa)


def test_mc_rule(rng):
    r4 = mc_sphere_quadrature(4, 100_000, rng)
    assert r4.weights.sum() == pytest.approx(surface_area(4), rel=1e-12)
    r2 = mc_sphere_quadrature(2, 100_000, rng.child(1))
    vals = r2.nodes[:, 2] ** 2
    est = r2.integrate(vals)
    se = surface_area(2) * vals.std() / math.sqrt(vals.size)
    assert abs(est - surface_area(2) / 3) < 3 * se
    again = mc_sphere_quadrature(4, 100_000, rng)
    assert np.array_equal(again.nodes, r4.nodes)


def test_mc_rule_error_rate():
    # RMS error over repetitions roughly halves when n quadruples
    def rms(n):
        errs = []
        for k in range(24):
            r = mc_sphere_quadrature(2, n, RngStream(11, (k,)))
            errs.append(r.integrate(r.nodes[:, 0] ** 2) - surface_area(2) / 3)
        return math.sqrt(np.mean(np.square(errs)))

    ratio = rms(1000) / rms(4000)
    assert 1.4 < ratio < 2.9


def test_line_rule():
    r = line_quadrature(-2.0, 3.0, 64)
    assert abs(r.weights.sum() - 5.0) < 1e-10
    assert r.integrate(r.nodes**3) == pytest.approx((3.0**4 - 16.0) / 4, rel=1e-12)


def test_product_rule():
    a, b = sphere_quadrature(1, 16), line_quadrature(0, 1, 8)
    p = ProductRule(a, b)
    assert len(p) == 128
    assert np.allclose(p.weights, np.outer(a.weights, b.weights))
    assert p.integrate(np.ones((16, 8))) == pytest.approx(2 * math.pi, rel=1e-12)


def test_uniform_sampling(rng):
    x = sample_uniform_sphere(1, 100_000, rng)
    assert np.max(np.abs(np.linalg.norm(x, axis=1) - 1)) < 1e-12
    assert np.linalg.norm(x.mean(axis=0)) < 0.01
    assert np.array_equal(x, sample_uniform_sphere(1, 100_000, rng))
    y = sample_uniform_sphere(3, 1000, rng)
    assert np.max(np.abs(np.linalg.norm(y, axis=1) - 1)) < 1e-12


def test_rng_streams_independent_and_reproducible():
    root = RngStream(5)
    a = root.child(0).generator().random(10_000)
    b = root.child(1).generator().random(10_000)
    assert np.array_equal(a, RngStream(5).child(0).generator().random(10_000))
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.05
    assert not np.array_equal(a, b)


def test_angle_round_trip():
    th = np.linspace(-3, 3, 13)
    assert np.allclose(circle_to_angles(angles_to_circle(th)), th)
