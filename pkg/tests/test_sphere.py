import math

import numpy as np
import pytest
from scipy import stats

from sphere_sgd.sphere import (
    UnitVector,
    basis_vector,
    correlation,
    geodesic_point,
    householder_to,
    normalize,
    sample_upper_half_sphere,
    tangent_project,
)


def test_unit_vector_normalizes():
    v = UnitVector([3.0, 4.0])
    assert v.dim == 2
    assert np.allclose(v.coords, [0.6, 0.8])
    assert abs(np.linalg.norm(v.coords) - 1.0) < 1e-12


def test_unit_vector_rejects_bad_input():
    with pytest.raises(ValueError):
        UnitVector([1.0])
    with pytest.raises(ValueError):
        UnitVector([0.0, 0.0, 0.0])


def test_coords_read_only():
    v = UnitVector([1.0, 2.0, 2.0])
    with pytest.raises(ValueError):
        v.coords[0] = 5.0


def test_correlation_examples():
    e1, e2 = basis_vector(3, 0), basis_vector(3, 1)
    assert correlation(e1, e1) == 1.0
    assert correlation(e2, e1) == 0.0
    assert correlation(UnitVector([0.6, 0.8]), UnitVector([1.0, 0.0])) == pytest.approx(0.6, abs=1e-15)


def test_correlation_dimension_mismatch():
    with pytest.raises(ValueError):
        correlation(basis_vector(3), basis_vector(4))


def test_tangent_project_examples():
    x = UnitVector([1.0, 0.0])
    assert np.allclose(tangent_project(x, [2.0, 3.0]), [0.0, 3.0])
    assert np.allclose(tangent_project(x, x.coords), 0.0)
    assert np.allclose(tangent_project(x, [0.0, 5.0]), [0.0, 5.0])
    with pytest.raises(ValueError):
        tangent_project(x, [1.0, 2.0, 3.0])


def test_upper_half_sign(rng):
    theta = normalize(rng.standard_normal(20))
    for _ in range(200):
        x = sample_upper_half_sphere(rng, 20, theta)
        assert correlation(x, theta) >= 0.0


def test_upper_half_scaled_latitude_is_half_normal(rng):
    n, draws = 1000, 10_000
    theta = basis_vector(n)
    m = np.array([sample_upper_half_sphere(rng, n, theta).coords[0] for _ in range(draws)])
    u = math.sqrt(n) * m
    se = u.std(ddof=1) / math.sqrt(draws)
    assert abs(u.mean() - math.sqrt(2.0 / math.pi)) < 3 * se
    assert stats.kstest(u, stats.halfnorm.cdf).statistic < 0.02


def test_upper_half_angle_uniform_in_2d(rng):
    theta = basis_vector(2)
    ang = []
    for _ in range(4000):
        x = sample_upper_half_sphere(rng, 2, theta).coords
        ang.append(math.atan2(x[1], x[0]))
    ang = np.array(ang)
    assert ang.min() >= -math.pi / 2 and ang.max() <= math.pi / 2
    assert stats.kstest(ang, stats.uniform(-math.pi / 2, math.pi).cdf).pvalue > 1e-3


def test_geodesic_point_latitude(rng):
    theta = normalize(rng.standard_normal(7))
    for m in (-1.0, -0.3, 0.0, 0.5, 1.0):
        x = geodesic_point(theta, m, rng=rng)
        assert correlation(x, theta) == pytest.approx(m, abs=1e-12)


def test_householder_maps_e1_to_theta(rng):
    theta = normalize(rng.standard_normal(6)).coords
    u, scale = householder_to(theta)
    e1 = np.eye(6)[0]
    assert np.allclose(e1 - scale * u * (u @ e1), theta)
    assert householder_to(np.eye(6)[0]) is None
