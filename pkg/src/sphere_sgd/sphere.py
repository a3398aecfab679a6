"""Geometry of the unit sphere S^{N-1}.

Points are plain float64 arrays wrapped in :class:`UnitVector` at API
boundaries. The hot loop in :mod:`sphere_sgd.dynamics` works on raw arrays
and calls :func:`normalize_array` directly.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "UnitVector",
    "as_array",
    "basis_vector",
    "correlation",
    "geodesic_point",
    "householder_to",
    "normalize",
    "normalize_array",
    "sample_uniform_sphere",
    "sample_upper_half_sphere",
    "tangent_project",
]

_TINY = 1e-300


class UnitVector:
    """A point on S^{N-1}.

    The constructor renormalizes its input, so ``UnitVector(v)`` is the
    same as ``normalize(v)``. Coordinates are stored read-only.
    """

    __slots__ = ("_coords",)

    def __init__(self, coords):
        arr = normalize_array(np.array(coords, dtype=np.float64, copy=True))
        if arr.ndim != 1 or arr.size < 2:
            raise ValueError(f"unit vector needs dim >= 2, got shape {arr.shape}")
        arr.setflags(write=False)
        self._coords = arr

    @classmethod
    def _trusted(cls, arr: np.ndarray) -> "UnitVector":
        # skip renormalization for arrays that are already unit length
        obj = cls.__new__(cls)
        arr = np.array(arr, dtype=np.float64, copy=True)
        arr.setflags(write=False)
        obj._coords = arr
        return obj

    @property
    def coords(self) -> np.ndarray:
        return self._coords

    @property
    def dim(self) -> int:
        return self._coords.size

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._coords
        return self._coords.astype(dtype)

    def __len__(self) -> int:
        return self._coords.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, UnitVector):
            return NotImplemented
        return np.array_equal(self._coords, other._coords)

    def __hash__(self):
        return hash(self._coords.tobytes())

    def __repr__(self) -> str:
        head = np.array2string(self._coords[:4], precision=4)
        more = ", ..." if self.dim > 4 else ""
        return f"UnitVector(dim={self.dim}, coords={head}{more})"


def as_array(x) -> np.ndarray:
    """Coordinates of a UnitVector or array-like as a float64 array."""
    if isinstance(x, UnitVector):
        return x.coords
    return np.asarray(x, dtype=np.float64)


def normalize_array(v: np.ndarray) -> np.ndarray:
    """Return ``v / |v|``; raises on (numerically) zero vectors."""
    norm = math.sqrt(float(np.dot(v, v)))
    if not norm > _TINY or not math.isfinite(norm):
        raise ValueError(f"cannot normalize vector with norm {norm!r}")
    return v / norm


def normalize(v) -> UnitVector:
    return UnitVector(v)


def basis_vector(n: int, i: int = 0) -> UnitVector:
    e = np.zeros(n)
    e[i] = 1.0
    return UnitVector._trusted(e)


def _check_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def correlation(x, theta) -> float:
    """Latitude m = x . theta (no clamping)."""
    xa, ta = as_array(x), as_array(theta)
    _check_dims(xa, ta)
    return float(np.dot(xa, ta))


def tangent_project(x, g) -> np.ndarray:
    """Project ``g`` onto the tangent space at ``x``: g - (g.x) x."""
    xa, ga = as_array(x), np.asarray(g, dtype=np.float64)
    _check_dims(xa, ga)
    return ga - np.dot(ga, xa) * xa


def sample_uniform_sphere(rng: np.random.Generator, n: int) -> UnitVector:
    if n < 2:
        raise ValueError("n must be >= 2")
    return UnitVector._trusted(normalize_array(rng.standard_normal(n)))


def sample_upper_half_sphere(rng: np.random.Generator, n: int, theta) -> UnitVector:
    """Uniform point on S^{n-1} conditioned on x . theta >= 0.

    A Gaussian vector is normalized and its sign flipped when it lands in
    the lower hemisphere.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    ta = as_array(theta)
    if ta.size != n:
        raise ValueError(f"dimension mismatch: n={n}, theta has {ta.size}")
    x = normalize_array(rng.standard_normal(n))
    if np.dot(x, ta) < 0.0:
        x = -x
    return UnitVector._trusted(x)


def geodesic_point(theta, m: float, direction=None, rng=None) -> UnitVector:
    """Point with latitude ``m`` on the great circle through theta.

    ``direction`` is any vector not parallel to theta; its component
    orthogonal to theta fixes the circle. When omitted a random one is
    drawn from ``rng``.
    """
    if not -1.0 <= m <= 1.0:
        raise ValueError(f"latitude {m} outside [-1, 1]")
    ta = as_array(theta)
    if direction is None:
        if rng is None:
            raise ValueError("need a direction or an rng")
        direction = rng.standard_normal(ta.size)
    perp = normalize_array(tangent_project(ta, direction))
    x = m * ta + math.sqrt(max(0.0, 1.0 - m * m)) * perp
    return UnitVector(x)


def householder_to(theta) -> tuple[np.ndarray, float] | None:
    """Reflection H with H e_1 = theta, as (u, 2/|u|^2); None if theta = e_1.

    Apply with ``v - scale * u * (u @ v)``.
    """
    ta = as_array(theta)
    u = -ta.copy()
    u[0] += 1.0
    uu = float(np.dot(u, u))
    if uu < 1e-28:
        return None
    return u, 2.0 / uu
