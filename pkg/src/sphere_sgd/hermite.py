"""Orthonormal Hermite analysis of activations and population losses.

Convention: h_k are the *orthonormal* probabilists' Hermite polynomials,
E[h_j(Z) h_k(Z)] = 1{j = k} for Z ~ N(0, 1). So h_2(z) = (z^2 - 1)/sqrt(2)
and z^2 = h_0 + sqrt(2) h_2. The physicists' convention would rescale every
coefficient u_k = E[f(Z) h_k(Z)] and every quantity built from them.

For an activation f with coefficients u_k, the least-squares population
loss of a student with the same activation at latitude m is

    phi(m) = 2 * sum_j u_j^2 (1 - m^j),

and the information exponent is the first j >= 1 with u_j != 0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .activations import Activation, get_activation
from .quadrature import (
    gauss_hermite,
    gauss_laguerre,
    composite_legendre,
    hermite_function_projection,
)

__all__ = [
    "HermiteProfile",
    "NoExponentError",
    "PopulationProfile",
    "cross_population_profile",
    "hermite_coefficient",
    "hermite_coefficients",
    "hermite_polynomial",
    "hermite_profile",
    "hermite_table",
    "information_exponent",
    "population_loss_quadrature_oracle",
    "supervised_population_profile",
]

DEFAULT_TRUNCATION = 32
DEFAULT_QUAD_ORDER = 64
# kinked activations have coefficients decaying like j^{-5/4}; this order
# brings the truncated tail of |z| and ReLU below 1e-7
KINKED_TRUNCATION = 8192


class NoExponentError(ValueError):
    """No nonzero coefficient of order >= 1 up to the truncation order."""


# ---------------------------------------------------------------------------
# basis


def hermite_polynomial(k: int, z):
    """Orthonormal h_k(z) via h_{k+1} = (z h_k - sqrt(k) h_{k-1}) / sqrt(k+1)."""
    if k < 0:
        raise ValueError("k must be >= 0")
    z = np.asarray(z, dtype=float)
    prev = np.ones_like(z)
    if k == 0:
        return prev if z.ndim else float(prev)
    cur = z.copy()
    for j in range(1, k):
        cur, prev = (z * cur - math.sqrt(j) * prev) / math.sqrt(j + 1.0), cur
    return cur if z.ndim else float(cur)


def hermite_table(order: int, z) -> np.ndarray:
    """Array H with H[j] = h_j(z) for j = 0..order."""
    z = np.asarray(z, dtype=float)
    out = np.empty((order + 1,) + z.shape)
    out[0] = 1.0
    if order >= 1:
        out[1] = z
    for j in range(1, order):
        out[j + 1] = (z * out[j] - math.sqrt(j) * out[j - 1]) / math.sqrt(j + 1.0)
    return out


def _eval_checked(f, z: np.ndarray) -> np.ndarray:
    fz = np.asarray(f(z), dtype=float)
    if fz.shape != z.shape:
        fz = np.broadcast_to(fz, z.shape).astype(float)
    bad = ~np.isfinite(fz)
    if bad.any():
        raise ValueError(f"activation is not finite at quadrature node z={z[bad][0]!r}")
    return fz


def hermite_coefficient(f, k: int, quad_order: int = DEFAULT_QUAD_ORDER) -> float:
    """Gauss-Hermite estimate of u_k(f) = E[f(Z) h_k(Z)].

    Exact up to rounding for polynomial f of degree <= 2*quad_order - 1 - k.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if quad_order < k + 1:
        raise ValueError(f"quad_order must be >= k+1 = {k + 1}")
    z, w = gauss_hermite(quad_order)
    return float(np.sum(w * _eval_checked(f, z) * hermite_polynomial(k, z)))


def hermite_coefficients(f, order: int, quad_order: int = DEFAULT_QUAD_ORDER,
                         breakpoints=()) -> tuple[np.ndarray, float]:
    """(u_0..u_order, ||f||^2).

    Smooth activations use the Gauss-Hermite rule. Activations with
    breakpoints go through the composite rule, which resolves kinks and
    stays stable at orders in the thousands; so do orders above 127, where
    Gauss-Hermite nodes are no longer reliable.
    """
    if breakpoints or order > 127:
        return hermite_function_projection(f, order, breakpoints)
    if quad_order < order + 1:
        raise ValueError(f"quad_order must be >= truncation_order+1 = {order + 1}")
    z, w = gauss_hermite(quad_order)
    fz = _eval_checked(f, z)
    coeffs = hermite_table(order, z) @ (w * fz)
    return coeffs, float(np.sum(w * fz * fz))


# ---------------------------------------------------------------------------
# profiles


@dataclass(frozen=True)
class HermiteProfile:
    coefficients: np.ndarray
    truncation_order: int
    l2_norm_estimate: float
    tail_mass: float
    name: str = ""

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)
        if c.size != self.truncation_order + 1:
            raise ValueError("coefficient count must equal truncation_order + 1")

    @property
    def norm(self) -> float:
        return math.sqrt(max(self.l2_norm_estimate, 0.0))

    def table(self) -> list[tuple[int, float, float, float]]:
        """Rows (k, u_k, u_k^2, cumulative mass)."""
        sq = self.coefficients ** 2
        cum = np.cumsum(sq)
        return [(k, float(self.coefficients[k]), float(sq[k]), float(cum[k]))
                for k in range(self.truncation_order + 1)]


def hermite_profile(f, truncation_order: int | None = None,
                    quad_order: int = DEFAULT_QUAD_ORDER, breakpoints=None,
                    name: str | None = None) -> HermiteProfile:
    """Hermite profile of an activation (registry name, Activation or callable)."""
    if isinstance(f, (str, list, tuple, Activation)):
        act = get_activation(f)
        func = act.func
        bps = act.breakpoints if breakpoints is None else tuple(breakpoints)
        name = name or act.name
    else:
        func = f
        bps = tuple(breakpoints or ())
        name = name or getattr(f, "__name__", "f")
    if truncation_order is None:
        truncation_order = KINKED_TRUNCATION if bps else DEFAULT_TRUNCATION
    coeffs, l2 = hermite_coefficients(func, truncation_order, quad_order, bps)
    tail = l2 - float(np.sum(coeffs ** 2))
    return HermiteProfile(coeffs, truncation_order, l2, tail, name)


def information_exponent(profile: HermiteProfile, tol: float = 1e-8) -> int:
    """First j >= 1 with |u_j| > tol * ||f||."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    scale = tol * max(profile.norm, 1e-300)
    u = profile.coefficients
    hits = np.nonzero(np.abs(u[1:]) > scale)[0]
    if hits.size == 0:
        raise NoExponentError(f"no exponent detected up to order {profile.truncation_order}")
    return int(hits[0]) + 1


class PowerSeries:
    """m -> const - sum_j c_j m^j, with its derivative. Picklable."""

    def __init__(self, coeffs, const: float):
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.const = float(const)
        self._j = np.arange(self.coeffs.size, dtype=float)
        self._clist = [float(v) for v in self.coeffs]
        self._dlist = [float(v) for v in (self._j * self.coeffs)[1:]]

    def _powers(self, m, shift=0):
        m = np.asarray(m, dtype=float)
        j = np.maximum(self._j - shift, 0.0)
        return np.power.outer(m, j), m.ndim

    def _horner(self, c, m: float) -> float:
        acc = 0.0
        for v in c[::-1]:
            acc = acc * m + v
        return acc

    @staticmethod
    def _horner_array(c: np.ndarray, m: np.ndarray) -> np.ndarray:
        # a grid times thousands of terms would make the power table huge
        acc = np.zeros_like(m)
        for v in c[::-1]:
            acc *= m
            acc += v
        return acc

    def value(self, m):
        if isinstance(m, float) and self.coeffs.size <= 40:
            return self.const - self._horner(self._clist, m)
        if np.ndim(m) and np.size(m) > 1:
            return self.const - self._horner_array(self.coeffs, np.asarray(m, dtype=float))
        pw, nd = self._powers(m)
        out = self.const - pw @ self.coeffs
        return out if nd else float(out)

    def derivative(self, m):
        if isinstance(m, float) and self.coeffs.size <= 40:
            return -self._horner(self._dlist, m)
        if np.ndim(m) and np.size(m) > 1:
            return -self._horner_array(self._j[1:] * self.coeffs[1:], np.asarray(m, dtype=float))
        pw, nd = self._powers(m, 1)
        out = -(pw @ (self._j * self.coeffs))
        return out if nd else float(out)


@dataclass(frozen=True)
class PopulationProfile:
    """phi, phi' and the constants the theory formulas consume.

    ``drift_coefficient`` is -phi^{(k)}(0)/(k-1)!, so that near the equator
    -phi'(m) ~ drift_coefficient * m^(k-1). ``grad_norm_bound`` bounds
    sup_m phi'(m)^2 (1 - m^2), the squared norm of the population gradient.
    """

    phi: Callable
    phi_prime: Callable
    info_exponent: int
    drift_coefficient: float
    grad_norm_bound: float
    assumption_a_holds: bool
    name: str = ""
    extra: dict = field(default_factory=dict, compare=False)

    def summary(self) -> dict:
        return {
            "name": self.name,
            "info_exponent": self.info_exponent,
            "drift_coefficient": self.drift_coefficient,
            "grad_norm_bound": self.grad_norm_bound,
            "assumption_a_holds": self.assumption_a_holds,
        }


ASSUMPTION_A_GRID = np.linspace(0.01, 0.99, 99)


def check_assumption_a(phi_prime) -> bool:
    return bool(np.all(np.asarray(phi_prime(ASSUMPTION_A_GRID)) < 0.0))


def grad_norm_bound(phi_prime, points: int = 4001) -> float:
    m = np.linspace(-1.0, 1.0, points)
    g2 = np.asarray(phi_prime(m)) ** 2 * (1.0 - m * m)
    # slack for the grid spacing
    return float(g2.max() * 1.01)


def build_profile(phi, phi_prime, k: int, drift: float, name: str = "", **extra) -> PopulationProfile:
    return PopulationProfile(
        phi=phi,
        phi_prime=phi_prime,
        info_exponent=int(k),
        drift_coefficient=float(drift),
        grad_norm_bound=grad_norm_bound(phi_prime),
        assumption_a_holds=check_assumption_a(phi_prime),
        name=name,
        extra=dict(extra),
    )


def _warn_tail(profile: HermiteProfile) -> None:
    if profile.l2_norm_estimate > 0 and profile.tail_mass / profile.l2_norm_estimate > 1e-6:
        warnings.warn(
            f"Hermite tail of {profile.name or 'activation'} is "
            f"{profile.tail_mass:.3g} (relative {profile.tail_mass / profile.l2_norm_estimate:.3g}); "
            "raise truncation_order",
            RuntimeWarning,
            stacklevel=3,
        )


def supervised_population_profile(profile: HermiteProfile, tol: float = 1e-8) -> PopulationProfile:
    """phi(m) = 2 sum u_j^2 (1 - m^j) for a well-specified student."""
    _warn_tail(profile)
    k = information_exponent(profile, tol)
    c = 2.0 * profile.coefficients ** 2
    c[0] = 0.0
    series = PowerSeries(c, float(c.sum()))
    u_k = float(profile.coefficients[k])
    return build_profile(series.value, series.derivative, k, 2.0 * k * u_k * u_k,
                         name=profile.name, series=series)


def cross_population_profile(teacher: HermiteProfile, student: HermiteProfile,
                             tol: float = 1e-8) -> PopulationProfile:
    """Mis-specified student: phi(m) = |f|^2 + |g|^2 - 2 sum u_j(f) u_j(g) m^j.

    Assumption A may fail for adversarial pairs; the returned profile then
    has ``assumption_a_holds = False`` instead of raising.
    """
    if teacher.truncation_order != student.truncation_order:
        raise ValueError("teacher and student need the same truncation order")
    prod = teacher.coefficients * student.coefficients
    scale = tol * max(teacher.norm * student.norm, 1e-300)
    hits = np.nonzero(np.abs(prod[1:]) > scale)[0]
    if hits.size == 0:
        raise NoExponentError(f"no exponent detected up to order {teacher.truncation_order}")
    k = int(hits[0]) + 1
    c = 2.0 * prod
    const = teacher.l2_norm_estimate + student.l2_norm_estimate
    series = PowerSeries(c, const)
    return build_profile(series.value, series.derivative, k, 2.0 * k * float(prod[k]),
                         name=f"{teacher.name}|{student.name}", series=series)


# ---------------------------------------------------------------------------
# independent oracle


def _polar_oracle(f, m: float, quad_order: int) -> float:
    # (a1, a2) = r (cos w, sin w); pairing w with w + pi makes the radial
    # integrand even in r, so it is smooth in u = r^2/2 when f is smooth on
    # both half-lines. Angular panels are split where either argument of f
    # changes sign.
    s = math.sqrt(max(0.0, 1.0 - m * m))
    kinks = [0.0, math.pi / 2.0, math.atan2(-m, s) % math.pi, math.pi]
    omega, w_om = composite_legendre(kinks, width=math.pi / 8.0, q=24)
    u, w_u = gauss_laguerre(quad_order)
    r = np.sqrt(2.0 * u)
    c1 = np.cos(omega)
    cm = m * c1 + s * np.sin(omega)
    total = 0.0
    for sign in (1.0, -1.0):
        rr = sign * r[:, None]
        g = (_eval_checked(f, rr * cm[None, :]) - _eval_checked(f, rr * c1[None, :])) ** 2
        total += float(w_u @ g @ w_om)
    return total / (2.0 * math.pi)


def population_loss_quadrature_oracle(f, m: float, quad_order: int = DEFAULT_QUAD_ORDER,
                                      breakpoints=None) -> float:
    """E[(f(a1 m + a2 sqrt(1-m^2)) - f(a1))^2] by two-dimensional quadrature.

    Smooth f: tensor Gauss-Hermite. f with a kink at the origin: polar
    coordinates with Gauss-Laguerre in r^2/2 and angular Gauss-Legendre
    panels split at the kink directions. Other breakpoints are unsupported.
    """
    if not -1.0 <= m <= 1.0:
        raise ValueError(f"m={m} outside [-1, 1]")
    if isinstance(f, (str, list, tuple, Activation)):
        act = get_activation(f)
        f = act.func
        if breakpoints is None:
            breakpoints = act.breakpoints
    breakpoints = tuple(breakpoints or ())
    if breakpoints:
        if any(b != 0.0 for b in breakpoints):
            raise NotImplementedError("oracle supports a kink at 0 only")
        val = _polar_oracle(f, m, quad_order)
    else:
        z, w = gauss_hermite(quad_order)
        s = math.sqrt(max(0.0, 1.0 - m * m))
        a1, a2 = z[:, None], z[None, :]
        g = (_eval_checked(f, a1 * m + a2 * s) - _eval_checked(f, np.broadcast_to(a1, (z.size, z.size)))) ** 2
        val = float(w @ g @ w)
    if not math.isfinite(val):
        raise ValueError("oracle integrand is not finite")
    return val
