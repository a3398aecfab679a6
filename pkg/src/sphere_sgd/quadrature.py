"""Quadrature rules against the standard Gaussian weight.

Two coefficient engines live here:

* :func:`gauss_hermite` - probabilists' Gauss-Hermite rule (numpy's
  ``hermegauss``) with weights normalized to a probability measure. Exact
  for polynomials of degree <= 2Q - 1.
* :func:`hermite_function_projection` - composite Gauss-Legendre panels
  split at the breakpoints of a piecewise-smooth integrand, combined with
  scaled Hermite functions psi_j = h_j * sqrt(phi). Needed for kinked
  activations (ReLU, |z|) whose Hermite coefficients decay slowly, so
  thousands of them must be computed without overflow.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.laguerre import laggauss
from numpy.polynomial.legendre import leggauss

__all__ = [
    "gauss_hermite",
    "gauss_legendre",
    "gauss_laguerre",
    "composite_legendre",
    "hermite_function_projection",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@lru_cache(maxsize=32)
def _gh(q: int):
    z, w = hermegauss(q)
    w = w / math.sqrt(2.0 * math.pi)
    z.setflags(write=False)
    w.setflags(write=False)
    return z, w


def gauss_hermite(q: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and probability weights for E[g(Z)], Z ~ N(0, 1)."""
    if q < 1:
        raise ValueError("quadrature order must be >= 1")
    return _gh(int(q))


@lru_cache(maxsize=32)
def _gl(q: int):
    x, w = leggauss(q)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(q: int) -> tuple[np.ndarray, np.ndarray]:
    return _gl(int(q))


@lru_cache(maxsize=8)
def _glag(q: int):
    x, w = laggauss(q)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_laguerre(q: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for int_0^inf g(u) e^{-u} du."""
    return _glag(int(q))


def composite_legendre(cuts, width: float, q: int = 20) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre panels on [cuts[0], cuts[-1]] never straddling a cut.

    Each interval between consecutive cuts is split into equal panels no
    wider than ``width``.
    """
    cuts = np.unique(np.asarray(cuts, dtype=float))
    x0, w0 = gauss_legendre(q)
    xs, ws = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        n = max(1, int(math.ceil((hi - lo) / width)))
        edges = np.linspace(lo, hi, n + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        xs.append((mid[:, None] + half[:, None] * x0[None, :]).ravel())
        ws.append((half[:, None] * w0[None, :]).ravel())
    return np.concatenate(xs), np.concatenate(ws)


def hermite_function_projection(f, order: int, breakpoints=(), half_width: float = 20.0):
    """Coefficients u_0..u_order of ``f`` and its L2(phi) norm squared.

    The integrand f * h_j * phi is written as (f sqrt(phi)) * psi_j with
    psi_j = h_j sqrt(phi) bounded by one, and integrated on [-L, L] with
    panels about one oscillation of psi_order wide. Beyond |z| = 20 the
    Gaussian factor is below 1e-40 for any polynomially growing f.
    """
    wavelength = 2.0 * math.pi / math.sqrt(order + 0.5)
    width = min(0.5, wavelength)
    cuts = [-half_width, half_width]
    cuts += [b for b in breakpoints if -half_width < b < half_width]
    z, w = composite_legendre(cuts, width, q=20)
    fz = np.asarray(f(z), dtype=float)
    if fz.shape != z.shape:
        fz = np.broadcast_to(fz, z.shape).astype(float)
    bad = ~np.isfinite(fz)
    if bad.any():
        raise ValueError(f"activation is not finite at node z={z[bad][0]!r}")
    psi_prev = np.exp(-0.25 * z * z - 0.5 * _LOG_SQRT_2PI)
    g = w * fz * psi_prev
    out = np.empty(order + 1)
    out[0] = g @ psi_prev
    if order >= 1:
        psi = z * psi_prev
        out[1] = g @ psi
        for j in range(1, order):
            psi, psi_prev = (z * psi - math.sqrt(j) * psi_prev) / math.sqrt(j + 1.0), psi
            out[j + 1] = g @ psi
    l2 = float(np.sum(w * fz * fz * np.exp(-0.5 * z * z - _LOG_SQRT_2PI)))
    return out, l2
