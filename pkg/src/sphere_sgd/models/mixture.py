"""Two-component antipodal Gaussian mixture, Y = Z + eps * theta.

Maximum likelihood with P(eps = +1) = p is minimizing
-log cosh(Y . x + h) with tilt h = log(p / (1 - p)) / 2. The population
loss is phi(m) = -E log cosh(Z + eps m + h), computed by Gauss-Hermite
quadrature in Z and the exact two-point average over eps.
"""

from __future__ import annotations

import math

import numpy as np

from .._kernels import KIND_MIXTURE
from ..hermite import build_profile
from ..quadrature import gauss_hermite
from .base import VectorModel

__all__ = ["GaussianMixture", "log_cosh"]

LN2 = math.log(2.0)


def log_cosh(t):
    t = np.abs(t)
    return t + np.log1p(np.exp(-2.0 * t)) - LN2


class _MixtureLoss:
    def __init__(self, p: float, h: float, quad_order: int = 64):
        self.p, self.h = p, h
        self.z, self.w = gauss_hermite(quad_order)

    def _avg(self, fn, m):
        m = np.asarray(m, dtype=float)
        t = m[..., None]
        plus = fn(self.z + t + self.h, 1.0) @ self.w
        minus = fn(self.z - t + self.h, -1.0) @ self.w
        out = self.p * plus + (1.0 - self.p) * minus
        return out if m.ndim else float(out)

    def value(self, m):
        return self._avg(lambda u, e: -log_cosh(u), m)

    def derivative(self, m):
        return self._avg(lambda u, e: -e * np.tanh(u), m)

    def second_derivative(self, m):
        return self._avg(lambda u, e: -1.0 / np.cosh(u) ** 2, m)


class GaussianMixture(VectorModel):
    """Give either the weight ``p`` of the +theta component or the tilt ``h``.

    p = 1 is allowed for sampling (a single component); the loss then has an
    infinite tilt and raises.
    """

    family = "mixture"

    def __init__(self, dim, p=None, h=None, theta=None):
        super().__init__(dim, theta)
        if (p is None) == (h is None):
            raise ValueError("give exactly one of p and h")
        if p is None:
            h = float(h)
            if not math.isfinite(h):
                raise ValueError("tilt h must be finite")
            p = 1.0 / (1.0 + math.exp(-2.0 * h))
        else:
            p = float(p)
            if not 0.0 < p <= 1.0:
                raise ValueError("mixture weight p must lie in (0, 1]")
            h = 0.5 * math.log(p / (1.0 - p)) if p < 1.0 else math.inf
        self.p, self.h = p, h

    def _require_finite_h(self):
        if not math.isfinite(self.h):
            raise ValueError(f"tilt h = log(p/(1-p))/2 is infinite at p={self.p}; loss undefined")

    def _draw(self, rng, size):
        y = rng.standard_normal((size, self.dim))
        eps = np.where(rng.random(size) < self.p, 1.0, -1.0)
        y[:, 0] += eps
        return y, None, 0

    def weights(self, z, y):
        self._require_finite_h()
        return -np.tanh(z + self.h)

    def losses(self, z, y):
        self._require_finite_h()
        return -log_cosh(z + self.h)

    def kernel_spec(self):
        self._require_finite_h()
        return KIND_MIXTURE, np.array([self.h]), np.zeros(1)

    def _build_profile(self):
        self._require_finite_h()
        fns = _MixtureLoss(self.p, self.h)
        d1 = fns.derivative(0.0)
        # phi'(0) = -(2p - 1) E tanh(Z + h) vanishes exactly at p = 1/2
        if abs(d1) > 1e-12:
            k, drift = 1, -d1
        else:
            k, drift = 2, -fns.second_derivative(0.0)
        return build_profile(fns.value, fns.derivative, k, drift,
                             name=f"mixture-p{self.p:g}", second_derivative=fns.second_derivative)

    def config(self):
        return {"family": self.family, "dim": self.dim, "p": self.p}
