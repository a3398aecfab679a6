"""Canonical generalized linear models and least-squares linear regression."""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .._kernels import KIND_GLM_LINEAR, KIND_GLM_LOGISTIC, KIND_GLM_POISSON, KIND_LINREG
from ..hermite import PowerSeries, build_profile
from ..quadrature import gauss_hermite
from .base import VectorModel

__all__ = ["CanonicalGLM", "LinearRegression", "GLM_KINDS"]


def _softplus(t):
    return np.logaddexp(0.0, t)


# cumulant b, mean function f = b', and an exact response sampler
def _half_square(t):
    return 0.5 * np.square(t)


def _identity(t):
    return np.asarray(t, dtype=float)


GLM_KINDS = {
    "linear": (_half_square, _identity),
    "logistic": (_softplus, expit),
    "poisson": (np.exp, np.exp),
}

POISSON_CAP = 30.0


class CanonicalGLM(VectorModel):
    """Loss -y (a . x) + b(a . x) with y | a from the family at a . theta.

    Poisson features with a . theta > 30 are redrawn and counted; at unit
    variance this practically never happens.
    """

    family = "glm"

    def __init__(self, dim, kind="logistic", theta=None):
        super().__init__(dim, theta)
        if kind not in GLM_KINDS:
            raise ValueError(f"unknown GLM kind {kind!r}; known: {sorted(GLM_KINDS)}")
        self.kind = kind
        self._b, self._f = GLM_KINDS[kind]

    def _draw(self, rng, size):
        a = rng.standard_normal((size, self.dim))
        rejections = 0
        if self.kind == "poisson":
            bad = a[:, 0] > POISSON_CAP
            while bad.any():
                rejections += int(bad.sum())
                a[bad] = rng.standard_normal((int(bad.sum()), self.dim))
                bad = a[:, 0] > POISSON_CAP
        eta = a[:, 0]
        if self.kind == "linear":
            y = eta + rng.standard_normal(size)
        elif self.kind == "logistic":
            y = (rng.random(size) < expit(eta)).astype(float)
        else:
            y = rng.poisson(np.exp(eta)).astype(float)
        return a, y, rejections

    def weights(self, z, y):
        return self._f(z) - y

    def losses(self, z, y):
        return -y * z + self._b(z)

    def _build_profile(self):
        z, w = gauss_hermite(64)
        # u_1(f) = E[Z f(Z)]; constant E[b(Z)] makes phi the exact mean loss
        u1 = float(np.sum(w * z * self._f(z)))
        const = float(np.sum(w * self._b(z)))
        series = PowerSeries([0.0, u1], const)
        return build_profile(series.value, series.derivative, 1, u1,
                             name=f"glm-{self.kind}", u1=u1, constant=const, series=series)

    def kernel_spec(self):
        kind = {"linear": KIND_GLM_LINEAR, "logistic": KIND_GLM_LOGISTIC,
                "poisson": KIND_GLM_POISSON}[self.kind]
        return kind, np.zeros(1), np.zeros(1)

    def config(self):
        return {"family": self.family, "dim": self.dim, "kind": self.kind}


class LinearRegression(VectorModel):
    """y = a . theta + sigma xi with loss (y - a . x)^2; phi = 2 - 2m + sigma^2."""

    family = "linreg"

    def __init__(self, dim, noise_std=1.0, theta=None):
        super().__init__(dim, theta)
        if noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        self.noise_std = float(noise_std)

    def _draw(self, rng, size):
        a = rng.standard_normal((size, self.dim))
        y = a[:, 0] + self.noise_std * rng.standard_normal(size)
        return a, y, 0

    def weights(self, z, y):
        return 2.0 * (z - y)

    def losses(self, z, y):
        return (y - z) ** 2

    def _build_profile(self):
        series = PowerSeries([0.0, 2.0], 2.0 + self.noise_std ** 2)
        return build_profile(series.value, series.derivative, 1, 2.0, name="linreg",
                             series=series)

    def kernel_spec(self):
        return KIND_LINREG, np.zeros(1), np.zeros(1)

    def config(self):
        return {"family": self.family, "dim": self.dim, "noise_std": self.noise_std}
