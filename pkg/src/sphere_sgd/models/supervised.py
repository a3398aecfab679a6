"""Single-layer supervised learning: y = f(a . theta), loss (y - g(a . x))^2."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .._kernels import KIND_ABS, KIND_POLY, KIND_RELU, KIND_SIGMOID
from ..activations import REGISTRY, Activation, get_activation
from ..hermite import (
    HermiteProfile,
    cross_population_profile,
    hermite_profile,
    supervised_population_profile,
)
from .base import VectorModel

__all__ = ["SupervisedSingleLayer", "cached_hermite_profile"]


@lru_cache(maxsize=64)
def cached_hermite_profile(act: Activation, truncation_order: int | None = None) -> HermiteProfile:
    return hermite_profile(act, truncation_order)


class SupervisedSingleLayer(VectorModel):
    """Teacher activation f, optional mis-specified student g (default g = f)."""

    family = "supervised"

    def __init__(self, dim, activation="linear", student=None, theta=None):
        super().__init__(dim, theta)
        self.activation = get_activation(activation)
        self.student = self.activation if student is None else get_activation(student)
        self._g = self.student.func
        self._gp = self.student.deriv

    def _draw(self, rng, size):
        a = rng.standard_normal((size, self.dim))
        # the teacher sees a . theta = a_1 in the e_1 frame in every frame
        y = np.asarray(self.activation.func(a[:, 0]), dtype=float)
        return a, y, 0

    def weights(self, z, y):
        return 2.0 * (self._g(z) - y) * self._gp(z)

    def losses(self, z, y):
        return (y - self._g(z)) ** 2

    def kernel_spec(self):
        st = self.student
        if st.poly is not None:
            c = np.array(st.poly, dtype=float)
            d = c[1:] * np.arange(1, c.size) if c.size > 1 else np.zeros(1)
            return KIND_POLY, c, d
        kind = {"relu": KIND_RELU, "abs": KIND_ABS, "sigmoid": KIND_SIGMOID}.get(st.name)
        if kind is None or st is not REGISTRY.get(st.name):
            return None
        return kind, np.zeros(1), np.zeros(1)

    def _build_profile(self):
        teacher = cached_hermite_profile(self.activation)
        if self.student is self.activation:
            return supervised_population_profile(teacher)
        order = max(teacher.truncation_order,
                    cached_hermite_profile(self.student).truncation_order)
        return cross_population_profile(cached_hermite_profile(self.activation, order),
                                        cached_hermite_profile(self.student, order))

    def config(self):
        out = {"family": self.family, "dim": self.dim, "activation": self.activation.name}
        if self.student is not self.activation:
            out["student"] = self.student.name
        return out
