"""Activation registry.

Each activation carries its derivative and the points where it is not
smooth. Kink conventions: ReLU'(0) = 0 and sign(0) = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.special import expit

__all__ = ["Activation", "REGISTRY", "get_activation", "polynomial_activation"]

_SQRT6 = math.sqrt(6.0)
_SQRT24 = math.sqrt(24.0)


@dataclass(frozen=True, eq=False)
class Activation:
    name: str
    func: Callable
    deriv: Callable
    breakpoints: tuple[float, ...] = ()
    # polynomial coefficients (ascending) when the activation is a polynomial
    poly: tuple[float, ...] | None = field(default=None, compare=False)

    def __call__(self, z):
        return self.func(z)

    @property
    def degree(self) -> int | None:
        return None if self.poly is None else len(self.poly) - 1


def _linear(z):
    return np.asarray(z, dtype=float) * 1.0


def _one(z):
    return np.ones_like(np.asarray(z, dtype=float))


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_prime(z):
    return (np.asarray(z) > 0.0).astype(float)


def _sigmoid(z):
    return expit(z)


def _sigmoid_prime(z):
    s = expit(z)
    return s * (1.0 - s)


def _abs(z):
    return np.abs(z)


def _sign(z):
    return np.sign(z) * 1.0


def polynomial_activation(coeffs: Sequence[float], name: str | None = None) -> Activation:
    """Activation sum_i coeffs[i] z^i."""
    c = tuple(float(v) for v in coeffs)
    if not c:
        raise ValueError("empty coefficient list")
    p = Polynomial(c)
    label = name or "poly[" + ",".join(f"{v:g}" for v in c) + "]"
    return Activation(label, p, p.deriv(), (), c)


def _poly(name, coeffs):
    return polynomial_activation(coeffs, name)


REGISTRY: dict[str, Activation] = {
    "linear": Activation("linear", _linear, _one, (), (0.0, 1.0)),
    "relu": Activation("relu", _relu, _relu_prime, (0.0,)),
    "sigmoid": Activation("sigmoid", _sigmoid, _sigmoid_prime),
    "square": _poly("square", [0.0, 0.0, 1.0]),
    "abs": Activation("abs", _abs, _sign, (0.0,)),
    "hermite3": _poly("hermite3", [0.0, -3.0 / _SQRT6, 0.0, 1.0 / _SQRT6]),
    "hermite4": _poly("hermite4", [3.0 / _SQRT24, 0.0, -6.0 / _SQRT24, 0.0, 1.0 / _SQRT24]),
    "cubic": _poly("cubic", [0.0, 0.0, 0.0, 1.0]),
    "cubic_minus_3x": _poly("cubic_minus_3x", [0.0, -3.0, 0.0, 1.0]),
}


def get_activation(spec) -> Activation:
    """Resolve a registry name, a coefficient list or an Activation."""
    if isinstance(spec, Activation):
        return spec
    if isinstance(spec, str):
        try:
            return REGISTRY[spec]
        except KeyError:
            raise ValueError(
                f"unknown activation {spec!r}; known: {sorted(REGISTRY)}"
            ) from None
    if isinstance(spec, (list, tuple, np.ndarray)):
        return polynomial_activation(spec)
    if isinstance(spec, dict) and "poly" in spec:
        return polynomial_activation(spec["poly"], spec.get("name"))
    raise TypeError(f"cannot build an activation from {spec!r}")
