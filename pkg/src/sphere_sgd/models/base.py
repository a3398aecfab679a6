"""Model base classes, samples and sample blocks.

The ground truth is e_1 internally. A model built with a different
``theta`` draws exactly the same random numbers and then applies the
Householder reflection H (H e_1 = theta) to every sample, so trajectories
under theta and under e_1 started from H x_0 and x_0 coincide up to
rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from ..hermite import PopulationProfile
from ..sphere import UnitVector, as_array, basis_vector, householder_to

__all__ = ["Block", "Model", "NonFiniteError", "Sample", "VectorModel"]


class NonFiniteError(FloatingPointError):
    """Loss or gradient is not finite; carries replay information."""

    def __init__(self, msg: str, replay: Any = None):
        super().__init__(msg)
        self.replay = replay


@dataclass(frozen=True)
class Sample:
    """One observation.

    ``vector`` holds the features a (supervised, GLM, regression) or the
    observation Y (mixture); ``response`` holds y; ``tensor`` holds a
    streamed-noise handle for tensor models.
    """

    family: str
    vector: np.ndarray | None = None
    response: float | None = None
    aux: Any = None
    tensor: Any = None

    # spec-facing aliases
    @property
    def a(self):
        return self.vector

    @property
    def y(self):
        return self.response

    @property
    def Y(self):
        return self.vector if self.tensor is None else self.tensor


@dataclass
class Block:
    """A batch of samples drawn together, one per row of ``vectors``."""

    family: str
    vectors: np.ndarray | None
    responses: np.ndarray | None
    size: int
    rejections: int = 0
    items: list | None = None  # non-vector families keep Sample objects

    def __len__(self):
        return self.size

    def sample(self, i: int) -> Sample:
        if self.items is not None:
            return self.items[i]
        resp = None if self.responses is None else float(self.responses[i])
        return Sample(self.family, self.vectors[i], resp)

    def __iter__(self):
        return (self.sample(i) for i in range(self.size))


class Model:
    """A data distribution P_theta with a per-sample loss on the sphere."""

    family = "abstract"

    def __init__(self, dim: int, theta=None):
        if dim < 2:
            raise ValueError("dim must be >= 2")
        self.dim = int(dim)
        if theta is None:
            self.theta = basis_vector(self.dim)
            self._reflect = None
        else:
            th = theta if isinstance(theta, UnitVector) else UnitVector(theta)
            if th.dim != self.dim:
                raise ValueError("theta dimension does not match model dim")
            self.theta = th
            self._reflect = householder_to(th)
        self._theta_arr = self.theta.coords
        self._profile = None

    # -- rotation helpers -----------------------------------------------
    def _rotate_rows(self, v: np.ndarray) -> np.ndarray:
        if self._reflect is None:
            return v
        u, scale = self._reflect
        return v - scale * np.outer(v @ u, u)

    def rotate(self, x) -> np.ndarray:
        """Apply the reflection taking e_1 to theta."""
        v = np.array(as_array(x), dtype=float)
        if self._reflect is None:
            return v
        u, scale = self._reflect
        return v - scale * u * (u @ v)

    # -- interface --------------------------------------------------------
    def sample_block(self, rng: np.random.Generator, size: int) -> Block:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator) -> Sample:
        return self.sample_block(rng, 1).sample(0)

    def loss(self, x, s: Sample) -> float:
        raise NotImplementedError

    def euclid_gradient(self, x, s: Sample) -> np.ndarray:
        raise NotImplementedError

    def _build_profile(self) -> PopulationProfile:
        raise NotImplementedError

    def population_profile(self) -> PopulationProfile:
        if self._profile is None:
            self._profile = self._build_profile()
        return self._profile

    def loss_constant(self) -> float:
        """E[loss] - phi(m); zero for every family here."""
        return 0.0

    def spherical_gradients(self, x, block: Block) -> np.ndarray:
        """Rows: tangent projections of the per-sample gradients at x."""
        xa = as_array(x)
        g = np.array([self.euclid_gradient(xa, s) for s in block])
        return g - np.outer(g @ xa, xa)

    def config(self) -> dict:
        return {"family": self.family, "dim": self.dim}

    def __repr__(self):
        body = ", ".join(f"{k}={v!r}" for k, v in self.config().items() if k != "family")
        return f"{type(self).__name__}({body})"

    def _check(self, value, what: str, s: Sample | None = None):
        if isinstance(value, np.ndarray):
            ok = bool(np.all(np.isfinite(value)))
        else:
            ok = math.isfinite(value)
        if not ok:
            raise NonFiniteError(f"non-finite {what} in {self.family} model", s)
        return value


class VectorModel(Model):
    """Families whose gradient is a scalar weight times the sample vector.

    Subclasses implement ``weights(z, y)`` returning dL/dz at z = v . x
    (vectorized over samples) and ``losses(z, y)``; ``y`` is the response
    or None.
    """

    def weights(self, z, y):
        raise NotImplementedError

    def losses(self, z, y):
        raise NotImplementedError

    def kernel_spec(self):
        """(kind, c, d) for the compiled loop, or None to use the Python loop."""
        return None

    def _draw(self, rng, size):
        """Return (vectors in the e_1 frame, responses, rejections)."""
        raise NotImplementedError

    def sample_block(self, rng, size):
        v, y, rej = self._draw(rng, size)
        return Block(self.family, self._rotate_rows(v), y, size, rej)

    def loss(self, x, s):
        z = float(np.dot(s.vector, as_array(x)))
        return self._check(float(self.losses(z, s.response)), "loss", s)

    def euclid_gradient(self, x, s):
        z = float(np.dot(s.vector, as_array(x)))
        return self._check(float(self.weights(z, s.response)) * s.vector, "gradient", s)

    def spherical_gradients(self, x, block):
        xa = as_array(x)
        z = block.vectors @ xa
        w = np.asarray(self.weights(z, block.responses), dtype=float)
        self._check(w, "gradient")
        return w[:, None] * (block.vectors - z[:, None] * xa[None, :])
