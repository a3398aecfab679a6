"""Zero-noise model whose per-sample loss is the population loss itself.

Every sample is empty and L(x; Y) = phi(x . theta), so H = L - Phi vanishes
identically. Useful as a control: SGD on it is the population dynamics.
"""

from __future__ import annotations

import numpy as np

from ..hermite import PopulationProfile
from ..sphere import as_array
from .base import Block, Model, Sample

__all__ = ["PopulationModel"]


class PopulationModel(Model):
    family = "population"

    def __init__(self, dim, profile: PopulationProfile, theta=None):
        super().__init__(dim, theta)
        self._profile = profile

    def sample_block(self, rng, size):
        return Block(self.family, None, None, size, 0, [Sample(self.family)] * size)

    def loss(self, x, s):
        return float(self._profile.phi(float(as_array(x) @ self._theta_arr)))

    def euclid_gradient(self, x, s):
        m = float(as_array(x) @ self._theta_arr)
        return float(self._profile.phi_prime(m)) * np.array(self._theta_arr)

    def config(self):
        return {"family": self.family, "dim": self.dim, "profile": self._profile.name}
