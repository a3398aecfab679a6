"""Spiked tensor models Y = J + lambda theta^{(x)p}.

We minimize L(x; Y) = -<Y, x^{(x)p}>, so phi(m) = -lambda m^p and the
information exponent is p.

Noise tensors are never stored for p >= 3. A sample only carries a
:class:`TensorNoise` handle; slab i (all entries with first index i) is
regenerated on demand from a counter-based generator keyed by
(handle seed, i), so any contraction can be recomputed bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..hermite import PowerSeries, build_profile
from ..rng import counter_generator
from ..sphere import as_array
from .base import Block, Model, Sample

__all__ = ["CompositeTensor", "TensorNoise", "TensorPCA"]

ENTRY_KINDS = ("gaussian", "rademacher", "none")


@dataclass(frozen=True)
class TensorNoise:
    """Handle to an i.i.d. order-p noise tensor on R^dim."""

    seed: int
    order: int
    dim: int
    entries: str = "gaussian"

    def slab(self, i: int) -> np.ndarray:
        shape = (self.dim,) * (self.order - 1)
        if self.entries == "none":
            return np.zeros(shape)
        rng = counter_generator(self.seed, i)
        if self.entries == "gaussian":
            return rng.standard_normal(shape)
        return 2.0 * rng.integers(0, 2, size=shape) - 1.0

    def dense(self) -> np.ndarray:
        return np.stack([self.slab(i) for i in range(self.dim)])

    def contract(self, x) -> float:
        """<J, x^{(x)p}>."""
        x = as_array(x)
        return float(sum(x[i] * _full(self.slab(i), x) for i in range(self.dim)))

    def gradient(self, x) -> np.ndarray:
        """Gradient in x of <J, x^{(x)p}> (sum over the p slots)."""
        x = as_array(x)
        g = np.zeros(self.dim)
        for i in range(self.dim):
            s = self.slab(i)
            g[i] += _full(s, x)
            if self.order > 1:
                g += x[i] * _grad(s, x)
        return g


def _full(t: np.ndarray, x: np.ndarray) -> float:
    for _ in range(t.ndim):
        t = t @ x
    return float(t)


def _grad(t: np.ndarray, x: np.ndarray) -> np.ndarray:
    # sum over slots r of the contraction of every other slot with x
    q = t.ndim
    out = np.zeros(x.size)
    for r in range(q):
        u = np.moveaxis(t, r, 0)
        for _ in range(q - 1):
            u = u @ x
        out += u
    return out


class _Component:
    """One spiked tensor term; dense for p = 2, streamed otherwise."""

    def __init__(self, model: Model, noise: TensorNoise):
        self.noise = noise
        self.dense = None
        if noise.order == 2:
            j = noise.dense()
            if model._reflect is not None:
                u, scale = model._reflect
                j = j - scale * np.outer(u, u @ j)
                j = j - scale * np.outer(j @ u, u)
            self.dense = j

    def contract(self, x):
        if self.dense is not None:
            return float(x @ self.dense @ x)
        return self.noise.contract(x)

    def gradient(self, x):
        if self.dense is not None:
            return self.dense @ x + self.dense.T @ x
        return self.noise.gradient(x)


class _TensorBase(Model):
    family = "tensor"

    def _orders(self) -> list[int]:
        raise NotImplementedError

    def _weights(self) -> list[float]:
        raise NotImplementedError

    def sample_block(self, rng, size):
        items = []
        for _ in range(size):
            seeds = rng.integers(0, 2 ** 63 - 1, size=len(self._orders()))
            handles = tuple(TensorNoise(int(sd), p, self.dim, self.entries)
                            for sd, p in zip(seeds, self._orders()))
            items.append(Sample(self.family, tensor=handles))
        return Block(self.family, None, None, size, 0, items)

    def _components(self, s: Sample):
        cache = s.aux
        if cache is None:
            cache = [_Component(self, h) for h in s.tensor]
            object.__setattr__(s, "aux", cache)
        return cache

    def loss(self, x, s):
        x = as_array(x)
        m = float(x @ self._theta_arr)
        total = 0.0
        for w, p, comp in zip(self._weights(), self._orders(), self._components(s)):
            total -= w * (comp.contract(x) + self.snr * m ** p)
        return self._check(total, "loss", s)

    def euclid_gradient(self, x, s):
        x = as_array(x)
        m = float(x @ self._theta_arr)
        g = np.zeros(self.dim)
        for w, p, comp in zip(self._weights(), self._orders(), self._components(s)):
            g -= w * (comp.gradient(x) + self.snr * p * m ** (p - 1) * self._theta_arr)
        return self._check(g, "gradient", s)

    def _build_profile(self):
        orders, weights = self._orders(), self._weights()
        c = np.zeros(max(orders) + 1)
        for w, p in zip(weights, orders):
            c[p] += w * self.snr
        series = PowerSeries(c, 0.0)
        k = min(orders)
        return build_profile(series.value, series.derivative, k, k * c[k],
                             name=f"tensor-{'+'.join(map(str, orders))}")


class TensorPCA(_TensorBase):
    """Spiked p-tensor with snr lambda and i.i.d. unit-variance entries."""

    def __init__(self, dim, order=3, snr=1.0, entries="gaussian", theta=None):
        super().__init__(dim, theta)
        if order < 2:
            raise ValueError("tensor order must be >= 2")
        if not snr > 0:
            raise ValueError("snr must be > 0")
        if entries not in ENTRY_KINDS:
            raise ValueError(f"entries must be one of {ENTRY_KINDS}")
        self.order, self.snr, self.entries = int(order), float(snr), entries

    def _orders(self):
        return [self.order]

    def _weights(self):
        return [1.0]

    def config(self):
        return {"family": "tensor_pca", "dim": self.dim, "order": self.order,
                "snr": self.snr, "entries": self.entries}


class CompositeTensor(_TensorBase):
    """Pair of spiked tensors of orders p and q with loss w_p L_p + w_q L_q."""

    def __init__(self, dim, order_p=2, order_q=3, snr=1.0, weights=(1.0, 1.0),
                 entries="gaussian", theta=None):
        super().__init__(dim, theta)
        if min(order_p, order_q) < 2:
            raise ValueError("tensor orders must be >= 2")
        if not snr > 0:
            raise ValueError("snr must be > 0")
        if len(weights) != 2 or min(weights) <= 0:
            raise ValueError("weights must be two positive numbers")
        if entries not in ENTRY_KINDS:
            raise ValueError(f"entries must be one of {ENTRY_KINDS}")
        self.order_p, self.order_q = int(order_p), int(order_q)
        self.snr, self.weights, self.entries = float(snr), tuple(map(float, weights)), entries

    def _orders(self):
        return [self.order_p, self.order_q]

    def _weights(self):
        return list(self.weights)

    def config(self):
        return {"family": "composite_tensor", "dim": self.dim, "order_p": self.order_p,
                "order_q": self.order_q, "snr": self.snr, "weights": list(self.weights),
                "entries": self.entries}
