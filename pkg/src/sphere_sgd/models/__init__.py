"""Model zoo: samplers, per-sample losses, gradients and population profiles."""

from __future__ import annotations

from .assumption_b import AssumptionBEstimate, verify_assumption_b
from .base import Block, Model, NonFiniteError, Sample, VectorModel
from .glm import CanonicalGLM, LinearRegression
from .mixture import GaussianMixture
from .population import PopulationModel
from .supervised import SupervisedSingleLayer
from .tensor import CompositeTensor, TensorNoise, TensorPCA

__all__ = [
    "AssumptionBEstimate",
    "Block",
    "CanonicalGLM",
    "CompositeTensor",
    "GaussianMixture",
    "LinearRegression",
    "Model",
    "NonFiniteError",
    "PopulationModel",
    "Sample",
    "SupervisedSingleLayer",
    "TensorNoise",
    "TensorPCA",
    "VectorModel",
    "build_model",
    "population_profile",
    "sample",
    "loss",
    "euclid_gradient",
    "verify_assumption_b",
]

FAMILIES = {
    "supervised": SupervisedSingleLayer,
    "glm": CanonicalGLM,
    "linreg": LinearRegression,
    "tensor_pca": TensorPCA,
    "composite_tensor": CompositeTensor,
    "mixture": GaussianMixture,
}


def build_model(family: str, dim: int, **params) -> Model:
    """Construct a model from a family name and keyword parameters."""
    try:
        cls = FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown model family {family!r}; known: {sorted(FAMILIES)}") from None
    return cls(dim, **params)


# functional aliases
def sample(model: Model, rng):
    return model.sample(rng)


def loss(model: Model, x, s) -> float:
    return model.loss(x, s)


def euclid_gradient(model: Model, x, s):
    return model.euclid_gradient(x, s)


def population_profile(model: Model):
    return model.population_profile()
