"""Monte Carlo estimates of the moment bounds on the sample-wise error.

With H = L - Phi, we estimate at a set of probe points x

* E[(grad H . theta)^2]                    (should stay O(1) in N)
* E[|grad H|^(4 + iota)] / N^((4+iota)/2)  (should stay O(1) in N)
* E[|grad H|^2] / N                        (the second-moment analogue)

where gradients are spherical. Four probes sit on a geodesic at latitudes
0, 0.25, 0.5 and 0.9; the rest are uniform on the sphere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..sphere import geodesic_point, sample_uniform_sphere
from .base import Model

__all__ = ["AssumptionBEstimate", "verify_assumption_b", "PROBE_LATITUDES"]

PROBE_LATITUDES = (0.0, 0.25, 0.5, 0.9)


@dataclass(frozen=True)
class AssumptionBEstimate:
    c1_hat: float
    grad_moment_hat: float
    grad_second_moment_hat: float
    iota: float
    probe_count: int
    samples_per_probe: int
    standard_errors: dict
    probe_latitudes: tuple = ()
    per_probe: dict = field(default_factory=dict, compare=False)

    def as_dict(self) -> dict:
        return {
            "c1_hat": self.c1_hat,
            "grad_moment_hat": self.grad_moment_hat,
            "grad_second_moment_hat": self.grad_second_moment_hat,
            "iota": self.iota,
            "probe_count": self.probe_count,
            "samples_per_probe": self.samples_per_probe,
            "standard_errors": dict(self.standard_errors),
            "probe_latitudes": list(self.probe_latitudes),
        }


def _mean_se(v: np.ndarray) -> tuple[float, float]:
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def verify_assumption_b(model: Model, iota: float = 1.0, probes: int = 8,
                        samples_per_probe: int = 1000, rng=None) -> AssumptionBEstimate:
    if probes < 4:
        raise ValueError("need at least 4 probes")
    if samples_per_probe < 100:
        raise ValueError("need at least 100 samples per probe")
    if rng is None:
        raise ValueError("an explicit rng is required")
    n = model.dim
    theta = model._theta_arr
    profile = model.population_profile()
    direction = rng.standard_normal(n)
    points = [geodesic_point(model.theta, m, direction) for m in PROBE_LATITUDES]
    points += [sample_uniform_sphere(rng, n) for _ in range(probes - 4)]
    power = 4.0 + iota
    rows = {"c1": [], "grad_moment": [], "grad_second_moment": []}
    lats = []
    for x in points:
        xa = x.coords
        m = float(xa @ theta)
        lats.append(m)
        block = model.sample_block(rng, samples_per_probe)
        g = model.spherical_gradients(xa, block)
        g_pop = float(profile.phi_prime(m)) * (theta - m * xa)
        dh = g - g_pop[None, :]
        norms2 = np.einsum("ij,ij->i", dh, dh)
        rows["c1"].append(_mean_se((dh @ theta) ** 2))
        rows["grad_moment"].append(_mean_se(norms2 ** (power / 2.0) / n ** (power / 2.0)))
        rows["grad_second_moment"].append(_mean_se(norms2 / n))

    def worst(key):
        vals = rows[key]
        i = int(np.argmax([v[0] for v in vals]))
        return vals[i]

    c1, c1_se = worst("c1")
    gm, gm_se = worst("grad_moment")
    g2, g2_se = worst("grad_second_moment")
    return AssumptionBEstimate(
        c1_hat=c1,
        grad_moment_hat=gm,
        grad_second_moment_hat=g2,
        iota=float(iota),
        probe_count=len(points),
        samples_per_probe=int(samples_per_probe),
        standard_errors={"c1_hat": c1_se, "grad_moment_hat": gm_se,
                         "grad_second_moment_hat": g2_se},
        probe_latitudes=tuple(lats),
        per_probe={k: [v[0] for v in vals] for k, vals in rows.items()},
    )
