"""Closed-form predictions: sample-complexity thresholds, step sizes,
weak-recovery times and the envelopes that bracket a trajectory.

``a`` is always a profile's drift coefficient, i.e. -phi'(m) ~ a m^(k-1)
near the equator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

__all__ = [
    "BlowupError",
    "EmptyWindowError",
    "RegimePrediction",
    "alpha_critical",
    "bihari_lasalle_envelope",
    "gronwall_envelope",
    "predicted_weak_recovery_time",
    "recommended_delta",
    "refutation_envelope",
    "regime_prediction",
]


class EmptyWindowError(ValueError):
    """No step size satisfies 1/alpha << delta << 1/sqrt(alpha) at this alpha."""


class BlowupError(ArithmeticError):
    def __init__(self, t_blow: float, t: float):
        super().__init__(f"envelope blows up at t = {t_blow:.6g} (asked for t = {t:g})")
        self.t_blow = t_blow
        self.t = t


def _positive(**kw):
    for name, v in kw.items():
        if not (v > 0 and math.isfinite(v)):
            raise ValueError(f"{name} must be positive and finite, got {v!r}")


def alpha_critical(N: int, k: int) -> float:
    if N < 3 or k < 1:
        raise ValueError("need N >= 3 and k >= 1")
    if k == 1:
        return 1.0
    if k == 2:
        return math.log(N)
    return float(N) ** (k - 2)


def recommended_delta(N: int, k: int, alpha: float, drift_coefficient: float, lbar: float,
                      K: float = 4.0, gamma: float = 1.0) -> float:
    """Largest admissible step size, capped at 1/(sqrt(alpha) log N).

    Raises :class:`EmptyWindowError` when the result drops below 2/alpha.
    """
    _positive(N=N, k=k, alpha=alpha, drift_coefficient=drift_coefficient, lbar=lbar, K=K,
              gamma=gamma)
    a = drift_coefficient
    if k == 1:
        bar = a / (4.0 * K * lbar)
    else:
        bar = a * gamma ** (k - 2) / (K * lbar * N ** ((k - 2) / 2.0) * math.log(N))
    delta = min(bar, 1.0 / (math.sqrt(alpha) * math.log(N)))
    if delta < 2.0 / alpha:
        raise EmptyWindowError(
            f"step-size window is empty at alpha={alpha:g}, N={N}: delta={delta:.3g} < 2/alpha; "
            "increase alpha")
    return delta


def gronwall_envelope(a: float, b: float, t: int) -> float:
    """a (1 + b)^t, the solution of m_t = a + b sum_{j<t} m_j."""
    if a < 0 or b < 0:
        raise ValueError("a and b must be >= 0")
    return a * (1 + b) ** t


def bihari_lasalle_envelope(a: float, b: float, k: int, t: float) -> float:
    """a (1 - b (k-2) a^(k-2) t)^(-1/(k-2)) before the blowup time."""
    if k < 3:
        raise ValueError("the Bihari-LaSalle envelope needs k >= 3")
    if a < 0 or b < 0:
        raise ValueError("a and b must be >= 0")
    rate = b * (k - 2) * a ** (k - 2)
    base = 1.0 - rate * t
    if base <= 0.0:
        raise BlowupError(1.0 / rate, t)
    return a * base ** (-1.0 / (k - 2))


def predicted_weak_recovery_time(k: int, N: int, delta: float, eta: float, m0: float,
                                 drift_coefficient: float) -> float:
    """Steps for the lower envelope started at m0 to reach eta.

    k = 1 and k = 2 use the closed forms; for k >= 3 the exact crossing
    time of the superlinear envelope, which tends to the blowup time
    8N / (delta a (k-2) m0^(k-2)) as m0 / eta -> 0.
    """
    _positive(N=N, delta=delta, eta=eta, m0=m0, drift_coefficient=drift_coefficient)
    if k < 1:
        raise ValueError("k must be >= 1")
    rate = delta * drift_coefficient / (8.0 * N)
    if k == 1:
        return float(math.ceil(eta / rate))
    if k == 2:
        return float(max(0, math.ceil(math.log(2.0 * eta / m0) / rate)))
    if m0 >= eta:
        return 0.0
    t_blow = 1.0 / (rate * (k - 2) * m0 ** (k - 2))
    return float(math.ceil(t_blow * (1.0 - (m0 / eta) ** (k - 2))))


def refutation_envelope(k: int, N: int, delta: float, d: float, drift_coefficient: float,
                        t: float) -> float:
    """Upper envelope for |m_t| started within d/sqrt(N) of the equator."""
    _positive(N=N, delta=delta, d=d, drift_coefficient=drift_coefficient)
    start = 2.0 * d / math.sqrt(N)
    rate = 2.0 * delta * drift_coefficient / N
    if k == 1:
        return start + rate * t
    if k == 2:
        return start * math.exp(rate * t)
    return bihari_lasalle_envelope(start, rate, k, t)


def _lower_envelope(k, m0, rate):
    if k == 1:
        return lambda t: m0 / 2.0 + rate * t
    if k == 2:
        return lambda t: m0 / 2.0 * math.exp(rate * t)
    return lambda t: bihari_lasalle_envelope(m0, rate, k, t)


@dataclass(frozen=True)
class RegimePrediction:
    k: int
    N: int
    alpha_critical: float
    delta_recommended: float | None
    t_star: float
    m0: float
    eta: float
    envelope: Callable[[float], float] = field(repr=False, compare=False)
    refutation_envelope: Callable[[float], float] = field(repr=False, compare=False)

    def as_dict(self) -> dict:
        return {"k": self.k, "N": self.N, "alpha_critical": self.alpha_critical,
                "delta_recommended": self.delta_recommended, "t_star": self.t_star,
                "m0": self.m0, "eta": self.eta}


def regime_prediction(k: int, N: int, delta: float, eta: float, drift_coefficient: float,
                      m0: float | None = None, alpha: float | None = None,
                      lbar: float | None = None, d: float = 1.0) -> RegimePrediction:
    """Bundle the threshold, step size, recovery time and envelopes for one regime.

    ``m0`` defaults to 1/sqrt(N), the typical latitude of a uniform start.
    The recommended step size is filled in only when ``alpha`` and ``lbar``
    are given.
    """
    m0 = 1.0 / math.sqrt(N) if m0 is None else m0
    rec = None
    if alpha is not None and lbar is not None:
        rec = recommended_delta(N, k, alpha, drift_coefficient, lbar)
    rate = delta * drift_coefficient / (8.0 * N)
    return RegimePrediction(
        k=k, N=N,
        alpha_critical=alpha_critical(N, k),
        delta_recommended=rec,
        t_star=predicted_weak_recovery_time(k, N, delta, eta, m0, drift_coefficient),
        m0=m0, eta=eta,
        envelope=_lower_envelope(k, m0, rate),
        refutation_envelope=lambda t: refutation_envelope(k, N, delta, d, drift_coefficient, t),
    )
