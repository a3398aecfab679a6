"""Online SGD on the sphere, the matching population dynamics, and diagnostics.

One step with step size delta in dimension N:

    X~ = x - (delta/N) * grad_sphere L(x; Y),     x' = X~ / |X~|.

With r = |X~| >= 1 and s = delta/N the latitude obeys

    m' - m = -s gradPhi.theta - s gradH.theta + (m - s gradL.theta)(1/r - 1)

which we book as ``drift - martingale + radial``: the martingale
accumulates +s gradH.theta, and the radial term is whatever closes the
identity exactly.

Samples are drawn in fixed blocks of ``block_size`` from the run's data
stream, so the first t samples of a run never depend on its step budget.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _kernels
from .hermite import PopulationProfile
from .models.base import Model, NonFiniteError, VectorModel
from .rng import run_streams
from .sphere import UnitVector, as_array, geodesic_point, sample_upper_half_sphere

__all__ = [
    "FixedCorrelation",
    "InequalityReport",
    "SGDConfig",
    "StepDiagnostics",
    "Trajectory",
    "UniformUpperHalf",
    "difference_inequality_check",
    "hitting_time",
    "initial_point",
    "martingale_scaling_probe",
    "run_online_sgd",
    "run_population_dynamics",
    "sgd_step",
]


@dataclass(frozen=True)
class UniformUpperHalf:
    """Uniform on the sphere conditioned on m >= 0."""


@dataclass(frozen=True)
class FixedCorrelation:
    """Random point at latitude exactly ``m0``."""

    m0: float

    def __post_init__(self):
        if not -1.0 <= self.m0 <= 1.0:
            raise ValueError("m0 must lie in [-1, 1]")


@dataclass(frozen=True)
class SGDConfig:
    dim: int
    step_size: float
    total_steps: int
    init: UniformUpperHalf | FixedCorrelation = UniformUpperHalf()
    record_stride: int | None = None
    thresholds: tuple[float, ...] = ()
    seed: int = 0
    run_index: int = 0
    diagnostics: bool = False
    stop_at_threshold: bool = False
    stop_below: float | None = None
    block_size: int = 256

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if not self.step_size >= 0 or not math.isfinite(self.step_size):
            raise ValueError("step size must be finite and >= 0")
        if self.total_steps < 0:
            raise ValueError("total_steps must be >= 0")
        th = tuple(float(t) for t in self.thresholds)
        if any(b <= a for a, b in zip(th, th[1:])):
            raise ValueError("thresholds must be strictly increasing")
        object.__setattr__(self, "thresholds", th)
        if self.record_stride is not None and self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")

    @classmethod
    def from_alpha(cls, dim: int, step_size: float, alpha: float, **kw) -> "SGDConfig":
        """Budget M = floor(alpha N)."""
        return cls(dim, step_size, int(math.floor(alpha * dim)), **kw)

    @property
    def alpha(self) -> float:
        return self.total_steps / self.dim

    @property
    def stride(self) -> int:
        if self.record_stride is not None:
            return self.record_stride
        return max(1, self.total_steps // 10_000)


@dataclass(frozen=True)
class StepDiagnostics:
    r: float
    drift: float
    martingale: float
    radial: float


@dataclass
class Trajectory:
    recorded_times: np.ndarray
    m_values: np.ndarray
    hitting_times: dict
    final_m: float
    steps_run: int
    decomposition: dict | None = None
    stop_reason: str = "budget"
    final_x: np.ndarray | None = field(default=None, repr=False)
    meta: dict = field(default_factory=dict)

    @property
    def m0(self) -> float:
        return float(self.m_values[0])

    def to_csv(self, path) -> None:
        """Columns step, m, drift_cum, martingale_cum, radial_cum, r_max."""
        dec = self.decomposition
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "m", "drift_cum", "martingale_cum", "radial_cum", "r_max"])
            for i, (t, m) in enumerate(zip(self.recorded_times, self.m_values)):
                row = [int(t), _fmt(m)]
                if dec is None:
                    row += ["", "", "", ""]
                else:
                    row += [_fmt(dec[k][i]) for k in ("drift", "martingale", "radial", "r_max")]
                w.writerow(row)

    def hitting_times_json(self) -> str:
        return json.dumps({_fmt(k): v for k, v in sorted(self.hitting_times.items())},
                          sort_keys=True)


def _fmt(v) -> str:
    return format(float(v), ".17g")


# ---------------------------------------------------------------------------
# initialization


def initial_point(init, model: Model, rng: np.random.Generator) -> np.ndarray:
    if isinstance(init, UniformUpperHalf):
        return np.array(sample_upper_half_sphere(rng, model.dim, model.theta).coords)
    if isinstance(init, FixedCorrelation):
        return np.array(geodesic_point(model.theta, init.m0, rng=rng).coords)
    raise TypeError(f"unknown init {init!r}")


# ---------------------------------------------------------------------------
# single step


def sgd_step(x, s, delta: float, model: Model) -> tuple[UnitVector, StepDiagnostics]:
    """One projected step followed by renormalization."""
    xa = as_array(x)
    n = xa.size
    if n != model.dim:
        raise ValueError("dimension mismatch between x and model")
    theta = model._theta_arr
    scale = delta / n
    g = model.euclid_gradient(xa, s)
    g = g - float(g @ xa) * xa
    if not np.all(np.isfinite(g)):
        raise NonFiniteError("non-finite gradient", s)
    xt = xa - scale * g
    r = math.sqrt(float(xt @ xt))
    x_new = xt / r
    m = float(xa @ theta)
    m_new = float(x_new @ theta)
    dphi = float(model.population_profile().phi_prime(m)) * (1.0 - m * m)
    drift = -scale * dphi
    mart = scale * (float(g @ theta) - dphi)
    radial = (m_new - m) - drift + mart
    return UnitVector._trusted(x_new), StepDiagnostics(r, drift, mart, radial)


# ---------------------------------------------------------------------------
# trajectories


class _Recorder:
    def __init__(self, cfg: SGDConfig, m0: float):
        self.stride = cfg.stride
        self.diag = cfg.diagnostics
        self.times = [0]
        self.ms = [m0]
        if self.diag:
            self.cols = {k: [0.0] for k in ("drift", "martingale", "radial")}
            self.cols["r_max"] = [1.0]
            self.cols["martingale_sup"] = [0.0]

    def push(self, t, m, dc=0.0, mc=0.0, rc=0.0, rmax=1.0, msup=0.0):
        if t == self.times[-1]:
            return
        self.times.append(t)
        self.ms.append(m)
        if self.diag:
            self.cols["drift"].append(dc)
            self.cols["martingale"].append(mc)
            self.cols["radial"].append(rc)
            self.cols["r_max"].append(rmax)
            self.cols["martingale_sup"].append(msup)

    def finish(self):
        dec = None
        if self.diag:
            dec = {k: np.asarray(v) for k, v in self.cols.items()}
        return np.asarray(self.times, dtype=np.int64), np.asarray(self.ms), dec


def _kernel_setup(model: Model, diag: bool):
    if not isinstance(model, VectorModel):
        return None
    spec = model.kernel_spec()
    if spec is None:
        return None
    phi_d = np.zeros(1)
    if diag:
        series = model.population_profile().extra.get("series")
        if series is None:
            return None
        phi_d = np.asarray(series.coeffs * series._j, dtype=float)[1:]
        if phi_d.size == 0:
            phi_d = np.zeros(1)
    kind, c, d = spec
    return int(kind), np.ascontiguousarray(c, dtype=float), np.ascontiguousarray(d, dtype=float), phi_d


def run_online_sgd(model: Model, cfg: SGDConfig, x0=None, data_rng=None,
                   engine: str = "auto") -> Trajectory:
    """Run M = cfg.total_steps online steps on fresh samples.

    The initial point and the data come from the two streams derived from
    (cfg.seed, cfg.run_index) unless given explicitly. Hitting times are
    checked at every step. ``engine`` selects the compiled loop ("auto",
    used when the model supports it) or the reference Python loop
    ("python"); both consume identical samples.
    """
    if cfg.dim != model.dim:
        raise ValueError(f"config dim {cfg.dim} != model dim {model.dim}")
    if engine not in ("auto", "python"):
        raise ValueError("engine must be 'auto' or 'python'")
    init_rng, default_data = run_streams(cfg.seed, cfg.run_index)
    if data_rng is None:
        data_rng = default_data
    x = initial_point(cfg.init, model, init_rng) if x0 is None else np.array(as_array(x0), dtype=float)
    x = np.ascontiguousarray(x / math.sqrt(float(x @ x)))

    theta = np.ascontiguousarray(model._theta_arr)
    e1_frame = model._reflect is None
    n = model.dim
    s = cfg.step_size / n
    M = cfg.total_steps
    stride = cfg.stride
    th = cfg.thresholds
    n_th = len(th)
    diag = cfg.diagnostics
    stop_below = -math.inf if cfg.stop_below is None else float(cfg.stop_below)
    kernel = _kernel_setup(model, diag) if engine == "auto" else None
    profile = model.population_profile() if diag else None
    vector = isinstance(model, VectorModel)

    m = float(x[0]) if e1_frame else float(x @ theta)
    rec = _Recorder(cfg, m)
    hits: dict = {}
    hit_idx = 0
    while hit_idx < n_th and m >= th[hit_idx]:
        hits[th[hit_idx]] = 0
        hit_idx += 1
    acc = np.array([0.0, 0.0, 0.0, 1.0, 0.0])
    rejections = 0
    t = 0
    stop_reason = "budget"
    done = M == 0
    if cfg.stop_at_threshold and n_th and hit_idx == n_th:
        done, stop_reason = True, "threshold"

    def fail(step):
        raise NonFiniteError(f"non-finite gradient at step {step}",
                             {"seed": cfg.seed, "run_index": cfg.run_index, "step": step})

    while not done:
        block = model.sample_block(data_rng, cfg.block_size)
        rejections += block.rejections
        i = 0
        if kernel is not None:
            V = block.vectors
            Y = block.responses if block.responses is not None else np.zeros(block.size)
            kind, c, d, phi_d = kernel
        while i < block.size and not done:
            next_th = th[hit_idx] if hit_idx < n_th else math.inf
            # run until the next recording point, the budget or a crossing
            limit = min(block.size, i + (M - t), i + (stride - t % stride))
            if kernel is not None:
                j, m, bad = _kernels.advance(x, V, Y, i, limit, s, kind, c, d, theta, e1_frame,
                                             m, next_th, stop_below, diag, acc, phi_d)
                t += j - i
                i = j
                if bad:
                    fail(t)
            else:
                while i < limit:
                    m_prev = m
                    if vector:
                        v = block.vectors[i]
                        z = float(v @ x)
                        y = None if block.responses is None else block.responses[i]
                        w = float(model.weights(z, y))
                        cc = s * w
                        xt = x * (1.0 + cc * z)
                        xt -= cc * v
                        if diag:
                            vth = float(v[0]) if e1_frame else float(v @ theta)
                            gl_theta = w * (vth - z * m)
                    else:
                        g = model.euclid_gradient(x, block.sample(i))
                        g = g - float(g @ x) * x
                        xt = x - s * g
                        if diag:
                            gl_theta = float(g @ theta)
                    i += 1
                    t += 1
                    r2 = float(xt @ xt)
                    if not math.isfinite(r2):
                        fail(t)
                    r = math.sqrt(r2)
                    x = xt / r
                    m = float(x[0]) if e1_frame else float(x @ theta)
                    if diag:
                        dphi = float(profile.phi_prime(m_prev)) * (1.0 - m_prev * m_prev)
                        d_inc = -s * dphi
                        mart_inc = s * (gl_theta - dphi)
                        acc[0] += d_inc
                        acc[1] += mart_inc
                        acc[2] += (m - m_prev) - d_inc + mart_inc
                        acc[3] = max(acc[3], r)
                        acc[4] = max(acc[4], abs(acc[1]))
                    if m >= next_th or m <= stop_below:
                        break
            assert acc[3] >= 1.0 - 1e-12, "radial factor below one"
            while hit_idx < n_th and m >= th[hit_idx]:
                hits[th[hit_idx]] = t
                hit_idx += 1
            if t >= M:
                done = True
            elif cfg.stop_at_threshold and n_th and hit_idx == n_th:
                done, stop_reason = True, "threshold"
            elif m <= stop_below:
                done, stop_reason = True, "below"
            if done or t % stride == 0:
                rec.push(t, m, *acc)

    times, ms, dec = rec.finish()
    if rejections and rejections > 1e-3 * max(t, 1):
        warnings.warn(f"{rejections} Poisson feature rejections in {t} steps; "
                      "responses are slightly biased", RuntimeWarning, stacklevel=2)
    return Trajectory(
        recorded_times=times,
        m_values=ms,
        hitting_times=hits,
        final_m=m,
        steps_run=t,
        decomposition=dec,
        stop_reason=stop_reason,
        final_x=x,
        meta={"seed": cfg.seed, "run_index": cfg.run_index, "rejections": rejections,
              "dim": n, "step_size": cfg.step_size, "stride": stride},
    )


def run_population_dynamics(profile: PopulationProfile, cfg: SGDConfig, m0: float) -> Trajectory:
    """Deterministic 1D recursion of the latitude under the population gradient."""
    if not -1.0 <= m0 <= 1.0:
        raise ValueError("m0 must lie in [-1, 1]")
    s = cfg.step_size / cfg.dim
    th = cfg.thresholds
    n_th = len(th)
    hit_idx = 0
    hits: dict = {}
    m = float(m0)
    rec = _Recorder(replace(cfg, diagnostics=False), m)
    next_th = th[0] if n_th else math.inf
    while m >= next_th:
        hits[th[hit_idx]] = 0
        hit_idx += 1
        next_th = th[hit_idx] if hit_idx < n_th else math.inf
    phi_prime = profile.phi_prime
    stride = cfg.stride
    M = cfg.total_steps
    for t in range(1, M + 1):
        q = 1.0 - m * m
        g = float(phi_prime(m)) * q
        m = (m - s * g) / math.sqrt(1.0 + s * s * g * g / q) if q > 0.0 else m
        while m >= next_th:
            hits[th[hit_idx]] = t
            hit_idx += 1
            next_th = th[hit_idx] if hit_idx < n_th else math.inf
        if t == M or t % stride == 0:
            rec.push(t, m)
    times, ms, _ = rec.finish()
    return Trajectory(times, ms, hits, m, M, None, "budget",
                      meta={"dim": cfg.dim, "step_size": cfg.step_size, "stride": stride})


def hitting_time(traj: Trajectory, eta: float, direction: str = "up") -> int | None:
    """First recorded step with m >= eta (up) or m <= eta (down)."""
    if not -1.0 < eta < 1.0:
        raise ValueError("eta must lie in (-1, 1)")
    if direction == "up":
        if eta in traj.hitting_times:
            return traj.hitting_times[eta]
        idx = np.nonzero(traj.m_values >= eta)[0]
    elif direction == "down":
        idx = np.nonzero(traj.m_values <= eta)[0]
    else:
        raise ValueError("direction must be 'up' or 'down'")
    return int(traj.recorded_times[idx[0]]) if idx.size else None


# ---------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class InequalityReport:
    fraction_satisfied: float
    worst_deficit: float
    steps_checked: int
    window_end: int
    holds_on_window: bool


def difference_inequality_check(traj: Trajectory, profile: PopulationProfile, eta: float,
                                gamma: float, step_size: float | None = None,
                                dim: int | None = None) -> InequalityReport:
    """Check m_t >= m_0/2 + (delta a / 8N) sum_{j<t} m_j^(k-1) on the stopped window.

    The window runs up to the first of: m dropping to gamma/(2 sqrt N),
    m reaching eta, or the end of the run. ``a`` is the profile's drift
    coefficient. Needs a trajectory recorded at every step.
    """
    if traj.decomposition is None:
        raise ValueError("difference inequality check needs the decomposition diagnostics")
    delta = traj.meta.get("step_size") if step_size is None else step_size
    n = traj.meta.get("dim") if dim is None else dim
    if delta is None or n is None:
        raise ValueError("step size and dimension are unknown for this trajectory")
    times = traj.recorded_times
    if times.size > 1 and np.any(np.diff(times) != 1):
        raise ValueError("trajectory must be recorded with stride 1")
    m = traj.m_values
    k = profile.info_exponent
    a = profile.drift_coefficient
    low = gamma / (2.0 * math.sqrt(n))
    end = m.size - 1
    below = np.nonzero(m[1:] <= low)[0]
    if below.size:
        end = min(end, int(below[0]) + 1)
    above = np.nonzero(m >= eta)[0]
    if above.size:
        end = min(end, int(above[0]))
    window = m[: end + 1]
    powers = window ** (k - 1) if k > 1 else np.ones_like(window)
    partial = np.concatenate(([0.0], np.cumsum(powers)[:-1]))
    rhs = window[0] / 2.0 + delta * a / (8.0 * n) * partial
    deficit = rhs - window
    ok = deficit <= 0.0
    return InequalityReport(
        fraction_satisfied=float(ok.mean()),
        worst_deficit=float(deficit.max()),
        steps_checked=int(window.size),
        window_end=int(times[end]),
        holds_on_window=bool(ok.all()),
    )


def martingale_scaling_probe(model: Model, cfg: SGDConfig, horizons: Sequence[int],
                             seeds: int = 20) -> list[tuple[int, float]]:
    """Median over seeds of sup_{t <= T} |M_t| for each horizon T."""
    horizons = sorted(int(h) for h in horizons)
    if not horizons or horizons[0] < 1:
        raise ValueError("horizons must be positive")
    stride = math.gcd(*horizons)
    run_cfg = replace(cfg, total_steps=horizons[-1], record_stride=stride, diagnostics=True,
                      stop_at_threshold=False, stop_below=None)
    sups = np.empty((seeds, len(horizons)))
    for j in range(seeds):
        traj = run_online_sgd(model, replace(run_cfg, run_index=cfg.run_index + j))
        col = traj.decomposition["martingale_sup"]
        index = {int(t): i for i, t in enumerate(traj.recorded_times)}
        sups[j] = [col[index[h]] for h in horizons]
    return [(h, float(np.median(sups[:, i]))) for i, h in enumerate(horizons)]
