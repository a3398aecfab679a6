"""Desk-scale experiments: hitting-time scans, LLN deviations, refutation
probabilities, search/descent splits and same-data comparisons.

A *model template* is either a dict ``{"family": ..., **params}`` (dimension
left out) or a callable ``N -> Model``. Step-size and sample-size rules are
numbers, ``{N: value}`` mappings, callables of N, power laws
``{"coef": c, "power": p}`` meaning c * N**p, or the string ``"theory"``.

Cells (N, seed) are independent. Seed j uses run index j at every N, so the
Gaussian draws behind the initial latitude are shared across the grid
(common random numbers); this makes comparisons across N paired.
"""

from __future__ import annotations

import csv
import json
import math
import time
from collections.abc import Mapping
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .dynamics import (
    FixedCorrelation,
    SGDConfig,
    Trajectory,
    UniformUpperHalf,
    hitting_time,
    run_online_sgd,
    run_population_dynamics,
)
from .models import build_model, verify_assumption_b
from .models.base import Model
from .rng import stream
from .theory import alpha_critical, recommended_delta

__all__ = [
    "ComparisonResult",
    "LLNResult",
    "RefutationResult",
    "ScanConfig",
    "ScanResult",
    "SplitResult",
    "fit_loglog_slope",
    "lln_experiment",
    "refutation_experiment",
    "resolve_rule",
    "same_data_comparison",
    "scaling_scan",
    "search_descent_split",
    "write_plot_data",
]

# key paths below the master seed for auxiliary streams
_LBAR_KEY = 1_000_001
_BOOT_KEY = 1_000_002


def _fmt(v) -> str:
    return format(float(v), ".17g")


def _json_num(v):
    v = float(v)
    return v if math.isfinite(v) else None


# ---------------------------------------------------------------------------
# rules and templates


def make_model(template, N: int) -> Model:
    if callable(template):
        return template(N)
    params = dict(template)
    family = params.pop("family")
    return build_model(family, N, **params)


def resolve_rule(rule, N: int) -> float:
    """Evaluate a numeric rule at N (``"theory"`` is resolved by the caller)."""
    if callable(rule):
        return float(rule(N))
    if isinstance(rule, Mapping):
        if "coef" in rule:
            return float(rule["coef"]) * float(N) ** float(rule.get("power", 0.0))
        for key in (N, str(N)):
            if key in rule:
                return float(rule[key])
        raise KeyError(f"rule has no value for N={N}")
    if isinstance(rule, str):
        raise ValueError(f"rule {rule!r} cannot be evaluated here")
    return float(rule)


def _quantile(values: np.ndarray, q: float) -> float:
    # linear interpolation that lets +inf (censored) propagate instead of nan
    x = np.sort(np.asarray(values, dtype=float))
    pos = q * (x.size - 1)
    lo, hi = int(math.floor(pos)), int(math.ceil(pos))
    if not math.isfinite(x[hi]):
        return math.inf
    return float(x[lo] + (x[hi] - x[lo]) * (pos - lo))


# ---------------------------------------------------------------------------
# slope fitting


def fit_loglog_slope(pairs: Sequence[tuple[float, float]], samples: Mapping | None = None,
                     n_boot: int = 1000, level: float = 0.9,
                     seed: int = 0) -> tuple[float, float, tuple[float, float]]:
    """Least squares of log(statistic) on log(N) with a bootstrap CI.

    With ``samples`` ({N: per-seed values}, equal lengths) the bootstrap
    resamples seed indices jointly across N and refits the medians;
    otherwise it resamples the pairs.
    """
    if len(pairs) < 3:
        raise ValueError("need at least 3 (N, statistic) pairs")
    ns = np.array([p[0] for p in pairs], dtype=float)
    ys = np.array([p[1] for p in pairs], dtype=float)
    if np.any(ns <= 0) or np.any(~(ys > 0)) or not np.all(np.isfinite(ys)):
        raise ValueError("slope fit needs positive finite values")
    lx, ly = np.log(ns), np.log(ys)
    slope, intercept = np.polyfit(lx, ly, 1)
    rng = stream(seed, _BOOT_KEY)
    boots = []
    if samples is not None:
        mat = np.array([np.asarray(samples[n] if n in samples else samples[int(n)], dtype=float)
                        for n in [p[0] for p in pairs]])
        n_seeds = mat.shape[1]
        for _ in range(n_boot):
            idx = rng.integers(0, n_seeds, size=n_seeds)
            med = np.median(mat[:, idx], axis=1)
            if np.all(np.isfinite(med)) and np.all(med > 0):
                boots.append(np.polyfit(lx, np.log(med), 1)[0])
    else:
        for _ in range(n_boot):
            idx = rng.integers(0, lx.size, size=lx.size)
            if np.unique(lx[idx]).size < 2:
                continue
            boots.append(np.polyfit(lx[idx], ly[idx], 1)[0])
    if boots:
        tail = (1.0 - level) / 2.0
        lo, hi = np.quantile(boots, [tail, 1.0 - tail])
        # a percentile interval can miss a point estimate that sits on a
        # degenerate bootstrap distribution; widen to keep it inside
        ci = (float(min(lo, slope)), float(max(hi, slope)))
    else:
        ci = (math.nan, math.nan)
    return float(slope), float(intercept), ci


# ---------------------------------------------------------------------------
# scaling scan


@dataclass(frozen=True)
class ScanConfig:
    """One hitting-time scan over a grid of dimensions.

    ``alpha_rule=None`` uses the budget M = ceil(c_budget alpha_c (log N)^2 N).
    ``delta_rule="theory"`` asks :func:`theory.recommended_delta` with
    alpha = M/N; ``lbar`` is then estimated by Monte Carlo unless given.
    ``descent_eta`` adds the thresholds descent_eta and 1 - descent_eta so
    the search/descent split can be read off the same runs.
    """

    model: Any
    N_grid: tuple[int, ...]
    seeds_per_cell: int = 20
    eta: float = 0.5
    delta_rule: Any = "theory"
    alpha_rule: Any = None
    c_budget: float = 20.0
    master_seed: int = 0
    descent_eta: float | None = None
    lbar: float | None = None
    workers: int = 1

    def __post_init__(self):
        grid = tuple(int(n) for n in self.N_grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("N_grid must be strictly increasing")
        if grid[0] < 3:
            raise ValueError("N_grid entries must be >= 3")
        object.__setattr__(self, "N_grid", grid)
        if self.seeds_per_cell < 5:
            raise ValueError("seeds_per_cell must be >= 5")
        if not 0.0 < self.eta < 1.0:
            raise ValueError("eta must lie in (0, 1)")
        if self.descent_eta is not None and not 0.0 < self.descent_eta < 0.5:
            raise ValueError("descent_eta must lie in (0, 1/2)")
        if not self.c_budget > 0:
            raise ValueError("c_budget must be > 0")

    def thresholds(self) -> tuple[float, ...]:
        th = {float(self.eta)}
        if self.descent_eta is not None:
            th |= {float(self.descent_eta), 1.0 - float(self.descent_eta)}
        return tuple(sorted(th))

    def to_dict(self) -> dict:
        out = asdict(self)
        if callable(self.model):
            out["model"] = repr(self.model)
        out["N_grid"] = list(self.N_grid)
        return out


@dataclass
class ScanResult:
    k: int
    eta: float
    cells: list[dict]
    per_N: list[dict]
    slope: float
    intercept: float
    ci: tuple[float, float]
    scaling_observed: bool
    flags: list[str] = field(default_factory=list)
    runtime: dict = field(default_factory=dict)

    def taus(self, N: int) -> np.ndarray:
        rows = sorted((c for c in self.cells if c["N"] == N), key=lambda c: c["seed"])
        return np.array([c["tau"] for c in rows], dtype=float)

    def hits(self, N: int) -> list[dict]:
        rows = sorted((c for c in self.cells if c["N"] == N), key=lambda c: c["seed"])
        return [c["hits"] for c in rows]

    def summary(self) -> dict:
        return {
            "k": self.k,
            "eta": self.eta,
            "slope": _json_num(self.slope),
            "intercept": _json_num(self.intercept),
            "ci90": [_json_num(self.ci[0]), _json_num(self.ci[1])],
            "scaling_observed": self.scaling_observed,
            "flags": list(self.flags),
            "per_N": [{k: (_json_num(v) if isinstance(v, float) else v) for k, v in row.items()}
                      for row in self.per_N],
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["N", "seed", "tau", "censored", "final_m"])
            for c in sorted(self.cells, key=lambda c: (c["N"], c["seed"])):
                w.writerow([c["N"], c["seed"], _fmt(c["tau"]), int(c["censored"]),
                            _fmt(c["final_m"])])

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, sort_keys=True, indent=2)
            fh.write("\n")

    def write_plot_data(self, path) -> None:
        rows = [(r["N"], r["q50"], r["q25"], r["q75"]) for r in self.per_N]
        write_plot_data(path, rows)


def write_plot_data(path, rows: Sequence[tuple[float, float, float, float]]) -> None:
    """CSV with columns x, y, y_lo, y_hi."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "y_lo", "y_hi"])
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _run_cell(task: dict) -> dict:
    model = make_model(task["model"], task["N"])
    cfg = SGDConfig(task["N"], task["delta"], task["budget"], init=UniformUpperHalf(),
                    thresholds=task["thresholds"], seed=task["master_seed"],
                    run_index=task["seed"], stop_at_threshold=True,
                    record_stride=max(1, task["budget"]))
    traj = run_online_sgd(model, cfg)
    tau = traj.hitting_times.get(task["eta"])
    return {
        "N": task["N"],
        "seed": task["seed"],
        "tau": math.inf if tau is None else float(tau),
        "censored": tau is None,
        "final_m": traj.final_m,
        "steps_run": traj.steps_run,
        "hits": {float(k): int(v) for k, v in traj.hitting_times.items()},
    }


def _map(fn, tasks, workers):
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def estimate_lbar(template, N: int, master_seed: int, samples_per_probe: int = 2000) -> float:
    """Monte Carlo stand-in for the gradient bound: worst E|grad H|^2 / N over probes."""
    est = verify_assumption_b(make_model(template, N), samples_per_probe=samples_per_probe,
                              rng=stream(master_seed, _LBAR_KEY, N))
    return est.grad_second_moment_hat


def scan_plan(cfg: ScanConfig) -> list[dict]:
    """Per-N (delta, budget) resolved from the rules."""
    profile = make_model(cfg.model, cfg.N_grid[0]).population_profile()
    if not profile.assumption_a_holds:
        raise ValueError(f"profile {profile.name} fails the Assumption-A check")
    k, a = profile.info_exponent, profile.drift_coefficient
    plan = []
    for N in cfg.N_grid:
        if cfg.alpha_rule is None:
            budget = math.ceil(cfg.c_budget * alpha_critical(N, k) * math.log(N) ** 2 * N)
        else:
            budget = int(math.floor(resolve_rule(cfg.alpha_rule, N) * N))
        if cfg.delta_rule == "theory":
            lbar = cfg.lbar if cfg.lbar is not None else estimate_lbar(cfg.model, N, cfg.master_seed)
            delta = recommended_delta(N, k, budget / N, a, lbar)
        else:
            delta = resolve_rule(cfg.delta_rule, N)
        plan.append({"N": N, "delta": delta, "budget": budget})
    return plan


def scaling_scan(cfg: ScanConfig) -> ScanResult:
    """Run every (N, seed) cell to the first crossing of eta or the budget.

    Censored cells count as +inf. N values whose median is censored are
    flagged and left out of the slope fit; if every seed is censored at
    some N the result is marked ``scaling_observed=False``.
    """
    start = time.perf_counter()
    profile = make_model(cfg.model, cfg.N_grid[0]).population_profile()
    k = profile.info_exponent
    plan = scan_plan(cfg)
    th = cfg.thresholds()
    tasks = [{"model": cfg.model, "N": p["N"], "delta": p["delta"], "budget": p["budget"],
              "thresholds": th, "eta": float(cfg.eta), "master_seed": cfg.master_seed,
              "seed": j}
             for p in plan for j in range(cfg.seeds_per_cell)]
    cells = _map(_run_cell, tasks, cfg.workers)

    flags: list[str] = []
    per_N = []
    observed = True
    fit_pairs, samples = [], {}
    for p in plan:
        N = p["N"]
        taus = np.array([c["tau"] for c in sorted(cells, key=lambda c: c["seed"]) if c["N"] == N])
        n_cens = int(np.sum(~np.isfinite(taus)))
        q25, q50, q75 = (_quantile(taus, q) for q in (0.25, 0.5, 0.75))
        row = {"N": N, "delta": p["delta"], "budget": p["budget"], "q25": q25, "q50": q50,
               "q75": q75, "censored": n_cens, "median_over_NlogN": q50 / (N * math.log(N))}
        per_N.append(row)
        if n_cens == taus.size:
            observed = False
            flags.append(f"all seeds censored at N={N}")
        elif n_cens:
            flags.append(f"{n_cens} censored at N={N}")
        if math.isfinite(q50) and q50 > 0:
            fit_pairs.append((N, q50))
            samples[N] = taus
        else:
            flags.append(f"median censored at N={N}; excluded from fit")
    if len(fit_pairs) >= 3:
        slope, intercept, ci = fit_loglog_slope(fit_pairs, samples, seed=cfg.master_seed)
    else:
        slope, intercept, ci = math.nan, math.nan, (math.nan, math.nan)
        observed = False
        flags.append("fewer than 3 uncensored medians; no slope")
    if not observed:
        flags.append("scaling not observed")
    return ScanResult(k, float(cfg.eta), cells, per_N, slope, intercept, ci, observed, flags,
                      runtime={"seconds": time.perf_counter() - start,
                               "steps": int(sum(c["steps_run"] for c in cells))})


# ---------------------------------------------------------------------------
# law of large numbers


@dataclass
class LLNResult:
    m0: float
    rows: list[dict]

    def medians(self) -> list[float]:
        return [r["median"] for r in self.rows]

    def summary(self) -> dict:
        return {"m0": self.m0, "rows": [{k: v for k, v in r.items() if k != "deviations"}
                                        for r in self.rows]}


def lln_experiment(model, N_grid: Sequence[int], m0: float, delta_rule, alpha, seeds: int = 20,
                   master_seed: int = 0, points: int = 2000) -> LLNResult:
    """Sup-deviation of SGD from the population recursion, per N.

    Both paths are compared on a common grid of about ``points`` recorded
    steps. The rule pair must keep alpha delta^2 <= 0.05 at every N; this is
    checked before anything runs.
    """
    if not 0.0 < m0 < 1.0:
        raise ValueError("m0 must lie in (0, 1)")
    plan = []
    for N in N_grid:
        delta = resolve_rule(delta_rule, N)
        a = resolve_rule(alpha, N)
        if a * delta ** 2 > 0.05:
            raise ValueError(f"alpha delta^2 = {a * delta ** 2:.3g} > 0.05 at N={N}; "
                             "the deviation does not vanish along this rule")
        plan.append((int(N), delta, a))
    rows = []
    for N, delta, a in plan:
        mdl = make_model(model, N)
        budget = int(math.floor(a * N))
        stride = max(1, budget // points)
        pop = run_population_dynamics(
            mdl.population_profile(), SGDConfig(N, delta, budget, record_stride=stride), m0)
        devs = np.empty(seeds)
        for j in range(seeds):
            cfg = SGDConfig(N, delta, budget, init=FixedCorrelation(m0), record_stride=stride,
                            seed=master_seed, run_index=j)
            traj = run_online_sgd(mdl, cfg)
            devs[j] = float(np.max(np.abs(traj.m_values - pop.m_values)))
        rows.append({"N": N, "delta": delta, "alpha": a, "alpha_delta2": a * delta ** 2,
                     "steps": budget, "median": float(np.median(devs)),
                     "q25": float(np.quantile(devs, 0.25)), "q75": float(np.quantile(devs, 0.75)),
                     "deviations": devs.tolist()})
    return LLNResult(float(m0), rows)


# ---------------------------------------------------------------------------
# refutation


@dataclass
class RefutationResult:
    N: int
    alpha: float
    delta: float
    eta: float
    exceeded: np.ndarray
    final_m: np.ndarray

    @property
    def exceed_fraction(self) -> float:
        return float(np.mean(self.exceeded))

    def recovered_fraction(self, level: float) -> float:
        return float(np.mean(self.final_m > level))

    def summary(self) -> dict:
        return {"N": self.N, "alpha": self.alpha, "delta": self.delta, "eta": self.eta,
                "exceed_fraction": self.exceed_fraction,
                "final_m": [float(v) for v in self.final_m]}


def refutation_experiment(model, N: int, alpha: float | None = None, delta: float = 0.2,
                          eta: float = 0.1, seeds: int = 50,
                          master_seed: int = 0) -> RefutationResult:
    """Fraction of runs from the uniform upper half whose running max of m exceeds eta.

    The default sample size is alpha_c/10 for k >= 2 and 0.2 for k = 1.
    """
    mdl = make_model(model, N)
    if alpha is None:
        k = mdl.population_profile().info_exponent
        alpha = 0.2 if k == 1 else alpha_critical(N, k) / 10.0
    budget = int(math.floor(alpha * N))
    exceeded = np.zeros(seeds, dtype=bool)
    final = np.empty(seeds)
    for j in range(seeds):
        cfg = SGDConfig(N, delta, budget, thresholds=(eta,), seed=master_seed, run_index=j,
                        record_stride=max(1, budget))
        traj = run_online_sgd(mdl, cfg)
        exceeded[j] = eta in traj.hitting_times
        final[j] = traj.final_m
    return RefutationResult(int(N), float(alpha), float(delta), float(eta), exceeded, final)


# ---------------------------------------------------------------------------
# search and descent


@dataclass
class SplitResult:
    eta: float
    rows: list[tuple[int, int, float]]
    excluded: int

    @property
    def descent_fractions(self) -> np.ndarray:
        return np.array([r[2] for r in self.rows])

    def median_descent_fraction(self) -> float:
        return float(np.median(self.descent_fractions)) if self.rows else math.nan


def _hit(run, level):
    if isinstance(run, Trajectory):
        return hitting_time(run, level)
    return run.get(level)


def search_descent_split(trajectories: Sequence, eta: float) -> SplitResult:
    """Split each run at the first crossings of eta and 1 - eta.

    Runs are Trajectory objects or hitting-time dicts. A run missing either
    crossing is excluded and counted.
    """
    if not 0.0 < eta < 0.5:
        raise ValueError("eta must lie in (0, 1/2)")
    rows, excluded = [], 0
    for run in trajectories:
        t_up, t_top = _hit(run, eta), _hit(run, 1.0 - eta)
        if t_up is None or t_top is None or t_top <= 0:
            excluded += 1
            continue
        rows.append((int(t_up), int(t_top - t_up), (t_top - t_up) / t_top))
    return SplitResult(float(eta), rows, excluded)


# ---------------------------------------------------------------------------
# same-data comparison


@dataclass
class ComparisonResult:
    activations: list[str]
    eta: float
    taus: np.ndarray
    trajectories: list[list[Trajectory]] = field(repr=False, default_factory=list)

    def ordering_fraction(self, order: Sequence[int] | None = None) -> float:
        """Fraction of seeds whose hitting times increase strictly along ``order``."""
        order = list(range(len(self.activations))) if order is None else list(order)
        t = self.taus[:, order]
        ok = np.all(t[:, 1:] > t[:, :-1], axis=1) & np.isfinite(t[:, :-1]).all(axis=1)
        return float(np.mean(ok))

    def summary(self) -> dict:
        return {"activations": self.activations, "eta": self.eta,
                "taus": [[_json_num(v) for v in row] for row in self.taus],
                "ordering_fraction": self.ordering_fraction()}


def same_data_comparison(activations: Sequence, N: int, alpha: float, delta: float,
                         master_seed: int = 0, seeds: int = 20, eta: float = 0.9,
                         keep_trajectories: bool = False) -> ComparisonResult:
    """Feed identical feature streams to supervised models with different activations.

    Seed j gives the same initial point and the same features to every
    activation; each activation's own teacher produces the responses.
    """
    models = [build_model("supervised", N, activation=act) for act in activations]
    names = [m.activation.name for m in models]
    budget = int(math.floor(alpha * N))
    taus = np.empty((seeds, len(models)))
    trajs = []
    for j in range(seeds):
        row = []
        for i, mdl in enumerate(models):
            cfg = SGDConfig(N, delta, budget, thresholds=(eta,), stop_at_threshold=True,
                            seed=master_seed, run_index=j)
            traj = run_online_sgd(mdl, cfg)
            t = traj.hitting_times.get(eta)
            taus[j, i] = math.inf if t is None else t
            row.append(traj)
        if keep_trajectories:
            trajs.append(row)
    return ComparisonResult(names, float(eta), taus, trajs)
