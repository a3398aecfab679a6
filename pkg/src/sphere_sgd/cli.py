"""Command-line entry point.

    sphere-sgd <command> [--config FILE] [flags]

Commands: hermite, predict, simulate, scan, lln, refute, compare, verify-b.
A config file (YAML or JSON) holds the blocks ``model``, ``dynamics``,
``experiment`` and ``theory`` plus top-level ``master_seed`` and ``output``;
flags override file values and ``--set block.key=value`` reaches any field.
A run manifest written by a previous run is also accepted as a config.

Exit codes: 0 ok, 2 config error, 3 numeric failure, 4 scaling not observed.
"""

from __future__ import annotations

import argparse
import copy
import datetime as _dt
import hashlib
import inspect
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import __version__
from .dynamics import FixedCorrelation, SGDConfig, UniformUpperHalf, run_online_sgd
from .experiments import (
    ScanConfig,
    estimate_lbar,
    lln_experiment,
    make_model,
    refutation_experiment,
    same_data_comparison,
    scaling_scan,
)
from .hermite import hermite_profile
from .models import FAMILIES, NonFiniteError, verify_assumption_b
from .rng import stream
from .theory import BlowupError, alpha_critical, recommended_delta, regime_prediction

__all__ = ["ConfigError", "RunConfig", "execute", "main", "parse_config"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_NO_SCALING = 0, 2, 3, 4
COMMANDS = ("hermite", "predict", "simulate", "scan", "lln", "refute", "compare", "verify-b")
ENV_OUTPUT, ENV_THREADS = "SPHERE_SGD_OUTPUT", "SPHERE_SGD_THREADS"
_VERIFY_B_KEY = 1_000_003

SCHEMA: dict[str, dict] = {
    "dynamics": {
        "N": None, "delta": None, "alpha": None, "init": "uniform", "thresholds": [],
        "stride": None, "diagnostics": False, "lbar": None,
    },
    "experiment": {
        "N_grid": None, "N": None, "seeds": 20, "eta": None, "c_budget": 20.0,
        "descent_eta": None, "delta_rule": "theory", "alpha_rule": None, "delta": None,
        "alpha": None, "m0": 0.5, "activations": None, "lbar": None, "iota": 1.0,
        "probes": 8, "samples_per_probe": 1000, "truncation": None,
    },
    "theory": {
        "k": None, "N": None, "delta": 1.0, "eta": 0.5, "m0": None,
        "drift_coefficient": None, "alpha": None, "lbar": None,
    },
}
MODEL_DEFAULTS = {"family": "supervised"}

REQUIRED = {
    "hermite": ["model.activation"],
    "predict": ["theory.N"],
    "simulate": ["dynamics.N", "dynamics.delta", "dynamics.alpha"],
    "scan": ["experiment.N_grid"],
    "lln": ["experiment.N_grid", "experiment.delta_rule", "experiment.alpha_rule"],
    "refute": ["experiment.N", "experiment.delta"],
    "compare": ["experiment.activations", "experiment.N", "experiment.alpha",
                "experiment.delta"],
    "verify-b": ["dynamics.N"],
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    master_seed: int
    output: str
    model: dict
    dynamics: dict
    experiment: dict
    theory: dict
    threads: int = 1

    def to_dict(self) -> dict:
        return {"command": self.command, "master_seed": self.master_seed, "output": self.output,
                "model": self.model, "dynamics": self.dynamics, "experiment": self.experiment,
                "theory": self.theory, "threads": self.threads}


@dataclass
class Outcome:
    status: int
    files: list[Path]
    resolved: dict = field(default_factory=dict)
    seeds: list = field(default_factory=list)
    stdout: str | None = None


# ---------------------------------------------------------------------------
# parsing


def _load_file(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    text = p.read_text()
    try:
        data = json.loads(text) if p.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from None
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{p}: top level must be a mapping")
    if "artifact_version" in data and "config" in data:
        data = data["config"]
    return data


def _family_params(family: str) -> set[str]:
    cls = FAMILIES.get(family)
    if cls is None:
        raise ConfigError(f"model.family: unknown family {family!r}; known: {sorted(FAMILIES)}")
    params = set(inspect.signature(cls.__init__).parameters) - {"self", "dim"}
    return params


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    out.update(override)
    return out


def parse_config(path=None, overrides: dict | None = None, command: str | None = None) -> RunConfig:
    """Merge defaults, an optional file and flag overrides into a validated RunConfig.

    ``overrides`` maps dotted paths ("dynamics.delta") or top-level keys to
    values. Unknown fields raise :class:`ConfigError` naming the field.
    """
    raw = _load_file(path) if path is not None else {}
    raw = copy.deepcopy(raw)
    for dotted, val in (overrides or {}).items():
        node = raw
        parts = dotted.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"{dotted}: {part} is not a block")
        node[parts[-1]] = val

    top = {"command", "master_seed", "output", "model", "dynamics", "experiment", "theory",
           "threads"}
    for key in raw:
        if key not in top:
            raise ConfigError(f"unknown field {key!r} at top level")
    cmd = command or raw.get("command")
    if cmd is None:
        raise ConfigError("missing required field 'command'")
    if cmd not in COMMANDS:
        raise ConfigError(f"command: unknown command {cmd!r}; known: {list(COMMANDS)}")
    if "master_seed" not in raw:
        raise ConfigError("missing required field 'master_seed' (no implicit seeding)")
    try:
        seed = int(raw["master_seed"])
    except (TypeError, ValueError):
        raise ConfigError("master_seed must be an integer") from None
    if seed < 0:
        raise ConfigError("master_seed must be >= 0")

    blocks = {}
    for name, defaults in SCHEMA.items():
        given = raw.get(name) or {}
        if not isinstance(given, dict):
            raise ConfigError(f"{name}: must be a mapping")
        for key in given:
            if key not in defaults:
                raise ConfigError(f"unknown field {key!r} in block '{name}'")
        blocks[name] = _merge(defaults, given)

    model = _merge(MODEL_DEFAULTS, raw.get("model") or {})
    allowed = _family_params(model["family"]) | {"family"}
    for key in model:
        if key not in allowed:
            raise ConfigError(f"unknown field {key!r} in block 'model' for family "
                              f"{model['family']!r}")

    merged = {"model": model, **blocks}
    for dotted in REQUIRED[cmd]:
        block, key = dotted.split(".")
        if merged[block].get(key) is None:
            raise ConfigError(f"missing required field '{dotted}' for command {cmd!r}")

    threads = raw.get("threads", os.environ.get(ENV_THREADS, 1))
    try:
        threads = int(threads)
    except (TypeError, ValueError):
        raise ConfigError("threads must be an integer") from None
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    output = raw.get("output") or os.environ.get(ENV_OUTPUT) or f"runs/{cmd}"
    return RunConfig(cmd, seed, str(output), model, blocks["dynamics"], blocks["experiment"],
                     blocks["theory"], threads)


# ---------------------------------------------------------------------------
# execution helpers


def _template(cfg: RunConfig) -> dict:
    return {k: v for k, v in cfg.model.items() if v is not None}


def _resolve_simulation(cfg: RunConfig, model) -> tuple[float, float, dict]:
    dyn = cfg.dynamics
    N = int(dyn["N"])
    prof = model.population_profile()
    k, a = prof.info_exponent, prof.drift_coefficient
    resolved = {}
    alpha = dyn["alpha"]
    if alpha == "theory":
        alpha = 20.0 * alpha_critical(N, k) * math.log(N) ** 2
        resolved["alpha"] = alpha
    alpha = float(alpha)
    delta = dyn["delta"]
    if delta == "theory":
        lbar = dyn["lbar"]
        if lbar is None:
            lbar = estimate_lbar(_template(cfg), N, cfg.master_seed)
            resolved["lbar"] = lbar
        delta = recommended_delta(N, k, alpha, a, float(lbar))
        resolved["delta"] = delta
    return float(delta), alpha, resolved


def _init(spec):
    if spec in ("uniform", None):
        return UniformUpperHalf()
    return FixedCorrelation(float(spec))


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _fmt(v) -> str:
    return format(float(v), ".17g")


def _run_hermite(cfg: RunConfig, out: Path) -> Outcome:
    prof = hermite_profile(cfg.model["activation"], cfg.experiment["truncation"])
    path = out / "hermite.csv"
    with open(path, "w") as fh:
        fh.write("k,u_k,u_k_squared,cumulative_mass\n")
        cum = 0.0
        for j, u in enumerate(prof.coefficients):
            cum += u * u
            fh.write(f"{j},{_fmt(u)},{_fmt(u * u)},{_fmt(cum)}\n")
    model = make_model(_template(cfg), 8)
    pop = model.population_profile()
    info = {"name": prof.name, "truncation_order": prof.truncation_order,
            "l2_norm_estimate": prof.l2_norm_estimate, "tail_mass": prof.tail_mass,
            "info_exponent": pop.info_exponent, "drift_coefficient": pop.drift_coefficient}
    jpath = out / "profile.json"
    _write_json(jpath, info)
    return Outcome(EXIT_OK, [path, jpath])


def _run_predict(cfg: RunConfig, out: Path) -> Outcome:
    th = cfg.theory
    N = int(th["N"])
    k, a = th["k"], th["drift_coefficient"]
    if k is None or a is None:
        if "activation" not in cfg.model and cfg.model["family"] == "supervised":
            if k is None:
                raise ConfigError("missing required field 'theory.k' (or a model block)")
            a = 1.0 if a is None else a
        else:
            prof = make_model(_template(cfg), max(N, 3)).population_profile()
            k = prof.info_exponent if k is None else k
            a = prof.drift_coefficient if a is None else a
    pred = regime_prediction(int(k), N, float(th["delta"]), float(th["eta"]), float(a),
                             m0=th["m0"], alpha=th["alpha"], lbar=th["lbar"])
    payload = pred.as_dict()
    payload["drift_coefficient"] = float(a)
    path = out / "prediction.json"
    _write_json(path, payload)
    return Outcome(EXIT_OK, [path], resolved={"k": int(k), "drift_coefficient": float(a)},
                   stdout=json.dumps(payload, sort_keys=True))


def _run_simulate(cfg: RunConfig, out: Path) -> Outcome:
    dyn = cfg.dynamics
    N = int(dyn["N"])
    model = make_model(_template(cfg), N)
    delta, alpha, resolved = _resolve_simulation(cfg, model)
    scfg = SGDConfig.from_alpha(N, delta, alpha, init=_init(dyn["init"]),
                                thresholds=tuple(dyn["thresholds"] or ()),
                                record_stride=dyn["stride"], seed=cfg.master_seed,
                                diagnostics=bool(dyn["diagnostics"]))
    traj = run_online_sgd(model, scfg)
    path = out / "trajectory.csv"
    traj.to_csv(path)
    hpath = out / "hitting_times.json"
    hpath.write_text(traj.hitting_times_json() + "\n")
    return Outcome(EXIT_OK, [path, hpath], resolved=resolved,
                   seeds=[{"master_seed": cfg.master_seed, "run_index": 0}])


def _scan_config(cfg: RunConfig) -> ScanConfig:
    ex = cfg.experiment
    return ScanConfig(model=_template(cfg), N_grid=tuple(ex["N_grid"]),
                      seeds_per_cell=int(ex["seeds"]),
                      eta=0.5 if ex["eta"] is None else float(ex["eta"]),
                      delta_rule=ex["delta_rule"], alpha_rule=ex["alpha_rule"],
                      c_budget=float(ex["c_budget"]), master_seed=cfg.master_seed,
                      descent_eta=ex["descent_eta"], lbar=ex["lbar"], workers=cfg.threads)


def _run_scan(cfg: RunConfig, out: Path) -> Outcome:
    try:
        scfg = _scan_config(cfg)
    except ValueError as exc:
        raise ConfigError(f"experiment: {exc}") from None
    res = scaling_scan(scfg)
    files = [out / "cells.csv", out / "summary.json", out / "plot.csv"]
    res.write_csv(files[0])
    res.write_json(files[1])
    res.write_plot_data(files[2])
    plan = [{"N": r["N"], "delta": r["delta"], "budget": r["budget"]} for r in res.per_N]
    seeds = [{"master_seed": cfg.master_seed, "run_index": j}
             for j in range(scfg.seeds_per_cell)]
    status = EXIT_OK if res.scaling_observed else EXIT_NO_SCALING
    return Outcome(status, files, resolved={"plan": plan}, seeds=seeds)


def _run_lln(cfg: RunConfig, out: Path) -> Outcome:
    ex = cfg.experiment
    res = lln_experiment(_template(cfg), ex["N_grid"], float(ex["m0"]), ex["delta_rule"],
                         ex["alpha_rule"], seeds=int(ex["seeds"]), master_seed=cfg.master_seed)
    path = out / "lln.csv"
    with open(path, "w") as fh:
        fh.write("N,seed,deviation\n")
        for row in res.rows:
            for j, d in enumerate(row["deviations"]):
                fh.write(f"{row['N']},{j},{_fmt(d)}\n")
    spath = out / "summary.json"
    _write_json(spath, res.summary())
    return Outcome(EXIT_OK, [path, spath])


def _run_refute(cfg: RunConfig, out: Path) -> Outcome:
    ex = cfg.experiment
    eta = 0.1 if ex["eta"] is None else float(ex["eta"])
    res = refutation_experiment(_template(cfg), int(ex["N"]), ex["alpha"], float(ex["delta"]),
                                eta, seeds=int(ex["seeds"]), master_seed=cfg.master_seed)
    path = out / "refute.csv"
    with open(path, "w") as fh:
        fh.write("seed,exceeded,final_m\n")
        for j, (e, m) in enumerate(zip(res.exceeded, res.final_m)):
            fh.write(f"{j},{int(e)},{_fmt(m)}\n")
    spath = out / "summary.json"
    _write_json(spath, res.summary())
    return Outcome(EXIT_OK, [path, spath], resolved={"alpha": res.alpha})


def _run_compare(cfg: RunConfig, out: Path) -> Outcome:
    ex = cfg.experiment
    eta = 0.9 if ex["eta"] is None else float(ex["eta"])
    res = same_data_comparison(ex["activations"], int(ex["N"]), float(ex["alpha"]),
                               float(ex["delta"]), master_seed=cfg.master_seed,
                               seeds=int(ex["seeds"]), eta=eta)
    path = out / "compare.csv"
    with open(path, "w") as fh:
        fh.write("seed," + ",".join(res.activations) + "\n")
        for j, row in enumerate(res.taus):
            fh.write(f"{j}," + ",".join(_fmt(v) for v in row) + "\n")
    spath = out / "summary.json"
    _write_json(spath, res.summary())
    return Outcome(EXIT_OK, [path, spath], resolved={"eta": eta})


def _run_verify_b(cfg: RunConfig, out: Path) -> Outcome:
    ex = cfg.experiment
    model = make_model(_template(cfg), int(cfg.dynamics["N"]))
    est = verify_assumption_b(model, iota=float(ex["iota"]), probes=int(ex["probes"]),
                              samples_per_probe=int(ex["samples_per_probe"]),
                              rng=stream(cfg.master_seed, _VERIFY_B_KEY))
    path = out / "assumption_b.json"
    _write_json(path, est.as_dict())
    return Outcome(EXIT_OK, [path])


RUNNERS = {
    "hermite": _run_hermite, "predict": _run_predict, "simulate": _run_simulate,
    "scan": _run_scan, "lln": _run_lln, "refute": _run_refute, "compare": _run_compare,
    "verify-b": _run_verify_b,
}


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _now() -> str:
    # timestamps go to the manifest only and never influence data
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def execute(cfg: RunConfig) -> int:
    """Run the command, write data files and manifest.json, return the exit status.

    On failure every file this run created is removed again.
    """
    out = Path(cfg.output)
    created_dir = not out.exists()
    out.mkdir(parents=True, exist_ok=True)
    before = set(out.iterdir())
    started = _now()
    try:
        outcome = RUNNERS[cfg.command](cfg, out)
        manifest = {
            "artifact_version": __version__,
            "config": cfg.to_dict(),
            "resolved": outcome.resolved,
            "derived_seeds": outcome.seeds,
            "started": started,
            "finished": _now(),
            "digests": {p.name: _sha256(p) for p in outcome.files},
            "status": outcome.status,
        }
        _write_json(out / "manifest.json", manifest)
        if outcome.stdout:
            print(outcome.stdout)
        return outcome.status
    except BaseException:
        _cleanup(out, created_dir, before)
        raise


def _cleanup(out: Path, created_dir: bool, before: set[Path]) -> None:
    for p in out.iterdir():
        if p.is_file() and p not in before:
            p.unlink()
    if created_dir:
        try:
            out.rmdir()
        except OSError:
            pass


# ---------------------------------------------------------------------------
# argument parsing


def _scalar(text: str):
    return yaml.safe_load(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML/JSON config or a previous manifest.json")
    common.add_argument("--out", dest="output", help="output directory")
    common.add_argument("--seed", dest="master_seed", type=int, help="master seed")
    common.add_argument("--threads", type=int, help="worker processes for cell-parallel runs")
    common.add_argument("--set", action="append", default=[], metavar="BLOCK.KEY=VALUE",
                        help="override any config field (repeatable)")
    common.add_argument("--family", help="model family")
    common.add_argument("--activation", help="activation name or [coeffs]")
    common.add_argument("--n", dest="N", type=int, help="dimension N")
    common.add_argument("--k", type=int, help="information exponent (predict)")
    common.add_argument("--delta", help='step size or "theory"')
    common.add_argument("--alpha", help='sample-size ratio M/N or "theory"')
    common.add_argument("--eta", type=float, help="threshold")
    common.add_argument("--seeds", type=int, help="seeds per cell")
    parser = argparse.ArgumentParser(prog="sphere-sgd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _flag_overrides(ns: argparse.Namespace) -> dict:
    cmd = ns.command
    ov: dict = {}
    if ns.output is not None:
        ov["output"] = ns.output
    if ns.master_seed is not None:
        ov["master_seed"] = ns.master_seed
    if ns.threads is not None:
        ov["threads"] = ns.threads
    if ns.family is not None:
        ov["model.family"] = ns.family
    if ns.activation is not None:
        ov["model.activation"] = _scalar(ns.activation)
    block = {"predict": "theory", "simulate": "dynamics", "verify-b": "dynamics"}.get(
        cmd, "experiment")
    if ns.N is not None:
        ov[f"{block}.N"] = ns.N
    if ns.k is not None:
        ov["theory.k"] = ns.k
    for name in ("delta", "alpha"):
        val = getattr(ns, name)
        if val is not None:
            key = f"{name}_rule" if cmd in ("scan", "lln") else name
            ov[f"{block}.{key}"] = _scalar(val)
    if ns.eta is not None:
        ov[f"{'theory' if cmd == 'predict' else 'experiment'}.eta"] = ns.eta
    if ns.seeds is not None:
        ov["experiment.seeds"] = ns.seeds
    for item in ns.set:
        if "=" not in item:
            raise ConfigError(f"--set expects BLOCK.KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        ov[key.strip()] = _scalar(val)
    return ov


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        overrides = _flag_overrides(ns)
        # predict and hermite are pure; let them run without an explicit seed
        if ns.command in ("hermite", "predict") and "master_seed" not in overrides:
            raw = _load_file(ns.config) if ns.config else {}
            if "master_seed" not in raw:
                overrides["master_seed"] = 0
        cfg = parse_config(ns.config, overrides, command=ns.command)
        return execute(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonFiniteError, FloatingPointError, BlowupError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
