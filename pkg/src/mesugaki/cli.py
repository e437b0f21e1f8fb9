"""Command line interface.

Four subcommands, all driven by a YAML config:

  simulate   simulate an ensemble of marked paths, write events.csv + summary
  converge   coupled-refinement convergence report over a measure scenario
  ito-check  substep sweep of the change-of-variable residual for a jump SDE
  validate   martingale + time-change self-tests of a scenario's compensator

Functions are never parsed from config strings; deterministic rates, Cox
links, and test functions are chosen from the named registries below.  Exit
codes: 0 success, 1 a validation verdict failed, 2 configuration or usage
error.  Outputs contain nothing machine- or thread-dependent, so reruns with
the same seed are byte-identical regardless of --threads.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Optional

import numpy as np
import yaml

from .construction import (assemble_convergence, _normalize_pairs,
                           coupled_path_stats, simulate_mesugaki)
from .core import DrivingPath, PathHistory, derive_stream
from .diagnostics import (EnsembleSummary, exponential_cdf, ks_one_sample,
                          martingale_mean_test, time_change_residuals)
from .errors import ConfigError, MesugakiError
from .ito_check import (TestFunction, linear_test_function,
                        quadratic_test_function, residual_sweep)
from .point_process import (CoxRate, DeterministicRate, ExpKernel, HawkesRate,
                            HomogeneousRate, SumRate, compensator,
                            compensator_at_times, simulate_counting)
from .sde import compound_cox, compound_hawkes, compound_poisson
from .wakarase import (DensityFormMeasure, DiscreteAtomsMeasure, MarkLaw,
                       PointMass, PowerLawMarks, UniformMarks)

DEFAULT_SEED = 1729
ENV_THREADS = "MESUGAKI_THREADS"


# ---------------------------------------------------------------------------
# Named registries (config files refer to these by name)
# ---------------------------------------------------------------------------

def _linear_ramp(t: float) -> float:
    return t


def _unit_plus_sine(t: float) -> float:
    return 1.0 + math.sin(t)


def _decaying(t: float) -> float:
    return math.exp(-t)


RATE_FUNCTIONS: dict = {
    "linear_ramp": _linear_ramp,
    "unit_plus_sine": _unit_plus_sine,
    "decaying": _decaying,
}


def _phi_identity(x: float) -> float:
    return x


def _phi_one_plus_square(x: float) -> float:
    return 1.0 + x * x


def _phi_one_plus_sin_squared(x: float) -> float:
    return 1.0 + math.sin(x) ** 2


def _phi_absolute(x: float) -> float:
    return abs(x)


PHI_FUNCTIONS: dict = {
    "identity": _phi_identity,
    "one_plus_square": _phi_one_plus_square,
    "one_plus_sin_squared": _phi_one_plus_sin_squared,
    "absolute": _phi_absolute,
}

TEST_FUNCTIONS: dict = {
    "linear": linear_test_function(),
    "square": quadratic_test_function(),
    "cubic": TestFunction(lambda x: x ** 3, lambda x: 3.0 * x * x,
                          lambda x: 6.0 * x, name="cubic"),
    "cosine": TestFunction(math.cos, lambda x: -math.sin(x),
                           lambda x: -math.cos(x), name="cosine"),
}


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------

def _check_keys(cfg: dict, where: str, required=(), optional=()):
    if not isinstance(cfg, dict):
        raise ConfigError(f"{where} must be a mapping, got {type(cfg).__name__}")
    unknown = sorted(set(cfg) - set(required) - set(optional))
    if unknown:
        raise ConfigError(f"unknown keys {unknown} in {where}")
    missing = sorted(k for k in required if k not in cfg)
    if missing:
        raise ConfigError(f"missing keys {missing} in {where}")


def _number(cfg: dict, key: str, where: str, positive=False) -> float:
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{where}.{key} must be positive, got {v}")
    return float(v)


def _registry_pick(registry: dict, name, what: str, where: str):
    if name not in registry:
        raise ConfigError(f"{where}: unknown {what} {name!r}; "
                          f"choose from {sorted(registry)}")
    return registry[name]


def build_intensity(cfg: dict, where: str = "intensity"):
    _check_keys(cfg, where, required=("kind",),
                optional=("rate", "function", "scale", "phi", "driving",
                          "base", "excitation", "decay", "components"))
    kind = cfg["kind"]
    if kind == "homogeneous":
        _check_keys(cfg, where, required=("kind", "rate"))
        return HomogeneousRate(_number(cfg, "rate", where))
    if kind == "deterministic":
        _check_keys(cfg, where, required=("kind", "function"), optional=("scale",))
        fn = _registry_pick(RATE_FUNCTIONS, cfg["function"], "rate function", where)
        model = DeterministicRate(fn)
        if "scale" in cfg:
            model = model.scaled(_number(cfg, "scale", where, positive=True))
        return model
    if kind == "cox":
        _check_keys(cfg, where, required=("kind", "phi", "driving"))
        phi = _registry_pick(PHI_FUNCTIONS, cfg["phi"], "link function", where)
        d = cfg["driving"]
        _check_keys(d, f"{where}.driving", required=("times", "values"),
                    optional=("interpolation",))
        driving = DrivingPath(tuple(d["times"]), tuple(d["values"]),
                              d.get("interpolation", "linear"))
        return CoxRate(phi, driving)
    if kind == "hawkes":
        _check_keys(cfg, where, required=("kind", "base", "excitation", "decay"))
        return HawkesRate(_number(cfg, "base", where),
                          ExpKernel(_number(cfg, "excitation", where),
                                    _number(cfg, "decay", where, positive=True)))
    if kind == "sum":
        _check_keys(cfg, where, required=("kind", "components"))
        comps = cfg["components"]
        if not isinstance(comps, list) or not comps:
            raise ConfigError(f"{where}.components must be a nonempty list")
        return SumRate([build_intensity(c, f"{where}.components[{i}]")
                        for i, c in enumerate(comps)])
    raise ConfigError(f"{where}.kind must be one of homogeneous, deterministic, "
                      f"cox, hawkes, sum; got {kind!r}")


def build_mark_law(cfg: dict, where: str = "marks") -> MarkLaw:
    _check_keys(cfg, where, required=("kind",),
                optional=("lo", "hi", "value", "exponent"))
    kind = cfg["kind"]
    if kind == "uniform":
        _check_keys(cfg, where, required=("kind", "lo", "hi"))
        return UniformMarks(_number(cfg, "lo", where), _number(cfg, "hi", where))
    if kind == "point":
        _check_keys(cfg, where, required=("kind", "value"))
        return PointMass(_number(cfg, "value", where))
    if kind == "power":
        _check_keys(cfg, where, required=("kind", "exponent", "lo", "hi"))
        return PowerLawMarks(_number(cfg, "exponent", where),
                             _number(cfg, "lo", where), _number(cfg, "hi", where))
    raise ConfigError(f"{where}.kind must be one of uniform, point, power; "
                      f"got {kind!r}")


def build_measure(cfg: dict, where: str = "measure"):
    _check_keys(cfg, where, required=("kind",),
                optional=("rate", "marks", "atoms"))
    kind = cfg["kind"]
    if kind == "density_form":
        _check_keys(cfg, where, required=("kind", "rate", "marks"))
        return DensityFormMeasure(build_intensity(cfg["rate"], f"{where}.rate"),
                                  build_mark_law(cfg["marks"], f"{where}.marks"))
    if kind == "atoms":
        _check_keys(cfg, where, required=("kind", "atoms"))
        entries = cfg["atoms"]
        if not isinstance(entries, list) or not entries:
            raise ConfigError(f"{where}.atoms must be a nonempty list")
        atoms = []
        for i, a in enumerate(entries):
            aw = f"{where}.atoms[{i}]"
            _check_keys(a, aw, required=("mark", "rate"))
            atoms.append((_number(a, "mark", aw),
                          build_intensity(a["rate"], f"{aw}.rate")))
        return DiscreteAtomsMeasure(atoms)
    raise ConfigError(f"{where}.kind must be density_form or atoms, got {kind!r}")


def build_scenario(cfg: dict):
    """Returns ('measure', mu) or ('model', intensity model)."""
    _check_keys(cfg, "scenario", optional=("measure", "intensity"))
    has_mu = "measure" in cfg
    has_model = "intensity" in cfg
    if has_mu == has_model:
        raise ConfigError("scenario needs exactly one of 'measure' or 'intensity'")
    if has_mu:
        return "measure", build_measure(cfg["measure"], "scenario.measure")
    return "model", build_intensity(cfg["intensity"], "scenario.intensity")


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            cfg = yaml.safe_load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"config {path} is not valid YAML: {e}") from e
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path} must be a YAML mapping")
    return cfg


def resolve_threads(flag: Optional[int]) -> int:
    env = os.environ.get(ENV_THREADS)
    if env is not None:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"{ENV_THREADS} must be an integer, got {env!r}")
    elif flag is not None:
        n = flag
    else:
        n = 1
    if n < 1:
        raise ConfigError(f"thread count must be >= 1, got {n}")
    return n


# ---------------------------------------------------------------------------
# Output writers (deterministic: repr floats, LF endings, fixed ordering)
# ---------------------------------------------------------------------------

def _write_json(path: Optional[str], payload: dict):
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)


def _write_events_csv(path: str, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("path,time,mark\n")
        for idx, t, z in rows:
            f.write(f"{idx},{t!r},{z!r}\n")


def _chunks(n_paths: int, n_chunks: int):
    size = max(1, -(-n_paths // n_chunks))
    return [(lo, min(lo + size, n_paths)) for lo in range(0, n_paths, size)]


def _run_chunked(worker, args_common: tuple, n_paths: int, threads: int):
    """Run worker(lo, hi, *args_common) over path chunks, ordered by lo."""
    if threads == 1:
        return [worker(0, n_paths, *args_common)]
    spans = _chunks(n_paths, threads * 4)
    with ProcessPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(worker, lo, hi, *args_common) for lo, hi in spans]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _simulate_chunk(lo: int, hi: int, scenario_cfg: dict, horizon: float,
                    seed: int):
    kind, obj = build_scenario(scenario_cfg)
    rows = []
    counts = []
    sums = []
    for i in range(lo, hi):
        stream = derive_stream(seed, i)
        if kind == "measure":
            events = simulate_mesugaki(obj, horizon, stream).events
        else:
            events = simulate_counting(obj, horizon, stream)
        for e in events:
            rows.append((i, e.time, e.mark))
        counts.append(float(len(events)))
        sums.append(float(sum(e.mark for e in events)))
    return rows, counts, sums


def cmd_simulate(cfg: dict, out: Optional[str], seed: int, paths: int,
                 threads: int) -> int:
    _check_keys(cfg, "config", required=("scenario", "horizon"),
                optional=("paths", "seed", "threads"))
    build_scenario(cfg["scenario"])  # fail fast on config errors
    horizon = _number(cfg, "horizon", "config", positive=True)

    results = _run_chunked(_simulate_chunk, (cfg["scenario"], horizon, seed),
                           paths, threads)
    rows = [r for chunk in results for r in chunk[0]]
    counts = [c for chunk in results for c in chunk[1]]
    sums = [s for chunk in results for s in chunk[2]]

    count_summary = EnsembleSummary.of(counts) if paths >= 2 else None
    payload = {
        "command": "simulate",
        "horizon": horizon,
        "paths": paths,
        "seed": seed,
        "total_events": len(rows),
        "mean_terminal_count": float(np.mean(counts)) if counts else 0.0,
        "mean_terminal_mark_sum": float(np.mean(sums)) if sums else 0.0,
        "se_terminal_count": (count_summary.standard_error
                              if count_summary else None),
    }
    if out is not None:
        os.makedirs(out, exist_ok=True)
        _write_events_csv(os.path.join(out, "events.csv"), rows)
        _write_json(os.path.join(out, "summary.json"), payload)
    else:
        _write_json(None, payload)
    return 0


# ---------------------------------------------------------------------------
# converge
# ---------------------------------------------------------------------------

def _converge_chunk(lo: int, hi: int, scenario_cfg: dict, horizon: float,
                    seed: int, depth: int, pairs: list):
    kind, mu = build_scenario(scenario_cfg)
    if kind != "measure":
        raise ConfigError("converge needs a measure scenario")
    return [coupled_path_stats(mu, horizon, depth, pairs,
                               derive_stream(seed, i))
            for i in range(lo, hi)]


def cmd_converge(cfg: dict, out: Optional[str], seed: int, paths: int,
                 threads: int) -> int:
    _check_keys(cfg, "config", required=("scenario", "horizon", "depth"),
                optional=("paths", "seed", "threads", "pairs"))
    kind, mu = build_scenario(cfg["scenario"])
    if kind != "measure":
        raise ConfigError("converge needs scenario.measure")
    horizon = _number(cfg, "horizon", "config", positive=True)
    depth = cfg["depth"]
    if not isinstance(depth, int) or depth < 1:
        raise ConfigError(f"config.depth must be a positive integer, got {depth!r}")
    raw_pairs = cfg.get("pairs")
    if raw_pairs is not None and not (
            isinstance(raw_pairs, list)
            and all(isinstance(p, list) and len(p) == 2 for p in raw_pairs)):
        raise ConfigError("config.pairs must be a list of [coarse, fine] pairs")
    try:
        pairs = _normalize_pairs(raw_pairs, depth)
    except MesugakiError as e:
        raise ConfigError(str(e)) from e

    results = _run_chunked(_converge_chunk,
                           (cfg["scenario"], horizon, seed, depth, pairs),
                           paths, threads)
    rows = [r for chunk in results for r in chunk]
    report = assemble_convergence(mu, horizon, depth, pairs, rows)
    payload = {"command": "converge", "seed": seed, **report.to_json_dict()}
    if out is not None:
        os.makedirs(out, exist_ok=True)
        _write_json(os.path.join(out, "converge.json"), payload)
    else:
        _write_json(None, payload)
    return 0


# ---------------------------------------------------------------------------
# ito-check
# ---------------------------------------------------------------------------

def build_sde(cfg: dict, where: str = "sde"):
    _check_keys(cfg, where, required=("kind", "marks"),
                optional=("rate", "base", "excitation", "decay", "phi",
                          "driving", "compensate_small", "drift", "diffusion"))
    law = build_mark_law(cfg["marks"], f"{where}.marks")
    comp = bool(cfg.get("compensate_small", False))
    drift_c = float(cfg.get("drift", 0.0))
    diff_c = float(cfg.get("diffusion", 0.0))

    def drift(t, x, _c=drift_c):
        return _c

    def diffusion(t, x, _c=diff_c):
        return _c

    kind = cfg["kind"]
    if kind == "compound_poisson":
        return compound_poisson(_number(cfg, "rate", where, positive=True), law,
                                drift=drift, diffusion=diffusion,
                                compensate_small=comp)
    if kind == "compound_hawkes":
        return compound_hawkes(_number(cfg, "base", where),
                               _number(cfg, "excitation", where),
                               _number(cfg, "decay", where, positive=True), law,
                               drift=drift, diffusion=diffusion,
                               compensate_small=comp)
    if kind == "compound_cox":
        phi = _registry_pick(PHI_FUNCTIONS, cfg.get("phi"), "link function", where)
        d = cfg.get("driving")
        if d is None:
            raise ConfigError(f"{where}.driving is required for compound_cox")
        _check_keys(d, f"{where}.driving", required=("times", "values"),
                    optional=("interpolation",))
        driving = DrivingPath(tuple(d["times"]), tuple(d["values"]),
                              d.get("interpolation", "linear"))
        return compound_cox(phi, driving, law, drift=drift,
                            diffusion=diffusion, compensate_small=comp)
    raise ConfigError(f"{where}.kind must be one of compound_poisson, "
                      f"compound_hawkes, compound_cox; got {kind!r}")


def cmd_ito_check(cfg: dict, out: Optional[str], seed: int, paths: int,
                  threads: int) -> int:
    _check_keys(cfg, "config",
                required=("sde", "horizon", "test_function", "steps"),
                optional=("paths", "seed", "threads"))
    spec = build_sde(cfg["sde"])
    horizon = _number(cfg, "horizon", "config", positive=True)
    f = _registry_pick(TEST_FUNCTIONS, cfg["test_function"],
                       "test function", "config")
    steps = cfg["steps"]
    if not isinstance(steps, list) or len(steps) < 1 or any(
            isinstance(s, bool) or not isinstance(s, (int, float)) or s <= 0
            for s in steps):
        raise ConfigError("config.steps must be a list of positive numbers")

    stats = residual_sweep(f, spec, horizon, [float(s) for s in steps],
                           paths, derive_stream(seed, 0))
    medians = [s.median_abs for s in stats]
    ratios = [medians[i] / medians[i + 1] if medians[i + 1] > 0 else None
              for i in range(len(medians) - 1)]
    payload = {
        "command": "ito-check",
        "seed": seed,
        "horizon": horizon,
        "test_function": cfg["test_function"],
        "n_paths": paths,
        "steps": [s.step for s in stats],
        "median_abs_residual": medians,
        "mean_abs_residual": [s.mean_abs for s in stats],
        "rms_residual": [s.rms for s in stats],
        "consecutive_ratios": ratios,
    }
    if out is not None:
        os.makedirs(out, exist_ok=True)
        _write_json(os.path.join(out, "ito.json"), payload)
    else:
        _write_json(None, payload)
    return 0


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------

def _validate_chunk(lo: int, hi: int, scenario_cfg: dict, horizon: float,
                    seed: int, comp_scale: float):
    kind, obj = build_scenario(scenario_cfg)
    model = obj.total_model() if kind == "measure" else obj
    out = []
    for i in range(lo, hi):
        stream = derive_stream(seed, i)
        if kind == "measure":
            events = simulate_mesugaki(obj, horizon, stream).events
        else:
            events = simulate_counting(obj, horizon, stream)
        history = PathHistory(events, validate=False)
        lam_T = comp_scale * compensator(model, history, horizon)
        times = [e.time for e in events]
        lam_at = (comp_scale * compensator_at_times(model, history, times)
                  if times else np.zeros(0))
        out.append((float(len(events)), float(lam_T),
                    [float(v) for v in lam_at]))
    return out


def cmd_validate(cfg: dict, out: Optional[str], seed: int, paths: int,
                 threads: int) -> int:
    _check_keys(cfg, "config", required=("scenario", "horizon"),
                optional=("paths", "seed", "threads", "fault_injection"))
    build_scenario(cfg["scenario"])
    horizon = _number(cfg, "horizon", "config", positive=True)
    fault = cfg.get("fault_injection", {})
    _check_keys(fault, "config.fault_injection", optional=("compensator_scale",))
    comp_scale = float(fault.get("compensator_scale", 1.0))
    if comp_scale <= 0:
        raise ConfigError("compensator_scale must be positive")
    if paths < 2:
        raise ConfigError("validate needs at least 2 paths")

    results = _run_chunked(_validate_chunk,
                           (cfg["scenario"], horizon, seed, comp_scale),
                           paths, threads)
    flat = [r for chunk in results for r in chunk]
    counts = np.asarray([r[0] for r in flat])
    lams = np.asarray([r[1] for r in flat])
    mart = martingale_mean_test(counts - lams)
    residuals = time_change_residuals([r[2] for r in flat])
    ks = (ks_one_sample(residuals, exponential_cdf) if residuals.size
          else None)

    z_ok = math.isfinite(mart.z) and abs(mart.z) <= 4.0
    ks_ok = ks is None or ks.p_value >= 1e-3
    passed = bool(z_ok and ks_ok)
    payload = {
        "command": "validate",
        "seed": seed,
        "horizon": horizon,
        "paths": paths,
        "compensator_scale": comp_scale,
        "martingale_z": mart.z,
        "martingale_mean_gap": mart.mean,
        "n_pooled_residuals": int(residuals.size),
        "ks_statistic": None if ks is None else ks.statistic,
        "ks_p_value": None if ks is None else ks.p_value,
        "passed": passed,
    }
    if out is not None:
        os.makedirs(out, exist_ok=True)
        _write_json(os.path.join(out, "validate.json"), payload)
    else:
        _write_json(None, payload)
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "simulate": cmd_simulate,
    "converge": cmd_converge,
    "ito-check": cmd_ito_check,
    "validate": cmd_validate,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mesugaki",
        description="Simulate and verify path-dependent marked jump processes.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML config file")
        p.add_argument("--out", default=None,
                       help="output directory (stdout summary if omitted)")
        p.add_argument("--seed", type=int, default=None,
                       help=f"master seed (default: config seed or {DEFAULT_SEED})")
        p.add_argument("--paths", type=int, default=None,
                       help="number of paths (default: config paths or 100)")
        p.add_argument("--threads", type=int, default=None,
                       help=f"worker processes; ${ENV_THREADS} overrides")
    return parser


def main(argv: Optional[list] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else cfg.get("seed", DEFAULT_SEED)
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ConfigError(f"seed must be a nonnegative integer, got {seed!r}")
        paths = args.paths if args.paths is not None else cfg.get("paths", 100)
        if not isinstance(paths, int) or isinstance(paths, bool) or paths < 1:
            raise ConfigError(f"paths must be a positive integer, got {paths!r}")
        flag = args.threads if args.threads is not None else cfg.get("threads")
        if flag is not None and (isinstance(flag, bool) or not isinstance(flag, int)):
            raise ConfigError(f"threads must be an integer, got {flag!r}")
        threads = resolve_threads(flag)
        return _COMMANDS[args.command](cfg, args.out, seed, paths, threads)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except MesugakiError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
