#!/usr/bin/env python3
"""
orbitzeta: length spectra, zeta functions and thermodynamic estimates for
Schottky groups.

  orbitzeta.py validate --group groups/reference.json
  orbitzeta.py spectrum --group groups/reference.json --cutoff 24 --out ref.csv
  orbitzeta.py analyze  --spectrum ref.csv --task entropy
  orbitzeta.py zeta     --spectrum ref.csv --family selberg --s-re 1:3:0.5 --s-im -2:2:1
  orbitzeta.py sweep    --family-file groups/sweep_metric_scale.json --grid 0:0.6:0.1 --cutoff 20

Exit codes:
  0  success
  1  any error (bad input, failed validation, estimator refused the data)
  2  spectrum not certified and --force not given
  3  zeta evaluation too close to the abscissa of convergence

Closed geodesics are counted oriented: a class and its inverse are separate
entries. Unoriented counts are exactly half (see `analyze --task counting`).

Defaults come from config.txt (or the file named by ORBITZETA_CONFIG);
ORBITZETA_CACHE_DIR overrides the spectrum cache location. Command-line flags
win over both.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
import warnings
from dataclasses import dataclass, field
from glob import glob
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from Scripts import schottky, spectral, thermo, zeta
from Scripts.console import log, log_detail, log_error, log_status, log_warning, set_quiet
from Scripts.errors import (AbscissaTooClose, DigestMismatch, FormatError,
                            NegativePressureWindow, NotCertified, OrbitZetaError, ResourceExceeded)
from Scripts.potentials import potential_from_cli

APP_DIR = os.path.dirname(os.path.abspath(__file__))
SCRIPTS_DIR = os.path.join(APP_DIR, "Scripts")
CONFIG_TXT = os.path.join(APP_DIR, "config.txt")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNCERTIFIED = 2
EXIT_ABSCISSA = 3

TASKS = ("entropy", "critical-exponent", "pressure", "pot-check", "bounds", "strip", "closeness",
         "arithmeticity", "counting", "gn-counting", "weights", "sullivan")


def env(key, *alts, default=None):
    for k in (key, *alts):
        v = os.environ.get(k)
        if v:
            return v
    return default


# ---------------------------
# Config: config.txt loader
# ---------------------------
@dataclass(frozen=True)
class Defaults:
    cache_dir: str = os.path.join(APP_DIR, ".orbitzeta-cache")
    workers: int = 1
    max_word_length: int = 14
    max_level_nodes: int = 2_000_000
    zeta_margin: float = 0.1
    quadrature_nodes: int = 32
    quadrature_tolerance: float = 1e-8
    pole_resolution: float = 1e-3


CONFIG_KEYS: Dict[str, Tuple[str, Callable]] = {
    "cache dir": ("cache_dir", str),
    "workers": ("workers", int),
    "max word length": ("max_word_length", int),
    "max level nodes": ("max_level_nodes", int),
    "zeta margin": ("zeta_margin", float),
    "quadrature nodes": ("quadrature_nodes", int),
    "quadrature tolerance": ("quadrature_tolerance", float),
    "pole resolution": ("pole_resolution", float),
}


def _strip_wrapping_quotes(s: str) -> str:
    s = s.strip()
    if len(s) >= 2 and s[0] == s[-1] and s[0] in ("'", '"'):
        return s[1:-1].strip()
    return s


def load_config_txt(path: Optional[str] = None) -> Defaults:
    """
    Reads config.txt for defaults.
    Supports: "Max Word Length: 14" OR "MAX_WORD_LENGTH = 14"
    """
    path = path or env("ORBITZETA_CONFIG", default=CONFIG_TXT)
    values = {}
    if os.path.isfile(path):
        try:
            with open(path, "r", encoding="utf-8") as f:
                for raw in f:
                    line = raw.strip()
                    if not line or line.startswith("#"):
                        continue
                    sep = ":" if ":" in line else "="
                    if sep not in line:
                        continue
                    key, val = line.split(sep, 1)
                    # "MAX_WORD_LENGTH" and "max word length" are the same key
                    key = key.strip().lower().replace("_", " ")
                    val = _strip_wrapping_quotes(val)
                    if key not in CONFIG_KEYS:
                        log_warning(f"{os.path.basename(path)}: unknown key '{key}' ignored")
                        continue
                    name, cast = CONFIG_KEYS[key]
                    try:
                        values[name] = cast(val)
                    except ValueError:
                        log_warning(f"{os.path.basename(path)}: bad value for '{key}': {val!r}")
        except OSError as e:
            log_warning(f"Error reading {path}: {e}")

    cache = env("ORBITZETA_CACHE_DIR")
    if cache:
        values["cache_dir"] = cache
    elif "cache_dir" in values and not os.path.isabs(values["cache_dir"]):
        values["cache_dir"] = os.path.join(APP_DIR, values["cache_dir"])
    return Defaults(**values)


@dataclass(frozen=True)
class RunConfig:
    command: str
    group_path: Optional[str]
    spectrum_path: Optional[str]
    cutoff: Optional[float]
    out: Optional[str]
    limits: schottky.EnumerationLimits
    margin: float
    quadrature_nodes: int
    quadrature_tolerance: float
    pole_resolution: float
    cache_dir: str
    force: bool = False
    json_mode: bool = False


def build_run_config(args: argparse.Namespace, defaults: Defaults) -> RunConfig:
    workers = args.workers if args.workers is not None else defaults.workers
    max_len = getattr(args, "max_word_length", None) or defaults.max_word_length
    max_nodes = getattr(args, "max_level_nodes", None) or defaults.max_level_nodes
    margin = getattr(args, "margin", None)
    margin = defaults.zeta_margin if margin is None else margin
    cutoff = getattr(args, "cutoff", None)
    if workers < 1 or max_len < 1 or max_nodes < 1:
        raise ValueError("--workers, --max-word-length and --max-level-nodes must be positive")
    if margin < 0:
        raise ValueError("--margin must be >= 0")
    if cutoff is not None and not cutoff > 0:
        raise ValueError("--cutoff must be positive")
    return RunConfig(
        command=args.command,
        group_path=getattr(args, "group", None),
        spectrum_path=getattr(args, "spectrum", None),
        cutoff=cutoff,
        out=getattr(args, "out", None),
        limits=schottky.EnumerationLimits(max_len, max_nodes, workers),
        margin=margin,
        quadrature_nodes=defaults.quadrature_nodes,
        quadrature_tolerance=defaults.quadrature_tolerance,
        pole_resolution=defaults.pole_resolution,
        cache_dir=defaults.cache_dir,
        force=bool(getattr(args, "force", False)),
        json_mode=bool(args.json),
    )


# ---------------------------
# Output sidecars (Scripts/<module>.json)
# ---------------------------
@dataclass
class OutputSchema:
    action: str
    columns: List[str]
    path: str
    expected_values: List[str] = field(default_factory=list)


def discover_sidecars() -> Dict[str, OutputSchema]:
    """Column contracts for the CSV emitters, keyed by module name."""
    reg: Dict[str, OutputSchema] = {}
    for meta_path in sorted(glob(os.path.join(SCRIPTS_DIR, "*.json"))):
        name = os.path.splitext(os.path.basename(meta_path))[0]
        try:
            with open(meta_path, "r", encoding="utf-8") as f:
                meta = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            log_warning(f"sidecar {meta_path} unreadable: {e}")
            continue
        reg[name] = OutputSchema(
            action=meta.get("action", name.replace("_", " ")),
            columns=list(meta.get("expected_columns", [])),
            path=meta_path,
            expected_values=list(meta.get("expected_values", [])),
        )
    return reg


def write_table(df: pd.DataFrame, path: str, schema: Optional[str] = None) -> None:
    if schema is not None:
        contract = discover_sidecars().get(schema)
        if contract is None:
            raise FormatError(f"no sidecar Scripts/{schema}.json")
        if list(df.columns) != contract.columns:
            raise FormatError(f"{contract.action}: columns {list(df.columns)} != {contract.columns}")
    schottky.write_atomic(path, df.to_csv(index=False, float_format="%.17g", lineterminator="\n"))


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, complex):
        return [_jsonable(x.real), _jsonable(x.imag)]
    return x


def emit(cfg: RunConfig, summary: dict, table: Optional[pd.DataFrame] = None,
         schema: Optional[str] = None) -> None:
    if table is not None and cfg.out:
        write_table(table, cfg.out, schema)
        summary = {**summary, "out": cfg.out}
    if cfg.json_mode:
        print(json.dumps(_jsonable(summary), sort_keys=True), flush=True)
        return
    for key, value in summary.items():
        log(f"  {key}: {value}")
    if table is not None and not cfg.out:
        log(table.to_csv(index=False, float_format="%.10g").rstrip("\n"))


# ---------------------------
# Grids
# ---------------------------
def parse_grid(text: str) -> np.ndarray:
    """'a:b:step' (b included) or a single number."""
    parts = text.split(":")
    if len(parts) == 1:
        return np.array([float(parts[0])])
    if len(parts) != 3:
        raise ValueError(f"grid '{text}' is not of the form a:b:step")
    a, b, step = (float(p) for p in parts)
    if not step > 0 or b < a:
        raise ValueError(f"grid '{text}' needs step > 0 and a <= b")
    n = int(math.floor((b - a) / step + 1e-9)) + 1
    return a + step * np.arange(n)


def parse_interval(text: str) -> Tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise ValueError(f"interval '{text}' is not of the form lo:hi")
    return float(parts[0]), float(parts[1])


def parse_list(text: str) -> List[float]:
    return [float(x) for x in text.split(",") if x.strip()]


# ---------------------------
# Spectra (cached by group digest + cutoff)
# ---------------------------
def cache_path(cfg: RunConfig, group: schottky.SchottkyGroup, cutoff: float) -> str:
    return os.path.join(cfg.cache_dir, f"{group.digest}-T{cutoff!r}.csv")


def enumerate_for(cfg: RunConfig, group: schottky.SchottkyGroup) -> schottky.LengthSpectrum:
    try:
        return schottky.enumerate_spectrum(group, cfg.cutoff, cfg.limits)
    except ResourceExceeded as e:
        if not cfg.force:
            raise
        log_warning(f"{e}; continuing with the partial spectrum")
        return e.partial


def obtain_spectrum(cfg: RunConfig, group: Optional[schottky.SchottkyGroup]) -> schottky.LengthSpectrum:
    if cfg.spectrum_path:
        return schottky.load_spectrum(cfg.spectrum_path, group)
    if group is None:
        raise ValueError("give --spectrum, or --group with --cutoff")
    if cfg.cutoff is None:
        raise ValueError("--cutoff is required when the spectrum comes from --group")
    path = cache_path(cfg, group, cfg.cutoff)
    if os.path.isfile(path):
        try:
            cached = schottky.load_spectrum(path, group)
            if cached.certified:
                log_detail(f"Using cached spectrum {path}")
                return cached
        except (FormatError, DigestMismatch) as e:
            log_warning(f"Stale cache {path} ignored: {e}")
    spectrum = enumerate_for(cfg, group)
    schottky.save_spectrum(spectrum, path)
    return spectrum


def load_optional_group(cfg: RunConfig) -> Optional[schottky.SchottkyGroup]:
    return schottky.load_group(cfg.group_path) if cfg.group_path else None


def require_group(cfg: RunConfig) -> schottky.SchottkyGroup:
    if not cfg.group_path:
        raise ValueError(f"'{cfg.command}' needs --group")
    return schottky.load_group(cfg.group_path)


# ---------------------------
# Commands
# ---------------------------
def cmd_validate(cfg: RunConfig, args: argparse.Namespace) -> int:
    group = require_group(cfg)
    cert = schottky.validate_ping_pong(group)
    log("✅ Ping-pong verified")
    emit(cfg, {
        "group": group.name or cfg.group_path,
        "digest": group.digest,
        "rank": group.rank,
        "model_dim": group.model_dim,
        "kappa": cert.kappa,
        "additive_constant": cert.additive_constant,
        "rate_min": cert.rate_min,
        "guaranteed_cutoff_at_max_word_length": cert.guaranteed_cutoff(cfg.limits.max_word_length),
    })
    if args.save:
        schottky.save_group(group, args.save)
        log_detail(f"group document written to {args.save}")
    return EXIT_OK


def cmd_spectrum(cfg: RunConfig, args: argparse.Namespace) -> int:
    group = require_group(cfg)
    start = time.time()
    log_status(0, f"Enumerating closed geodesics up to T={cfg.cutoff:g} ...")
    try:
        spectrum = schottky.enumerate_spectrum(group, cfg.cutoff, cfg.limits)
    except ResourceExceeded as e:
        log_error(str(e))
        spectrum = e.partial
    out = cfg.out or cache_path(cfg, group, cfg.cutoff)
    schottky.save_spectrum(spectrum, out)
    log_status(100, f"Wrote {len(spectrum.entries)} classes to {out}")

    emit(cfg, {
        "count": len(spectrum.entries),
        "primitive_count": len(spectrum.primitives()),
        "unoriented_count": len(spectrum.entries) / 2,
        "certified": spectrum.certified,
        "cutoff": spectrum.cutoff,
        "guaranteed_cutoff": spectrum.stats.guaranteed_cutoff,
        "words_visited": spectrum.stats.words_visited,
        "max_word_length": spectrum.stats.max_word_length,
        "wall_time": round(time.time() - start, 3),
        "out": out,
    })
    if not spectrum.certified and not cfg.force:
        log_error(f"spectrum not certified at T={cfg.cutoff:g}; achievable T_certified = "
                  f"{spectrum.stats.guaranteed_cutoff:.6g} (raise --max-word-length or pass --force)")
        return EXIT_UNCERTIFIED
    return EXIT_OK


# --- analyze tasks: each returns (summary, table, sidecar name) ---

def _entropy_value(cfg, spectrum, args) -> float:
    h = getattr(args, "h", None)
    return h if h is not None else thermo.entropy(spectrum, force=cfg.force).value


def _weights(cfg, args, spectrum, group, default: Optional[str] = None) -> thermo.WeightTable:
    source = args.potential or default
    if not source:
        raise ValueError("this task needs --potential (const:c, sbr:coef or expr:formula)")
    potential = potential_from_cli(source)
    return thermo.build_weight_table(potential, spectrum, group, cfg.quadrature_nodes, cfg.quadrature_tolerance)


def _pressure_quiet(cfg, spectrum, weights) -> thermo.PressureEstimate:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NegativePressureWindow)
        est = thermo.pressure(spectrum, weights, force=cfg.force)
    for w in caught:
        log_warning(str(w.message))
    return est


def task_entropy(cfg, args, group, spectrum):
    est = thermo.entropy(spectrum, force=cfg.force)
    return {"h": est.value, "uncertainty": est.uncertainty, "slope": est.slope, "ratio": est.ratio,
            "window": list(est.window)}, None, None


def task_critical_exponent(cfg, args, group, spectrum):
    group = group or require_group(cfg)
    radius = args.radius or cfg.cutoff
    if radius is None:
        raise ValueError("critical-exponent needs --radius (or --cutoff)")
    est = thermo.critical_exponent(group, radius, cfg.limits)
    summary = {"delta": est.value, "uncertainty": est.uncertainty, "slope": est.slope,
               "ratio": est.ratio, "radius": est.radius, "complete": est.complete}
    if args.compare:
        h = thermo.entropy(obtain_spectrum(cfg, group), force=cfg.force)
        summary.update({"h": h.value, "h_uncertainty": h.uncertainty,
                        "agree": abs(h.value - est.value) <= h.uncertainty + est.uncertainty})
    table = pd.DataFrame({"R": est.radii, "count": est.counts})
    return summary, table, None


def task_pressure(cfg, args, group, spectrum):
    weights = _weights(cfg, args, spectrum, group)
    est = _pressure_quiet(cfg, spectrum, weights)
    return {"pressure": est.value, "uncertainty": est.uncertainty, "slope": est.slope,
            "ratio": est.ratio, "tilt": est.tilt, "estimator": est.estimator,
            "nonpositive": est.nonpositive, "potential": weights.potential}, None, None


def task_pot_check(cfg, args, group, spectrum):
    variant = args.variant
    weights = None
    if args.h is not None:
        rate = args.h
    elif variant == "plain":
        rate = thermo.entropy(spectrum, force=cfg.force).value
    elif variant == "weighted":
        weights = _weights(cfg, args, spectrum, group)
        rate = _pressure_quiet(cfg, spectrum, weights).value
    else:
        rate = zeta.gn_abscissa(spectrum, force=cfg.force)
    if variant == "weighted" and weights is None:
        weights = _weights(cfg, args, spectrum, group)
    check = zeta.prime_orbit_check(spectrum, rate, variant, weights, force=cfg.force)
    lo, hi = (0.7, 1.3) if variant == "plain" else (0.6, 1.4)
    verdict = "trend toward 1" if check.toward_one and check.within(lo, hi) else "no clear trend"
    return {"variant": variant, "rate": rate, "final_ratio": check.final_ratio,
            "band": [lo, hi], "toward_one": check.toward_one, "verdict": verdict}, check.table, None


def task_bounds(cfg, args, group, spectrum):
    h = args.h if args.h is not None else thermo.entropy(spectrum, force=cfg.force).value
    bounds = spectral.lambda0_bounds(h, args.a, args.b, args.n)
    lower_p, upper_p = thermo.sbr_pressure_bounds(h, args.a, args.b, args.n)
    return {"h": h, "lower": bounds.lower, "upper": bounds.upper, "branch": bounds.branch,
            "pure_point": spectral.pure_point_criterion(h, args.n),
            "sbr_pressure_bounds": [lower_p, upper_p]}, None, None


def task_strip(cfg, args, group, spectrum):
    family = args.family
    if args.rate is not None:
        rate = args.rate
    elif family == "selberg":
        rate = thermo.entropy(spectrum, force=cfg.force).value
    elif family == "gn":
        rate = zeta.gn_abscissa(spectrum, force=cfg.force)
    else:
        rate = _pressure_quiet(cfg, spectrum, _weights(cfg, args, spectrum, group)).value
    rep = spectral.extension_strip(family, rate, args.a, args.b, args.holder)
    return {"family": family, "rate": rate, "holder_exponent": rep.holder_exponent,
            "expansion": list(rep.expansion), "edge": list(rep.edge)}, None, None


def task_closeness(cfg, args, group, spectrum):
    rep = zeta.weight_closeness_report(spectrum, allow_numeric=cfg.force)
    return {"constant": rep.constant, "closed_form": rep.closed_form,
            "classes": len(rep.table)}, rep.table, None


def task_arithmeticity(cfg, args, group, spectrum):
    v = schottky.non_arithmeticity_check(spectrum, tol=args.tol)
    return {"verdict": v.verdict, "witness": list(v.witness) if v.witness else None,
            "ratio": v.ratio, "best_rational": str(v.best_rational) if v.best_rational else None,
            "mixing": v.mixing}, None, None


def task_counting(cfg, args, group, spectrum):
    grid = parse_grid(args.grid) if args.grid else np.linspace(0.0, spectrum.cutoff, 41)
    table = schottky.counting_function(spectrum, grid)
    return {"points": len(table), "N": int(table["N"].iloc[-1]), "N_p": int(table["N_p"].iloc[-1]),
            "orientation": "oriented (unoriented = N/2)"}, table, "schottky"


def task_gn_counting(cfg, args, group, spectrum):
    h = _entropy_value(cfg, spectrum, args)
    alphas = parse_list(args.alphas) if args.alphas else []
    rep = spectral.gn_refined_counting(spectrum, h, alphas)
    return {"h": h, "alphas": list(rep.alphas), "beta": rep.beta,
            "rms_remainder": rep.rms_remainder}, rep.table, None


def task_weights(cfg, args, group, spectrum):
    weights = _weights(cfg, args, spectrum, group)
    return {"potential": weights.potential, "classes": len(weights),
            "quadrature_error": weights.quadrature_error}, weights.to_frame(), "thermo"


def task_sullivan(cfg, args, group, spectrum):
    if args.delta is not None:
        delta = args.delta
    else:
        radius = args.radius or cfg.cutoff
        if radius is None:
            raise ValueError("sullivan needs --delta or --radius")
        delta = thermo.critical_exponent(group or require_group(cfg), radius, cfg.limits).value
    lam = spectral.sullivan_lambda0(delta, args.n)
    lower = spectral.lambda0_bounds(delta, 1.0, 1.0, args.n).lower
    return {"delta": delta, "lambda0": lam, "bounds_lower": lower, "sharp": lam == lower,
            "pure_point": spectral.pure_point_criterion(delta, args.n)}, None, None


TASK_HANDLERS = {
    "entropy": task_entropy,
    "critical-exponent": task_critical_exponent,
    "pressure": task_pressure,
    "pot-check": task_pot_check,
    "bounds": task_bounds,
    "strip": task_strip,
    "closeness": task_closeness,
    "arithmeticity": task_arithmeticity,
    "counting": task_counting,
    "gn-counting": task_gn_counting,
    "weights": task_weights,
    "sullivan": task_sullivan,
}

# tasks that can run without a length spectrum
GROUP_ONLY_TASKS = {"critical-exponent", "sullivan"}
PARAMETER_ONLY_TASKS = {"bounds", "strip"}


def cmd_analyze(cfg: RunConfig, args: argparse.Namespace) -> int:
    group = load_optional_group(cfg)
    needs_spectrum = args.task not in GROUP_ONLY_TASKS
    if args.task in PARAMETER_ONLY_TASKS:
        given = args.h if args.task == "bounds" else args.rate
        needs_spectrum = given is None
    spectrum = obtain_spectrum(cfg, group) if needs_spectrum else None
    log_status(0, f"Running task '{args.task}' ...")
    summary, table, schema = TASK_HANDLERS[args.task](cfg, args, group, spectrum)
    log_status(100, f"Task '{args.task}' done")
    emit(cfg, {"task": args.task, **summary}, table, schema)
    return EXIT_OK


def cmd_zeta(cfg: RunConfig, args: argparse.Namespace) -> int:
    group = load_optional_group(cfg)
    spectrum = obtain_spectrum(cfg, group)
    family = args.family
    weights = None
    if family == "weighted":
        weights = _weights(cfg, args, spectrum, group)

    if args.locate_pole:
        pole = zeta.locate_pole(spectrum, family, parse_interval(args.interval), weights,
                                cfg.pole_resolution)
        emit(cfg, {"family": family, "estimate": pole.estimate, "bracket": list(pole.bracket),
                   "abscissa_estimate": pole.abscissa_estimate, "notes": pole.notes})
        return EXIT_OK

    if args.abscissa is not None:
        abscissa = args.abscissa
    elif family == "selberg":
        abscissa = thermo.entropy(spectrum, force=cfg.force).value
    elif family == "weighted":
        abscissa = _pressure_quiet(cfg, spectrum, weights).value
    else:
        abscissa = zeta.gn_abscissa(spectrum, force=cfg.force)

    def evaluate(s: complex) -> zeta.ZetaEvaluation:
        if family == "selberg":
            return zeta.selberg_zeta(spectrum, s, abscissa, cfg.margin, cfg.force)
        if family == "weighted":
            return zeta.weighted_zeta(spectrum, weights, s, abscissa, cfg.margin, cfg.force)
        return zeta.gn_zeta(spectrum, s, abscissa, cfg.margin, cfg.force)

    rows = []
    for s_re in parse_grid(args.s_re):
        for s_im in parse_grid(args.s_im):
            ev = evaluate(complex(s_re, s_im))
            rows.append((s_re, s_im, ev.value.real, ev.value.imag, ev.tail_bound))
    table = pd.DataFrame(rows, columns=["s_re", "s_im", "Z_re", "Z_im", "tail_bound"])
    emit(cfg, {"family": family, "abscissa": abscissa, "points": len(rows),
               "max_tail_bound": float(table["tail_bound"].max())}, table, "zeta")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, args: argparse.Namespace) -> int:
    family = spectral.load_sweep_family(args.family_file)
    grid = parse_grid(args.grid) if args.grid else parse_list(args.alphas)
    result = spectral.entropy_sweep(family, grid, cfg.cutoff, cfg.limits, cfg.force)
    if result.failures:
        log_warning(f"sweep truncated: {len(result.failures)} point(s) failed")
    emit(cfg, {"family": family.name, "points": len(result.alphas),
               "failures": [[a, msg] for a, msg in result.failures],
               "smooth": result.smooth,
               "verdict": "no jumps beyond 3x uncertainty" if result.smooth else "jump detected"},
         result.to_frame(), "spectral")
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "spectrum": cmd_spectrum,
    "analyze": cmd_analyze,
    "zeta": cmd_zeta,
    "sweep": cmd_sweep,
}


# ---------------------------
# Argument parsing
# ---------------------------
class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        log_error(message)
        sys.exit(EXIT_ERROR)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="orbitzeta", description=__doc__.split("\n\n")[0])
    parser.add_argument("--workers", type=int, default=None, help="Worker processes for enumeration")
    parser.add_argument("--quiet", action="store_true", help="Only print errors")
    parser.add_argument("--json", action="store_true", help="Print one JSON summary object")

    # the same flags are accepted after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workers", type=int, default=argparse.SUPPRESS)
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
    common.add_argument("--json", action="store_true", default=argparse.SUPPRESS)
    common.add_argument("--max-word-length", type=int, default=None)
    common.add_argument("--max-level-nodes", type=int, default=None)
    common.add_argument("--force", action="store_true", help="Accept uncertified or partial spectra")

    inputs = argparse.ArgumentParser(add_help=False)
    inputs.add_argument("--group", help="Group document (JSON)")
    inputs.add_argument("--spectrum", help="Spectrum file written by 'spectrum'")
    inputs.add_argument("--cutoff", type=float, help="Length cutoff T when enumerating from --group")
    inputs.add_argument("--out", help="CSV output path")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="Check ping-pong and print the certificate")
    p.add_argument("--group", required=True)
    p.add_argument("--save", help="Write the normalised group document to this path")

    p = sub.add_parser("spectrum", parents=[common], help="Enumerate closed geodesics up to a cutoff")
    p.add_argument("--group", required=True)
    p.add_argument("--cutoff", type=float, required=True)
    p.add_argument("--out")

    p = sub.add_parser("analyze", parents=[common, inputs], help="Estimators and bounds")
    p.add_argument("--task", choices=TASKS, required=True)
    p.add_argument("--potential", help="const:c | sbr:coef | expr:formula")
    p.add_argument("--variant", choices=("plain", "weighted", "gn"), default="plain")
    p.add_argument("--h", type=float, help="Use this growth rate instead of estimating it")
    p.add_argument("--delta", type=float)
    p.add_argument("--rate", type=float)
    p.add_argument("--family", choices=zeta.FAMILIES, default="selberg")
    p.add_argument("--holder", type=float, default=1.0)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--radius", type=float)
    p.add_argument("--compare", action="store_true", help="Also estimate h and compare")
    p.add_argument("--grid")
    p.add_argument("--alphas", help="Comma-separated exponents for gn-counting")
    p.add_argument("--tol", type=float, default=1e-8)

    p = sub.add_parser("zeta", parents=[common, inputs], help="Evaluate a zeta family on an s-grid")
    p.add_argument("--family", choices=zeta.FAMILIES, default="selberg")
    p.add_argument("--potential", help="Weights for the weighted family")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--s-re", default="1:3:0.5")
    mode.add_argument("--locate-pole", action="store_true")
    p.add_argument("--s-im", default="0")
    p.add_argument("--interval", default="0:2")
    p.add_argument("--abscissa", type=float)
    p.add_argument("--margin", type=float)

    p = sub.add_parser("sweep", parents=[common], help="Entropy along a group family")
    p.add_argument("--family-file", required=True)
    p.add_argument("--cutoff", type=float, required=True)
    grid = p.add_mutually_exclusive_group(required=True)
    grid.add_argument("--grid")
    grid.add_argument("--alphas")
    p.add_argument("--out")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    set_quiet(args.quiet or args.json)
    try:
        cfg = build_run_config(args, load_config_txt())
        return COMMANDS[args.command](cfg, args)
    except AbscissaTooClose as e:
        log_error(str(e))
        if e.safe_abscissa is not None:
            print(f"safe region: Re(s) > {e.safe_abscissa:.6g}", file=sys.stderr, flush=True)
        return EXIT_ABSCISSA
    except NotCertified as e:
        log_error(str(e))
        return EXIT_UNCERTIFIED
    except OrbitZetaError as e:
        log_error(f"{type(e).__name__}: {e}")
        return EXIT_ERROR
    except (OSError, ValueError) as e:
        log_error(str(e))
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
