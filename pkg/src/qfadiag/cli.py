"""
Command-line front end.

    qfadiag returns     prices.csv -> log returns
    qfadiag qfa         series -> raw / normalized / cumulative quantile periodograms
    qfadiag fit         series -> model.json, residuals, LB/LM diagnostics
    qfadiag simulate    model.json -> series
    qfadiag test        residual | direct | discriminant bootstrap tests
    qfadiag sensitivity KS / WL sensitivity profile of the mixture model

Option values resolve as command-line flag, then ``--config`` JSON, then
built-in default.  Every run writes a manifest next to its output.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from qfadiag import __version__
from qfadiag._backend import BACKEND
from qfadiag.errors import ContractError, DegenerateError, InputError, QfaError, SolverError
from qfadiag.garch import BOUNDARY_DROP, DEFAULT_BURN_IN, FitResult, GarchSpec, fit_qmle, residuals, simulate
from qfadiag.metrics import PRESETS, Region, ljung_box, lm_arch, sensitivity_profile
from qfadiag.montecarlo import direct_test, discriminant_test, residual_test
from qfadiag.qfa import QuantileGrid, cumulate, lower_half, normalize, quantile_periodogram
from qfadiag.rng import resolve_seed
from qfadiag.series import FrequencyGrid, load_csv, log_returns, write_series_csv

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_NONCONVERGENCE = 0, 1, 2, 3

DEFAULTS = {
    "returns": {"date_column": "date", "close_column": "close"},
    "qfa": {"column": None, "kind": "second", "alphas": "0.05:0.95:0.01", "format": "both"},
    "fit": {"column": None, "family": "garch"},
    "simulate": {"n": 1000, "burn_in": DEFAULT_BURN_IN},
    "test": {"column": None, "mode": "residual", "region": "full", "alphas": "0.05:0.95:0.01",
             "kind": "second", "B": 1000, "n_realizations": 1000, "burn_in": DEFAULT_BURN_IN,
             "drop_head": BOUNDARY_DROP, "plus_one": False, "include_null": False,
             "model": None, "reference": None},
    "sensitivity": {"rho": 0.1, "sigma": 0.003, "centers": "0.02:0.48:0.01", "K": 999},
}
RANDOMIZED = ("simulate", "test")
# options that never change output bytes and so stay out of the manifest
NON_CONFIG = ("threads", "config", "command")


class UsageError(InputError):
    pass


def _read_series(path, column):
    """Load one numeric column; with no column given, the file must have
    exactly one column besides ``date``."""
    path = Path(path)
    if column is None:
        with path.open(newline="", encoding="utf-8") as fh:
            header = next(csv.reader(fh), None)
        if not header:
            return load_csv(path, value_column="")
        cols = [h.strip() for h in header if h.strip() and h.strip() != "date"]
        if len(cols) != 1:
            raise UsageError(f"{path}: several candidate columns {cols}; pick one with --column")
        column = cols[0]
    return load_csv(path, value_column=column)


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n", encoding="utf-8")


def _region(text: str) -> Region:
    if text in PRESETS:
        return PRESETS[text]
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"--region must be one of {sorted(PRESETS)} or lo:hi, got {text!r}") from None
    return Region(lo, hi, name=f"({lo}, {hi})")


def _grid_values(text: str) -> np.ndarray:
    if ":" in text:
        lo, hi, step = (float(v) for v in text.split(":"))
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return np.round(lo + step * np.arange(count), 12)
    return np.array([float(v) for v in text.split(",")])


def cmd_returns(cfg):
    prices = load_csv(cfg["input"], date_column=cfg["date_column"], close_column=cfg["close_column"])
    rets = log_returns(prices)
    out = Path(cfg["out"])
    with out.open("w", newline="", encoding="utf-8") as fh:
        fh.write("date,log_return\n")
        for d, v in zip(prices.dates[1:], rets.values):
            fh.write(f"{d.isoformat()},{float(v)!r}\n")
    return [out], EXIT_OK


def cmd_qfa(cfg):
    x = _read_series(cfg["input"], cfg["column"])
    qgrid = QuantileGrid.parse(cfg["alphas"])
    raw = quantile_periodogram(x, qgrid, kind=cfg["kind"], threads=cfg["threads"])
    norm = normalize(raw)
    cum = cumulate(norm)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, m in (("raw", raw), ("normalized", norm), ("cumulative", cum)):
        if cfg["format"] in ("csv", "both"):
            m.to_csv(out / f"{name}.csv")
            written.append(out / f"{name}.csv")
        if cfg["format"] in ("json", "both"):
            m.to_json(out / f"{name}.json")
            written.append(out / f"{name}.json")
        m.to_csv(out / f"{name}_lower_half.csv", rows=lower_half(m))
        written.append(out / f"{name}_lower_half.csv")
    return written, EXIT_OK


def cmd_fit(cfg):
    x = _read_series(cfg["input"], cfg["column"])
    family = {"garch": "garch11", "gjr": "gjr11"}.get(cfg["family"], cfg["family"])
    fit = fit_qmle(x, family)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    fit.spec.to_json(out / "model.json")
    write_series_csv(out / "residuals.csv", fit.residuals, column="residual")
    diag = {
        "fit": {k: v for k, v in fit.to_dict().items() if k != "spec"},
        "ljung_box": ljung_box(fit.residuals, 10, True, BOUNDARY_DROP).to_dict(),
        "lm_arch": lm_arch(fit.residuals, 10, BOUNDARY_DROP).to_dict(),
    }
    _write_json(out / "diagnostics.json", diag)
    if not fit.converged:
        print("qfadiag: warning: optimizer did not converge; best incumbent written",
              file=sys.stderr)
    return ([out / "model.json", out / "residuals.csv", out / "diagnostics.json"],
            EXIT_OK if fit.converged else EXIT_NONCONVERGENCE)


def cmd_simulate(cfg):
    spec = GarchSpec.from_json(Path(cfg["model"]))
    sim = simulate(spec, int(cfg["n"]), seed=cfg["seed"], burn_in=int(cfg["burn_in"]))
    out = Path(cfg["out"])
    write_series_csv(out, sim.series, column="log_return")
    return [out], EXIT_OK


def _model_fit(model_path, series):
    spec = GarchSpec.from_json(Path(model_path))
    return FitResult(spec, float("nan"), True, 0, residuals(spec, series), spec.family)


def cmd_test(cfg):
    mode = cfg["mode"]
    x = _read_series(cfg["input"], cfg["column"])
    common = dict(qgrid=QuantileGrid.parse(cfg["alphas"]), region=_region(cfg["region"]),
                  B=int(cfg["B"]), seed=cfg["seed"], threads=cfg["threads"], kind=cfg["kind"],
                  plus_one=bool(cfg["plus_one"]), drop_head=int(cfg["drop_head"]))
    if mode == "residual":
        report = residual_test(x, **common)
    elif mode in ("direct", "discriminant"):
        if not cfg["model"]:
            raise UsageError(f"--mode {mode} needs --model")
        extra = dict(n_realizations=int(cfg["n_realizations"]), burn_in=int(cfg["burn_in"]))
        if mode == "direct":
            report = direct_test(x, _model_fit(cfg["model"], x), **common, **extra)
        else:
            if not cfg["reference"]:
                raise UsageError("--mode discriminant needs --reference (the series the model was fitted to)")
            ref = _read_series(cfg["reference"], cfg["column"])
            report = discriminant_test(x, _model_fit(cfg["model"], ref), **common, **extra)
    else:
        raise UsageError(f"unknown --mode {mode!r}")
    out = Path(cfg["out"])
    report.to_json(out, include_null=bool(cfg["include_null"]))
    return [out], EXIT_OK


def cmd_sensitivity(cfg):
    K = int(cfg["K"])
    if K < 2:
        raise UsageError("--K must be at least 2")
    grid = FrequencyGrid(2 * K + 2)
    centers = 2.0 * np.pi * _grid_values(cfg["centers"])
    prof = sensitivity_profile(float(cfg["rho"]), float(cfg["sigma"]), grid, centers)
    out = Path(cfg["out"])
    prof.to_csv(out)
    return [out], EXIT_OK


COMMANDS = {"returns": cmd_returns, "qfa": cmd_qfa, "fit": cmd_fit, "simulate": cmd_simulate,
            "test": cmd_test, "sensitivity": cmd_sensitivity}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON file of option values (flags take precedence)")
    common.add_argument("--seed", type=int, help=f"random seed (falls back to $QFA_SEED)")
    common.add_argument("--threads", type=int, help="worker threads (default: all cores)")
    common.add_argument("--out", help="output file or directory")

    p = argparse.ArgumentParser(prog="qfadiag", description="Quantile-frequency diagnostics "
                                "for volatility models.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("returns", parents=[common], argument_default=argparse.SUPPRESS,
                       help="log returns from a price file")
    s.add_argument("input", help="CSV with date and close columns")
    s.add_argument("--date-column", dest="date_column")
    s.add_argument("--close-column", dest="close_column")

    s = sub.add_parser("qfa", parents=[common], argument_default=argparse.SUPPRESS,
                       help="quantile periodogram matrices")
    s.add_argument("input")
    s.add_argument("--column")
    s.add_argument("--kind", choices=("first", "second"))
    s.add_argument("--alphas", help="lo:hi:step or comma list (default 0.05:0.95:0.01)")
    s.add_argument("--format", choices=("csv", "json", "both"))

    s = sub.add_parser("fit", parents=[common], argument_default=argparse.SUPPRESS,
                       help="fit GARCH(1,1) or GJR-GARCH(1,1)")
    s.add_argument("input")
    s.add_argument("--column")
    s.add_argument("--family", choices=("garch", "gjr"))

    s = sub.add_parser("simulate", parents=[common], argument_default=argparse.SUPPRESS,
                       help="simulate from a model file")
    s.add_argument("model", help="model.json")
    s.add_argument("--n", type=int)
    s.add_argument("--burn-in", dest="burn_in", type=int)

    s = sub.add_parser("test", parents=[common], argument_default=argparse.SUPPRESS,
                       help="bootstrap goodness-of-fit tests")
    s.add_argument("input", help="residuals (residual mode) or series")
    s.add_argument("--mode", choices=("residual", "direct", "discriminant"))
    s.add_argument("--model", help="model.json (direct, discriminant)")
    s.add_argument("--reference", help="series the model was fitted to (discriminant)")
    s.add_argument("--column")
    s.add_argument("--region", help="full, middle, lower, upper, or lo:hi")
    s.add_argument("--alphas")
    s.add_argument("--kind", choices=("first", "second"))
    s.add_argument("--B", type=int)
    s.add_argument("--n-realizations", dest="n_realizations", type=int)
    s.add_argument("--burn-in", dest="burn_in", type=int)
    s.add_argument("--drop-head", dest="drop_head", type=int)
    s.add_argument("--plus-one", dest="plus_one", action="store_true",
                   help="p-values as (count+1)/(B+1)")
    s.add_argument("--include-null", dest="include_null", action="store_true",
                   help="write the full null-sample matrix")

    s = sub.add_parser("sensitivity", parents=[common], argument_default=argparse.SUPPRESS,
                       help="KS / WL sensitivity profile")
    s.add_argument("--rho", type=float)
    s.add_argument("--sigma", type=float, help="bump spread in radians")
    s.add_argument("--centers", help="centre frequencies in cycles/observation, lo:hi:step or list")
    s.add_argument("--K", type=int, help="number of Fourier frequencies")
    return p


OUT_DEFAULTS = {"returns": "returns.csv", "qfa": "qfa_out", "fit": "fit_out",
                "simulate": "series.csv", "test": "report.json", "sensitivity": "profile.csv"}


def resolve_config(args: argparse.Namespace) -> dict:
    flags = vars(args)
    cmd = flags["command"]
    cfg = {"out": OUT_DEFAULTS[cmd], "threads": os.cpu_count() or 1}
    cfg.update(DEFAULTS[cmd])
    if "config" in flags:
        try:
            from_file = json.loads(Path(flags["config"]).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file: {exc}") from None
        if not isinstance(from_file, dict):
            raise UsageError("config file must hold a JSON object")
        cfg.update({k.replace("-", "_"): v for k, v in from_file.items()})
    cfg.update(flags)
    cfg["command"] = cmd
    if int(cfg["threads"]) < 1:
        raise UsageError("--threads must be at least 1")
    cfg["threads"] = int(cfg["threads"])
    return cfg


def _manifest(cfg, seed_source, outputs):
    return {
        "command": cfg["command"],
        "config": {k: v for k, v in sorted(cfg.items()) if k not in NON_CONFIG},
        "seed": cfg.get("seed"),
        "seed_source": seed_source,
        "outputs": [str(p) for p in outputs],
        "versions": {"qfadiag": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version(), "backend": BACKEND},
    }


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if cfg["command"] in RANDOMIZED:
            seed, source = resolve_seed(cfg.get("seed"))
        else:
            seed, source = cfg.get("seed"), "unused"
        cfg["seed"] = seed
        if source == "generated":
            print(f"qfadiag: seed {seed}", file=sys.stderr)
        outputs, code = COMMANDS[cfg["command"]](cfg)
        out = Path(cfg["out"])
        where = out / "manifest.json" if out.is_dir() else out.with_name(out.name + ".manifest.json")
        _write_json(where, _manifest(cfg, source, outputs))
        return code
    except SolverError as exc:
        print(f"qfadiag: error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (InputError, DegenerateError, ContractError, OSError) as exc:
        print(f"qfadiag: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except QfaError as exc:
        print(f"qfadiag: error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        print(f"qfadiag: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
