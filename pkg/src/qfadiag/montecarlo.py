"""
Monte Carlo machinery: model-implied quantile spectra, parametric bootstrap
null distributions and the residual, direct and discriminant tests.

Replicate ``r`` of any ensemble draws from ``substream(seed, purpose, r)``,
so results do not depend on execution order or on the number of threads.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from qfadiag.errors import InputError, QfaError, SolverError
from qfadiag.garch import (
    DEFAULT_BURN_IN,
    BOUNDARY_DROP,
    FitResult,
    GarchSpec,
    calibrate_innovations,
    simulate,
)
from qfadiag.metrics import PRESETS, Region, divergence, white_noise_target
from qfadiag.qfa import DEFAULT_QGRID, QfaMatrix, QuantileGrid, cumulate, normalize, quantile_periodogram
from qfadiag.rng import Purpose, substream
from qfadiag.series import FrequencyGrid, as_values

__all__ = [
    "BootstrapReport",
    "ExpectedSpectrum",
    "METRIC_NAMES",
    "MetricPipeline",
    "bold",
    "bootstrap_null",
    "direct_test",
    "discriminant_test",
    "expected_spectrum",
    "p_value",
    "residual_test",
    "upper_bound",
]

METRIC_NAMES = ("ks_max", "ks_mean", "wl_max", "wl_mean")
RECOMMENDED_LENGTH = 250
BOLD_LEVEL = 0.05
Z_ONE_SIDED_95 = 1.64


def p_value(observed: float, null, plus_one: bool = False) -> float:
    """Fraction of null values at or above ``observed``; ``plus_one`` gives (count+1)/(B+1)."""
    null = np.asarray(null, dtype=float)
    count = int(np.count_nonzero(null >= observed))
    if plus_one:
        return (count + 1) / (null.shape[0] + 1)
    return count / null.shape[0]


def upper_bound(p: float, B: int) -> float:
    """Upper end of the one-sided 95% interval, p + 1.64 sqrt(p(1-p)/B)."""
    return p + Z_ONE_SIDED_95 * math.sqrt(p * (1.0 - p) / B)


def bold(p: float, B: int) -> bool:
    return upper_bound(p, B) <= BOLD_LEVEL


def _run_replicates(fn: Callable[[int], object], count: int, threads: int, what: str) -> list:
    def guarded(r):
        try:
            return fn(r)
        except SolverError as exc:
            raise SolverError(f"{what} {r}: {exc}", incumbent=exc.incumbent, cell=exc.cell) from exc
        except QfaError as exc:
            raise type(exc)(f"{what} {r}: {exc}") from exc

    threads = max(1, int(threads or 1))
    if threads == 1 or count == 1:
        return [guarded(r) for r in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(guarded, range(count)))


@dataclass(frozen=True)
class MetricPipeline:
    """series -> periodogram -> normalize -> cumulate -> four metrics vs a fixed target."""

    qgrid: QuantileGrid
    region: Region
    target_norm: QfaMatrix
    target_cum: QfaMatrix
    kind: str = "second"

    def matrices(self, series):
        norm = normalize(quantile_periodogram(series, self.qgrid, kind=self.kind))
        return norm, cumulate(norm)

    def report(self, series):
        norm, cum = self.matrices(series)
        return divergence(norm, cum, self.target_norm, self.target_cum, self.region)

    def __call__(self, series) -> np.ndarray:
        return self.report(series).as_array()


@dataclass(frozen=True)
class ExpectedSpectrum:
    normalized: QfaMatrix
    cumulative: QfaMatrix
    n_realizations: int
    spec: GarchSpec | None
    series_length: int
    seed: int
    stderr: np.ndarray = field(repr=False)
    samples: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "n_realizations": self.n_realizations,
                "series_length": self.series_length,
                "spec": None if self.spec is None else self.spec.to_dict(),
                "normalized": self.normalized.to_dict(), "cumulative": self.cumulative.to_dict()}


def _generator(source, n: int, burn_in: int):
    """Turn a GarchSpec or a callable(rng, n) into a callable(rng) -> series."""
    if isinstance(source, GarchSpec):
        return lambda rng: simulate(source, n, rng=rng, burn_in=burn_in).series.values
    if callable(source):
        return lambda rng: source(rng, n)
    raise InputError("generator must be a GarchSpec or a callable(rng, n)")


def expected_spectrum(source, n: int, qgrid: QuantileGrid | None = None,
                      n_realizations: int = 1000, seed: int = 0, threads: int = 1,
                      kind: str = "second", burn_in: int = DEFAULT_BURN_IN,
                      keep_samples: bool = False) -> ExpectedSpectrum:
    """
    Ensemble average of normalized quantile periodograms, renormalized per level.

    ``source`` is a GarchSpec or a callable ``(rng, n) -> array``.
    ``stderr`` holds the entrywise standard error of the ensemble mean.
    """
    if n_realizations < 2:
        raise InputError("need at least 2 realizations")
    qgrid = qgrid if qgrid is not None else DEFAULT_QGRID
    gen = _generator(source, n, burn_in)

    def one(r):
        x = gen(substream(seed, Purpose.TARGET, r))
        return normalize(quantile_periodogram(x, qgrid, kind=kind)).values

    mats = _run_replicates(one, n_realizations, threads, "realization")
    # reduce in replicate order so the sum is independent of scheduling
    stack = np.stack(mats)
    mean = stack.mean(axis=0)
    stderr = stack.std(axis=0, ddof=1) / math.sqrt(n_realizations)
    grid = FrequencyGrid(n)
    norm = QfaMatrix(grid, qgrid.levels, mean / mean.sum(axis=0)[None, :],
                     state="normalized", kind=kind)
    return ExpectedSpectrum(norm, cumulate(norm), n_realizations,
                            source if isinstance(source, GarchSpec) else None, n, seed,
                            stderr, stack if keep_samples else None)


def bootstrap_null(metric_fn: Callable, source, n: int, B: int, seed: int, threads: int = 1,
                   burn_in: int = DEFAULT_BURN_IN) -> np.ndarray:
    """
    B x 4 matrix of metrics on series drawn from ``source`` (GarchSpec or
    callable ``(rng, n) -> array``); replicate r uses ``substream(seed, NULL, r)``.
    """
    if B < 1:
        raise InputError("B must be at least 1")
    gen = _generator(source, n, burn_in)
    rows = _run_replicates(lambda r: metric_fn(gen(substream(seed, Purpose.NULL, r))),
                           B, threads, "replicate")
    return np.vstack(rows)


@dataclass(frozen=True)
class BootstrapReport:
    observed: np.ndarray
    null_samples: np.ndarray
    region: Region
    test_kind: str
    seed: int
    plus_one: bool = False
    metric_names: tuple = METRIC_NAMES
    details: dict = field(default_factory=dict, compare=False)

    @property
    def B(self) -> int:
        return self.null_samples.shape[0]

    @property
    def p_values(self) -> np.ndarray:
        return np.array([p_value(o, self.null_samples[:, j], self.plus_one)
                         for j, o in enumerate(self.observed)])

    @property
    def upper_bounds(self) -> np.ndarray:
        return np.array([upper_bound(p, self.B) for p in self.p_values])

    @property
    def bold(self) -> np.ndarray:
        return self.upper_bounds <= BOLD_LEVEL

    def p(self, name: str) -> float:
        return float(self.p_values[self.metric_names.index(name)])

    def to_dict(self, include_null: bool = False) -> dict:
        qs = (0.5, 0.9, 0.95, 0.99)
        out = {
            "test_kind": self.test_kind,
            "seed": self.seed,
            "B": self.B,
            "p_value_rule": "(count+1)/(B+1)" if self.plus_one else "count/B",
            "region": self.region.to_dict(),
            "metrics": {},
        }
        for j, name in enumerate(self.metric_names):
            col = self.null_samples[:, j]
            out["metrics"][name] = {
                "observed": float(self.observed[j]),
                "p_value": float(self.p_values[j]),
                "upper_bound": float(self.upper_bounds[j]),
                "bold": bool(self.bold[j]),
                # empirical quantiles without interpolation: WL can be +inf
                "null_quantiles": {str(q): float(np.quantile(col, q, method="inverted_cdf"))
                                   for q in qs},
            }
        if include_null:
            out["null_samples"] = self.null_samples.tolist()
        out.update(self.details)
        return out

    def to_json(self, path, include_null: bool = False) -> None:
        Path(path).write_text(json.dumps(self.to_dict(include_null), indent=2) + "\n",
                              encoding="utf-8")


def residual_test(resid, qgrid: QuantileGrid | None = None, region: Region | None = None,
                  B: int = 1000, seed: int = 0, drop_head: int = BOUNDARY_DROP,
                  threads: int = 1, kind: str = "second", plus_one: bool = False) -> BootstrapReport:
    """
    White-noise test of model residuals.

    The first ``drop_head`` residuals are discarded.  The null draws i.i.d.
    Gaussian series with the residuals' mean and standard deviation.
    """
    qgrid = qgrid if qgrid is not None else DEFAULT_QGRID
    region = region or PRESETS["full"]
    e = as_values(resid)[drop_head:]
    m = e.shape[0]
    if m < RECOMMENDED_LENGTH:
        warnings.warn(f"residual series of length {m} is short; at least "
                      f"{RECOMMENDED_LENGTH} is recommended", stacklevel=2)
    inn = calibrate_innovations(e)
    tnorm, tcum = white_noise_target(FrequencyGrid(m), qgrid)
    pipe = MetricPipeline(qgrid, region, tnorm, tcum, kind)
    observed = pipe(e)

    def gaussian(rng, size):
        return inn.mean + inn.sd * rng.standard_normal(size)

    null = bootstrap_null(pipe, gaussian, m, B, seed, threads)
    return BootstrapReport(observed, null, region, "residual", seed, plus_one,
                           details={"innovation": inn.to_dict(), "drop_head": drop_head})


def _model_test(series, model: FitResult, qgrid, region, B, n_realizations, seed, threads,
                kind, burn_in, plus_one, test_kind, drop_head) -> BootstrapReport:
    qgrid = qgrid if qgrid is not None else DEFAULT_QGRID
    region = region or PRESETS["full"]
    x = as_values(series)
    inn = calibrate_innovations(as_values(model.residuals)[drop_head:])
    spec = model.spec.with_innovation(inn)
    target = expected_spectrum(spec, x.shape[0], qgrid, n_realizations, seed, threads, kind,
                               burn_in)
    pipe = MetricPipeline(qgrid, region, target.normalized, target.cumulative, kind)
    observed = pipe(x)
    null = bootstrap_null(pipe, spec, x.shape[0], B, seed, threads, burn_in)
    return BootstrapReport(observed, null, region, test_kind, seed, plus_one,
                           details={"model": spec.to_dict(), "n_realizations": n_realizations,
                                    "burn_in": burn_in})


def direct_test(series, fitted: FitResult, qgrid: QuantileGrid | None = None,
                region: Region | None = None, B: int = 1000, n_realizations: int = 1000,
                seed: int = 0, threads: int = 1, kind: str = "second",
                burn_in: int = DEFAULT_BURN_IN, plus_one: bool = False,
                drop_head: int = BOUNDARY_DROP) -> BootstrapReport:
    """
    Test a series against the expected quantile spectrum of its fitted model.

    Innovations are Gaussian, calibrated to the fitted residuals (first
    ``drop_head`` excluded).  The target is estimated once from the TARGET
    streams and held fixed across the null replicates.
    """
    return _model_test(series, fitted, qgrid, region, B, n_realizations, seed, threads, kind,
                       burn_in, plus_one, "direct", drop_head)


def discriminant_test(series_a, model_b: FitResult, qgrid: QuantileGrid | None = None,
                      region: Region | None = None, B: int = 1000, n_realizations: int = 1000,
                      seed: int = 0, threads: int = 1, kind: str = "second",
                      burn_in: int = DEFAULT_BURN_IN, plus_one: bool = False,
                      drop_head: int = BOUNDARY_DROP) -> BootstrapReport:
    """Test ``series_a`` against a model fitted to a different series."""
    return _model_test(series_a, model_b, qgrid, region, B, n_realizations, seed, threads, kind,
                       burn_in, plus_one, "discriminant", drop_head)
