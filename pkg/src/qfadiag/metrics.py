"""
Spectral divergence metrics between observed and target quantile spectra.

Kolmogorov-Smirnov (KS) metrics compare cumulative matrices; Whittle
likelihood (WL) metrics compare normalized matrices through
d(x) = x - log(x) - 1.  Each is computed per level over a frequency set and
then aggregated over a level set by max or mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaincc

from qfadiag.errors import ContractError, DegenerateError, InputError
from qfadiag.qfa import QfaMatrix, QuantileGrid
from qfadiag.series import FrequencyGrid, as_values, autocorrelation

__all__ = [
    "ClassicalTestResult",
    "DivergenceReport",
    "MixtureSpec",
    "Region",
    "SensitivityProfile",
    "chi2_sf",
    "d_divergence",
    "divergence",
    "ks_metrics",
    "ljung_box",
    "lm_arch",
    "mixture_periodogram",
    "sensitivity_profile",
    "white_noise_target",
    "wl_metrics",
]


@dataclass(frozen=True)
class Region:
    """
    Quantile-frequency region A x Omega with a level weight.

    Levels are selected by an interval with open/closed ends; frequencies by
    an optional tuple of grid indices (1-based, default: all).  ``weight`` maps
    an array of levels to nonnegative weights (default 1).
    """

    lo: float = 0.0
    hi: float = 1.0
    lo_closed: bool = False
    hi_closed: bool = False
    freq_indices: tuple | None = None
    weight: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = "custom"

    def level_mask(self, alphas) -> np.ndarray:
        a = np.asarray(alphas, dtype=float)
        lo_ok = a >= self.lo if self.lo_closed else a > self.lo
        hi_ok = a <= self.hi if self.hi_closed else a < self.hi
        mask = lo_ok & hi_ok
        if not mask.any():
            raise InputError(f"region {self.name!r} contains no quantile levels")
        return mask

    def freq_mask(self, grid: FrequencyGrid) -> np.ndarray:
        if self.freq_indices is None:
            return np.ones(grid.K, dtype=bool)
        mask = np.isin(grid.indices, np.asarray(self.freq_indices))
        if not mask.any():
            raise InputError(f"region {self.name!r} contains no frequencies")
        return mask

    def weights(self, alphas) -> np.ndarray:
        a = np.asarray(alphas, dtype=float)
        if self.weight is None:
            return np.ones_like(a)
        w = np.broadcast_to(np.asarray(self.weight(a), dtype=float), a.shape)
        if np.any(w < 0) or not np.any(w > 0):
            raise InputError("weights must be nonnegative with at least one positive value")
        return np.array(w)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "lo": self.lo,
            "hi": self.hi,
            "lo_closed": self.lo_closed,
            "hi_closed": self.hi_closed,
            "freq_indices": None if self.freq_indices is None else [int(k) for k in self.freq_indices],
            "weight": "constant" if self.weight is None else "custom",
        }

    @classmethod
    def preset(cls, name: str) -> "Region":
        try:
            return PRESETS[name]
        except KeyError:
            raise InputError(f"unknown region preset {name!r}; choose from {sorted(PRESETS)}") from None


PRESETS = {
    "full": Region(0.0, 1.0, name="full"),
    "middle": Region(0.3, 0.7, name="middle"),
    "lower": Region(0.0, 0.3, hi_closed=True, name="lower"),
    "upper": Region(0.7, 1.0, lo_closed=True, name="upper"),
}


@dataclass(frozen=True)
class DivergenceReport:
    alphas: np.ndarray
    ks_levels: np.ndarray
    wl_levels: np.ndarray
    region: Region

    @property
    def ks_max(self) -> float:
        return float(self.ks_levels.max())

    @property
    def ks_mean(self) -> float:
        return float(self.ks_levels.mean())

    @property
    def wl_max(self) -> float:
        return float(self.wl_levels.max())

    @property
    def wl_mean(self) -> float:
        return float(self.wl_levels.mean())

    def as_array(self) -> np.ndarray:
        """(ks_max, ks_mean, wl_max, wl_mean)"""
        return np.array([self.ks_max, self.ks_mean, self.wl_max, self.wl_mean])

    def to_dict(self) -> dict:
        return {
            "region": self.region.to_dict(),
            "ks_max": self.ks_max,
            "ks_mean": self.ks_mean,
            "wl_max": self.wl_max,
            "wl_mean": self.wl_mean,
            "per_level": [{"alpha": float(a), "ks": float(k), "wl": float(w)}
                          for a, k, w in zip(self.alphas, self.ks_levels, self.wl_levels)],
        }


def d_divergence(x):
    """x - log(x) - 1 for x > 0; elementwise on arrays."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0.0)):
        raise InputError("d(x) is defined for x > 0 only")
    out = arr - np.log(arr) - 1.0
    return float(out) if out.ndim == 0 else out


def _region_cells(observed: QfaMatrix, target: QfaMatrix, region: Region):
    if not observed.aligned_with(target):
        raise ContractError("observed and target matrices are on different grids")
    lmask = region.level_mask(observed.alphas)
    fmask = region.freq_mask(observed.grid)
    return lmask, fmask, region.weights(observed.alphas[lmask])


def _ks_levels(observed_cum, target_cum, region):
    if observed_cum.state != "cumulative" or target_cum.state != "cumulative":
        raise ContractError("KS metrics need cumulative matrices")
    lmask, fmask, w = _region_cells(observed_cum, target_cum, region)
    gap = np.abs(observed_cum.values[np.ix_(fmask, lmask)] - target_cum.values[np.ix_(fmask, lmask)])
    return lmask, w * math.sqrt(fmask.sum()) * gap.max(axis=0)


def _wl_levels(observed_norm, target_norm, region):
    if observed_norm.state != "normalized" or target_norm.state != "normalized":
        raise ContractError("WL metrics need normalized matrices")
    lmask, fmask, w = _region_cells(observed_norm, target_norm, region)
    tgt = target_norm.values[np.ix_(fmask, lmask)]
    if np.any(~(tgt > 0.0)):
        raise DegenerateError("target spectrum has a zero entry inside the region")
    obs = observed_norm.values[np.ix_(fmask, lmask)]
    ratio = obs / tgt
    # d(x) -> infinity as x -> 0; an exactly zero observed ordinate is a valid input
    with np.errstate(divide="ignore"):
        terms = ratio - np.log(ratio) - 1.0
    return lmask, w * terms.sum(axis=0) / math.sqrt(fmask.sum())


def ks_metrics(observed_cum: QfaMatrix, target_cum: QfaMatrix, region: Region | None = None):
    """Returns ``(ks_max, ks_mean, per_level)``; per-level values are
    w(alpha) * sqrt(|Omega|) * max over Omega of the cumulative gap."""
    region = region or PRESETS["full"]
    _, levels = _ks_levels(observed_cum, target_cum, region)
    return float(levels.max()), float(levels.mean()), levels


def wl_metrics(observed_norm: QfaMatrix, target_norm: QfaMatrix, region: Region | None = None):
    """Returns ``(wl_max, wl_mean, per_level)``; per-level values are
    w(alpha) * |Omega|**-0.5 * sum over Omega of d(observed / target)."""
    region = region or PRESETS["full"]
    _, levels = _wl_levels(observed_norm, target_norm, region)
    return float(levels.max()), float(levels.mean()), levels


def divergence(observed_norm, observed_cum, target_norm, target_cum,
               region: Region | None = None) -> DivergenceReport:
    region = region or PRESETS["full"]
    lmask, ks = _ks_levels(observed_cum, target_cum, region)
    _, wl = _wl_levels(observed_norm, target_norm, region)
    return DivergenceReport(observed_norm.alphas[lmask], ks, wl, region)


def white_noise_target(grid: FrequencyGrid, qgrid: QuantileGrid):
    """Flat 1/K normalized target and k/K cumulative staircase, same for every level."""
    K, L = grid.K, len(qgrid)
    flat = np.full((K, L), 1.0 / K)
    stair = np.repeat((np.arange(1, K + 1) / K)[:, None], L, axis=1)
    return (QfaMatrix(grid, qgrid.levels, flat, state="normalized", kind="external"),
            QfaMatrix(grid, qgrid.levels, stair, state="cumulative", kind="external"))


@dataclass(frozen=True)
class MixtureSpec:
    """White-noise floor mixed with a Gaussian bump centred at ``omega_c`` (radians)."""

    rho: float
    omega_c: float
    sigma: float

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise InputError("rho must lie in (0, 1)")
        if not self.sigma > 0.0:
            raise InputError("sigma must be positive")
        if not 0.0 < self.omega_c < math.pi:
            raise InputError("omega_c must lie in (0, pi)")


def mixture_periodogram(spec: MixtureSpec, grid: FrequencyGrid) -> np.ndarray:
    """(1 - rho)/K + rho * delta_k, with delta the normal density at the grid
    points rescaled to sum to one."""
    z = (grid.omegas - spec.omega_c) / spec.sigma
    bump = np.exp(-0.5 * z * z)
    total = bump.sum()
    if not total > 0.0:
        raise DegenerateError("bump has no mass on the frequency grid; increase sigma")
    return (1.0 - spec.rho) / grid.K + spec.rho * bump / total


@dataclass(frozen=True)
class SensitivityProfile:
    centers: np.ndarray
    ks: np.ndarray
    wl: np.ndarray

    @property
    def ks_rescaled(self) -> np.ndarray:
        return self.ks / self.ks.mean()

    @property
    def wl_rescaled(self) -> np.ndarray:
        return self.wl / self.wl.mean()

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("center_freq,ks_rescaled,wl_rescaled\n")
            for c, k, w in zip(self.centers, self.ks_rescaled, self.wl_rescaled):
                fh.write(f"{float(c)!r},{float(k)!r},{float(w)!r}\n")


def sensitivity_profile(rho: float, sigma: float, grid: FrequencyGrid,
                        centers: Sequence[float]) -> SensitivityProfile:
    """
    KS and WL of the mixture periodogram against white noise, for a single
    level with unit weight over the full grid, as the bump centre moves.

    ``centers`` are angular frequencies; the returned ``centers`` are in
    cycles per observation (omega / 2 pi).
    """
    centers = np.asarray(centers, dtype=float)
    K = grid.K
    stair = np.arange(1, K + 1) / K
    ks, wl = [], []
    for wc in centers:
        q = mixture_periodogram(MixtureSpec(rho, float(wc), sigma), grid)
        ks.append(math.sqrt(K) * np.max(np.abs(np.cumsum(q) - stair)))
        wl.append(np.sum(d_divergence(q * K)) / math.sqrt(K))
    return SensitivityProfile(centers / (2.0 * math.pi), np.array(ks), np.array(wl))


@dataclass(frozen=True)
class ClassicalTestResult:
    statistic: float
    dof: int
    p_value: float
    kind: str

    def to_dict(self) -> dict:
        return {"kind": self.kind, "statistic": self.statistic, "dof": self.dof,
                "p_value": self.p_value}


def chi2_sf(stat: float, dof: int) -> float:
    """Upper tail of the chi-square law via the regularized incomplete gamma."""
    if stat <= 0.0:
        return 1.0
    return float(min(1.0, max(0.0, gammaincc(0.5 * dof, 0.5 * stat))))


def ljung_box(series, num_lags: int = 10, fold_first: bool = True,
              drop_head: int = 10) -> ClassicalTestResult:
    """
    Portmanteau statistic m(m+2) sum_tau rho_tau**2 / (m - tau) on the
    (squared, by default) series after dropping ``drop_head`` values.
    """
    x = as_values(series)[drop_head:]
    m = x.shape[0]
    if num_lags < 1 or num_lags >= m:
        raise InputError(f"need 1 <= num_lags < effective length {m}")
    y = x * x if fold_first else x
    acf = autocorrelation(y, num_lags)[1:]
    taus = np.arange(1, num_lags + 1)
    stat = float(m * (m + 2) * np.sum(acf ** 2 / (m - taus)))
    return ClassicalTestResult(stat, num_lags, chi2_sf(stat, num_lags), "ljung_box")


def lm_arch(series, order: int = 10, drop_head: int = 10) -> ClassicalTestResult:
    """
    Engle's LM test: regress the squared series on ``order`` own lags plus an
    intercept; statistic is (rows in the regression) x R**2.
    """
    x = as_values(series)[drop_head:]
    e2 = x * x
    m = e2.shape[0]
    if order < 1 or order >= m - 1:
        raise InputError(f"need 1 <= order < effective length {m} - 1")
    target = e2[order:]
    design = np.column_stack([np.ones(m - order)] +
                             [e2[order - j:m - j] for j in range(1, order + 1)])
    if np.linalg.matrix_rank(design) < design.shape[1] or np.ptp(target) == 0.0:
        raise DegenerateError("LM regression design is singular (constant squared series?)")
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    resid = target - design @ coef
    centred = target - target.mean()
    r2 = 1.0 - np.dot(resid, resid) / np.dot(centred, centred)
    stat = float(target.shape[0] * max(r2, 0.0))
    return ClassicalTestResult(stat, order, chi2_sf(stat, order), "lm_arch")
