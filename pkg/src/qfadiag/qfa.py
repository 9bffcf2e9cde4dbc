"""
Quantile periodograms over the Fourier x quantile-level grid.

A :class:`QfaMatrix` holds K frequencies by L levels and moves through
three states: ``raw`` (periodogram ordinates), ``normalized`` (each level's
column sums to one) and ``cumulative`` (running sums over frequency).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from qfadiag.errors import ContractError, DegenerateError, InputError, SolverError
from qfadiag.qreg import STATUS_BUDGET, STATUS_OK, sample_quantile, solve_grid
from qfadiag.series import MIN_SPECTRAL_LENGTH, FrequencyGrid, as_values, ordinary_periodogram

__all__ = [
    "QfaMatrix",
    "QuantileGrid",
    "cumulate",
    "level_crossing_periodogram",
    "lower_half",
    "normalize",
    "quantile_periodogram",
]

STATES = ("raw", "normalized", "cumulative")
KINDS = ("first", "second", "external")
NEGATIVE_SLACK = 1e-12


@dataclass(frozen=True)
class QuantileGrid:
    """Strictly increasing quantile levels inside (0, 1)."""

    levels: np.ndarray

    def __post_init__(self):
        lv = np.array(self.levels, dtype=float).ravel()
        if lv.size == 0:
            raise InputError("quantile grid is empty")
        if np.any(~(lv > 0.0)) or np.any(~(lv < 1.0)):
            raise InputError("quantile levels must lie in the open interval (0, 1)")
        if np.any(np.diff(lv) <= 0.0):
            raise InputError("quantile levels must be strictly increasing")
        lv.setflags(write=False)
        object.__setattr__(self, "levels", lv)

    @classmethod
    def from_range(cls, lo: float = 0.05, hi: float = 0.95, step: float = 0.01) -> "QuantileGrid":
        if not (0.0 < lo <= hi < 1.0) or not step > 0.0:
            raise InputError("need 0 < lo <= hi < 1 and step > 0")
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return cls(np.round(lo + step * np.arange(count), 12))

    @classmethod
    def parse(cls, text: str) -> "QuantileGrid":
        """``"lo:hi:step"`` or a comma-separated list of levels."""
        text = text.strip()
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise InputError(f"expected lo:hi:step, got {text!r}")
            try:
                lo, hi, step = (float(p) for p in parts)
            except ValueError:
                raise InputError(f"cannot parse quantile grid {text!r}") from None
            return cls.from_range(lo, hi, step)
        try:
            return cls([float(p) for p in text.split(",")])
        except ValueError:
            raise InputError(f"cannot parse quantile grid {text!r}") from None

    def __len__(self) -> int:
        return self.levels.shape[0]


DEFAULT_QGRID = QuantileGrid.from_range(0.05, 0.95, 0.01)


@dataclass(frozen=True)
class QfaMatrix:
    """Frequencies x levels matrix tagged with its state and periodogram kind."""

    grid: FrequencyGrid
    alphas: np.ndarray
    values: np.ndarray
    state: str = "raw"
    kind: str = "second"
    extras: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.state not in STATES:
            raise InputError(f"state must be one of {STATES}")
        if self.kind not in KINDS:
            raise InputError(f"kind must be one of {KINDS}")
        vals = np.array(self.values, dtype=float)
        alphas = np.array(self.alphas, dtype=float).ravel()
        if vals.shape != (self.grid.K, alphas.shape[0]):
            raise ContractError(f"values shape {vals.shape} does not match grid "
                                f"({self.grid.K}, {alphas.shape[0]})")
        vals.setflags(write=False)
        alphas.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "alphas", alphas)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def K(self) -> int:
        return self.grid.K

    @property
    def freqs(self) -> np.ndarray:
        return self.grid.freqs

    def column(self, alpha: float) -> np.ndarray:
        hit = np.flatnonzero(np.isclose(self.alphas, alpha, rtol=0.0, atol=1e-9))
        if hit.size == 0:
            raise InputError(f"level {alpha} not in grid")
        return self.values[:, hit[0]]

    def aligned_with(self, other: "QfaMatrix") -> bool:
        return (self.grid.n == other.grid.n and self.alphas.shape == other.alphas.shape
                and np.allclose(self.alphas, other.alphas, rtol=0.0, atol=1e-12))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "kind": self.kind,
            "state": self.state,
            "freqs": [float(f) for f in self.freqs],
            "alphas": [float(a) for a in self.alphas],
            "values": [[float(v) for v in row] for row in self.values],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "QfaMatrix":
        return cls(FrequencyGrid(int(data["n"])), data["alphas"], data["values"],
                   state=data["state"], kind=data["kind"])

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def from_json(cls, path) -> "QfaMatrix":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_csv(self, path, rows: slice | None = None) -> None:
        """Long format ``freq,alpha,value``, row-major by frequency."""
        idx = range(self.K)[rows] if rows is not None else range(self.K)
        freqs = self.freqs
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            fh.write("freq,alpha,value\n")
            for k in idx:
                for l, a in enumerate(self.alphas):
                    fh.write(f"{float(freqs[k])!r},{float(a)!r},{float(self.values[k, l])!r}\n")


def _with(m: QfaMatrix, values, state) -> QfaMatrix:
    return QfaMatrix(m.grid, m.alphas, values, state=state, kind=m.kind)


def quantile_periodogram(series, qgrid: QuantileGrid | None = None, kind: str = "second",
                         threads: int = 1) -> QfaMatrix:
    """
    Raw quantile periodogram on the interior Fourier grid.

    ``kind="second"`` gives, per cell, the drop in total check loss when the
    cosine and sine terms are added to a constant fit; ``kind="first"`` gives
    (n/4)(A**2 + B**2) from the fitted trigonometric coefficients.  Second
    kind depends only on optimal objectives, which are unique.
    """
    if kind not in ("first", "second"):
        raise InputError("kind must be 'first' or 'second'")
    qgrid = qgrid if qgrid is not None else DEFAULT_QGRID
    y = as_values(series)
    n = y.shape[0]
    if n < MIN_SPECTRAL_LENGTH:
        raise InputError(f"need n >= {MIN_SPECTRAL_LENGTH} for spectral operations")
    grid = FrequencyGrid(n)
    cosm, sinm = grid.design()
    alphas = qgrid.levels
    obj, coef, status, _ = solve_grid(y, cosm, sinm, alphas, threads=threads)
    bad = np.argwhere(status != STATUS_OK)
    if bad.size:
        k, l = (int(v) for v in bad[0])
        reason = "iteration budget exhausted" if status[k, l] == STATUS_BUDGET else "singular basis"
        raise SolverError(f"solver failed at frequency index {k + 1}, alpha={alphas[l]}: {reason}",
                          incumbent=(obj[k, l], tuple(coef[k, l])), cell=(k, l))
    if kind == "first":
        values = 0.25 * n * (coef[:, :, 1] ** 2 + coef[:, :, 2] ** 2)
    else:
        base = np.array([sample_quantile(y, a)[1] for a in alphas])
        values = base[None, :] - obj
        slack = NEGATIVE_SLACK * np.maximum(1.0, base)[None, :]
        worst = np.argwhere(values < -slack)
        if worst.size:
            k, l = (int(v) for v in worst[0])
            raise SolverError(f"negative ordinate {values[k, l]:.3e} at frequency index {k + 1}, "
                              f"alpha={alphas[l]}: trigonometric fit worse than constant fit",
                              incumbent=(obj[k, l], tuple(coef[k, l])), cell=(k, l))
        values = np.maximum(values, 0.0)
    return QfaMatrix(grid, alphas, values, state="raw", kind=kind)


def normalize(m: QfaMatrix) -> QfaMatrix:
    """Divide each level's column by its sum over all grid frequencies."""
    if m.state != "raw" and m.state != "normalized":
        raise ContractError(f"normalize expects a raw matrix, got {m.state}")
    sums = m.values.sum(axis=0)
    zero = np.flatnonzero(~(sums > 0.0))
    if zero.size:
        raise DegenerateError(f"column for alpha={m.alphas[zero[0]]} has zero total; "
                              "cannot normalize")
    return _with(m, m.values / sums[None, :], "normalized")


def cumulate(m: QfaMatrix) -> QfaMatrix:
    if m.state != "normalized":
        raise ContractError(f"cumulate expects a normalized matrix, got {m.state}")
    return _with(m, np.cumsum(m.values, axis=0), "cumulative")


def lower_half(m: QfaMatrix) -> slice:
    """Row slice covering frequencies below 0.25 cycles per observation."""
    return slice(0, int(np.count_nonzero(m.freqs < 0.25)))


def level_crossing_periodogram(series, alpha: float) -> np.ndarray:
    """
    Normalized ordinary periodogram of the sign series sgn(X_t - lam), with
    lam the sample alpha-quantile and sgn(0) = +1.
    """
    y = as_values(series)
    if y.shape[0] < MIN_SPECTRAL_LENGTH:
        raise InputError(f"need n >= {MIN_SPECTRAL_LENGTH} for spectral operations")
    if np.all(y == y[0]):
        raise DegenerateError("constant series has no level crossings")
    lam, _ = sample_quantile(y, alpha)
    signs = np.where(y >= lam, 1.0, -1.0)
    if np.all(signs == signs[0]):
        raise DegenerateError(f"no observation crosses the {alpha}-quantile")
    return ordinary_periodogram(signs)
