"""
GARCH(1,1) and GJR-GARCH(1,1) as members of the APARCH family.

    X_t = mu + Z_t,   Z_t = sigma_t eps_t,
    sigma_t**r = a0 + sum_i a_i (|Z_{t-i}| - c_i Z_{t-i})**r + sum_j b_j sigma_{t-j}**r

Simulation accepts any lag orders and power r > 0; fitting is Gaussian
quasi-maximum likelihood with r = 2.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import integrate, optimize, special, stats

from qfadiag._backend import kernels
from qfadiag.errors import DegenerateError, InputError, NonStationaryError
from qfadiag.rng import Purpose, substream
from qfadiag.series import TimeSeries, as_values

__all__ = [
    "FitResult",
    "GarchSpec",
    "Innovation",
    "SimulationResult",
    "TABLE1",
    "calibrate_innovations",
    "fit_qmle",
    "kappa",
    "residuals",
    "simulate",
]

FAMILIES = ("garch11", "gjr11", "custom")
DEFAULT_BURN_IN = 1000
MIN_FIT_LENGTH = 250
BOUNDARY_DROP = 10


@dataclass(frozen=True)
class Innovation:
    """Gaussian innovation law N(mean, sd**2)."""

    mean: float = 0.0
    sd: float = 1.0
    dist: str = "gaussian"

    def __post_init__(self):
        if self.dist != "gaussian":
            raise InputError(f"unsupported innovation distribution {self.dist!r}")
        if not (math.isfinite(self.mean) and self.sd > 0.0 and math.isfinite(self.sd)):
            raise InputError("innovation needs finite mean and sd > 0")

    def news_moment(self, c: float, r: float = 2.0) -> float:
        """E(|eps| - c eps)**r under this law."""
        m, s = self.mean, self.sd
        if m == 0.0:
            # |eps| - c eps = |eps| (1 - c sgn eps); halves of a symmetric law
            return s ** r * 2 ** (r / 2) * special.gamma((r + 1) / 2) / math.sqrt(math.pi) \
                * ((1 - c) ** r + (1 + c) ** r) / 2
        if r == 2.0:
            second = m * m + s * s
            u = m / s
            signed = second * (2 * stats.norm.cdf(u) - 1) + 2 * m * s * stats.norm.pdf(u)
            return (1 + c * c) * second - 2 * c * signed
        dens = stats.norm(m, s).pdf
        lo, hi = m - 12 * s, m + 12 * s
        neg = integrate.quad(lambda e: ((1 + c) * -e) ** r * dens(e), lo, min(0.0, hi))[0] if lo < 0 else 0.0
        pos = integrate.quad(lambda e: ((1 - c) * e) ** r * dens(e), max(0.0, lo), hi)[0] if hi > 0 else 0.0
        return neg + pos

    def to_dict(self) -> dict:
        return {"dist": self.dist, "mean": self.mean, "sd": self.sd}


def kappa(c: float) -> float:
    """E(|eps| - c eps)**2 for standard Gaussian eps, i.e. 1 + c**2."""
    if not abs(c) <= 1.0:
        raise InputError(f"|c| must be <= 1, got {c}")
    return 1.0 + c * c


def _floats(seq) -> tuple:
    return tuple(float(v) for v in seq)


@dataclass(frozen=True)
class GarchSpec:
    mu: float
    a0: float
    a: tuple = ()
    b: tuple = ()
    c: tuple = ()
    r: float = 2.0
    innovation: Innovation = field(default_factory=Innovation)
    family: str = "custom"
    phi: tuple = ()
    psi: tuple = ()

    def __post_init__(self):
        a, b = _floats(self.a), _floats(self.b)
        c = _floats(self.c) if len(self.c) else (0.0,) * len(a)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "phi", _floats(self.phi))
        object.__setattr__(self, "psi", _floats(self.psi))
        for name in ("mu", "a0", "r"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.family not in FAMILIES:
            raise InputError(f"family must be one of {FAMILIES}")
        if self.phi or self.psi:
            raise InputError("ARMA mean terms are not supported")
        if not (self.a0 > 0.0 and math.isfinite(self.a0)):
            raise InputError("a0 must be positive")
        if any(not v >= 0.0 for v in a + b):
            raise InputError("a_i and b_j must be nonnegative")
        if len(c) != len(a):
            raise InputError("c must have one entry per a_i")
        if any(not abs(v) <= 1.0 for v in c):
            raise InputError("|c_i| must be <= 1")
        if not self.r > 0.0:
            raise InputError("power r must be positive")
        if not math.isfinite(self.mu):
            raise InputError("mu must be finite")

    @classmethod
    def garch11(cls, mu, a0, a1, b1, innovation=None) -> "GarchSpec":
        return cls(mu, a0, (a1,), (b1,), (0.0,), 2.0, innovation or Innovation(), "garch11")

    @classmethod
    def gjr11(cls, mu, a0, a1, b1, c1, innovation=None) -> "GarchSpec":
        return cls(mu, a0, (a1,), (b1,), (c1,), 2.0, innovation or Innovation(), "gjr11")

    def news_moments(self) -> np.ndarray:
        return np.array([self.innovation.news_moment(ci, self.r) for ci in self.c])

    @property
    def persistence(self) -> float:
        """sum a_i E(|eps| - c_i eps)**r + sum b_j under the innovation law."""
        return float(np.dot(self.a, self.news_moments()) + sum(self.b))

    @property
    def is_stationary(self) -> bool:
        return self.persistence < 1.0

    @property
    def unconditional_level(self) -> float:
        """Stationary E sigma**r = a0 / (1 - persistence)."""
        p = self.persistence
        if not p < 1.0:
            raise NonStationaryError(f"persistence {p:.6g} >= 1: no finite stationary level")
        return self.a0 / (1.0 - p)

    def with_innovation(self, innovation: Innovation) -> "GarchSpec":
        return replace(self, innovation=innovation)

    def to_dict(self) -> dict:
        return {"family": self.family, "mu": self.mu, "a0": self.a0, "a": list(self.a),
                "b": list(self.b), "c": list(self.c), "r": self.r,
                "innovation": self.innovation.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "GarchSpec":
        try:
            inn = d.get("innovation", {})
            return cls(float(d["mu"]), float(d["a0"]), d.get("a", ()), d.get("b", ()),
                       d.get("c", ()), float(d.get("r", 2.0)),
                       Innovation(float(inn.get("mean", 0.0)), float(inn.get("sd", 1.0)),
                                  inn.get("dist", "gaussian")),
                       d.get("family", "custom"))
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise InputError(f"malformed model specification: {exc}") from None

    def to_json(self, path=None) -> str:
        # json writes floats with repr(), which round-trips exactly
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n", encoding="utf-8")
        return text

    @classmethod
    def from_json(cls, source) -> "GarchSpec":
        text = Path(source).read_text(encoding="utf-8") if isinstance(source, Path) or (
            isinstance(source, str) and not source.lstrip().startswith("{")) else source
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise InputError(f"model file is not valid JSON: {exc}") from None


# Estimates reported for S&P 500 daily log returns, keyed (family, period).
TABLE1 = {
    ("garch11", "1992-1996"): GarchSpec.garch11(5.29e-4, 1.42e-6, 4.33e-2, 9.19e-1),
    ("garch11", "1998-2002"): GarchSpec.garch11(2.34e-4, 7.12e-6, 9.49e-2, 8.68e-1),
    ("garch11", "2008-2012"): GarchSpec.garch11(2.32e-4, 2.48e-6, 1.08e-1, 8.83e-1),
    ("gjr11", "1992-1996"): GarchSpec.gjr11(4.18e-4, 2.74e-6, 2.68e-2, 8.73e-1, 1.0),
    ("gjr11", "1998-2002"): GarchSpec.gjr11(-3.58e-4, 6.66e-6, 4.85e-2, 8.71e-1, 1.0),
    ("gjr11", "2008-2012"): GarchSpec.gjr11(1.77e-4, 2.65e-6, 4.33e-2, 8.97e-1, 1.0),
}


@dataclass(frozen=True)
class SimulationResult:
    series: TimeSeries
    sigmas: TimeSeries
    innovations: TimeSeries

    def __iter__(self):
        return iter((self.series, self.sigmas, self.innovations))


def _presample(spec: GarchSpec, allow_nonstationary: bool):
    if spec.is_stationary:
        level = spec.unconditional_level
    elif allow_nonstationary:
        # no stationary level exists; start from the baseline instead
        level = spec.a0
    else:
        raise NonStationaryError(
            f"persistence {spec.persistence:.6g} >= 1; pass allow_nonstationary=True to simulate anyway")
    return level, np.ascontiguousarray(level * spec.news_moments(), dtype=float)


def _arrays(spec):
    return (np.ascontiguousarray(spec.a, dtype=float), np.ascontiguousarray(spec.b, dtype=float),
            np.ascontiguousarray(spec.c, dtype=float))


def simulate(spec: GarchSpec, n: int, seed: int | None = None, rng=None,
             burn_in: int = DEFAULT_BURN_IN, allow_nonstationary: bool = False) -> SimulationResult:
    """
    Draw ``burn_in + n`` innovations, run the recursion from the stationary
    level and keep the last ``n`` values.

    Give either ``seed`` (stream ``substream(seed, SIMULATE)``) or an explicit
    ``rng`` generator.
    """
    if int(n) < 1 or int(burn_in) < 0:
        raise InputError("need n >= 1 and burn_in >= 0")
    n, burn_in = int(n), int(burn_in)
    if rng is None:
        if seed is None:
            raise InputError("give a seed or an rng")
        rng = substream(seed, Purpose.SIMULATE)
    level, kap = _presample(spec, allow_nonstationary)
    total = n + burn_in
    e = spec.innovation.mean + spec.innovation.sd * rng.standard_normal(total)
    x = np.empty(total)
    sig = np.empty(total)
    a, b, c = _arrays(spec)
    kernels.aparch_simulate(e, spec.mu, spec.a0, a, b, c, spec.r, level, kap, x, sig)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(sig))):
        raise NonStationaryError("simulated path overflowed")
    return SimulationResult(TimeSeries(x[burn_in:]), TimeSeries(sig[burn_in:]),
                            TimeSeries(e[burn_in:]))


def _filter(spec: GarchSpec, x: np.ndarray):
    level, kap = _presample(spec, False)
    sig = np.empty_like(x)
    eps = np.empty_like(x)
    a, b, c = _arrays(spec)
    ok = kernels.aparch_filter(x, spec.mu, spec.a0, a, b, c, spec.r, level, kap, sig, eps)
    return ok, sig, eps


def residuals(spec: GarchSpec, series) -> TimeSeries:
    """eps_hat_t = (X_t - mu) / sigma_t with sigma started at the stationary level."""
    x = np.ascontiguousarray(as_values(series), dtype=float)
    ok, sig, eps = _filter(spec, x)
    if not ok or not np.all(np.isfinite(eps)) or np.any(sig == 0.0):
        raise DegenerateError("volatility recursion degenerated (sigma_t not positive and finite)")
    return TimeSeries(eps)


def calibrate_innovations(resid) -> Innovation:
    """Gaussian law matching the sample mean and (n-1) standard deviation."""
    e = as_values(resid)
    if e.shape[0] < 2:
        raise InputError("need at least 2 residuals")
    sd = float(np.std(e, ddof=1))
    if not sd > 0.0:
        raise DegenerateError("residuals have zero variance")
    return Innovation(float(np.mean(e)), sd)


@dataclass(frozen=True)
class FitResult:
    spec: GarchSpec
    loglik: float
    converged: bool
    iterations: int
    residuals: TimeSeries
    family: str = "garch11"

    def to_dict(self) -> dict:
        return {"family": self.family, "loglik": self.loglik, "converged": self.converged,
                "iterations": self.iterations, "spec": self.spec.to_dict()}


def _logistic(u):
    return 0.5 * (1.0 + math.tanh(0.5 * u))


def _logit(p):
    return math.log(p / (1.0 - p))


class _Transform:
    """
    Unconstrained theta <-> (mu, a0, a1, b1[, c1]).

    a0 = var exp(t1); persistence P = logistic(t2) and ARCH share
    s = logistic(t3) give a1 kappa(c1) = P s and b1 = P (1 - s);
    c1 = 2 logistic(t4) - 1.  Every theta maps into the stationary region.
    """

    def __init__(self, x, family):
        self.mean = float(x.mean())
        self.sd = float(x.std())
        self.var = self.sd ** 2
        self.asym = family == "gjr11"

    def params(self, th):
        mu = self.mean + self.sd * th[0]
        a0 = self.var * math.exp(min(th[1], 700.0))
        P = _logistic(th[2])
        s = _logistic(th[3])
        c1 = 2.0 * _logistic(th[4]) - 1.0 if self.asym else 0.0
        return mu, a0, P * s / kappa(c1), P * (1.0 - s), c1

    def theta(self, mu, a0, a1, b1, c1=0.0):
        k = kappa(c1)
        P = a1 * k + b1
        th = [(mu - self.mean) / self.sd, math.log(a0 / self.var), _logit(P), _logit(a1 * k / P)]
        if self.asym:
            th.append(_logit((c1 + 1.0) / 2.0))
        return np.array(th)


def _gaussian_loglik(x, mu, a0, a1, b1, c1):
    """Full Gaussian log-likelihood with sigma started at the stationary level."""
    n = x.shape[0]
    P = a1 * kappa(c1) + b1
    if not (a0 > 0.0 and P < 1.0):
        return -math.inf, None
    level = a0 / (1.0 - P)
    sig = np.empty(n)
    eps = np.empty(n)
    ok = kernels.aparch_filter(x, mu, a0, np.array([a1]), np.array([b1]), np.array([c1]), 2.0,
                               level, np.array([level * kappa(c1)]), sig, eps)
    if not ok:
        return -math.inf, None
    ll = -0.5 * (n * math.log(2.0 * math.pi) + 2.0 * np.sum(np.log(sig)) + np.dot(eps, eps))
    return (ll if math.isfinite(ll) else -math.inf), eps


def fit_qmle(series, family: str = "garch11", restarts: int = 3,
             max_iter: int = 4000) -> FitResult:
    """
    Gaussian quasi-maximum likelihood for GARCH(1,1) or GJR-GARCH(1,1).

    Nelder-Mead on a transformed space from the standard start (a1 = 0.05,
    b1 = 0.90, c1 = 0) plus ``restarts - 1`` fixed perturbations of it; the
    best optimum is then polished by one more run.  ``converged`` is the
    optimizer's own status for that final run.  The log-likelihood includes
    the -n/2 log(2 pi) constant.
    """
    if family not in ("garch11", "gjr11"):
        raise InputError("family must be 'garch11' or 'gjr11'")
    x = np.ascontiguousarray(as_values(series), dtype=float)
    n = x.shape[0]
    if n < MIN_FIT_LENGTH:
        raise InputError(f"need at least {MIN_FIT_LENGTH} observations to fit, got {n}")
    if not np.ptp(x) > 0.0:
        raise DegenerateError("cannot fit a constant series")
    tr = _Transform(x, family)

    def nll(th):
        ll, _ = _gaussian_loglik(x, *tr.params(th))
        return -ll if math.isfinite(ll) else 1e300

    start = tr.theta(tr.mean, tr.var * 0.05, 0.05, 0.90, 0.0)
    # fixed perturbations keep the fit deterministic without an rng argument
    jitter = np.random.default_rng(20240601).normal(0.0, 0.5, size=(max(restarts, 1), start.size))
    jitter[0] = 0.0
    opts = {"maxiter": max_iter, "maxfev": 2 * max_iter, "xatol": 1e-7, "fatol": 1e-9}
    best = None
    total_iter = 0
    for j in range(max(restarts, 1)):
        res = optimize.minimize(nll, start + jitter[j], method="Nelder-Mead", options=opts)
        total_iter += int(res.nit)
        if best is None or res.fun < best.fun:
            best = res
    final = optimize.minimize(nll, best.x, method="Nelder-Mead", options=opts)
    total_iter += int(final.nit)
    if final.fun > best.fun:
        final = best
    mu, a0, a1, b1, c1 = tr.params(final.x)
    spec = (GarchSpec.gjr11(mu, a0, a1, b1, c1) if family == "gjr11"
            else GarchSpec.garch11(mu, a0, a1, b1))
    ll, eps = _gaussian_loglik(x, mu, a0, a1, b1, c1)
    if eps is None:
        raise DegenerateError("likelihood is not finite at the fitted parameters")
    return FitResult(spec, float(ll), bool(final.success), total_iter, TimeSeries(eps), family)
