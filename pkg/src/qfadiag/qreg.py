"""
Check-loss regression on the trigonometric design (1, cos(wt), sin(wt)).

The solver lives in the compiled kernel (``_kernels.pyx``) with a numpy
fallback; :func:`oracle_trig_quantile` is an independent brute-force
enumeration used to certify it.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from qfadiag._backend import kernels
from qfadiag.errors import InputError, SolverError
from qfadiag.series import FrequencyGrid, as_values

__all__ = [
    "TrigQuantileFit",
    "check_loss",
    "fit_trig_quantile",
    "fit_trig_quantile_batch",
    "oracle_trig_quantile",
    "sample_quantile",
    "solve_grid",
]

STATUS_OK = 0
STATUS_BUDGET = 1
STATUS_SINGULAR = 2

ORACLE_MAX_N = 64
BUDGET_PER_OBS = 50


@dataclass(frozen=True)
class TrigQuantileFit:
    """Optimal ``lam + A cos(wt) + B sin(wt)`` at one (omega, alpha) cell."""

    omega: float
    alpha: float
    A: float
    B: float
    lam: float
    objective: float
    iterations: int = 0

    def fitted(self, n: int) -> np.ndarray:
        t = np.arange(1, n + 1)
        return self.lam + self.A * np.cos(self.omega * t) + self.B * np.sin(self.omega * t)


def _check_alpha(alpha):
    a = np.asarray(alpha, dtype=float)
    if np.any(~(a > 0.0)) or np.any(~(a < 1.0)):
        raise InputError(f"quantile level must lie in (0, 1), got {alpha}")


def check_loss(x, alpha):
    """rho_alpha(x) = x (alpha - 1{x < 0}); works elementwise on arrays."""
    _check_alpha(alpha)
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 0.0, alpha * x, (alpha - 1.0) * x)
    return float(out) if out.ndim == 0 else out


def sample_quantile(series, alpha: float) -> tuple[float, float]:
    """
    Minimiser of sum rho_alpha(X_t - lam) and the minimised value.

    When the minimiser is an interval the lower endpoint is returned.
    """
    _check_alpha(alpha)
    y = np.sort(as_values(series))
    n = y.shape[0]
    # lower endpoint: smallest order statistic j with j >= alpha*n
    j = math.ceil(alpha * n - 1e-12 * n)
    j = min(max(j, 1), n)
    lam = float(y[j - 1])
    return lam, float(np.sum(check_loss(y - lam, alpha)))


def _design_rows(n: int, omega: float, allow_any_omega: bool):
    grid = FrequencyGrid(n)
    k = omega * n / (2.0 * np.pi)
    kr = int(round(k))
    on_grid = 1 <= kr <= grid.K and abs(k - kr) < 1e-9
    if on_grid:
        t = np.arange(1, n + 1)
        phase = 2.0 * np.pi * ((kr * t) % n) / n
    else:
        if not allow_any_omega:
            raise InputError(f"omega={omega} is not an interior Fourier frequency for n={n}; "
                             "pass allow_any_omega=True to override")
        if not 0.0 < omega < np.pi:
            raise InputError("omega must lie in (0, pi)")
        phase = omega * np.arange(1, n + 1)
    return np.ascontiguousarray(np.cos(phase)[None, :]), np.ascontiguousarray(np.sin(phase)[None, :])


def solve_grid(y, cosm, sinm, alphas, threads: int = 1):
    """
    Solve every (frequency row, level) cell.

    Returns ``(objective, coef, status, iterations)`` with shapes (K, L),
    (K, L, 3), (K, L), (K, L); ``coef[..., :]`` is (intercept, cos, sin).
    Rows are distributed over ``threads`` workers in contiguous chunks; each
    row is solved independently, so the output does not depend on ``threads``.
    """
    y = np.ascontiguousarray(y, dtype=float)
    alphas = np.ascontiguousarray(alphas, dtype=float)
    K, L = cosm.shape[0], alphas.shape[0]
    obj = np.zeros((K, L))
    coef = np.zeros((K, L, 3))
    status = np.zeros((K, L), dtype=np.int32)
    iters = np.zeros((K, L), dtype=np.intp)
    budget = BUDGET_PER_OBS * y.shape[0]
    threads = max(1, min(int(threads or 1), K))
    if threads == 1:
        kernels.trig_qr_rows(y, cosm, sinm, alphas, obj, coef, status, iters, 0, K, budget)
    else:
        bounds = np.linspace(0, K, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(kernels.trig_qr_rows, y, cosm, sinm, alphas, obj, coef,
                                   status, iters, int(lo), int(hi), budget)
                       for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
            for f in futures:
                f.result()
    return obj, coef, status, iters


def _fits_from_row(omega, alphas, obj, coef, status, iters):
    fits = []
    for l, a in enumerate(alphas):
        fit = TrigQuantileFit(omega=float(omega), alpha=float(a), A=float(coef[l, 1]),
                              B=float(coef[l, 2]), lam=float(coef[l, 0]),
                              objective=float(obj[l]), iterations=int(iters[l]))
        if status[l] != STATUS_OK:
            reason = "iteration budget exhausted" if status[l] == STATUS_BUDGET else "singular basis"
            raise SolverError(f"trigonometric quantile regression failed at alpha={a}: {reason}",
                              incumbent=fit)
        fits.append(fit)
    return fits


def fit_trig_quantile_batch(series, omega: float, alphas, allow_any_omega: bool = False):
    """All levels at one frequency in a single solver pass (warm-started in level order)."""
    y = as_values(series)
    alphas = np.asarray(alphas, dtype=float).ravel()
    _check_alpha(alphas)
    if alphas.size == 0 or np.any(np.diff(alphas) <= 0):
        raise InputError("alphas must be non-empty and strictly increasing")
    if y.shape[0] < 3:
        raise InputError("need n >= 3")
    cosm, sinm = _design_rows(y.shape[0], omega, allow_any_omega)
    obj, coef, status, iters = solve_grid(y, cosm, sinm, alphas)
    return _fits_from_row(omega, alphas, obj[0], coef[0], status[0], iters[0])


def fit_trig_quantile(series, omega: float, alpha: float, allow_any_omega: bool = False):
    """Global minimiser of sum_t rho_alpha(X_t - lam - A cos(wt) - B sin(wt))."""
    return fit_trig_quantile_batch(series, omega, [alpha], allow_any_omega)[0]


def oracle_trig_quantile(series, omega: float, alpha: float,
                         allow_any_omega: bool = False) -> TrigQuantileFit:
    """
    Exhaustive search over basic solutions of the check-loss linear program.

    Every optimal solution set contains a vertex that interpolates ``rank``
    observations with linearly independent design rows, so scoring every
    such interpolant finds the optimum.  Cost grows as n**4; limited to
    n <= 64.
    """
    _check_alpha(alpha)
    y = as_values(series)
    n = y.shape[0]
    if n > ORACLE_MAX_N:
        raise InputError(f"oracle limited to n <= {ORACLE_MAX_N}")
    cosm, sinm = _design_rows(n, omega, allow_any_omega)
    X = np.column_stack([np.ones(n), cosm[0], sinm[0]])
    # reduce to independent columns when the design is rank deficient
    cols = [0]
    for j in (1, 2):
        if np.linalg.matrix_rank(X[:, cols + [j]], tol=1e-9) > len(cols):
            cols.append(j)
    Xr = X[:, cols]
    p = len(cols)
    combos = np.array(list(itertools.combinations(range(n), p)), dtype=np.intp)
    M = Xr[combos]
    det = np.linalg.det(M)
    keep = np.abs(det) > 1e-10
    combos, M = combos[keep], M[keep]
    beta = np.linalg.solve(M, y[combos][..., None])[..., 0]
    resid = y[None, :] - beta @ Xr.T
    loss = np.where(resid >= 0.0, alpha * resid, (alpha - 1.0) * resid).sum(axis=1)
    best = int(np.argmin(loss))
    full = np.zeros(3)
    full[cols] = beta[best]
    return TrigQuantileFit(omega=float(omega), alpha=float(alpha), A=float(full[1]),
                           B=float(full[2]), lam=float(full[0]), objective=float(loss[best]))
