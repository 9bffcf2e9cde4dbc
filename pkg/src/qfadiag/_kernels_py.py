"""
Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Same algorithms, same status codes, same in-place output conventions.  The
weighted selection uses a full lexicographic sort instead of quickselect;
both pick the first breakpoint (ordered by value, then index) at which the
accumulated weight reaches the target.
"""

import math

import numpy as np
from scipy.signal import lfilter, lfiltic

COST_TOL = 1e-10
Z_TOL = 1e-10

STATUS_OK = 0
STATUS_BUDGET = 1
STATUS_SINGULAR = 2


def _weighted_select(tau, w, idx, need):
    order = np.lexsort((idx, tau))
    cum = np.cumsum(w[order])
    p = int(np.searchsorted(cum, need, side="left"))
    p = min(p, len(order) - 1)
    return idx[order[p]], idx[order[:p]]


class _Row:
    def __init__(self, y, c, s):
        self.y = y
        self.c = c
        self.s = s
        self.n = y.shape[0]
        self.X = np.column_stack([np.ones(self.n), c, s])
        self.h = [0, 0, 0]
        self.beta = np.zeros(3)
        self.H = np.eye(3)
        self.inb = np.zeros(self.n, dtype=bool)
        self.sgn = np.ones(self.n, dtype=np.int8)
        self.r = y.copy()

    def invert(self):
        m = self.X[self.h]
        det = np.linalg.det(m)
        if abs(det) < 1e-14:
            return False
        self.H = np.linalg.inv(m)
        return True

    def refresh(self):
        self.beta = self.H @ self.y[self.h]
        self.r = self.y - self.X @ self.beta
        self.r[self.h] = 0.0

    def phase_one(self, alpha):
        self.r = self.y.copy()
        self.inb[:] = False
        self.beta = np.zeros(3)
        for m in range(3):
            if m == 0:
                d = np.array([1.0, 0.0, 0.0])
            elif m == 1:
                d = np.array([-self.c[self.h[0]], 1.0, 0.0])
            else:
                d = np.cross(self.X[self.h[0]], self.X[self.h[1]])
            dn = np.abs(d).sum()
            z = self.X @ d
            z[self.inb] = 0.0
            cand = np.flatnonzero(np.abs(z) > Z_TOL * dn)
            if cand.size == 0:
                return STATUS_SINGULAR
            zc = z[cand]
            need = alpha * zc[zc > 0].sum() - (1.0 - alpha) * zc[zc < 0].sum()
            enter, _ = _weighted_select(self.r[cand] / zc, np.abs(zc), cand, need)
            t = self.r[enter] / z[enter]
            self.beta += t * d
            self.r -= t * z
            self.r[enter] = 0.0
            self.h[m] = int(enter)
            self.inb[enter] = True
        if not self.invert():
            return STATUS_SINGULAR
        self.refresh()
        self.sgn = np.where(self.r < 0.0, -1, 1).astype(np.int8)
        return STATUS_OK

    def simplex(self, alpha, budget):
        it = 0
        bland = False
        while True:
            out = ~self.inb
            psi = np.where(self.sgn[out] > 0, alpha, alpha - 1.0)
            g = psi @ self.X[out]
            u = g @ self.H
            jbest, best, sdir = -1, -COST_TOL, 0.0
            for j in range(3):
                for si, cost in enumerate((1.0 - alpha - u[j], alpha + u[j])):
                    if cost >= -COST_TOL:
                        continue
                    if bland:
                        if jbest >= 0 and self.h[j] >= self.h[jbest]:
                            continue
                    elif cost >= best:
                        continue
                    jbest, best, sdir = j, cost, (1.0 if si == 0 else -1.0)
            if jbest < 0:
                return STATUS_OK, it
            if it >= budget:
                return STATUS_BUDGET, it
            it += 1
            d = sdir * self.H[:, jbest]
            dn = np.abs(d).sum()
            z = self.X @ d
            ok = out & (np.abs(z) > Z_TOL * dn) & (self.sgn * z > 0)
            cand = np.flatnonzero(ok)
            if cand.size == 0:
                return STATUS_SINGULAR, it
            tau = np.maximum(self.r[cand] / z[cand], 0.0)
            enter, crossed = _weighted_select(tau, np.abs(z[cand]), cand, -best)
            self.sgn[crossed] = -self.sgn[crossed]
            bland = tau[np.searchsorted(cand, enter)] <= 0.0
            leave = self.h[jbest]
            self.inb[leave] = False
            self.sgn[leave] = -1 if sdir > 0 else 1
            self.inb[enter] = True
            self.h[jbest] = int(enter)
            if not self.invert():
                return STATUS_SINGULAR, it
            self.refresh()

    def objective(self, alpha):
        r = self.r[~self.inb]
        return float(np.sum(np.where(r >= 0.0, alpha * r, (alpha - 1.0) * r)))


def _solve_row(y, c, s, alphas, budget, obj, coef, status, iters):
    row = _Row(y, c, s)
    st = row.phase_one(alphas[0])
    L = len(alphas)
    for l in range(L):
        it = 0
        if st == STATUS_OK:
            st, it = row.simplex(alphas[l], budget)
        status[l] = st
        iters[l] = it
        coef[l, :] = row.beta
        obj[l] = row.objective(alphas[l])
        if st != STATUS_OK and l + 1 < L:
            st = row.phase_one(alphas[l + 1])


def trig_qr_rows(y, cosm, sinm, alphas, obj, coef, status, iters, start, stop, budget):
    """Solve rows ``start:stop`` of the frequency grid for every level (in place)."""
    y = np.asarray(y, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    if y.shape[0] < 3 or alphas.shape[0] == 0:
        raise ValueError("need at least 3 observations and one level")
    for k in range(start, stop):
        _solve_row(y, np.asarray(cosm[k]), np.asarray(sinm[k]), alphas, budget,
                   obj[k], coef[k], status[k], iters[k])


def _news(z, c, r):
    news = np.abs(z) - c * z
    return news * news if r == 2.0 else news ** r


def aparch_filter(x, mu, a0, a, b, c, r, level, kap, sigma, eps):
    """Run the power-variance recursion forward over observed data (in place).

    On observed data the news terms are known up front, so sigma**r is a
    linear filter of them; ``lfilter`` runs it with the pre-sample state.
    """
    x = np.asarray(x, dtype=float)
    n, p, q = len(x), len(a), len(b)
    if n == 0:
        return True
    z = x - mu
    drive = np.full(n, float(a0))
    for i in range(p):
        lagged = np.empty(n)
        lagged[:i + 1] = kap[i]
        lagged[i + 1:] = _news(z[:n - i - 1], c[i], r)
        drive += a[i] * lagged
    if q:
        den = np.concatenate([[1.0], -np.asarray(b, dtype=float)])
        zi = lfiltic([1.0], den, y=np.full(q, float(level)))
        spow, _ = lfilter([1.0], den, drive, zi=zi)
    else:
        spow = drive
    bad = np.flatnonzero(~(spow > 0.0))
    stop = int(bad[0]) if bad.size else n
    sig = np.sqrt(spow[:stop]) if r == 2.0 else spow[:stop] ** (1.0 / r)
    sigma[:stop] = sig
    eps[:stop] = z[:stop] / sig
    return stop == n


def aparch_simulate(e, mu, a0, a, b, c, r, level, kap, x, sigma):
    """Generate X_t = mu + sigma_t e_t from pre-drawn innovations (in place)."""
    e = np.asarray(e, dtype=float)
    n, p, q = len(e), len(a), len(b)
    spow = np.empty(n)
    z = np.empty(n)
    for t in range(n):
        sr = a0
        for i in range(p):
            if t - 1 - i >= 0:
                zi = z[t - 1 - i]
                news = abs(zi) - c[i] * zi
                sr += a[i] * (news * news if r == 2.0 else news ** r)
            else:
                sr += a[i] * kap[i]
        for i in range(q):
            sr += b[i] * (spow[t - 1 - i] if t - 1 - i >= 0 else level)
        spow[t] = sr
        sigma[t] = math.sqrt(sr) if r == 2.0 else sr ** (1.0 / r)
        z[t] = sigma[t] * e[t]
    x[:] = mu + z
