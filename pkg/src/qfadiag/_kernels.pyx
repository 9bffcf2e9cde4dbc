# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""
Compiled kernels for trigonometric quantile regression and APARCH recursions.

The quantile regression solver is an exchange (simplex) method on the
three-column design ``(1, cos(wt), sin(wt))``.  A basis is a set of three
interpolated observations; each pivot releases one of them along the edge
with the most negative directional derivative and performs an exact line
search (a weighted selection over residual breakpoints), so several sign
changes can happen in one step.  ``_kernels_py`` mirrors this file in numpy
and is used when the extension is not built.
"""

from libc.math cimport fabs, pow, sqrt
from libc.stdlib cimport malloc, free

DEF COST_TOL = 1e-10
DEF Z_TOL = 1e-10

cdef enum:
    ST_OK = 0
    ST_BUDGET = 1
    ST_SINGULAR = 2

# solver status codes, shared with the python fallback
STATUS_OK = ST_OK
STATUS_BUDGET = ST_BUDGET
STATUS_SINGULAR = ST_SINGULAR


cdef struct Cand:
    double tau
    double w
    Py_ssize_t idx


cdef struct Work:
    Py_ssize_t n
    const double* y
    const double* c
    const double* s
    double* r
    double* z
    Cand* cand
    signed char* sgn
    signed char* inb
    Py_ssize_t h[3]
    double H[3][3]
    double beta[3]
    double g[3]


cdef inline bint _less(Cand* a, Cand* b) noexcept nogil:
    return a.tau < b.tau or (a.tau == b.tau and a.idx < b.idx)


cdef inline void _swap(Cand* v, Py_ssize_t i, Py_ssize_t j) noexcept nogil:
    cdef Cand tmp = v[i]
    v[i] = v[j]
    v[j] = tmp


cdef Py_ssize_t _weighted_select(Cand* v, Py_ssize_t m, double need) noexcept nogil:
    """Position p such that the keys before it weigh < need and including it
    weigh >= need.  On return v[0:p] hold exactly the keys smaller than v[p]."""
    cdef Py_ssize_t lo = 0, hi = m - 1, mid, i, store, p
    cdef double wl
    cdef Cand piv
    while lo < hi:
        mid = lo + (hi - lo) // 2
        if _less(&v[lo], &v[mid]):
            if _less(&v[mid], &v[hi]):
                p = mid
            elif _less(&v[lo], &v[hi]):
                p = hi
            else:
                p = lo
        else:
            if _less(&v[lo], &v[hi]):
                p = lo
            elif _less(&v[mid], &v[hi]):
                p = hi
            else:
                p = mid
        _swap(v, p, hi)
        piv = v[hi]
        store = lo
        wl = 0.0
        for i in range(lo, hi):
            if _less(&v[i], &piv):
                wl += v[i].w
                _swap(v, i, store)
                store += 1
        _swap(v, store, hi)
        if wl >= need:
            hi = store - 1
        elif wl + piv.w >= need:
            return store
        else:
            need -= wl + piv.w
            lo = store + 1
    return lo


cdef bint _invert_basis(Work* wk) noexcept nogil:
    cdef double m[3][3]
    cdef Py_ssize_t j, hj
    cdef double det
    for j in range(3):
        hj = wk.h[j]
        m[j][0] = 1.0
        m[j][1] = wk.c[hj]
        m[j][2] = wk.s[hj]
    det = (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
           - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
           + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))
    if fabs(det) < 1e-14:
        return False
    wk.H[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det
    wk.H[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det
    wk.H[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det
    wk.H[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det
    wk.H[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det
    wk.H[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det
    wk.H[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det
    wk.H[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det
    wk.H[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det
    return True


cdef void _refresh(Work* wk) noexcept nogil:
    # beta from the interpolation conditions, then residuals
    cdef Py_ssize_t i, j, k
    cdef double yh[3]
    cdef double b0, b1, b2
    for j in range(3):
        yh[j] = wk.y[wk.h[j]]
    for k in range(3):
        wk.beta[k] = wk.H[k][0] * yh[0] + wk.H[k][1] * yh[1] + wk.H[k][2] * yh[2]
    b0 = wk.beta[0]
    b1 = wk.beta[1]
    b2 = wk.beta[2]
    for i in range(wk.n):
        wk.r[i] = wk.y[i] - b0 - b1 * wk.c[i] - b2 * wk.s[i]
    for j in range(3):
        wk.r[wk.h[j]] = 0.0


cdef void _negative_sums(Work* wk) noexcept nogil:
    # design column sums over non-basis points with negative sign
    cdef Py_ssize_t i
    cdef double g0 = 0.0, g1 = 0.0, g2 = 0.0
    for i in range(wk.n):
        if wk.inb[i] == 0 and wk.sgn[i] < 0:
            g0 += 1.0
            g1 += wk.c[i]
            g2 += wk.s[i]
    wk.g[0] = g0
    wk.g[1] = g1
    wk.g[2] = g2


cdef int _phase_one(Work* wk, double alpha) noexcept nogil:
    """Three exact line minimisations along directions that keep already
    interpolated points fixed."""
    cdef Py_ssize_t i, m, cnt, p, enter
    cdef double d[3]
    cdef double need, zi, t, dn
    cdef double x0[3]
    cdef double x1[3]
    for i in range(wk.n):
        wk.r[i] = wk.y[i]
        wk.inb[i] = 0
    wk.beta[0] = 0.0
    wk.beta[1] = 0.0
    wk.beta[2] = 0.0
    for m in range(3):
        if m == 0:
            d[0] = 1.0
            d[1] = 0.0
            d[2] = 0.0
        elif m == 1:
            d[0] = -wk.c[wk.h[0]]
            d[1] = 1.0
            d[2] = 0.0
        else:
            x0[0] = 1.0
            x0[1] = wk.c[wk.h[0]]
            x0[2] = wk.s[wk.h[0]]
            x1[0] = 1.0
            x1[1] = wk.c[wk.h[1]]
            x1[2] = wk.s[wk.h[1]]
            d[0] = x0[1] * x1[2] - x0[2] * x1[1]
            d[1] = x0[2] * x1[0] - x0[0] * x1[2]
            d[2] = x0[0] * x1[1] - x0[1] * x1[0]
        dn = fabs(d[0]) + fabs(d[1]) + fabs(d[2])
        cnt = 0
        need = 0.0
        for i in range(wk.n):
            if wk.inb[i]:
                wk.z[i] = 0.0
                continue
            zi = d[0] + d[1] * wk.c[i] + d[2] * wk.s[i]
            wk.z[i] = zi
            if fabs(zi) > Z_TOL * dn:
                wk.cand[cnt].tau = wk.r[i] / zi
                wk.cand[cnt].w = fabs(zi)
                wk.cand[cnt].idx = i
                cnt += 1
                if zi > 0:
                    need += alpha * zi
                else:
                    need -= (1.0 - alpha) * zi
        if cnt == 0:
            return ST_SINGULAR
        p = _weighted_select(wk.cand, cnt, need)
        enter = wk.cand[p].idx
        t = wk.cand[p].tau
        for i in range(3):
            wk.beta[i] += t * d[i]
        for i in range(wk.n):
            wk.r[i] -= t * wk.z[i]
        wk.r[enter] = 0.0
        wk.h[m] = enter
        wk.inb[enter] = 1
    if not _invert_basis(wk):
        return ST_SINGULAR
    _refresh(wk)
    for i in range(wk.n):
        wk.sgn[i] = -1 if wk.r[i] < 0.0 else 1
    _negative_sums(wk)
    return ST_OK


cdef int _simplex(Work* wk, double alpha, Py_ssize_t budget, Py_ssize_t* iters) noexcept nogil:
    cdef Py_ssize_t i, j, si, jbest, cnt, p, enter, leave, it, hj
    cdef double cost, best, sdir, need, zi, dn, t, tot0, tot1, tot2
    cdef double u[3]
    cdef double d[3]
    cdef double g[3]
    cdef bint bland = False
    cdef signed char sg
    tot0 = <double> wk.n
    tot1 = 0.0
    tot2 = 0.0
    for i in range(wk.n):
        tot1 += wk.c[i]
        tot2 += wk.s[i]
    it = 0
    while True:
        # g = sum over non-basis points of (alpha - 1{sgn < 0}) x_i
        g[0] = tot0
        g[1] = tot1
        g[2] = tot2
        for j in range(3):
            hj = wk.h[j]
            g[0] -= 1.0
            g[1] -= wk.c[hj]
            g[2] -= wk.s[hj]
        for j in range(3):
            g[j] = alpha * g[j] - wk.g[j]
        for j in range(3):
            u[j] = g[0] * wk.H[0][j] + g[1] * wk.H[1][j] + g[2] * wk.H[2][j]
        # candidate edges: release basis point j with direction sign +-1;
        # steepest by default, smallest point index after a degenerate step
        jbest = -1
        best = -COST_TOL
        sdir = 0.0
        for j in range(3):
            for si in range(2):
                cost = (1.0 - alpha - u[j]) if si == 0 else (alpha + u[j])
                if cost >= -COST_TOL:
                    continue
                if bland:
                    if jbest >= 0 and wk.h[j] >= wk.h[jbest]:
                        continue
                elif cost >= best:
                    continue
                best = cost
                jbest = j
                sdir = 1.0 if si == 0 else -1.0
        if jbest < 0:
            iters[0] = it
            return ST_OK
        if it >= budget:
            iters[0] = it
            return ST_BUDGET
        it += 1
        for i in range(3):
            d[i] = sdir * wk.H[i][jbest]
        dn = fabs(d[0]) + fabs(d[1]) + fabs(d[2])
        cnt = 0
        for i in range(wk.n):
            if wk.inb[i]:
                continue
            zi = d[0] + d[1] * wk.c[i] + d[2] * wk.s[i]
            if fabs(zi) > Z_TOL * dn and wk.sgn[i] * zi > 0:
                t = wk.r[i] / zi
                wk.cand[cnt].tau = t if t > 0.0 else 0.0
                wk.cand[cnt].w = fabs(zi)
                wk.cand[cnt].idx = i
                cnt += 1
        need = -best
        if cnt == 0:
            iters[0] = it
            return ST_SINGULAR
        p = _weighted_select(wk.cand, cnt, need)
        enter = wk.cand[p].idx
        # crossed breakpoints flip sign; keep the negative-sign sums current
        for i in range(p):
            j = wk.cand[i].idx
            sg = wk.sgn[j]
            wk.sgn[j] = -sg
            if sg > 0:
                wk.g[0] += 1.0
                wk.g[1] += wk.c[j]
                wk.g[2] += wk.s[j]
            else:
                wk.g[0] -= 1.0
                wk.g[1] -= wk.c[j]
                wk.g[2] -= wk.s[j]
        if wk.sgn[enter] < 0:
            wk.g[0] -= 1.0
            wk.g[1] -= wk.c[enter]
            wk.g[2] -= wk.s[enter]
        bland = wk.cand[p].tau <= 0.0
        leave = wk.h[jbest]
        wk.inb[leave] = 0
        wk.sgn[leave] = -1 if sdir > 0 else 1
        if sdir > 0:
            wk.g[0] += 1.0
            wk.g[1] += wk.c[leave]
            wk.g[2] += wk.s[leave]
        wk.inb[enter] = 1
        wk.h[jbest] = enter
        if not _invert_basis(wk):
            iters[0] = it
            return ST_SINGULAR
        _refresh(wk)
        if it % 64 == 0:
            # bound drift of the running sums
            _negative_sums(wk)


cdef double _objective(Work* wk, double alpha) noexcept nogil:
    cdef Py_ssize_t i
    cdef double tot = 0.0, ri
    for i in range(wk.n):
        if wk.inb[i]:
            continue
        ri = wk.r[i]
        tot += alpha * ri if ri >= 0.0 else (alpha - 1.0) * ri
    return tot


cdef int _solve_row(const double* y, const double* c, const double* s, Py_ssize_t n,
                    const double* alphas, Py_ssize_t L, Py_ssize_t budget,
                    double* obj, double* coef, int* status, Py_ssize_t* iters) noexcept nogil:
    cdef Work wk
    cdef Py_ssize_t l, it
    cdef int st, worst = ST_OK
    wk.n = n
    wk.y = y
    wk.c = c
    wk.s = s
    wk.r = <double*> malloc(n * sizeof(double))
    wk.z = <double*> malloc(n * sizeof(double))
    wk.cand = <Cand*> malloc(n * sizeof(Cand))
    wk.sgn = <signed char*> malloc(n * sizeof(signed char))
    wk.inb = <signed char*> malloc(n * sizeof(signed char))
    st = _phase_one(&wk, alphas[0])
    for l in range(L):
        it = 0
        if st == ST_OK:
            st = _simplex(&wk, alphas[l], budget, &it)
        status[l] = st
        iters[l] = it
        coef[3 * l] = wk.beta[0]
        coef[3 * l + 1] = wk.beta[1]
        coef[3 * l + 2] = wk.beta[2]
        obj[l] = _objective(&wk, alphas[l])
        if st != ST_OK:
            worst = st
            # later levels restart from scratch
            if l + 1 < L:
                st = _phase_one(&wk, alphas[l + 1])
    free(wk.r)
    free(wk.z)
    free(wk.cand)
    free(wk.sgn)
    free(wk.inb)
    return worst


def trig_qr_rows(const double[::1] y, const double[:, ::1] cosm, const double[:, ::1] sinm,
                 const double[::1] alphas, double[:, ::1] obj, double[:, :, ::1] coef,
                 int[:, ::1] status, Py_ssize_t[:, ::1] iters,
                 Py_ssize_t start, Py_ssize_t stop, Py_ssize_t budget):
    """Solve rows ``start:stop`` of the frequency grid for every level.

    Fills ``obj[k, l]``, ``coef[k, l, :] = (intercept, cos, sin)``,
    ``status[k, l]`` and ``iters[k, l]`` in place.  Releases the GIL.
    """
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t L = alphas.shape[0]
    cdef Py_ssize_t k
    if n < 3 or L == 0:
        raise ValueError("need at least 3 observations and one level")
    with nogil:
        for k in range(start, stop):
            _solve_row(&y[0], &cosm[k, 0], &sinm[k, 0], n, &alphas[0], L, budget,
                       &obj[k, 0], &coef[k, 0, 0], &status[k, 0], &iters[k, 0])


def aparch_filter(const double[::1] x, double mu, double a0, const double[::1] a,
                  const double[::1] b, const double[::1] c, double r, double level,
                  const double[::1] kap, double[::1] sigma, double[::1] eps):
    """Run the power-variance recursion forward over observed data.

    ``level`` is the pre-sample value of sigma**r and ``kap[i]`` the
    pre-sample value of the news term ``(|Z| - c Z)**r``.  Returns False if
    the recursion left the positive half-line.
    """
    cdef Py_ssize_t n = x.shape[0], p = a.shape[0], q = b.shape[0]
    cdef Py_ssize_t t, i
    cdef double sr, zi, news
    cdef double* spow = <double*> malloc((n + 1) * sizeof(double))
    cdef bint ok = True
    with nogil:
        for t in range(n):
            sr = a0
            for i in range(p):
                if t - 1 - i >= 0:
                    zi = x[t - 1 - i] - mu
                    news = fabs(zi) - c[i] * zi
                    sr += a[i] * (news * news if r == 2.0 else pow(news, r))
                else:
                    sr += a[i] * kap[i]
            for i in range(q):
                if t - 1 - i >= 0:
                    sr += b[i] * spow[t - 1 - i]
                else:
                    sr += b[i] * level
            spow[t] = sr
            if not sr > 0.0:
                ok = False
                break
            sigma[t] = sqrt(sr) if r == 2.0 else pow(sr, 1.0 / r)
            eps[t] = (x[t] - mu) / sigma[t]
    free(spow)
    return ok


def aparch_simulate(const double[::1] e, double mu, double a0, const double[::1] a,
                    const double[::1] b, const double[::1] c, double r, double level,
                    const double[::1] kap, double[::1] x, double[::1] sigma):
    """Generate X_t = mu + sigma_t e_t from pre-drawn innovations ``e``."""
    cdef Py_ssize_t n = e.shape[0], p = a.shape[0], q = b.shape[0]
    cdef Py_ssize_t t, i
    cdef double sr, zi, news
    cdef double* spow = <double*> malloc((n + 1) * sizeof(double))
    cdef double* zz = <double*> malloc((n + 1) * sizeof(double))
    with nogil:
        for t in range(n):
            sr = a0
            for i in range(p):
                if t - 1 - i >= 0:
                    zi = zz[t - 1 - i]
                    news = fabs(zi) - c[i] * zi
                    sr += a[i] * (news * news if r == 2.0 else pow(news, r))
                else:
                    sr += a[i] * kap[i]
            for i in range(q):
                if t - 1 - i >= 0:
                    sr += b[i] * spow[t - 1 - i]
                else:
                    sr += b[i] * level
            spow[t] = sr
            sigma[t] = sqrt(sr) if r == 2.0 else pow(sr, 1.0 / r)
            zz[t] = sigma[t] * e[t]
            x[t] = mu + zz[t]
    free(spow)
    free(zz)
