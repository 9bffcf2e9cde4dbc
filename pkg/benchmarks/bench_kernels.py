"""
Compare the compiled kernels with the numpy fallback on the hot paths.

    python benchmarks/bench_kernels.py [--repeat 3] [--quick]

Both backends are checked to agree before any timing is reported.
"""

import argparse
import timeit

import numpy as np

import qfadiag.garch
import qfadiag.qreg
from qfadiag import _backend
from qfadiag.garch import TABLE1, fit_qmle, residuals, simulate
from qfadiag.qfa import QuantileGrid, quantile_periodogram


def use(mod):
    qfadiag.qreg.kernels = mod
    qfadiag.garch.kernels = mod


def cases(quick):
    spec = TABLE1[("gjr11", "2008-2012")]
    n_qfa = 128 if quick else 512
    n_sim = 20_000 if quick else 200_000
    qg = QuantileGrid.from_range(0.05, 0.95, 0.05)
    x_qfa = np.random.default_rng(0).standard_normal(n_qfa)
    x_sim = simulate(spec, n_sim, seed=1).series
    x_fit = simulate(TABLE1[("garch11", "1998-2002")], 2000, seed=2).series
    return {
        f"quantile_periodogram n={n_qfa}, 19 levels": lambda: quantile_periodogram(x_qfa, qg).values,
        f"simulate gjr11 n={n_sim}": lambda: simulate(spec, n_sim, seed=3).series.values,
        f"residuals gjr11 n={n_sim}": lambda: residuals(spec, x_sim).values,
        "fit_qmle garch11 n=2000": lambda: np.array([fit_qmle(x_fit).loglik]),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = ap.parse_args()
    if _backend.kernels_ext is None:
        raise SystemExit("compiled extension not built; run `python setup.py build_ext --inplace`")
    backends = {"cython": _backend.kernels_ext, "python": _backend.kernels_py}
    print(f"{'case':<42}{'cython s':>10}{'python s':>10}{'speedup':>9}")
    try:
        for name, fn in cases(args.quick).items():
            times, outs = {}, {}
            for label, mod in backends.items():
                use(mod)
                outs[label] = fn()
                times[label] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
            if not np.allclose(outs["cython"], outs["python"], rtol=1e-6, atol=1e-12):
                raise SystemExit(f"{name}: backends disagree")
            print(f"{name:<42}{times['cython']:>10.4f}{times['python']:>10.4f}"
                  f"{times['python'] / times['cython']:>8.1f}x")
    finally:
        use(_backend.kernels)


if __name__ == "__main__":
    main()
