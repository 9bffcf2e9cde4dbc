import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from qfadiag.errors import DegenerateError, InputError, NonStationaryError
from qfadiag.garch import (
    TABLE1,
    GarchSpec,
    Innovation,
    calibrate_innovations,
    fit_qmle,
    kappa,
    residuals,
    simulate,
)


class TestKappa:
    @pytest.mark.parametrize("c,k", [(0.0, 1.0), (1.0, 2.0), (-1.0, 2.0), (0.5, 1.25)])
    def test_values(self, c, k):
        assert kappa(c) == pytest.approx(k)

    def test_range(self):
        with pytest.raises(InputError):
            kappa(1.01)

    @pytest.mark.parametrize("mean,sd,c,r", [(0.0, 1.0, 0.5, 2.0), (0.3, 1.2, -0.4, 2.0),
                                             (0.0, 0.7, 0.2, 1.3), (-0.2, 1.0, 1.0, 1.5)])
    def test_news_moment_by_quadrature(self, mean, sd, c, r):
        from scipy import integrate
        f = lambda e: (abs(e) - c * e) ** r * stats.norm(mean, sd).pdf(e)
        want = integrate.quad(f, -np.inf, 0)[0] + integrate.quad(f, 0, np.inf)[0]
        assert Innovation(mean, sd).news_moment(c, r) == pytest.approx(want, rel=1e-7)


class TestSpec:
    def test_validation(self):
        with pytest.raises(InputError):
            GarchSpec(0.0, 0.0)
        with pytest.raises(InputError):
            GarchSpec(0.0, 1.0, a=(-0.1,))
        with pytest.raises(InputError):
            GarchSpec(0.0, 1.0, a=(0.1,), c=(1.5,))
        with pytest.raises(InputError):
            GarchSpec(0.0, 1.0, phi=(0.2,))

    def test_table1_gjr_stationary(self):
        spec = TABLE1[("gjr11", "1992-1996")]
        assert spec.persistence == pytest.approx(2 * 2.68e-2 + 8.73e-1)
        assert spec.is_stationary
        for (fam, _), s in TABLE1.items():
            if fam == "gjr11":
                assert s.a[0] * kappa(s.c[0]) + s.b[0] < 1

    def test_json_round_trip_bit_exact(self, tmp_path):
        spec = GarchSpec.gjr11(0.1 + 0.2, 1 / 3, math.pi / 100, 0.7 + 1e-17, -1 / 7,
                               Innovation(1e-3 / 3, 1.0000000000000002))
        path = tmp_path / "m.json"
        spec.to_json(path)
        assert GarchSpec.from_json(path) == spec
        data = json.loads(path.read_text())
        assert data["family"] == "gjr11" and data["innovation"]["dist"] == "gaussian"

    def test_from_dict_malformed(self):
        with pytest.raises(InputError):
            GarchSpec.from_dict({"a0": 1.0})


@pytest.mark.usefixtures("backend")
class TestSimulate:
    def test_iid_variance(self):
        s = simulate(GarchSpec(0.0, 2.0), 200_000, seed=1).series.values
        assert s.var() == pytest.approx(2.0, rel=0.01)

    def test_garch_equals_gjr_c0(self):
        a = simulate(GarchSpec.garch11(0.1, 1e-5, 0.05, 0.9), 500, seed=9)
        b = simulate(GarchSpec.gjr11(0.1, 1e-5, 0.05, 0.9, 0.0), 500, seed=9)
        assert np.array_equal(a.series.values, b.series.values)

    def test_sigma_floor(self):
        spec = TABLE1[("gjr11", "2008-2012")]
        sim = simulate(spec, 5000, seed=2)
        assert np.all(sim.sigmas.values ** 2 >= spec.a0)

    def test_nonstationary_gate(self):
        spec = GarchSpec.gjr11(0.0, 1e-6, 0.1, 0.85, 1.0)
        with pytest.raises(NonStationaryError):
            simulate(spec, 10, seed=1)
        assert len(simulate(spec, 10, seed=1, allow_nonstationary=True).series) == 10

    def test_seed_determinism_and_independence(self):
        spec = TABLE1[("garch11", "1998-2002")]
        a = simulate(spec, 100, seed=5).series.values
        assert np.array_equal(a, simulate(spec, 100, seed=5).series.values)
        assert not np.array_equal(a, simulate(spec, 100, seed=6).series.values)

    def test_general_power(self):
        spec = GarchSpec(0.0, 0.1, a=(0.1,), b=(0.8,), c=(0.3,), r=1.5)
        sim = simulate(spec, 50_000, seed=4)
        assert np.all(np.isfinite(sim.series.values))
        # E sigma^r matches the stationary level
        assert np.mean(sim.sigmas.values ** 1.5) == pytest.approx(spec.unconditional_level, rel=0.05)

    def test_higher_order_lags(self):
        spec = GarchSpec(0.0, 1e-5, a=(0.05, 0.03), b=(0.5, 0.3), c=(0.2, -0.1))
        sim = simulate(spec, 1000, seed=8)
        back = residuals(spec, sim.series)
        np.testing.assert_allclose(back.values[300:], sim.innovations.values[300:], atol=1e-8)

    def test_round_trip_without_burn_in_is_exact(self):
        spec = TABLE1[("gjr11", "1998-2002")]
        sim = simulate(spec, 800, seed=3, burn_in=0)
        np.testing.assert_allclose(residuals(spec, sim.series).values, sim.innovations.values,
                                   atol=1e-12)

    def test_bad_length(self):
        with pytest.raises(InputError):
            simulate(TABLE1[("garch11", "1992-1996")], 0, seed=1)


@pytest.mark.usefixtures("backend")
class TestResiduals:
    def test_iid_case(self):
        x = np.array([1.0, 2.0, -1.0, 0.5])
        np.testing.assert_allclose(residuals(GarchSpec(0.5, 4.0), x).values, (x - 0.5) / 2.0)

    def test_constant_series(self):
        e = residuals(TABLE1[("gjr11", "2008-2012")], np.full(300, 0.01))
        assert np.all(np.isfinite(e.values))


class TestCalibrate:
    def test_arithmetic(self):
        inn = calibrate_innovations([0, 0, 0, 2])
        assert inn.mean == 0.5 and inn.sd == pytest.approx(1.0)

    def test_gaussian_sample(self):
        inn = calibrate_innovations(np.random.default_rng(3).standard_normal(100_000))
        assert abs(inn.mean) < 0.02 and abs(inn.sd - 1) < 0.02

    def test_zero_variance(self):
        with pytest.raises(DegenerateError):
            calibrate_innovations([1.0, 1.0, 1.0])

    def test_too_short(self):
        with pytest.raises(InputError):
            calibrate_innovations([1.0])


class TestFit:
    def test_iid_data(self):
        x = np.random.default_rng(108).standard_normal(5000)
        fit = fit_qmle(x, "garch11")
        iid = stats.norm(x.mean(), x.std()).logpdf(x).sum()
        assert fit.loglik == pytest.approx(iid, rel=0.005)
        assert fit.loglik >= iid - 1e-6
        # b1 is not identified once a1 = 0, so only the ARCH weight is checked
        assert fit.spec.a[0] < 0.05
        assert len(fit.residuals) == 5000

    def test_residuals_are_standardized(self):
        spec = TABLE1[("garch11", "1992-1996")]
        x = simulate(spec, 2000, seed=31).series
        fit = fit_qmle(x)
        np.testing.assert_allclose(fit.residuals.values, residuals(fit.spec, x).values, rtol=1e-12)

    def test_nested_loglik(self):
        x = simulate(TABLE1[("gjr11", "1998-2002")], 3000, seed=17).series
        g = fit_qmle(x, "garch11")
        j = fit_qmle(x, "gjr11")
        assert j.loglik >= g.loglik - 1e-3
        assert j.spec.c[0] > 0

    def test_deterministic(self):
        x = simulate(TABLE1[("garch11", "2008-2012")], 1000, seed=41).series
        assert fit_qmle(x).spec == fit_qmle(x).spec

    def test_rejects_short_and_constant(self):
        with pytest.raises(InputError):
            fit_qmle(np.random.default_rng(0).standard_normal(100))
        with pytest.raises(DegenerateError):
            fit_qmle(np.ones(400))
        with pytest.raises(InputError):
            fit_qmle(np.random.default_rng(0).standard_normal(400), "egarch")

    def test_nonconvergence_flag(self):
        x = simulate(TABLE1[("garch11", "1998-2002")], 1000, seed=5).series
        fit = fit_qmle(x, restarts=1, max_iter=5)
        assert fit.converged is False
        assert np.isfinite(fit.loglik)
