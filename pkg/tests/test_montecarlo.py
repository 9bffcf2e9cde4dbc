import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qfadiag.errors import DegenerateError
from qfadiag.garch import TABLE1, FitResult, GarchSpec, residuals, simulate
from qfadiag.metrics import PRESETS, white_noise_target
from qfadiag.montecarlo import (
    MetricPipeline,
    bold,
    bootstrap_null,
    direct_test,
    discriminant_test,
    expected_spectrum,
    p_value,
    residual_test,
    upper_bound,
)
from qfadiag.qfa import QuantileGrid
from qfadiag.rng import Purpose, substream
from qfadiag.series import FrequencyGrid

QG = QuantileGrid.from_range(0.1, 0.9, 0.2)


def gaussian(rng, n):
    return rng.standard_normal(n)


def white_pipeline(n, qgrid=QG):
    tn, tc = white_noise_target(FrequencyGrid(n), qgrid)
    return MetricPipeline(qgrid, PRESETS["full"], tn, tc)


class TestPValues:
    def test_counting_with_ties(self):
        assert p_value(2.0, [1.0, 2.0, 3.0, 4.0]) == 0.75

    def test_exceeds_all(self):
        null = np.linspace(0, 1, 1000)
        p = p_value(5.0, null)
        assert p == 0.0 and upper_bound(p, 1000) == 0.0

    def test_plus_one(self):
        assert p_value(5.0, np.zeros(99), plus_one=True) == 0.01

    def test_bold_boundary(self):
        assert upper_bound(0.039, 1000) == pytest.approx(0.0490, abs=1e-4)
        assert bold(0.039, 1000)
        assert upper_bound(0.040, 1000) == pytest.approx(0.0502, abs=1e-4)
        assert not bold(0.040, 1000)

    def test_single_exceedance(self):
        null = np.arange(1000.0)
        assert p_value(998.5, null) == 0.001

    @given(st.lists(st.floats(0, 10), min_size=1, max_size=40), st.floats(0, 10), st.floats(0, 5))
    def test_monotone(self, null, obs, bump):
        assert p_value(obs + bump, null) <= p_value(obs, null)
        assert 0.0 <= p_value(obs, null) <= 1.0


class TestBootstrapNull:
    def test_b1_matches_single_pass(self):
        pipe = white_pipeline(64)
        null = bootstrap_null(pipe, gaussian, 64, 1, seed=4)
        direct = pipe(gaussian(substream(4, Purpose.NULL, 0), 64))
        assert null.shape == (1, 4) and np.array_equal(null[0], direct)

    def test_same_seed_bitwise(self):
        pipe = white_pipeline(48)
        a = bootstrap_null(pipe, gaussian, 48, 6, seed=9)
        assert np.array_equal(a, bootstrap_null(pipe, gaussian, 48, 6, seed=9))

    def test_threads_bitwise(self):
        pipe = white_pipeline(48)
        a = bootstrap_null(pipe, gaussian, 48, 7, seed=9, threads=1)
        b = bootstrap_null(pipe, gaussian, 48, 7, seed=9, threads=3)
        assert np.array_equal(a, b)

    def test_replicate_failure_named(self):
        def gen(rng, n):
            x = rng.standard_normal(n)
            return np.zeros(n) if x[0] > 0.5 else x
        with pytest.raises(DegenerateError, match="replicate"):
            bootstrap_null(white_pipeline(32), gen, 32, 30, seed=1)

    def test_spec_source(self):
        pipe = white_pipeline(64)
        spec = TABLE1[("garch11", "1992-1996")]
        null = bootstrap_null(pipe, spec, 64, 3, seed=2, burn_in=50)
        x0 = simulate(spec, 64, rng=substream(2, Purpose.NULL, 0), burn_in=50).series
        assert np.array_equal(null[0], pipe(x0))

    def test_own_target_percentile_reproducible(self):
        pipe = white_pipeline(64)
        null = bootstrap_null(pipe, gaussian, 64, 40, seed=3)
        q95 = np.quantile(null, 0.95, axis=0)
        assert np.all(np.isfinite(q95))
        assert np.array_equal(q95, np.quantile(bootstrap_null(pipe, gaussian, 64, 40, seed=3), 0.95, axis=0))


class TestExpectedSpectrum:
    def test_invariants_and_determinism(self):
        spec = TABLE1[("garch11", "2008-2012")]
        a = expected_spectrum(spec, 64, QG, 6, seed=1, burn_in=100)
        b = expected_spectrum(spec, 64, QG, 6, seed=1, burn_in=100, threads=3)
        assert np.array_equal(a.normalized.values, b.normalized.values)
        np.testing.assert_allclose(a.normalized.values.sum(axis=0), 1.0, atol=1e-9)
        assert np.all(np.diff(a.cumulative.values, axis=0) >= 0)
        np.testing.assert_allclose(a.cumulative.values[-1], 1.0, atol=1e-9)
        assert a.stderr.shape == a.normalized.values.shape

    def test_white_noise_flat(self):
        qg = QuantileGrid.from_range(0.05, 0.95, 0.05)
        es = expected_spectrum(GarchSpec(0.0, 1.0), 256, qg, 200, seed=11)
        K = es.normalized.K
        assert np.max(np.abs(es.normalized.values - 1 / K)) < 0.25 / K

    def test_needs_two(self):
        from qfadiag.errors import InputError
        with pytest.raises(InputError):
            expected_spectrum(GarchSpec(0.0, 1.0), 64, QG, 1)


@pytest.mark.slow
def test_symmetry_exceedances_match_chance_level():
    """Symmetric model: 3-SE exceedances of q(a) - q(1-a) stay near the
    chance count for ~1100 cells; the GJR model with c1 = 1 far exceeds it."""
    qg = QuantileGrid.from_range(0.05, 0.95, 0.05)

    def exceed(spec):
        es = expected_spectrum(spec, 256, qg, 200, seed=77, keep_samples=True)
        d = es.samples - es.samples[:, :, ::-1]
        z = np.abs(d.mean(axis=0)) / (d.std(axis=0, ddof=1) / np.sqrt(200))
        return int(np.sum(z[:, :9] > 3))

    # 1143 cells at two-sided 0.27% gives about 3 chance exceedances
    assert exceed(TABLE1[("garch11", "2008-2012")]) <= 12
    assert exceed(TABLE1[("gjr11", "2008-2012")]) > 12


class TestResidualTest:
    def test_report(self, tmp_path):
        e = np.random.default_rng(5).standard_normal(138)
        with pytest.warns(UserWarning, match="short"):
            rep = residual_test(e, QG, B=9, seed=2)
        assert rep.B == 9 and rep.test_kind == "residual"
        assert np.all((rep.p_values >= 0) & (rep.p_values <= 1))
        path = tmp_path / "r.json"
        rep.to_json(path, include_null=True)
        data = json.loads(path.read_text())
        assert data["seed"] == 2 and len(data["null_samples"]) == 9
        assert set(data["metrics"]) == {"ks_max", "ks_mean", "wl_max", "wl_mean"}
        assert data["metrics"]["ks_max"]["upper_bound"] >= data["metrics"]["ks_max"]["p_value"]

    def test_drops_head(self):
        e = np.random.default_rng(5).standard_normal(300)
        spoiled = e.copy()
        spoiled[:10] = 50.0
        a = residual_test(e, QG, B=3, seed=1)
        b = residual_test(spoiled, QG, B=3, seed=1)
        assert np.array_equal(a.observed, b.observed)

    def test_middle_region(self):
        e = np.random.default_rng(6).standard_normal(300)
        rep = residual_test(e, QuantileGrid.from_range(0.1, 0.9, 0.1), PRESETS["middle"], B=3, seed=1)
        assert rep.to_dict()["region"]["name"] == "middle"


class TestModelTests:
    spec = TABLE1[("garch11", "1992-1996")]

    def fitted(self, x):
        return FitResult(self.spec, 0.0, True, 0, residuals(self.spec, x))

    def test_direct_equals_discriminant_on_same_inputs(self):
        x = simulate(self.spec, 256, seed=3).series
        kw = dict(qgrid=QG, B=5, n_realizations=4, seed=8, burn_in=100)
        d = direct_test(x, self.fitted(x), **kw)
        c = discriminant_test(x, self.fitted(x), **kw)
        assert np.array_equal(d.observed, c.observed)
        assert np.array_equal(d.null_samples, c.null_samples)
        assert (d.test_kind, c.test_kind) == ("direct", "discriminant")

    def test_null_replicate_as_observed(self):
        from qfadiag.garch import calibrate_innovations
        x = simulate(self.spec, 256, seed=3).series
        fit = self.fitted(x)
        rep = direct_test(x, fit, QG, B=6, n_realizations=4, seed=8, burn_in=100)
        spec = self.spec.with_innovation(calibrate_innovations(fit.residuals.values[10:]))
        es = expected_spectrum(spec, 256, QG, 4, seed=8, burn_in=100)
        pipe = MetricPipeline(QG, PRESETS["full"], es.normalized, es.cumulative)
        r = 2
        own = simulate(spec, 256, rng=substream(8, Purpose.NULL, r), burn_in=100).series
        obs = pipe(own)
        assert np.array_equal(obs, rep.null_samples[r])
        for j in range(4):
            rank = np.sum(rep.null_samples[:, j] >= obs[j])
            assert p_value(obs[j], rep.null_samples[:, j]) == rank / 6

    def test_threads_bitwise(self):
        x = simulate(self.spec, 128, seed=3).series
        kw = dict(qgrid=QG, B=4, n_realizations=3, seed=8, burn_in=100)
        a = direct_test(x, self.fitted(x), threads=1, **kw)
        b = direct_test(x, self.fitted(x), threads=4, **kw)
        assert json.dumps(a.to_dict(True)) == json.dumps(b.to_dict(True))
