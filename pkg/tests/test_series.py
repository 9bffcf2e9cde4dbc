import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfadiag.errors import (
    DegenerateError,
    EmptyFileError,
    InputError,
    MissingColumnError,
    ValueParseError,
)
from qfadiag.series import (
    FrequencyGrid,
    PriceSeries,
    TimeSeries,
    autocorrelation,
    fold,
    load_csv,
    log_returns,
    ordinary_periodogram,
    write_series_csv,
)

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


class TestTimeSeries:
    def test_rejects_nan(self):
        with pytest.raises(InputError):
            TimeSeries([1.0, float("nan")])

    def test_rejects_empty(self):
        with pytest.raises(InputError):
            TimeSeries([])

    def test_values_read_only(self):
        ts = TimeSeries([1.0, 2.0])
        with pytest.raises(ValueError):
            ts.values[0] = 3.0

    def test_array_protocol(self):
        assert np.asarray(TimeSeries([1, 2, 3])).sum() == 6.0


class TestPriceSeries:
    def test_dates_must_increase(self):
        d = dt.date(2020, 1, 2)
        with pytest.raises(InputError, match="position 2"):
            PriceSeries((d, d), [1.0, 2.0])

    def test_closes_positive(self):
        with pytest.raises(InputError):
            PriceSeries((dt.date(2020, 1, 2), dt.date(2020, 1, 3)), [1.0, 0.0])


class TestFrequencyGrid:
    @pytest.mark.parametrize("n,K", [(8, 3), (9, 4), (512, 255), (2000, 999), (3, 1)])
    def test_size(self, n, K):
        assert FrequencyGrid(n).K == K

    @given(st.integers(3, 3000))
    def test_strictly_inside(self, n):
        g = FrequencyGrid(n)
        assert g.K == math.ceil(n / 2) - 1
        assert np.all(np.diff(g.omegas) > 0)
        assert g.omegas[0] > 0 and g.omegas[-1] < np.pi

    def test_design_matches_direct_evaluation(self):
        g = FrequencyGrid(24)
        c, s = g.design()
        t = np.arange(1, 25)
        np.testing.assert_allclose(c, np.cos(np.outer(g.omegas, t)), atol=1e-12)
        np.testing.assert_allclose(s, np.sin(np.outer(g.omegas, t)), atol=1e-12)

    def test_design_rows_bitwise_periodic(self):
        # t and t + n/gcd share a phase, so their rows must agree exactly
        c, s = FrequencyGrid(16).design()
        k = 4  # index 4 -> period 4
        assert np.array_equal(c[k - 1, :4], c[k - 1, 4:8])
        assert np.array_equal(s[k - 1, :4], s[k - 1, 12:16])


class TestLogReturns:
    def test_equal_prices(self):
        assert log_returns([100, 100]).values.tolist() == [0.0]

    def test_factor_e(self):
        assert log_returns([100, 100 * math.e]).values[0] == pytest.approx(1.0, abs=1e-15)

    def test_three_prices(self):
        np.testing.assert_allclose(log_returns([100, 105, 102]).values,
                                   [math.log(1.05), math.log(102 / 105)], rtol=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(InputError):
            log_returns([100, -1])

    @given(st.lists(st.floats(0.01, 1e4), min_size=2, max_size=50))
    def test_cumsum_reconstructs_log_prices(self, closes):
        r = log_returns(closes).values
        rebuilt = math.log(closes[0]) + np.concatenate([[0.0], np.cumsum(r)])
        np.testing.assert_allclose(rebuilt, np.log(closes), atol=1e-12)


class TestFold:
    def test_absolute(self):
        assert fold([-2, 3], "absolute").values.tolist() == [2, 3]

    def test_square(self):
        assert fold([-2, 3], "square").values.tolist() == [4, 9]

    def test_zero(self):
        assert fold(np.zeros(4), "square").values.tolist() == [0.0] * 4

    def test_unknown(self):
        with pytest.raises(InputError):
            fold([1.0], "cube")

    @given(st.lists(finite, min_size=1, max_size=30))
    def test_square_is_absolute_squared(self, xs):
        np.testing.assert_array_equal(fold(xs, "square").values, fold(xs, "absolute").values ** 2)


class TestAutocorrelation:
    def test_white_noise_lag1(self, rng):
        x = rng.standard_normal(4000)
        assert abs(autocorrelation(x, 1)[1]) < 3 / math.sqrt(4000)

    def test_alternating(self):
        x = np.array([1.0, -1.0] * 50)
        assert autocorrelation(x, 1)[1] == pytest.approx(-1.0, abs=0.011)

    def test_alternating_exact_with_sample_formula(self):
        # biased estimator gives -(n-1)/n exactly for a zero-mean alternating series
        x = np.array([1.0, -1.0] * 50)
        assert autocorrelation(x, 1)[1] == pytest.approx(-(99 / 100), abs=1e-15)

    def test_max_lag_too_large(self):
        with pytest.raises(InputError):
            autocorrelation([1.0, 2.0], 2)

    def test_constant(self):
        with pytest.raises(DegenerateError):
            autocorrelation([3.0] * 10, 2)

    @given(st.lists(finite, min_size=3, max_size=40).filter(lambda v: np.ptp(v) > 1e-3))
    def test_bounds(self, xs):
        acf = autocorrelation(xs, len(xs) - 1)
        assert acf[0] == 1.0
        assert np.all(np.abs(acf) <= 1 + 1e-12)


class TestOrdinaryPeriodogram:
    def test_single_tone(self):
        n, k = 64, 7
        t = np.arange(1, n + 1)
        p = ordinary_periodogram(np.cos(2 * np.pi * k * t / n))
        assert p[k - 1] == pytest.approx(1.0, abs=1e-12)

    def test_two_tones(self):
        n = 64
        t = np.arange(1, n + 1)
        p = ordinary_periodogram(np.cos(2 * np.pi * 3 * t / n) + np.sin(2 * np.pi * 11 * t / n))
        assert p[2] == pytest.approx(0.5, abs=1e-12)
        assert p[10] == pytest.approx(0.5, abs=1e-12)

    def test_mean_is_one_over_K(self, rng):
        p = ordinary_periodogram(rng.standard_normal(101))
        assert p.mean() == pytest.approx(1 / 50, rel=1e-12)

    def test_constant(self):
        with pytest.raises(DegenerateError):
            ordinary_periodogram(np.ones(16))

    def test_too_short(self):
        with pytest.raises(InputError):
            ordinary_periodogram(np.arange(7.0))

    @settings(max_examples=50)
    @given(st.lists(finite, min_size=8, max_size=64).filter(lambda v: np.ptp(v) > 1e-3))
    def test_sums_to_one(self, xs):
        p = ordinary_periodogram(xs)
        assert p.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(p >= 0)


class TestLoadCsv:
    def test_prices(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("date,close\n2020-01-02,100\n2020-01-03,101\n")
        ps = load_csv(f, date_column="date", close_column="close")
        assert isinstance(ps, PriceSeries) and len(ps) == 2
        assert ps.dates[1] == dt.date(2020, 1, 3)

    def test_values(self, tmp_path):
        f = tmp_path / "x.csv"
        f.write_text("x\n0.01\n-0.02\n")
        assert load_csv(f, value_column="x").values.tolist() == [0.01, -0.02]

    def test_na_names_row(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("date,close\n2020-01-02,100\n2020-01-03,N/A\n")
        with pytest.raises(ValueParseError, match="line 3") as info:
            load_csv(f, date_column="date", close_column="close")
        assert info.value.row == 3

    def test_missing_column(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("date,price\n2020-01-02,100\n")
        with pytest.raises(MissingColumnError):
            load_csv(f, date_column="date", close_column="close")

    def test_empty(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("")
        with pytest.raises(EmptyFileError):
            load_csv(f, value_column="x")

    def test_header_only(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("x\n")
        with pytest.raises(EmptyFileError):
            load_csv(f, value_column="x")

    def test_unsorted_dates_rejected(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("date,close\n2020-01-03,100\n2020-01-02,101\n")
        with pytest.raises(InputError, match="not strictly increasing"):
            load_csv(f, date_column="date", close_column="close")

    def test_bad_date(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("date,close\n01/02/2020,100\n")
        with pytest.raises(ValueParseError, match="line 2"):
            load_csv(f, date_column="date", close_column="close")

    def test_distinct_error_types(self):
        kinds = {MissingColumnError, ValueParseError, EmptyFileError}
        assert len(kinds) == 3 and all(issubclass(k, InputError) for k in kinds)

    def test_write_round_trip(self, tmp_path, rng):
        x = rng.standard_normal(50)
        f = tmp_path / "s.csv"
        write_series_csv(f, x)
        assert np.array_equal(load_csv(f, value_column="value").values, x)
