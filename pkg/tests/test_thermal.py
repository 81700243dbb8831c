import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evtol_dclink.catalogs import default_path
from evtol_dclink.device_loss import SicDevice
from evtol_dclink.errors import ConfigError, FitError, MeasurementError, ValidationError
from evtol_dclink.thermal import (
    ConductionCalibrationTest,
    ThermalMeasurement,
    ThermalModel,
    conduction_loss_dc_test,
    estimate_rca,
    extract_losses,
    fit_kv,
    fixture_current_for,
    load_calibration,
    load_measurements,
    predict_switching_loss,
    rca_per_test,
    separate_losses,
    total_loss_from_temperature,
)

# Bench table: v_dc, m, t_case, P_loss_tot, P_sw_tot, P_sw_mos, P_cond_mos
BENCH = [
    (200, 0.950, 29.0, 2.053, 1.253, 0.209, 0.133),
    (250, 0.760, 33.5, 3.372, 2.573, 0.429, 0.133),
    (300, 0.633, 36.4, 4.223, 3.423, 0.571, 0.133),
    (350, 0.543, 39.0, 4.986, 4.186, 0.698, 0.133),
    (400, 0.475, 41.6, 5.748, 4.948, 0.825, 0.133),
    (450, 0.422, 45.2, 6.804, 6.004, 1.001, 0.133),
    (500, 0.380, 48.2, 7.683, 6.884, 1.147, 0.133),
]
MODEL = ThermalModel(3.41)
PROBE = SicDevice("bench", 1200.0, 50.0, 0.034, 0.0, 400.0)


def meas(v=400.0, m=0.5, t_case=40.0, t_amb=22.0, i_m=4.0):
    return ThermalMeasurement(v, m, t_case, t_amb, 10e3, i_m, 0.8)


def calib_test(i_a, i_bc, t_case, r=0.034):
    return ConductionCalibrationTest(i_a, i_bc, i_bc, r, 0.49, t_case, 22.0)


@pytest.fixture(scope="module")
def runs():
    return load_measurements(default_path("runs"))


class TestCalibration:
    def test_dc_loss_case_1(self):
        assert conduction_loss_dc_test(calib_test(7.79, 3.90, 32.4)) == pytest.approx(3.09, abs=0.01)

    def test_dc_loss_case_2(self):
        assert conduction_loss_dc_test(calib_test(9.70, 4.85, 38.6)) == pytest.approx(4.80, abs=0.01)

    def test_dc_loss_zero(self):
        assert conduction_loss_dc_test(calib_test(0.0, 0.0, 30.0)) == 0.0

    def test_rca_cases(self):
        tests = [calib_test(7.79, 3.90, 32.4), calib_test(9.70, 4.85, 38.6)]
        r1, r2 = rca_per_test(tests)
        assert r1 == pytest.approx(3.36, abs=0.01) and r2 == pytest.approx(3.46, abs=0.01)
        assert estimate_rca(tests) == pytest.approx(3.41, abs=0.01)

    def test_zero_loss_names_index(self):
        with pytest.raises(ZeroDivisionError, match="test 1"):
            estimate_rca([calib_test(1.0, 1.0, 30.0), calib_test(0.0, 0.0, 30.0)])

    def test_shipped_fixture(self):
        assert estimate_rca(load_calibration(default_path("calib"))) == pytest.approx(3.41, abs=0.01)

    @given(r_ca=st.floats(0.5, 20.0), currents=st.lists(st.floats(0.5, 20.0), min_size=1, max_size=6))
    def test_recovers_known_rca(self, r_ca, currents):
        tests = []
        for i in currents:
            p = (i * i + 2 * (i / 2) ** 2) * 0.034
            tests.append(ConductionCalibrationTest(i, i / 2, i / 2, 0.034, 0.49, 22.0 + r_ca * p, 22.0))
        assert estimate_rca(tests) == pytest.approx(r_ca, rel=1e-12)

    def test_noisy_recovery(self):
        rng = np.random.default_rng(3)
        tests = []
        for i in rng.uniform(3, 12, 200):
            p = 1.5 * i * i * 0.034
            tests.append(calib_test(i, i / 2, 22.0 + 3.41 * p + rng.normal(0, 0.1)))
        assert estimate_rca(tests) == pytest.approx(3.41, abs=0.05)


class TestExtraction:
    @pytest.mark.parametrize("v, t_case, expected", [(200, 29.0, 2.053), (500, 48.2, 7.683)])
    def test_total_loss(self, v, t_case, expected):
        assert total_loss_from_temperature(meas(v=v, t_case=t_case), MODEL) == pytest.approx(
            expected, abs=1e-3
        )

    def test_no_rise_no_loss(self):
        assert total_loss_from_temperature(meas(t_case=22.0), MODEL) == 0.0

    def test_below_ambient(self):
        with pytest.raises(MeasurementError):
            total_loss_from_temperature(meas(t_case=20.0), MODEL)

    @given(dt=st.floats(0.0, 100.0), c=st.floats(0.1, 10.0))
    def test_linear_in_rise(self, dt, c):
        a = total_loss_from_temperature(meas(t_case=22.0 + dt), MODEL)
        b = total_loss_from_temperature(meas(t_case=22.0 + c * dt), MODEL)
        assert b == pytest.approx(c * a, rel=1e-12, abs=1e-12)

    def test_separate_row_400(self):
        assert separate_losses(5.748, 0.800, 6).p_sw_per_device == pytest.approx(0.825, abs=1e-3)

    def test_separate_row_200(self):
        s = separate_losses(2.053, 0.800, 6)
        assert s.p_cond_per_device == pytest.approx(0.133, abs=1e-3)
        assert s.p_sw_per_device == pytest.approx(0.209, abs=1e-3)

    def test_separate_equal(self):
        assert separate_losses(1.0, 1.0).p_sw_tot == 0.0

    def test_separate_inconsistent(self):
        with pytest.raises(MeasurementError):
            separate_losses(0.5, 0.8)

    @given(p_cond=st.floats(0.0, 50.0), extra=st.floats(0.0, 50.0), n=st.integers(1, 12))
    def test_separate_resums(self, p_cond, extra, n):
        s = separate_losses(p_cond + extra, p_cond, n)
        assert n * (s.p_sw_per_device + s.p_cond_per_device) == pytest.approx(
            p_cond + extra, rel=1e-13, abs=1e-13
        )

    def test_pipeline_reproduces_bench_table(self):
        ms = [meas(v=v, m=m, t_case=t) for v, m, t, *_ in BENCH]
        rows = extract_losses(ms, MODEL, p_cond_tot=0.800)
        for row, (*_, p_tot, p_sw, p_sw_mos, p_cond_mos) in zip(rows, BENCH):
            assert row.p_loss_tot == pytest.approx(p_tot, abs=0.01)
            assert row.p_sw_tot == pytest.approx(p_sw, abs=0.01)
            assert row.p_sw_mos == pytest.approx(p_sw_mos, abs=0.01)
            assert row.p_cond_mos == pytest.approx(p_cond_mos, abs=0.01)

    def test_fixture_current_gives_bench_conduction(self, runs):
        rows = extract_losses(runs, MODEL, r_ds_on=0.034)
        assert all(r.p_cond_tot == pytest.approx(0.800, abs=1e-5) for r in rows)
        assert fixture_current_for(0.800, 0.034) == pytest.approx(runs[0].i_m, abs=1e-6)

    def test_junction_temperature_reported(self):
        (row,) = extract_losses([meas(t_case=40.0)], ThermalModel(3.41, 0.49), p_cond_tot=0.5)
        assert row.t_junction == pytest.approx(40.0 + 0.49 * row.p_loss_tot / 6)

    def test_exactly_one_conduction_source(self):
        with pytest.raises(ValidationError):
            extract_losses([meas()], MODEL)


class TestFit:
    def test_synthetic_round_trip(self):
        dev = SicDevice("s", 1200.0, 50.0, 0.03, 80e-6, 500.0, 1.4)
        ms = [meas(v=v, m=190.0 / v) for v in (200.0, 260.0, 350.0, 500.0)]
        p = [10e3 * 80e-6 * (x.v_dc / 500.0) ** 1.4 * x.m * x.i_m * x.cos_phi / 4 for x in ms]
        fit = fit_kv(ms, p, dev)
        assert fit.k_v == pytest.approx(1.4, abs=1e-9)
        assert fit.scale == pytest.approx(10e3 * 80e-6, rel=1e-9)

    def test_scale_equivariance(self, runs):
        rows = extract_losses(runs, MODEL, r_ds_on=0.034)
        base = fit_kv(runs, [r.p_sw_mos for r in rows], PROBE)
        scaled = fit_kv(runs, [7.5 * r.p_sw_mos for r in rows], PROBE)
        assert scaled.k_v == pytest.approx(base.k_v, abs=1e-10)
        assert scaled.scale == pytest.approx(7.5 * base.scale, rel=1e-10)

    def test_two_point_oracle(self):
        # constant m*v_dc makes i_avg scale as 1/v_dc, so the slope gains one
        oracle = math.log(1.147 / 0.209) / math.log(2.5) + 1
        ms = [meas(v=v, m=190.0 / v) for v in (200.0, 350.0, 500.0)]
        p = [0.209 * (x.v_dc / 200.0) ** (oracle - 1) for x in ms]
        assert fit_kv(ms, p, PROBE).k_v == pytest.approx(oracle, rel=1e-9)
        assert oracle == pytest.approx(2.858, abs=1e-3)

    def test_bench_regression_within_25_percent(self, runs):
        rows = extract_losses(runs, MODEL, r_ds_on=0.034)
        fit = fit_kv(runs, [r.p_sw_mos for r in rows], PROBE)
        assert math.isfinite(fit.k_v) and math.isfinite(fit.rms_residual)
        for m, r in zip(runs, rows):
            assert predict_switching_loss(m, fit, PROBE.v_ref) == pytest.approx(r.p_sw_mos, rel=0.25)

    def test_300v_row_within_residual(self, runs):
        rows = extract_losses(runs, MODEL, r_ds_on=0.034)
        fit = fit_kv(runs, [r.p_sw_mos for r in rows], PROBE)
        row = next(m for m in runs if m.v_dc == 300.0)
        pred = predict_switching_loss(row, fit, PROBE.v_ref)
        assert abs(math.log(pred / 0.571)) <= 2 * fit.rms_residual

    def test_too_few_points(self):
        with pytest.raises(FitError):
            fit_kv([meas(v=200.0), meas(v=500.0)], [0.2, 1.1], PROBE)

    def test_narrow_spread(self):
        with pytest.raises(FitError, match="1.5x"):
            fit_kv([meas(v=v) for v in (400.0, 450.0, 500.0)], [0.8, 0.9, 1.0], PROBE)


class TestCsv:
    def test_measurement_columns(self, tmp_path):
        path = tmp_path / "runs.csv"
        path.write_text("v_dc_V,m,t_case_C,t_amb_C,f_sw_Hz,i_m_A\n200,0.9,30,22,1e4,4\n")
        with pytest.raises(ConfigError, match="cos_phi"):
            load_measurements(path)

    def test_unknown_column(self, tmp_path):
        path = tmp_path / "runs.csv"
        path.write_text("v_dc_V,m,t_case_C,t_amb_C,f_sw_Hz,i_m_A,cos_phi,extra\n200,0.9,30,22,1e4,4,0.8,1\n")
        with pytest.raises(ConfigError, match="extra"):
            load_measurements(path)

    def test_bad_row_line_number(self, tmp_path):
        path = tmp_path / "runs.csv"
        path.write_text(
            "v_dc_V,m,t_case_C,t_amb_C,f_sw_Hz,i_m_A,cos_phi\n200,0.9,30,22,1e4,4,0.8\n300,1.5,30,22,1e4,4,0.8\n"
        )
        with pytest.raises(ConfigError, match=":3"):
            load_measurements(path)

    def test_calibration_needs_rdson(self, tmp_path):
        path = tmp_path / "calib.csv"
        path.write_text("i_a_rms_A,i_b_rms_A,i_c_rms_A,t_case_C,t_amb_C\n7.79,3.9,3.9,32.4,22\n")
        with pytest.raises(ConfigError, match="rdson"):
            load_calibration(path)
        assert load_calibration(path, r_ds_on=0.034)[0].r_ds_on == 0.034

    def test_fixture_is_bench_table(self, runs):
        assert [(m.v_dc, m.m, m.t_case) for m in runs] == [(float(v), m, t) for v, m, t, *_ in BENCH]
