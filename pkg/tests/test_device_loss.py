import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from evtol_dclink import kvfile
from evtol_dclink.device_loss import (
    DeviceCatalog,
    OperatingPoint,
    SicDevice,
    conduction_loss_per_device,
    dump_device_catalog,
    fit_switching_law,
    inverter_total_loss,
    parse_device_catalog,
    switch_avg_current,
    switch_rms_current,
    switching_loss_per_device,
    with_switching_law,
)
from evtol_dclink.errors import ConfigError, DomainError, FitError, ValidationError

DEV = SicDevice("AIMZHN120R010", 1200.0, 202.0, 8.7e-3, 200e-6, 800.0, 1.4)


def op(**kw):
    base = dict(i_m=194.6, m=0.6, cos_phi=0.9, f_sw=20e3, v_dc=800.0)
    base.update(kw)
    return OperatingPoint(**base)


def integrated_currents(i_m, m, phi):
    """Switch rms and average current by quadrature over one fundamental period."""

    def duty(t):
        return 0.5 + 0.5 * m * math.sin(t + phi)

    sq, _ = quad(
        lambda t: (i_m * math.sin(t)) ** 2 * duty(t),
        0,
        2 * math.pi,
        epsabs=1e-13 * i_m,
        epsrel=1e-11,
        limit=200,
    )
    av, _ = quad(
        lambda t: i_m * math.sin(t) * duty(t), 0, 2 * math.pi, epsabs=1e-13 * i_m, epsrel=1e-11, limit=200
    )
    return math.sqrt(sq / (2 * math.pi)), av / (2 * math.pi)


class TestCurrents:
    def test_rms_rated_motor(self):
        assert switch_rms_current(op()) == pytest.approx(97.3)

    def test_rms_zero_current(self):
        assert switch_rms_current(op(i_m=0.0)) == 0.0

    def test_rms_oracle_10a(self):
        rms, _ = integrated_currents(10.0, 0.7, 0.4)
        assert switch_rms_current(op(i_m=10.0, m=0.7, cos_phi=math.cos(0.4))) == pytest.approx(5.0)
        assert rms == pytest.approx(5.0, rel=1e-9)

    def test_avg_unity(self):
        assert switch_avg_current(op(i_m=4.0, m=1.0, cos_phi=1.0)) == pytest.approx(1.0)

    def test_avg_zero_power_factor(self):
        assert switch_avg_current(op(cos_phi=0.0)) == 0.0

    def test_avg_oracle(self):
        phi = math.acos(0.9)
        _, avg = integrated_currents(8.0, 0.633, phi)
        assert switch_avg_current(op(i_m=8.0, m=0.633, cos_phi=0.9)) == pytest.approx(1.1394, abs=1e-4)
        assert avg == pytest.approx(1.1394, abs=1e-4)

    @settings(max_examples=60, deadline=None)
    @given(
        i_m=st.floats(0.1, 500),
        m=st.floats(0.01, 1.0),
        phi=st.floats(0.0, math.pi / 2),
    )
    def test_closed_form_matches_quadrature(self, i_m, m, phi):
        rms, avg = integrated_currents(i_m, m, phi)
        p = op(i_m=i_m, m=m, cos_phi=min(1.0, math.cos(phi)))
        assert switch_rms_current(p) == pytest.approx(rms, rel=1e-6)
        assert switch_avg_current(p) == pytest.approx(avg, rel=1e-6, abs=1e-12 * i_m)

    @given(m=st.floats(0.0, 1.0), c=st.floats(0.0, 1.0), v=st.floats(1.0, 2000.0), f=st.floats(1e3, 1e5))
    def test_rms_independent_of_other_fields(self, m, c, v, f):
        assert switch_rms_current(op(m=m, cos_phi=c, v_dc=v, f_sw=f)) == switch_rms_current(op())


class TestLosses:
    def test_conduction_table_values(self):
        assert conduction_loss_per_device(DEV, op()) == pytest.approx(82.36, abs=0.01)

    def test_conduction_trivial(self):
        one_ohm = SicDevice("R", 100.0, 1.0, 1.0, 0.0, 100.0)
        assert conduction_loss_per_device(one_ohm, op(i_m=2.0)) == pytest.approx(1.0)
        assert conduction_loss_per_device(one_ohm, op(i_m=0.0)) == 0.0

    def test_switching_at_reference_voltage(self):
        p = op(v_dc=DEV.v_ref)
        expected = p.f_sw * DEV.e_on_plus_e_off * p.m * p.i_m * p.cos_phi / 4
        assert switching_loss_per_device(DEV, p) == pytest.approx(expected, rel=1e-15)

    def test_switching_zero_cases(self):
        assert switching_loss_per_device(DEV, op(m=0.0)) == 0.0
        assert switching_loss_per_device(DEV, op(cos_phi=0.0)) == 0.0

    @given(k_v=st.floats(0.1, 4.0))
    def test_voltage_doubling_ratio(self, k_v):
        dev = SicDevice("X", 1200.0, 10.0, 0.01, 1e-4, 400.0, k_v)
        ratio = switching_loss_per_device(dev, op(v_dc=400.0)) / switching_loss_per_device(
            dev, op(v_dc=800.0)
        )
        assert ratio == pytest.approx(2.0**-k_v, rel=1e-12)

    def test_total_conduction_only(self):
        dev = SicDevice("A", 1200.0, 202.0, 8.7e-3, 0.0, 800.0)
        assert inverter_total_loss(dev, op()) == pytest.approx(494.2, abs=0.1)

    @given(
        i_m=st.floats(0, 400),
        m=st.floats(0, 1),
        c=st.floats(0, 1),
        v=st.floats(10, 1500),
        k_v=st.floats(0.5, 3),
    )
    def test_total_is_six_devices_and_nonnegative(self, i_m, m, c, v, k_v):
        dev = SicDevice("X", 1700.0, 100.0, 0.02, 5e-4, 800.0, k_v)
        p = op(i_m=i_m, m=m, cos_phi=c, v_dc=v)
        pc, ps = conduction_loss_per_device(dev, p), switching_loss_per_device(dev, p)
        assert pc >= 0 and ps >= 0
        assert inverter_total_loss(dev, p) == pytest.approx(6 * (pc + ps), rel=1e-14, abs=1e-300)

    def test_total_increasing_in_voltage(self):
        losses = [inverter_total_loss(DEV, op(v_dc=v)) for v in np.linspace(400, 1200, 30)]
        assert all(b > a for a, b in zip(losses, losses[1:]))

    def test_calibrated_device_near_table_targets(self, aimzhn, cat):
        for v, target in ((600.0, 1019.0), (1000.0, 1056.0)):
            m = cat.motor.k_t * cat.motor.omega_m / (v / 2)
            p = OperatingPoint(cat.motor.i_m, m, cat.motor.cos_phi, 20e3, v)
            assert inverter_total_loss(aimzhn, p) == pytest.approx(target, abs=0.5)


class TestValidation:
    @pytest.mark.parametrize(
        "kw",
        [dict(v_dc=0.0), dict(v_dc=-5.0), dict(m=1.2), dict(m=-0.1), dict(cos_phi=1.5), dict(i_m=-1.0)],
    )
    def test_bad_operating_point(self, kw):
        with pytest.raises(ValidationError):
            op(**kw)

    def test_switching_must_exceed_fundamental(self):
        with pytest.raises(ValidationError):
            op(f_sw=10.0, omega_e=2 * math.pi * 50)

    def test_bad_voltage_is_domain_error(self):
        with pytest.raises(DomainError):
            op(v_dc=0.0)

    @pytest.mark.parametrize("field", ["v_dss", "i_d", "r_ds_on", "v_ref", "k_v"])
    def test_device_positive_fields(self, field):
        kw = dict(part_id="X", v_dss=1.0, i_d=1.0, r_ds_on=1.0, e_on_plus_e_off=0.0, v_ref=1.0, k_v=1.0)
        kw[field] = 0.0
        with pytest.raises(ValidationError):
            SicDevice(**kw)

    def test_duplicate_part_ids(self):
        with pytest.raises(ValidationError, match="duplicate"):
            DeviceCatalog.from_devices([DEV, DEV])


class TestFit:
    def test_exact_round_trip(self):
        v = np.array([300.0, 450.0, 600.0, 900.0])
        i_avg = np.array([1.0, 2.0, 1.5, 0.7])
        p = 3.2 * (v / 600.0) ** 1.4 * i_avg
        fit = fit_switching_law(v, i_avg, p, 600.0)
        assert fit.k_v == pytest.approx(1.4, abs=1e-9)
        assert fit.scale == pytest.approx(3.2, rel=1e-9)
        assert fit.rms_residual < 1e-12

    def test_needs_spread(self):
        with pytest.raises(FitError):
            fit_switching_law([500.0, 500.0], [1.0, 2.0], [1.0, 2.0], 500.0)

    def test_with_switching_law(self):
        fit = fit_switching_law([400.0, 800.0], [1.0, 1.0], [2.0, 4.0], 800.0)
        dev = with_switching_law(DEV, fit, 20e3)
        assert dev.k_v == pytest.approx(1.0)
        assert dev.e_on_plus_e_off == pytest.approx(4.0 / 20e3)


class TestCatalogFile:
    def test_shipped_catalog_matches_datasheet_ratings(self, cat):
        got = {d.part_id: (d.v_dss, d.i_d, round(d.r_ds_on * 1e3, 3)) for d in cat.devices.values()}
        assert got == {
            "E4M0025075J2": (750.0, 84.0, 25.0),
            "AIMZHN120R010": (1200.0, 202.0, 8.7),
            "C2M0045170P": (1700.0, 75.0, 40.0),
        }

    def test_round_trip(self, cat):
        again = parse_device_catalog(kvfile.parse_text(dump_device_catalog(cat.devices)))
        assert again == cat.devices

    def test_empty_file(self):
        with pytest.raises(ConfigError, match="empty catalog"):
            parse_device_catalog(kvfile.parse_text("# nothing\n"))

    def test_unknown_key_reports_line(self):
        text = (
            "[device]\npart_id = X\nv_dss_V = 1\ni_d_A = 1\n"
            "r_ds_on_mOhm = 1\ne_on_off_uJ = 1\nv_ref_V = 1\nbogus = 2\n"
        )
        with pytest.raises(ConfigError, match=r":8"):
            parse_device_catalog(kvfile.parse_text(text))

    def test_default_k_v(self):
        text = (
            "[device]\npart_id = X\nv_dss_V = 1\ni_d_A = 1\nr_ds_on_mOhm = 1\ne_on_off_uJ = 1\nv_ref_V = 1\n"
        )
        assert parse_device_catalog(kvfile.parse_text(text))["X"].k_v == 1.4
