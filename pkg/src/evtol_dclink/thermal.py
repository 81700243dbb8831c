"""Loss extraction from steady-state case temperatures.

A single lumped case node connects the six-switch module to ambient
through ``r_ca``. A DC test with three switches held on (no switching)
calibrates ``r_ca`` from the known conduction loss; afterwards any
measured case-temperature rise gives the total module loss, and the
conduction share computed from the motor current leaves the switching
loss. No thermal capacitances are modelled; measurements are taken after
settling.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .device_loss import N_DEVICES, SicDevice, SwitchingFit, conduction_loss_array, fit_switching_law
from .errors import ConfigError, FitError, MeasurementError, ValidationError


@dataclass(frozen=True)
class ConductionCalibrationTest:
    i_a_rms: float
    i_b_rms: float
    i_c_rms: float
    r_ds_on: float  # ohm
    r_jc: float  # degC/W
    t_case: float
    t_amb: float

    def __post_init__(self):
        if min(self.i_a_rms, self.i_b_rms, self.i_c_rms) < 0:
            raise ValidationError("phase currents must be >= 0")
        if not self.t_case > self.t_amb:
            raise MeasurementError(f"case temperature {self.t_case} must exceed ambient {self.t_amb}")


@dataclass(frozen=True)
class ThermalMeasurement:
    v_dc: float
    m: float
    t_case: float
    t_amb: float
    f_sw: float
    i_m: float
    cos_phi: float

    def __post_init__(self):
        if not 0 < self.m <= 1:
            raise ValidationError(f"modulation index must lie in (0, 1], got {self.m}")
        if not self.v_dc > 0:
            raise ValidationError("v_dc must be positive")


@dataclass(frozen=True)
class ThermalModel:
    r_ca: float
    r_jc: float = 0.0
    n_devices: int = N_DEVICES

    def __post_init__(self):
        if not self.r_ca > 0:
            raise ValidationError("r_ca must be positive")


def conduction_loss_dc_test(test: ConductionCalibrationTest) -> float:
    """Conduction loss of the three on-state switches, W."""
    return (test.i_a_rms**2 + test.i_b_rms**2 + test.i_c_rms**2) * test.r_ds_on


def rca_per_test(tests: Sequence[ConductionCalibrationTest]) -> list[float]:
    out = []
    for k, test in enumerate(tests):
        p = conduction_loss_dc_test(test)
        if p <= 0:
            raise ZeroDivisionError(f"calibration test {k} has zero conduction loss")
        out.append((test.t_case - test.t_amb) / p)
    return out


def estimate_rca(tests: Sequence[ConductionCalibrationTest]) -> float:
    """Mean case-to-ambient resistance over the calibration tests, degC/W."""
    if not tests:
        raise ValidationError("need at least one calibration test")
    return float(np.mean(rca_per_test(tests)))


def total_loss_from_temperature(meas: ThermalMeasurement, model: ThermalModel) -> float:
    if meas.t_case < meas.t_amb:
        raise MeasurementError(f"case {meas.t_case} degC below ambient {meas.t_amb} degC")
    return (meas.t_case - meas.t_amb) / model.r_ca


class LossSplit(NamedTuple):
    p_sw_tot: float
    p_sw_per_device: float
    p_cond_per_device: float


def separate_losses(p_loss_tot: float, p_cond_tot: float, n_devices: int = N_DEVICES) -> LossSplit:
    if n_devices < 1:
        raise ValidationError("n_devices must be >= 1")
    if p_cond_tot < 0:
        raise ValidationError("conduction loss must be >= 0")
    if p_cond_tot > p_loss_tot:
        raise MeasurementError(
            f"conduction loss {p_cond_tot:.3f} W exceeds measured total {p_loss_tot:.3f} W (bad r_ca?)"
        )
    p_sw = p_loss_tot - p_cond_tot
    return LossSplit(p_sw, p_sw / n_devices, p_cond_tot / n_devices)


def inverter_conduction_loss(meas: ThermalMeasurement, r_ds_on: float, n_devices: int = N_DEVICES) -> float:
    """Conduction loss of the whole module from the motor current amplitude."""
    return n_devices * float(conduction_loss_array(meas.i_m, r_ds_on))


@dataclass(frozen=True)
class ExtractedLoss:
    v_dc: float
    m: float
    t_case: float
    p_loss_tot: float
    p_cond_tot: float
    p_sw_tot: float
    p_sw_mos: float
    p_cond_mos: float
    t_junction: float


def extract_losses(
    measurements: Sequence[ThermalMeasurement],
    model: ThermalModel,
    r_ds_on: float | None = None,
    p_cond_tot: float | None = None,
) -> list[ExtractedLoss]:
    """Split each measurement's loss into conduction and switching parts.

    The conduction total comes from ``r_ds_on`` and the measured current
    unless ``p_cond_tot`` pins it directly.
    """
    if (r_ds_on is None) == (p_cond_tot is None):
        raise ValidationError("give exactly one of r_ds_on or p_cond_tot")
    rows = []
    for meas in measurements:
        total = total_loss_from_temperature(meas, model)
        cond = (
            p_cond_tot if p_cond_tot is not None else inverter_conduction_loss(meas, r_ds_on, model.n_devices)
        )
        split = separate_losses(total, cond, model.n_devices)
        per_device = total / model.n_devices
        rows.append(
            ExtractedLoss(
                meas.v_dc,
                meas.m,
                meas.t_case,
                total,
                cond,
                split.p_sw_tot,
                split.p_sw_per_device,
                split.p_cond_per_device,
                meas.t_case + model.r_jc * per_device,
            )
        )
    return rows


def fit_kv(
    measurements: Sequence[ThermalMeasurement],
    extracted_sw_losses: Sequence[float],
    device: SicDevice,
) -> SwitchingFit:
    """Fit the switching-energy voltage exponent to per-device switching losses.

    Needs at least three measurements spanning a 1.5x voltage ratio.
    Returns ``(k_v, f_sw * (E_on + E_off), rms log residual)``.
    """
    if len(measurements) != len(extracted_sw_losses):
        raise ValidationError("one switching loss per measurement is required")
    if len(measurements) < 3:
        raise FitError("fit_kv needs at least three measurements")
    v = np.array([m.v_dc for m in measurements])
    if v.max() / v.min() < 1.5:
        raise FitError(f"voltage spread {v.min():g}-{v.max():g} V is below 1.5x; k_v is poorly determined")
    i_avg = np.array([m.m * m.i_m * m.cos_phi / 4.0 for m in measurements])
    return fit_switching_law(v, i_avg, np.asarray(extracted_sw_losses, dtype=float), device.v_ref)


def predict_switching_loss(meas: ThermalMeasurement, fit: SwitchingFit, v_ref: float) -> float:
    """Per-device switching loss the fitted law predicts at ``meas``."""
    return fit.scale * (meas.v_dc / v_ref) ** fit.k_v * meas.m * meas.i_m * meas.cos_phi / 4.0


# -- CSV -------------------------------------------------------------------

MEASUREMENT_COLUMNS = ("v_dc_V", "m", "t_case_C", "t_amb_C", "f_sw_Hz", "i_m_A", "cos_phi")
CALIBRATION_COLUMNS = ("i_a_rms_A", "i_b_rms_A", "i_c_rms_A", "t_case_C", "t_amb_C")


def _read_rows(
    path: str | Path, required: Sequence[str], optional: Sequence[str] = ()
) -> list[dict[str, float]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    reader = csv.DictReader(io.StringIO(text), skipinitialspace=True)
    fields = [f.strip() for f in (reader.fieldnames or [])]
    missing = [c for c in required if c not in fields]
    unknown = [c for c in fields if c not in required and c not in optional]
    if missing:
        raise ConfigError(f"{path}: missing columns {', '.join(missing)}")
    if unknown:
        raise ConfigError(f"{path}:1: unknown columns {', '.join(unknown)}")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        try:
            rows.append({k.strip(): float(v) for k, v in row.items() if v is not None and v.strip() != ""})
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    return rows


def load_measurements(path: str | Path) -> list[ThermalMeasurement]:
    out = []
    for k, r in enumerate(_read_rows(path, MEASUREMENT_COLUMNS), start=2):
        try:
            out.append(
                ThermalMeasurement(
                    r["v_dc_V"], r["m"], r["t_case_C"], r["t_amb_C"], r["f_sw_Hz"], r["i_m_A"], r["cos_phi"]
                )
            )
        except (KeyError, ValidationError) as exc:
            raise ConfigError(f"{path}:{k}: {exc}") from exc
    return out


def load_calibration(
    path: str | Path, r_ds_on: float | None = None, r_jc: float | None = None
) -> list[ConductionCalibrationTest]:
    """Read DC calibration tests; ``r_ds_on``/``r_jc`` override file columns."""
    out = []
    for k, r in enumerate(_read_rows(path, CALIBRATION_COLUMNS, ("r_ds_on_Ohm", "r_jc_C_W")), start=2):
        rds = r_ds_on if r_ds_on is not None else r.get("r_ds_on_Ohm")
        rjc = r_jc if r_jc is not None else r.get("r_jc_C_W", 0.0)
        if rds is None:
            raise ConfigError(f"{path}:{k}: r_ds_on missing (add a column or pass --rdson)")
        try:
            out.append(
                ConductionCalibrationTest(
                    r["i_a_rms_A"], r["i_b_rms_A"], r["i_c_rms_A"], rds, rjc, r["t_case_C"], r["t_amb_C"]
                )
            )
        except (KeyError, ValidationError) as exc:
            raise ConfigError(f"{path}:{k}: {exc}") from exc
    return out


def losses_to_csv(rows: Sequence[ExtractedLoss], predicted: Sequence[float] | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = [
        "v_dc_V",
        "m",
        "t_case_C",
        "p_loss_tot_W",
        "p_cond_tot_W",
        "p_sw_tot_W",
        "p_sw_mos_W",
        "p_cond_mos_W",
        "t_j_C",
    ]
    if predicted is not None:
        header.append("p_sw_mos_fit_W")
    w.writerow(header)
    for k, r in enumerate(rows):
        line = (
            [f"{r.v_dc:g}", f"{r.m:.3f}", f"{r.t_case:.1f}"]
            + [f"{x:.3f}" for x in (r.p_loss_tot, r.p_cond_tot, r.p_sw_tot, r.p_sw_mos, r.p_cond_mos)]
            + [f"{r.t_junction:.2f}"]
        )
        if predicted is not None:
            line.append(f"{predicted[k]:.3f}")
        w.writerow(line)
    return buf.getvalue()


def fixture_current_for(p_cond_tot: float, r_ds_on: float, n_devices: int = N_DEVICES) -> float:
    """Motor current amplitude that yields ``p_cond_tot`` across the module."""
    return math.sqrt(4.0 * p_cond_tot / (n_devices * r_ds_on))
