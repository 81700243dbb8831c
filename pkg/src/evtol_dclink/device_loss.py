"""Closed-form loss model of a two-level three-phase SiC inverter.

All six switches of a sinusoidally modulated two-level bridge carry the
same rms and average current, so the inverter loss is six times the loss
of one switch position. Deadtime, body-diode and DC-link capacitor losses
are not modelled.

The scalar functions take a :class:`SicDevice` and an
:class:`OperatingPoint`. The ``*_array`` kernels evaluate the same
expressions on numpy arrays and are what the voltage sweep uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from . import kvfile
from .errors import ConfigError, DomainError, FitError, ValidationError

N_DEVICES = 6
DEFAULT_K_V = 1.4


@dataclass(frozen=True)
class SicDevice:
    """One SiC MOSFET catalog entry.

    ``e_on_plus_e_off`` is the summed switching energy in joules at the
    datasheet test voltage ``v_ref``; only the sum enters the loss model.
    """

    part_id: str
    v_dss: float
    i_d: float
    r_ds_on: float
    e_on_plus_e_off: float
    v_ref: float
    k_v: float = DEFAULT_K_V

    def __post_init__(self):
        for name in ("v_dss", "i_d", "r_ds_on", "v_ref", "k_v"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValidationError(f"{self.part_id}: {name} must be positive, got {value}")
        if not (self.e_on_plus_e_off >= 0 and math.isfinite(self.e_on_plus_e_off)):
            raise ValidationError(f"{self.part_id}: e_on_plus_e_off must be >= 0")
        if not self.part_id:
            raise ValidationError("part_id must be non-empty")


@dataclass(frozen=True)
class OperatingPoint:
    i_m: float  # phase current amplitude, A
    m: float  # modulation index
    cos_phi: float
    f_sw: float  # Hz
    v_dc: float  # V
    omega_e: float = 0.0  # rad/s

    def __post_init__(self):
        if not self.v_dc > 0:
            raise DomainError(f"v_dc must be positive, got {self.v_dc}")
        if not self.i_m >= 0:
            raise ValidationError(f"i_m must be >= 0, got {self.i_m}")
        # m = 0 is accepted as the degenerate no-output point
        if not 0 <= self.m <= 1:
            raise ValidationError(f"modulation index must lie in [0, 1], got {self.m}")
        if not 0 <= self.cos_phi <= 1:
            raise ValidationError(f"cos_phi must lie in [0, 1], got {self.cos_phi}")
        if not self.omega_e >= 0:
            raise ValidationError(f"omega_e must be >= 0, got {self.omega_e}")
        if not self.f_sw > self.omega_e / (2 * math.pi):
            raise ValidationError(
                f"f_sw={self.f_sw} Hz must exceed the fundamental {self.omega_e / (2 * math.pi):.3g} Hz"
            )


class DeviceCatalog(dict):
    """``part_id -> SicDevice`` mapping that refuses duplicates."""

    @classmethod
    def from_devices(cls, devices: Iterable[SicDevice]) -> "DeviceCatalog":
        cat = cls()
        for dev in devices:
            if dev.part_id in cat:
                raise ValidationError(f"duplicate part_id {dev.part_id!r}")
            cat[dev.part_id] = dev
        if not cat:
            raise ValidationError("empty catalog")
        return cat


# -- array kernels ---------------------------------------------------------


def switch_rms_current_array(i_m):
    return np.asarray(i_m, dtype=float) / 2.0


def switch_avg_current_array(i_m, m, cos_phi):
    return np.asarray(m, dtype=float) * i_m * cos_phi / 4.0


def conduction_loss_array(i_m, r_ds_on):
    i_m = np.asarray(i_m, dtype=float)
    return i_m * i_m / 4.0 * r_ds_on


def switching_loss_array(i_m, m, cos_phi, f_sw, v_dc, e_sw, v_ref, k_v):
    v_dc = np.asarray(v_dc, dtype=float)
    if np.any(v_dc <= 0):
        raise DomainError("v_dc must be positive")
    return f_sw * e_sw * (v_dc / v_ref) ** k_v * switch_avg_current_array(i_m, m, cos_phi)


# -- scalar API ------------------------------------------------------------


def switch_rms_current(op: OperatingPoint) -> float:
    return op.i_m / 2.0


def switch_avg_current(op: OperatingPoint) -> float:
    return op.m * op.i_m * op.cos_phi / 4.0


def conduction_loss_per_device(device: SicDevice, op: OperatingPoint) -> float:
    return op.i_m * op.i_m / 4.0 * device.r_ds_on


def switching_loss_per_device(device: SicDevice, op: OperatingPoint) -> float:
    if op.v_dc <= 0:
        raise DomainError(f"v_dc must be positive, got {op.v_dc}")
    scale = (op.v_dc / device.v_ref) ** device.k_v
    return op.f_sw * device.e_on_plus_e_off * scale * switch_avg_current(op)


def inverter_total_loss(device: SicDevice, op: OperatingPoint) -> float:
    """Loss of all six switches, W."""
    per_device = conduction_loss_per_device(device, op) + switching_loss_per_device(device, op)
    return N_DEVICES * per_device


# -- switching-law regression ---------------------------------------------


class SwitchingFit(NamedTuple):
    k_v: float
    scale: float  # f_sw * (E_on + E_off), W per A at v_dc = v_ref
    rms_residual: float  # rms of log residuals


def fit_switching_law(v_dc, i_avg, p_sw, v_ref: float) -> SwitchingFit:
    """Least-squares fit of ``p_sw = scale * (v_dc/v_ref)**k_v * i_avg``.

    Regresses ``log(p_sw / i_avg)`` on ``log(v_dc / v_ref)``; the slope is
    ``k_v`` and the intercept ``log(scale)``.
    """
    v_dc = np.asarray(v_dc, dtype=float)
    i_avg = np.asarray(i_avg, dtype=float)
    p_sw = np.asarray(p_sw, dtype=float)
    if not (v_dc.shape == i_avg.shape == p_sw.shape) or v_dc.ndim != 1:
        raise ValidationError("v_dc, i_avg and p_sw must be 1-D arrays of equal length")
    if v_dc.size < 2:
        raise FitError("at least two points are needed to fit the switching law")
    if np.any(p_sw <= 0) or np.any(i_avg <= 0) or np.any(v_dc <= 0):
        raise DomainError("switching losses, average currents and voltages must be positive")
    x = np.log(v_dc / v_ref)
    if np.ptp(x) < 1e-9:
        raise FitError("voltage spread is degenerate; k_v is undetermined")
    y = np.log(p_sw / i_avg)
    design = np.column_stack([x, np.ones_like(x)])
    (k_v, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - (k_v * x + intercept)
    return SwitchingFit(float(k_v), float(math.exp(intercept)), float(np.sqrt(np.mean(resid**2))))


def with_switching_law(device: SicDevice, fit: SwitchingFit, f_sw: float) -> SicDevice:
    """Return ``device`` with ``k_v`` and ``E_on + E_off`` replaced by a fit."""
    return replace(device, k_v=fit.k_v, e_on_plus_e_off=fit.scale / f_sw)


# -- catalog file ----------------------------------------------------------

_DEVICE_SCHEMA = {
    "part_id": str,
    "v_dss_V": float,
    "i_d_A": float,
    "r_ds_on_mOhm": float,
    "e_on_off_uJ": float,
    "v_ref_V": float,
    "k_v": float,
}
_DEVICE_REQUIRED = set(_DEVICE_SCHEMA) - {"k_v"}


def parse_device_catalog(doc: kvfile.KVDocument) -> DeviceCatalog:
    if doc.header.values:
        key = next(iter(doc.header.lines))
        raise ConfigError(f"{doc.source}:{doc.header.lines[key]}: unexpected header key {key!r}")
    devices = []
    seen: dict[str, int] = {}
    for block in doc.blocks:
        if block.name != "device":
            raise ConfigError(f"{doc.source}:{block.lineno}: unexpected block [{block.name}]")
        vals = kvfile.convert(doc, block, _DEVICE_SCHEMA, _DEVICE_REQUIRED)
        pid = vals["part_id"]
        if pid in seen:
            raise ConfigError(
                f"{doc.source}:{block.lineno}: duplicate part_id {pid!r} (first at line {seen[pid]})"
            )
        seen[pid] = block.lineno
        try:
            devices.append(
                SicDevice(
                    part_id=pid,
                    v_dss=vals["v_dss_V"],
                    i_d=vals["i_d_A"],
                    r_ds_on=vals["r_ds_on_mOhm"] * 1e-3,
                    e_on_plus_e_off=vals["e_on_off_uJ"] * 1e-6,
                    v_ref=vals["v_ref_V"],
                    k_v=vals.get("k_v", DEFAULT_K_V),
                )
            )
        except ValidationError as exc:
            raise ConfigError(f"{doc.source}:{block.lineno}: {exc}") from exc
    if not devices:
        raise ConfigError(f"{doc.source}: empty catalog")
    return DeviceCatalog.from_devices(devices)


def load_device_catalog(path: str | Path) -> DeviceCatalog:
    return parse_device_catalog(kvfile.parse_file(path))


def dump_device_catalog(catalog: Iterable[SicDevice]) -> str:
    devices = catalog.values() if isinstance(catalog, dict) else catalog
    return kvfile.dump(
        {},
        (
            (
                "device",
                {
                    "part_id": d.part_id,
                    "v_dss_V": d.v_dss,
                    "i_d_A": d.i_d,
                    "r_ds_on_mOhm": d.r_ds_on * 1e3,
                    "e_on_off_uJ": d.e_on_plus_e_off * 1e6,
                    "v_ref_V": d.v_ref,
                    "k_v": d.k_v,
                },
            )
            for d in devices
        ),
    )
