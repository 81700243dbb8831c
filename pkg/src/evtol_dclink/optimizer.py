"""DC-link voltage selection by a weighted cable-area / inverter-loss objective.

For every voltage on a grid the sweep assigns a SiC device from a voltage
range map, derives the modulation index from the motor back-EMF, evaluates
the inverter loss, sizes the battery cable and scores the point with::

    f = beta * A + (1 - beta) * P

``beta`` near 1 favours a light cable, ``beta`` near 0 an efficient
inverter. How ``A`` and ``P`` are scaled is set by ``normalization``:

``none``
    raw terms, copper area in mm^2 and the loss of one switch position in W
``max_over_sweep``
    each term divided by its maximum over the feasible grid
``reference_voltage``
    each term divided by its value at ``SweepConfig.v_norm``
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kvfile
from .cable import CableCatalog, InsulationParams, field_enhancement_k, select_cable_index
from .device_loss import (
    N_DEVICES,
    DeviceCatalog,
    SicDevice,
    conduction_loss_array,
    fit_switching_law,
    switch_avg_current_array,
    with_switching_law,
)
from .errors import ConfigError, DomainError, InfeasibleError, ValidationError

SQRT3 = math.sqrt(3.0)


class PwmMethod(str, Enum):
    SINE_TRIANGLE = "sine_triangle"
    SVPWM = "svpwm"


class Normalization(str, Enum):
    MAX_OVER_SWEEP = "max_over_sweep"
    REFERENCE_VOLTAGE = "reference_voltage"
    NONE = "none"


@dataclass(frozen=True)
class MotorSpec:
    p_mech: float  # W
    omega_m: float  # rad/s
    k_t: float  # N m / A, equal to the back-EMF constant
    eta_motor: float
    i_m: float  # phase current amplitude, A
    cos_phi: float
    pole_pairs: int = 1

    def __post_init__(self):
        for name in ("p_mech", "omega_m", "k_t", "i_m"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"motor {name} must be positive")
        if not 0 < self.eta_motor <= 1:
            raise ValidationError("eta_motor must lie in (0, 1]")
        if not 0 < self.cos_phi <= 1:
            raise ValidationError("cos_phi must lie in (0, 1]")
        if int(self.pole_pairs) != self.pole_pairs or self.pole_pairs < 1:
            raise ValidationError("pole_pairs must be an integer >= 1")

    @property
    def torque(self) -> float:
        return self.p_mech / self.omega_m

    def phase_voltage(self, speed: float | None = None) -> float:
        """Back-EMF amplitude at ``speed`` (rated speed by default)."""
        return self.k_t * (self.omega_m if speed is None else speed)

    def current_at(self, torque: float) -> float:
        """Phase current amplitude scaled linearly from the rated point."""
        return self.i_m * torque / self.torque


@dataclass(frozen=True)
class DeviceRange:
    v_low: float
    v_high: float
    device_id: str


@dataclass(frozen=True)
class DeviceRangeMap:
    """Contiguous voltage ranges, each served by one device.

    A voltage ``v`` belongs to the range with ``v_low < v <= v_high``; the
    first range also includes its lower edge.
    """

    ranges: tuple[DeviceRange, ...]

    def __post_init__(self):
        ranges = tuple(self.ranges)
        object.__setattr__(self, "ranges", ranges)
        if not ranges:
            raise ConfigError("empty device range map")
        for r in ranges:
            if not r.v_high > r.v_low:
                raise ConfigError(f"range for {r.device_id} has v_high <= v_low")
        for a, b in zip(ranges, ranges[1:]):
            if b.v_low != a.v_high:
                raise ConfigError(
                    f"device ranges must be contiguous: {a.device_id} ends at {a.v_high} V, "
                    f"{b.device_id} starts at {b.v_low} V"
                )

    @property
    def v_min(self) -> float:
        return self.ranges[0].v_low

    @property
    def v_max(self) -> float:
        return self.ranges[-1].v_high

    def index(self, v_dc) -> np.ndarray:
        v = np.asarray(v_dc, dtype=float)
        uppers = np.array([r.v_high for r in self.ranges])
        idx = np.searchsorted(uppers, v, side="left")
        outside = (v < self.v_min) | (idx >= len(self.ranges))
        if np.any(outside):
            bad = np.atleast_1d(v)[np.atleast_1d(outside)][0]
            raise ConfigError(f"no device range covers {bad:g} V")
        return idx

    def device_for(self, v_dc: float) -> str:
        return self.ranges[int(self.index(v_dc))].device_id

    def check_against(self, catalog: DeviceCatalog) -> None:
        for r in self.ranges:
            if r.device_id not in catalog:
                raise ConfigError(f"range map names unknown device {r.device_id!r}")
            if catalog[r.device_id].v_dss < r.v_high:
                raise ConfigError(
                    f"{r.device_id} is rated {catalog[r.device_id].v_dss} V but assigned up to {r.v_high} V"
                )


@dataclass(frozen=True)
class SweepConfig:
    v_min: float = 450.0
    v_max: float = 1500.0
    v_step: float = 10.0
    beta: float = 0.8
    f_sw: float = 20e3
    eta_inverter_assumed: float = 0.98
    pwm_method: PwmMethod = PwmMethod.SINE_TRIANGLE
    normalization: Normalization = Normalization.NONE
    v_norm: float = 1000.0  # used by reference_voltage only
    fill_factor: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "pwm_method", PwmMethod(self.pwm_method))
        object.__setattr__(self, "normalization", Normalization(self.normalization))
        if not 0 < self.beta < 1:
            raise ValidationError(f"beta must lie strictly between 0 and 1, got {self.beta}")
        if not (0 < self.v_min <= self.v_max):
            raise ValidationError("need 0 < v_min <= v_max")
        if not self.v_step > 0:
            raise ValidationError("v_step must be positive")
        if not self.f_sw > 0:
            raise ValidationError("f_sw must be positive")
        if not 0 < self.eta_inverter_assumed <= 1:
            raise ValidationError("eta_inverter_assumed must lie in (0, 1]")

    def grid(self) -> np.ndarray:
        n = int(math.floor((self.v_max - self.v_min) / self.v_step + 1e-9)) + 1
        # integer multiples avoid drift from repeated addition
        return np.round(self.v_min + self.v_step * np.arange(n), 9)


@dataclass(frozen=True)
class SweepPoint:
    v_dc: float
    m: float
    device_id: str
    p_cond: float  # W, all six switches
    p_sw: float  # W, all six switches
    p_loss: float  # W, all six switches
    i_dc: float
    a_cu: float  # cm^2
    r_c: float  # cm
    t_i: float  # cm
    f_obj: float
    feasible: bool
    reason: str = ""


@dataclass
class SweepResult:
    points: list[SweepPoint]
    config: SweepConfig
    v_dc: np.ndarray = field(repr=False)
    a_mm2: np.ndarray = field(repr=False)
    p_device: np.ndarray = field(repr=False)  # loss per switch position
    feasible: np.ndarray = field(repr=False)

    def feasible_points(self) -> list[SweepPoint]:
        return [p for p in self.points if p.feasible]

    def scores(self, beta: float, normalization: Normalization | str | None = None) -> np.ndarray:
        """Objective for every grid point; NaN where infeasible."""
        norm = Normalization(normalization or self.config.normalization)
        ctx = normalization_context(self, norm)
        f = np.full(self.v_dc.shape, np.nan)
        ok = self.feasible
        f[ok] = objective(self.a_mm2[ok], self.p_device[ok], beta, norm, ctx)
        return f


@dataclass(frozen=True)
class NormContext:
    a_scale: float
    p_scale: float


def modulation_index(motor: MotorSpec, v_dc, pwm_method=PwmMethod.SINE_TRIANGLE, speed=None, check=True):
    """Modulation index needed to produce the motor back-EMF from ``v_dc``.

    Raises :class:`InfeasibleError` when the bus is too low (``m > 1``)
    unless ``check`` is false.
    """
    v = np.asarray(v_dc, dtype=float)
    if np.any(v <= 0):
        raise DomainError("v_dc must be positive")
    v_ph = motor.phase_voltage(speed)
    if PwmMethod(pwm_method) is PwmMethod.SINE_TRIANGLE:
        m = v_ph / (v / 2.0)
    else:
        m = v_ph / (v / SQRT3)
    if check and np.any(m > 1.0 + 1e-12):
        raise InfeasibleError(f"bus voltage too low for phase voltage {v_ph:.1f} V (m > 1)")
    return float(m) if np.ndim(m) == 0 else m


def objective(
    a_cu, p_loss, beta: float, normalization=Normalization.NONE, context: NormContext | None = None
):
    """Weighted objective ``beta * A + (1 - beta) * P`` after normalisation.

    ``a_cu`` is in mm^2 and ``p_loss`` in W for the raw form. The normalised
    forms divide by the scales in ``context``.
    """
    if not 0 < beta < 1:
        raise ValidationError(f"beta must lie strictly between 0 and 1, got {beta}")
    norm = Normalization(normalization)
    a = np.asarray(a_cu, dtype=float)
    p = np.asarray(p_loss, dtype=float)
    if norm is not Normalization.NONE:
        if context is None:
            raise ConfigError(f"normalization {norm.value!r} needs a context with term scales")
        a = a / context.a_scale
        p = p / context.p_scale
    f = beta * a + (1.0 - beta) * p
    return float(f) if np.ndim(f) == 0 else f


def normalization_context(result: SweepResult, norm: Normalization) -> NormContext | None:
    ok = result.feasible
    if norm is Normalization.NONE:
        return None
    if not np.any(ok):
        raise InfeasibleError("no feasible sweep point")
    if norm is Normalization.MAX_OVER_SWEEP:
        return NormContext(float(result.a_mm2[ok].max()), float(result.p_device[ok].max()))
    hit = np.flatnonzero(np.isclose(result.v_dc, result.config.v_norm) & ok)
    if hit.size == 0:
        raise ConfigError(f"reference voltage {result.config.v_norm} V is not a feasible grid point")
    i = hit[0]
    return NormContext(float(result.a_mm2[i]), float(result.p_device[i]))


def sweep(
    motor: MotorSpec,
    cfg: SweepConfig,
    device_catalog: DeviceCatalog,
    range_map: DeviceRangeMap,
    cable_catalog: CableCatalog,
    insulation: InsulationParams = InsulationParams(),
) -> SweepResult:
    """Evaluate every grid voltage; infeasible points are kept and flagged."""
    range_map.check_against(device_catalog)
    v = cfg.grid()
    dev_idx = range_map.index(v)
    devices = [device_catalog[r.device_id] for r in range_map.ranges]
    r_ds = np.array([d.r_ds_on for d in devices])[dev_idx]
    e_sw = np.array([d.e_on_plus_e_off for d in devices])[dev_idx]
    v_ref = np.array([d.v_ref for d in devices])[dev_idx]
    k_v = np.array([d.k_v for d in devices])[dev_idx]

    m = modulation_index(motor, v, cfg.pwm_method, check=False)
    m = np.atleast_1d(m)
    m_ok = m <= 1.0 + 1e-12

    i_m, cos_phi = motor.i_m, motor.cos_phi
    p_cond = N_DEVICES * conduction_loss_array(i_m, r_ds) * np.ones_like(v)
    p_sw = N_DEVICES * cfg.f_sw * e_sw * (v / v_ref) ** k_v * switch_avg_current_array(i_m, m, cos_phi)
    p_loss = p_cond + p_sw

    i_dc = motor.p_mech / (motor.eta_motor * cfg.eta_inverter_assumed * v)
    cable_idx = select_cable_index(i_dc, cable_catalog)
    cable_ok = cable_idx < len(cable_catalog.entries)
    areas, _ = cable_catalog.arrays()
    a_cu = np.where(cable_ok, areas[np.minimum(cable_idx, len(areas) - 1)], np.nan)
    r_c = np.sqrt(a_cu / (math.pi * cfg.fill_factor))
    k = field_enhancement_k(insulation.eps_r)
    v_kv = v / 1000.0
    if np.any(v_kv >= 20.0):
        raise DomainError("insulation model is valid below 20 kV")
    t_i = r_c * np.expm1(k * v_kv * insulation.t_v / (insulation.alpha * r_c)) + insulation.c_const

    feasible = m_ok & cable_ok
    a_mm2 = a_cu * 100.0
    p_device = p_loss / N_DEVICES
    result = SweepResult([], cfg, v, a_mm2, p_device, feasible)
    if not np.any(feasible):
        raise InfeasibleError("no feasible voltage on the sweep grid")
    f = result.scores(cfg.beta)

    points = []
    for j in range(v.size):
        reasons = []
        if not m_ok[j]:
            reasons.append("modulation index > 1")
        if not cable_ok[j]:
            reasons.append("cable capacity exceeded")
        points.append(
            SweepPoint(
                v_dc=float(v[j]),
                m=float(m[j]),
                device_id=devices[dev_idx[j]].part_id,
                p_cond=float(p_cond[j]),
                p_sw=float(p_sw[j]) if m_ok[j] else math.nan,
                p_loss=float(p_loss[j]) if m_ok[j] else math.nan,
                i_dc=float(i_dc[j]),
                a_cu=float(a_cu[j]),
                r_c=float(r_c[j]),
                t_i=float(t_i[j]),
                f_obj=float(f[j]),
                feasible=bool(feasible[j]),
                reason="; ".join(reasons),
            )
        )
    result.points = points
    return result


def optimize(result: SweepResult, beta: float | None = None, normalization=None) -> SweepPoint:
    """Feasible point with the lowest objective; ties go to the higher voltage.

    Passing ``beta`` (or ``normalization``) rescores the stored sweep.
    """
    if not result.points or not np.any(result.feasible):
        raise InfeasibleError("no feasible sweep point to optimise over")
    if beta is None and normalization is None:
        f = np.array([p.f_obj for p in result.points])
    else:
        f = result.scores(result.config.beta if beta is None else beta, normalization)
    f = np.where(result.feasible, f, np.inf)
    best = f.min()
    tol = 1e-12 * max(1.0, abs(best))
    ties = np.flatnonzero(f <= best + tol)
    j = ties[np.argmax(result.v_dc[ties])]
    point = result.points[j]
    if beta is not None or normalization is not None:
        point = replace(point, f_obj=float(f[j]))
    return point


def device_boundaries(result: SweepResult) -> list[tuple[float, float, float]]:
    """``(v_before, v_after, loss jump)`` wherever the assigned device changes."""
    out = []
    for a, b in zip(result.points, result.points[1:]):
        if a.device_id != b.device_id:
            out.append((a.v_dc, b.v_dc, b.p_loss - a.p_loss))
    return out


def calibrate_switching(
    device: SicDevice,
    motor: MotorSpec,
    targets: Sequence[tuple[float, float]],
    f_sw: float,
    pwm_method=PwmMethod.SINE_TRIANGLE,
) -> SicDevice:
    """Fit ``k_v`` and ``E_on + E_off`` so the inverter loss hits ``targets``.

    ``targets`` holds ``(v_dc, total inverter loss in W)`` pairs; at least
    two distinct voltages are required.
    """
    v = np.array([t[0] for t in targets], dtype=float)
    p_total = np.array([t[1] for t in targets], dtype=float)
    p_sw = p_total / N_DEVICES - conduction_loss_array(motor.i_m, device.r_ds_on)
    if np.any(p_sw <= 0):
        raise InfeasibleError("target losses do not exceed the conduction loss; nothing left for switching")
    m = modulation_index(motor, v, pwm_method)
    i_avg = switch_avg_current_array(motor.i_m, m, motor.cos_phi)
    fit = fit_switching_law(v, i_avg, p_sw, device.v_ref)
    return with_switching_law(device, fit, f_sw)


@dataclass(frozen=True)
class SummaryRow:
    beta: float
    v_dc_opt: float
    p_loss: float
    r_c: float
    a_cu: float
    device_id: str


def summarize(result: SweepResult, betas: Iterable[float] = (0.2, 0.8)) -> list[SummaryRow]:
    rows = []
    for beta in betas:
        pt = optimize(result, beta)
        rows.append(SummaryRow(beta, pt.v_dc, pt.p_loss, pt.r_c, pt.a_cu, pt.device_id))
    return rows


# -- reports ---------------------------------------------------------------

SWEEP_COLUMNS = (
    "v_dc",
    "m",
    "device_id",
    "p_cond_W",
    "p_sw_W",
    "p_loss_W",
    "i_dc_A",
    "a_cu_cm2",
    "r_c_cm",
    "t_i_cm",
    "f_obj",
    "feasible",
)


def _g(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.6f}"


def sweep_to_csv(result: SweepResult, beta: float | None = None) -> str:
    """One row per grid voltage; ``beta`` rescores ``f_obj`` first."""
    f = [p.f_obj for p in result.points] if beta is None else result.scores(beta)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for p, fj in zip(result.points, f):
        w.writerow(
            [
                f"{p.v_dc:g}",
                _g(p.m),
                p.device_id,
                _g(p.p_cond),
                _g(p.p_sw),
                _g(p.p_loss),
                _g(p.i_dc),
                _g(p.a_cu),
                _g(p.r_c),
                _g(p.t_i),
                _g(float(fj)),
                int(p.feasible),
            ]
        )
    return buf.getvalue()


def summary_to_csv(rows: Sequence[SummaryRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["beta", "v_dc_opt_V", "p_loss_W", "r_c_cm", "a_cu_cm2", "device_id"])
    for r in rows:
        w.writerow(
            [f"{r.beta:g}", f"{r.v_dc_opt:g}", f"{r.p_loss:.1f}", f"{r.r_c:.4f}", f"{r.a_cu:g}", r.device_id]
        )
    return buf.getvalue()


# -- files -----------------------------------------------------------------

_MOTOR_SCHEMA = {
    "p_mech_W": float,
    "omega_m_rad_s": float,
    "k_t_Nm_A": float,
    "eta_motor": float,
    "i_m_A": float,
    "cos_phi": float,
    "pole_pairs": int,
}
_RANGE_SCHEMA = {"v_low_V": float, "v_high_V": float, "device": str}


def _single_block(doc: kvfile.KVDocument, name: str) -> kvfile.Block:
    if doc.header.values:
        key = next(iter(doc.header.lines))
        raise ConfigError(f"{doc.source}:{doc.header.lines[key]}: unexpected key {key!r} outside [{name}]")
    if len(doc.blocks) != 1 or doc.blocks[0].name != name:
        raise ConfigError(f"{doc.source}: expected exactly one [{name}] block")
    return doc.blocks[0]


def parse_motor(doc: kvfile.KVDocument) -> MotorSpec:
    block = _single_block(doc, "motor")
    vals = kvfile.convert(doc, block, _MOTOR_SCHEMA, set(_MOTOR_SCHEMA) - {"pole_pairs"})
    try:
        return MotorSpec(
            p_mech=vals["p_mech_W"],
            omega_m=vals["omega_m_rad_s"],
            k_t=vals["k_t_Nm_A"],
            eta_motor=vals["eta_motor"],
            i_m=vals["i_m_A"],
            cos_phi=vals["cos_phi"],
            pole_pairs=vals.get("pole_pairs", 1),
        )
    except ValidationError as exc:
        raise ConfigError(f"{doc.source}: {exc}") from exc


def load_motor(path: str | Path) -> MotorSpec:
    return parse_motor(kvfile.parse_file(path))


def parse_range_map(doc: kvfile.KVDocument) -> DeviceRangeMap:
    ranges = []
    for block in doc.blocks:
        if block.name != "range":
            raise ConfigError(f"{doc.source}:{block.lineno}: unexpected block [{block.name}]")
        vals = kvfile.convert(doc, block, _RANGE_SCHEMA)
        ranges.append(DeviceRange(vals["v_low_V"], vals["v_high_V"], vals["device"]))
    return DeviceRangeMap(tuple(ranges))


def load_range_map(path: str | Path) -> DeviceRangeMap:
    return parse_range_map(kvfile.parse_file(path))
