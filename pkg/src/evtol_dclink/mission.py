"""Mission-driven reconfiguration of a series battery string.

Each cell sits behind a half-bridge that either inserts it into the string
or bypasses it, so the bus voltage can follow the motor's back-EMF from one
flight phase to the next. The planner picks the number of inserted cells
per segment; the simulator integrates state of charge and inverter losses
in fixed time steps.

Inserted cells are assumed to be rotated so all cells discharge evenly;
per-cell state of charge is not tracked.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Sequence

from . import kvfile
from .device_loss import N_DEVICES, SicDevice
from .errors import ConfigError, DepletionError, InfeasibleError, ValidationError
from .optimizer import SQRT3, MotorSpec, PwmMethod


class Phase(str, Enum):
    TAKEOFF = "takeoff"
    CLIMB = "climb"
    CRUISE = "cruise"
    DESCENT = "descent"
    LANDING = "landing"


STANDARD_ORDER = [Phase.TAKEOFF, Phase.CLIMB, Phase.CRUISE, Phase.DESCENT, Phase.LANDING]


@dataclass(frozen=True)
class MissionSegment:
    phase: Phase
    duration: float  # s
    torque: float  # N m
    speed: float  # rad/s

    def __post_init__(self):
        object.__setattr__(self, "phase", Phase(self.phase))
        if not self.duration > 0:
            raise ValidationError(f"{self.phase.value}: duration must be positive")
        if self.torque < 0 or self.speed < 0:
            raise ValidationError(f"{self.phase.value}: torque and speed must be >= 0")

    @property
    def mech_power(self) -> float:
        return self.torque * self.speed


@dataclass(frozen=True)
class MissionProfile:
    segments: tuple[MissionSegment, ...]

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise ValidationError("mission profile is empty")
        phases = [s.phase for s in segs]
        if phases[0] is not Phase.TAKEOFF or phases[-1] is not Phase.LANDING or not _in_order(phases):
            warnings.warn(
                "mission phases do not follow takeoff-climb-cruise-descent-landing: "
                + ", ".join(p.value for p in phases),
                stacklevel=3,
            )

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.segments)


def _in_order(phases: Sequence[Phase]) -> bool:
    ranks = [STANDARD_ORDER.index(p) for p in phases]
    return all(a <= b for a, b in zip(ranks, ranks[1:]))


@dataclass(frozen=True)
class ReconfigurablePack:
    n_cells_total: int
    cell_capacity: float  # Ah
    ocv_full: float  # V
    ocv_empty: float  # V
    r_cell: float = 2e-3  # ohm
    soc: float = 1.0
    n_active: int = 0
    cells_per_module: int = 1

    def __post_init__(self):
        if self.n_cells_total < 1:
            raise ValidationError("pack needs at least one cell")
        if not self.cell_capacity > 0:
            raise ValidationError("cell_capacity must be positive")
        if not 0 < self.ocv_empty < self.ocv_full:
            raise ValidationError("need 0 < ocv_empty < ocv_full")
        if self.r_cell < 0:
            raise ValidationError("r_cell must be >= 0")
        if not 0 <= self.soc <= 1:
            raise ValidationError(f"soc must lie in [0, 1], got {self.soc}")
        if not 0 <= self.n_active <= self.n_cells_total:
            raise ValidationError("n_active must lie in [0, n_cells_total]")
        if self.cells_per_module < 1 or self.n_cells_total % self.cells_per_module:
            raise ValidationError("cells_per_module must divide n_cells_total")

    def ocv(self, soc: float | None = None) -> float:
        s = self.soc if soc is None else soc
        return self.ocv_empty + s * (self.ocv_full - self.ocv_empty)

    def round_to_module(self, n: int) -> int:
        k = self.cells_per_module
        return min(self.n_cells_total, -(-n // k) * k)


def segment_voltage_requirement(
    seg: MissionSegment, motor: MotorSpec, pwm_method=PwmMethod.SINE_TRIANGLE, margin: float = 0.0
) -> float:
    """Bus voltage needed to reach the segment's back-EMF, V."""
    if margin < 0:
        raise ValidationError("margin must be >= 0")
    v_ph = motor.k_t * seg.speed
    factor = 2.0 if PwmMethod(pwm_method) is PwmMethod.SINE_TRIANGLE else SQRT3
    return (1.0 + margin) * factor * v_ph


def _cells_for(v_req: float, ocv: float) -> int:
    # tolerance keeps exact multiples from rounding up
    return max(0, math.ceil(v_req / ocv - 1e-9))


def plan_reconfiguration(
    profile: MissionProfile,
    pack: ReconfigurablePack,
    motor: MotorSpec,
    pwm_method=PwmMethod.SINE_TRIANGLE,
    margin: float = 0.1,
) -> list[tuple[MissionSegment, int]]:
    """Inserted-cell count per segment, planned at the pack's present SoC."""
    ocv_now = pack.ocv()
    plan = []
    for seg in profile.segments:
        v_req = segment_voltage_requirement(seg, motor, pwm_method, margin)
        if v_req > pack.n_cells_total * pack.ocv_empty:
            raise InfeasibleError(
                f"{seg.phase.value}: {v_req:.1f} V exceeds {pack.n_cells_total} cells at "
                f"{pack.ocv_empty} V empty voltage"
            )
        plan.append((seg, pack.round_to_module(_cells_for(v_req, ocv_now))))
    return plan


@dataclass(frozen=True)
class MissionConfig:
    f_sw: float = 20e3
    pwm_method: PwmMethod = PwmMethod.SINE_TRIANGLE
    margin: float = 0.1
    dt: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "pwm_method", PwmMethod(self.pwm_method))
        if not self.dt > 0:
            raise ValidationError("dt must be positive")


@dataclass(frozen=True)
class StepRow:
    t_s: float
    phase: str
    n_active: int
    v_dc: float
    i_dc: float
    p_cond: float
    p_sw: float
    soc: float  # at the start of the step


@dataclass(frozen=True)
class SegmentSummary:
    phase: str
    duration: float
    n_active: int  # at the start of the segment
    energy_delivered: float  # J, electrical energy into the motor
    energy_lost_inverter: float  # J
    energy_cond: float  # J
    energy_sw: float  # J
    energy_pack: float  # J, integral of v_pack * i_dc
    soc_start: float
    soc_end: float

    @property
    def balance_residual(self) -> float:
        if self.energy_pack == 0:
            return abs(self.energy_delivered + self.energy_lost_inverter)
        return abs(self.energy_delivered + self.energy_lost_inverter - self.energy_pack) / self.energy_pack


@dataclass
class MissionReport:
    rows: list[StepRow]
    segments: list[SegmentSummary]
    initial_soc: float
    final_soc: float
    device_id: str
    notes: list[str] = field(default_factory=list)

    @property
    def energy_delivered(self) -> float:
        return sum(s.energy_delivered for s in self.segments)

    @property
    def energy_lost_inverter(self) -> float:
        return sum(s.energy_lost_inverter for s in self.segments)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t_s", "phase", "n_active", "v_dc_V", "i_dc_A", "p_cond_W", "p_sw_W", "soc"])
        for r in self.rows:
            w.writerow(
                [
                    _fmt(r.t_s),
                    r.phase,
                    r.n_active,
                    _fmt(r.v_dc),
                    _fmt(r.i_dc),
                    _fmt(r.p_cond),
                    _fmt(r.p_sw),
                    _fmt(r.soc),
                ]
            )
        return buf.getvalue()


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _solve_step(n, ocv, r_cell, p_e, i_m, cos_phi, v_ph, device: SicDevice, cfg: MissionConfig):
    """Bus current and voltage including cell sag and inverter loss.

    Solves ``v * i = p_e + p_loss(v)`` with ``v = n (ocv - i r_cell)`` by
    fixed-point iteration. Returns ``(i_dc, v_dc, m, p_cond, p_sw)``.
    """
    factor = 2.0 if cfg.pwm_method is PwmMethod.SINE_TRIANGLE else SQRT3
    p_cond = N_DEVICES * i_m * i_m / 4.0 * device.r_ds_on
    sw_gain = N_DEVICES * cfg.f_sw * device.e_on_plus_e_off * i_m * cos_phi / 4.0

    def state(i):
        v = n * (ocv - i * r_cell)
        if v <= 0:
            raise InfeasibleError(f"{n} cells cannot deliver {p_e:.0f} W")
        m = factor * v_ph / v
        return v, m, sw_gain * (v / device.v_ref) ** device.k_v * m

    i = (p_e + p_cond) / (n * ocv)
    for _ in range(100):
        v, m, p_sw = state(i)
        i_new = (p_e + p_cond + p_sw) / v
        if abs(i_new - i) <= 1e-13 * max(1.0, i_new):
            i = i_new
            break
        i = i_new
    else:
        raise InfeasibleError(f"bus current did not converge at {n} cells, {p_e:.0f} W")
    v, m, p_sw = state(i)
    return i, v, m, p_cond, p_sw


def simulate_mission(
    profile: MissionProfile,
    pack: ReconfigurablePack,
    motor: MotorSpec,
    device: SicDevice,
    cfg: MissionConfig = MissionConfig(),
    fixed_cells: int | None = None,
) -> MissionReport:
    """Time-stepped discharge of ``pack`` over ``profile``.

    Without ``fixed_cells`` the string is re-planned at the start of each
    segment from the present SoC, and a cell (module) is inserted whenever
    sag would push the modulation index above one. With ``fixed_cells`` the
    string length never changes.
    """
    if fixed_cells is not None and not 1 <= fixed_cells <= pack.n_cells_total:
        raise InfeasibleError(
            f"fixed string of {fixed_cells} cells does not fit a {pack.n_cells_total}-cell pack"
        )
    soc = pack.soc
    t = 0.0
    rows: list[StepRow] = []
    summaries: list[SegmentSummary] = []
    ah_per_soc = 3600.0 * pack.cell_capacity
    for seg in profile.segments:
        if fixed_cells is None:
            ((_, n),) = plan_reconfiguration(
                _single(seg), replace(pack, soc=soc), motor, cfg.pwm_method, cfg.margin
            )
        else:
            n = fixed_cells
        n_start = n
        i_m = motor.current_at(seg.torque)
        p_e = seg.mech_power / motor.eta_motor
        v_ph = motor.k_t * seg.speed
        e_del = e_cond = e_sw = e_pack = 0.0
        soc_start = soc
        n_steps = max(1, math.ceil(seg.duration / cfg.dt - 1e-9))
        for k in range(n_steps):
            dt = min(cfg.dt, seg.duration - k * cfg.dt)
            ocv = pack.ocv(soc)
            if p_e == 0 and i_m == 0:
                i, v, p_cond, p_sw = 0.0, max(n, 0) * ocv, 0.0, 0.0
            else:
                n = max(n, pack.cells_per_module)
                while True:
                    i, v, m, p_cond, p_sw = _solve_step(
                        n, ocv, pack.r_cell, p_e, i_m, motor.cos_phi, v_ph, device, cfg
                    )
                    if m <= 1.0:
                        break
                    if fixed_cells is not None or n >= pack.n_cells_total:
                        raise InfeasibleError(
                            f"{seg.phase.value} at t={t:.0f} s: {v:.0f} V bus is too low (m={m:.3f})"
                        )
                    n = pack.round_to_module(n + pack.cells_per_module)
            rows.append(StepRow(t, seg.phase.value, n, v, i, p_cond, p_sw, soc))
            e_del += p_e * dt
            e_cond += p_cond * dt
            e_sw += p_sw * dt
            e_pack += v * i * dt
            # even rotation spreads the string's charge over every cell
            soc -= i * dt * (n / pack.n_cells_total) / ah_per_soc
            t += dt
            if soc < 0:
                raise DepletionError(f"pack depleted during {seg.phase.value} at t={t:.0f} s", t)
        summaries.append(
            SegmentSummary(
                seg.phase.value,
                seg.duration,
                n_start,
                e_del,
                e_cond + e_sw,
                e_cond,
                e_sw,
                e_pack,
                soc_start,
                soc,
            )
        )
    return MissionReport(
        rows,
        summaries,
        pack.soc,
        soc,
        device.part_id,
        notes=["reconfiguration half-bridge losses are not modelled"],
    )


def _single(seg: MissionSegment) -> MissionProfile:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return MissionProfile((seg,))


@dataclass
class ComparisonReport:
    reconfigured: MissionReport
    fixed: MissionReport
    v_fixed: float
    n_fixed: int

    def segment_deltas(self) -> list[dict]:
        out = []
        for a, b in zip(self.fixed.segments, self.reconfigured.segments):
            out.append(
                {
                    "phase": a.phase,
                    "n_fixed": a.n_active,
                    "n_reconfig": b.n_active,
                    "loss_fixed_J": a.energy_lost_inverter,
                    "loss_reconfig_J": b.energy_lost_inverter,
                    "sw_fixed_J": a.energy_sw,
                    "sw_reconfig_J": b.energy_sw,
                    "saved_J": a.energy_lost_inverter - b.energy_lost_inverter,
                    "soc_end_fixed": a.soc_end,
                    "soc_end_reconfig": b.soc_end,
                }
            )
        return out

    @property
    def energy_saved(self) -> float:
        return self.fixed.energy_lost_inverter - self.reconfigured.energy_lost_inverter

    def to_csv(self) -> str:
        rows = self.segment_deltas()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        keys = list(rows[0])
        w.writerow(keys)
        for r in rows:
            w.writerow([v if isinstance(v, (str, int)) else _fmt(v) for v in r.values()])
        w.writerow(
            [
                "total",
                self.n_fixed,
                "",
                _fmt(self.fixed.energy_lost_inverter),
                _fmt(self.reconfigured.energy_lost_inverter),
                "",
                "",
                _fmt(self.energy_saved),
                _fmt(self.fixed.final_soc),
                _fmt(self.reconfigured.final_soc),
            ]
        )
        return buf.getvalue()


def compare_fixed_vs_reconfig(
    profile: MissionProfile,
    pack: ReconfigurablePack,
    motor: MotorSpec,
    device: SicDevice,
    v_fixed: float = 1000.0,
    cfg: MissionConfig = MissionConfig(),
    reconfigure: bool = True,
) -> ComparisonReport:
    """Run the same mission on a fixed string and on a reconfigured one.

    The fixed string holds enough cells to reach ``v_fixed`` at the initial
    SoC. Both runs use the same ``device``. ``reconfigure=False`` runs the
    fixed string twice, which is a no-op comparison.
    """
    n_fixed = pack.round_to_module(_cells_for(v_fixed, pack.ocv()))
    if n_fixed * pack.ocv() < v_fixed * (1 - 1e-9):
        raise InfeasibleError(f"{pack.n_cells_total} cells cannot reach {v_fixed} V")
    fixed = simulate_mission(profile, pack, motor, device, cfg, fixed_cells=n_fixed)
    if reconfigure:
        recon = simulate_mission(profile, pack, motor, device, cfg)
    else:
        recon = simulate_mission(profile, pack, motor, device, cfg, fixed_cells=n_fixed)
    return ComparisonReport(recon, fixed, v_fixed, n_fixed)


def default_mission(
    motor: MotorSpec, durations=(60.0, 120.0, 1200.0, 120.0, 60.0), ratios=(3.3, 2.0, 1.0, 1.2, 3.3)
) -> MissionProfile:
    """Demo mission: rated point at takeoff/landing, propeller law elsewhere.

    ``ratios`` are segment powers relative to cruise; speed scales with the
    cube root of power and torque with its square.
    """
    top = max(ratios)
    segs = []
    for phase, dur, r in zip(STANDARD_ORDER, durations, ratios):
        speed = motor.omega_m * (r / top) ** (1.0 / 3.0)
        segs.append(MissionSegment(phase, dur, motor.p_mech * r / top / speed, speed))
    return MissionProfile(tuple(segs))


# -- files -----------------------------------------------------------------

_SEGMENT_SCHEMA = {"phase": str, "duration_s": float, "torque_Nm": float, "speed_rad_s": float}
_PACK_SCHEMA = {
    "n_cells_total": int,
    "cell_capacity_Ah": float,
    "ocv_full_V": float,
    "ocv_empty_V": float,
    "r_cell_mOhm": float,
    "soc": float,
    "cells_per_module": int,
}


def parse_mission(doc: kvfile.KVDocument) -> MissionProfile:
    segs = []
    for block in doc.blocks:
        if block.name != "segment":
            raise ConfigError(f"{doc.source}:{block.lineno}: unexpected block [{block.name}]")
        vals = kvfile.convert(doc, block, _SEGMENT_SCHEMA)
        try:
            segs.append(
                MissionSegment(vals["phase"], vals["duration_s"], vals["torque_Nm"], vals["speed_rad_s"])
            )
        except ValueError as exc:
            raise ConfigError(f"{doc.source}:{block.lineno}: {exc}") from exc
    if not segs:
        raise ConfigError(f"{doc.source}: mission has no segments")
    return MissionProfile(tuple(segs))


def load_mission(path: str | Path) -> MissionProfile:
    return parse_mission(kvfile.parse_file(path))


def dump_mission(profile: MissionProfile) -> str:
    return kvfile.dump(
        {},
        (
            (
                "segment",
                {
                    "phase": s.phase.value,
                    "duration_s": s.duration,
                    "torque_Nm": s.torque,
                    "speed_rad_s": s.speed,
                },
            )
            for s in profile.segments
        ),
    )


def parse_pack(doc: kvfile.KVDocument) -> ReconfigurablePack:
    if len(doc.blocks) != 1 or doc.blocks[0].name != "pack" or doc.header.values:
        raise ConfigError(f"{doc.source}: expected exactly one [pack] block")
    block = doc.blocks[0]
    vals = kvfile.convert(
        doc, block, _PACK_SCHEMA, set(_PACK_SCHEMA) - {"r_cell_mOhm", "soc", "cells_per_module"}
    )
    try:
        return ReconfigurablePack(
            n_cells_total=vals["n_cells_total"],
            cell_capacity=vals["cell_capacity_Ah"],
            ocv_full=vals["ocv_full_V"],
            ocv_empty=vals["ocv_empty_V"],
            r_cell=vals.get("r_cell_mOhm", 2.0) * 1e-3,
            soc=vals.get("soc", 1.0),
            cells_per_module=vals.get("cells_per_module", 1),
        )
    except ValidationError as exc:
        raise ConfigError(f"{doc.source}: {exc}") from exc


def load_pack(path: str | Path) -> ReconfigurablePack:
    return parse_pack(kvfile.parse_file(path))
