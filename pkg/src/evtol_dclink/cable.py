"""Battery-to-inverter DC cable sizing.

Cables are picked from a discrete catalog by ampacity, so copper area falls
in steps as the bus voltage rises. The insulation model is the single-void
breakdown expression ``t_i = r_c (exp(K V t_v / (alpha r_c)) - 1) + C``
with the spherical-void field enhancement ``K = 3 eps_r / (1 + 2 eps_r)``.

Units follow cable practice: areas in cm^2, radii and thicknesses in cm,
voltages for the insulation model in kV.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kvfile
from .errors import CapacityExceededError, ConfigError, DomainError, ValidationError

RHO_CU = 8.96  # g/cm^3
RHO_XLPE = 0.92  # g/cm^3
C_VALID_BELOW_KV = 20.0


@dataclass(frozen=True)
class CableEntry:
    cross_section_a_cu: float  # cm^2
    ampacity: float  # A, already derated

    def __post_init__(self):
        if not (self.cross_section_a_cu > 0 and self.ampacity > 0):
            raise ValidationError(
                f"cable entry needs positive area and ampacity: {self.cross_section_a_cu}, {self.ampacity}"
            )

    @property
    def a_mm2(self) -> float:
        return self.cross_section_a_cu * 100.0


@dataclass(frozen=True)
class CableCatalog:
    entries: tuple[CableEntry, ...]
    derating_factor: float = 0.75
    _amps: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        if not entries:
            raise ValidationError("empty cable catalog")
        if not 0 < self.derating_factor <= 1:
            raise ValidationError(f"derating_factor must lie in (0, 1], got {self.derating_factor}")
        for prev, cur in zip(entries, entries[1:]):
            if cur.cross_section_a_cu <= prev.cross_section_a_cu:
                raise ValidationError(
                    f"cross-sections must be strictly ascending: {prev.cross_section_a_cu} cm2 "
                    f"followed by {cur.cross_section_a_cu} cm2"
                )
            if cur.ampacity <= prev.ampacity:
                raise ValidationError(
                    f"ampacity must increase with cross-section: {prev.cross_section_a_cu} cm2 "
                    f"({prev.ampacity} A) vs {cur.cross_section_a_cu} cm2 ({cur.ampacity} A)"
                )
        object.__setattr__(self, "_amps", tuple(e.ampacity for e in entries))

    @property
    def largest(self) -> CableEntry:
        return self.entries[-1]

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(areas in cm^2, ampacities in A) as numpy arrays."""
        return (
            np.array([e.cross_section_a_cu for e in self.entries]),
            np.array(self._amps),
        )


@dataclass(frozen=True)
class InsulationParams:
    t_v: float = 50e-4  # void size, cm
    alpha: float = 0.340  # kV
    c_const: float = 0.1  # cm
    eps_r: float = 2.3

    def __post_init__(self):
        for name in ("t_v", "alpha", "c_const", "eps_r"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"insulation parameter {name} must be positive")


def required_dc_current(
    p_mech: float, v_dc: float, eta_motor: float = 1.0, eta_inverter: float = 1.0
) -> float:
    if not v_dc > 0:
        raise DomainError(f"v_dc must be positive, got {v_dc}")
    for name, eta in (("eta_motor", eta_motor), ("eta_inverter", eta_inverter)):
        if not 0 < eta <= 1:
            raise DomainError(f"{name} must lie in (0, 1], got {eta}")
    return p_mech / (eta_motor * eta_inverter * v_dc)


def select_cable(i_req: float, catalog: CableCatalog) -> CableEntry:
    """Smallest catalog entry whose ampacity covers ``i_req``."""
    idx = bisect.bisect_left(catalog._amps, i_req)
    if idx == len(catalog.entries):
        big = catalog.largest
        raise CapacityExceededError(
            f"{i_req:.1f} A exceeds the largest cable ({big.cross_section_a_cu} cm2, {big.ampacity} A)"
        )
    return catalog.entries[idx]


def select_cable_index(i_req, catalog: CableCatalog) -> np.ndarray:
    """Vectorised :func:`select_cable`; ``len(catalog.entries)`` marks overflow."""
    _, amps = catalog.arrays()
    return np.searchsorted(amps, np.asarray(i_req, dtype=float), side="left")


def copper_radius(a_cu: float, fill_factor: float = 1.0) -> float:
    """Radius of a round conductor holding ``a_cu`` cm^2 of copper.

    ``fill_factor`` < 1 accounts for stranding voids.
    """
    if not a_cu > 0:
        raise DomainError(f"copper area must be positive, got {a_cu}")
    if not 0 < fill_factor <= 1:
        raise DomainError(f"fill_factor must lie in (0, 1], got {fill_factor}")
    return math.sqrt(a_cu / (math.pi * fill_factor))


def field_enhancement_k(eps_r: float) -> float:
    if not eps_r >= 1:
        raise DomainError(f"relative permittivity must be >= 1, got {eps_r}")
    return 3.0 * eps_r / (1.0 + 2.0 * eps_r)


def insulation_thickness(r_c: float, v_max: float, params: InsulationParams = InsulationParams()) -> float:
    """Insulation thickness in cm for peak voltage ``v_max`` in kV."""
    if not r_c > 0:
        raise DomainError(f"conductor radius must be positive, got {r_c}")
    if v_max < 0:
        raise DomainError(f"v_max must be >= 0, got {v_max}")
    if v_max >= C_VALID_BELOW_KV:
        raise DomainError(
            f"insulation model with C = {params.c_const} cm is valid below 20 kV, got {v_max} kV"
        )
    k = field_enhancement_k(params.eps_r)
    # expm1 keeps the small-exponent regime exact
    return r_c * math.expm1(k * v_max * params.t_v / (params.alpha * r_c)) + params.c_const


def cable_mass_per_length(
    entry: CableEntry,
    r_c: float | None = None,
    t_i: float = 0.0,
    rho_cu: float = RHO_CU,
    rho_ins: float = RHO_XLPE,
) -> float:
    """Copper plus insulation mass in kg/m; ``r_c`` defaults to the solid-conductor radius."""
    if r_c is None:
        r_c = copper_radius(entry.cross_section_a_cu)
    if not (r_c > 0 and t_i >= 0 and rho_cu > 0 and rho_ins >= 0):
        raise DomainError("radius and copper density must be positive; thickness and rho_ins non-negative")
    copper = rho_cu * math.pi * r_c**2
    insulation = rho_ins * math.pi * ((r_c + t_i) ** 2 - r_c**2)
    return 100.0 * (copper + insulation) / 1000.0


@dataclass(frozen=True)
class CableSizing:
    v_dc: float
    i_dc: float
    entry: CableEntry
    r_c: float
    t_i: float


def size_cable(
    p_dc: float,
    v_dc: float,
    catalog: CableCatalog,
    params: InsulationParams = InsulationParams(),
    eta_motor: float = 1.0,
    eta_inverter: float = 1.0,
    fill_factor: float = 1.0,
) -> CableSizing:
    """Current, catalog size, copper radius and insulation at one bus voltage."""
    i_dc = required_dc_current(p_dc, v_dc, eta_motor, eta_inverter)
    entry = select_cable(i_dc, catalog)
    r_c = copper_radius(entry.cross_section_a_cu, fill_factor)
    return CableSizing(v_dc, i_dc, entry, r_c, insulation_thickness(r_c, v_dc / 1000.0, params))


def voltage_study(
    p_dc: float,
    voltages: Sequence[float],
    catalog: CableCatalog,
    params: InsulationParams = InsulationParams(),
    **kwargs,
) -> list[CableSizing]:
    return [size_cable(p_dc, v, catalog, params, **kwargs) for v in voltages]


# -- files -----------------------------------------------------------------

_CABLE_SCHEMA = {"a_cu_cm2": float, "ampacity_A": float}
_INSULATION_SCHEMA = {"t_v_um": float, "alpha_kV": float, "c_cm": float, "eps_r": float}


def parse_cable_catalog(doc: kvfile.KVDocument) -> CableCatalog:
    header = kvfile.convert(doc, doc.header, {"derating_factor": float}, required=())
    entries = []
    for block in doc.blocks:
        if block.name != "cable":
            raise ConfigError(f"{doc.source}:{block.lineno}: unexpected block [{block.name}]")
        vals = kvfile.convert(doc, block, _CABLE_SCHEMA)
        try:
            entries.append(CableEntry(vals["a_cu_cm2"], vals["ampacity_A"]))
        except ValidationError as exc:
            raise ConfigError(f"{doc.source}:{block.lineno}: {exc}") from exc
    if not entries:
        raise ConfigError(f"{doc.source}: empty cable catalog")
    try:
        return CableCatalog(tuple(entries), header.get("derating_factor", 0.75))
    except ValidationError as exc:
        raise ConfigError(f"{doc.source}: {exc}") from exc


def load_cable_catalog(path: str | Path) -> CableCatalog:
    return parse_cable_catalog(kvfile.parse_file(path))


def dump_cable_catalog(catalog: CableCatalog) -> str:
    return kvfile.dump(
        {"derating_factor": catalog.derating_factor},
        (("cable", {"a_cu_cm2": e.cross_section_a_cu, "ampacity_A": e.ampacity}) for e in catalog.entries),
    )


def insulation_from_mapping(values: dict[str, float]) -> InsulationParams:
    """Build parameters from ``t_v_um, alpha_kV, c_cm, eps_r`` keys (all optional)."""
    unknown = set(values) - set(_INSULATION_SCHEMA)
    if unknown:
        raise ConfigError(f"unknown insulation keys: {', '.join(sorted(unknown))}")
    base = InsulationParams()
    return InsulationParams(
        t_v=values.get("t_v_um", base.t_v * 1e4) * 1e-4,
        alpha=values.get("alpha_kV", base.alpha),
        c_const=values.get("c_cm", base.c_const),
        eps_r=values.get("eps_r", base.eps_r),
    )


def load_insulation(path: str | Path) -> InsulationParams:
    doc = kvfile.parse_file(path)
    blocks = doc.blocks_named("insulation")
    if len(blocks) != 1 or len(doc.blocks) != 1:
        raise ConfigError(f"{doc.source}: expected exactly one [insulation] block")
    vals = kvfile.convert(doc, blocks[0], _INSULATION_SCHEMA, required=())
    try:
        return insulation_from_mapping(vals)
    except ValidationError as exc:
        raise ConfigError(f"{doc.source}: {exc}") from exc
