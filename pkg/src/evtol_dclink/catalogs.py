"""Loading of the shipped (or user-supplied) catalog and config files."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from .cable import CableCatalog, InsulationParams, load_cable_catalog, load_insulation
from .device_loss import DeviceCatalog, load_device_catalog
from .mission import MissionProfile, ReconfigurablePack, load_mission, load_pack
from .optimizer import DeviceRangeMap, MotorSpec, load_motor, load_range_map

ENV_DIR = "EVTOL_OPT_CATALOG_DIR"
DEFAULT_FILES = {
    "devices": "devices.txt",
    "cables": "cables.txt",
    "motor": "motor.txt",
    "mission": "mission.txt",
    "insulation": "insulation.txt",
    "ranges": "ranges.txt",
    "pack": "pack.txt",
    "calib": "dc_calibration.csv",
    "runs": "bench_runs.csv",
}


def data_dir() -> Path:
    """Directory holding the default files; ``$EVTOL_OPT_CATALOG_DIR`` wins."""
    override = os.environ.get(ENV_DIR)
    if override:
        return Path(override)
    return Path(__file__).with_name("data")


def default_path(kind: str) -> Path:
    return data_dir() / DEFAULT_FILES[kind]


@dataclass(frozen=True)
class Catalogs:
    devices: DeviceCatalog
    cables: CableCatalog
    motor: MotorSpec
    mission: MissionProfile
    insulation: InsulationParams
    ranges: DeviceRangeMap
    pack: ReconfigurablePack


def load_catalogs(**paths: str | Path | None) -> Catalogs:
    """Load and validate every input; missing paths fall back to the defaults.

    Keyword names match :data:`DEFAULT_FILES`. Parse problems surface as
    :class:`~evtol_dclink.errors.ConfigError` naming the file and line.
    """
    unknown = set(paths) - set(DEFAULT_FILES)
    if unknown:
        raise TypeError(f"unknown catalog kinds: {', '.join(sorted(unknown))}")

    def pick(kind):
        p = paths.get(kind)
        return Path(p) if p is not None else default_path(kind)

    devices = load_device_catalog(pick("devices"))
    ranges = load_range_map(pick("ranges"))
    ranges.check_against(devices)
    return Catalogs(
        devices=devices,
        cables=load_cable_catalog(pick("cables")),
        motor=load_motor(pick("motor")),
        mission=load_mission(pick("mission")),
        insulation=load_insulation(pick("insulation")),
        ranges=ranges,
        pack=load_pack(pick("pack")),
    )
