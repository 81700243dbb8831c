"""DC-link voltage selection for eVTOL propulsion drives.

Modules:

* :mod:`.device_loss` closed-form SiC inverter conduction and switching loss
* :mod:`.cable` catalog cable sizing and insulation thickness
* :mod:`.optimizer` weighted voltage sweep and device range map
* :mod:`.mission` reconfigurable battery pack over a flight mission
* :mod:`.thermal` loss extraction from case temperatures
* :mod:`.cli` command-line front end
"""

from .cable import CableCatalog, CableEntry, InsulationParams, insulation_thickness, select_cable, size_cable
from .catalogs import load_catalogs
from .device_loss import (
    DeviceCatalog,
    OperatingPoint,
    SicDevice,
    conduction_loss_per_device,
    inverter_total_loss,
    switch_avg_current,
    switch_rms_current,
    switching_loss_per_device,
)
from .errors import (
    CapacityExceededError,
    ConfigError,
    DepletionError,
    DomainError,
    EvtolError,
    FitError,
    InfeasibleError,
    MeasurementError,
    ValidationError,
)
from .mission import (
    MissionConfig,
    MissionProfile,
    MissionSegment,
    Phase,
    ReconfigurablePack,
    compare_fixed_vs_reconfig,
    plan_reconfiguration,
    simulate_mission,
)
from .optimizer import MotorSpec, Normalization, PwmMethod, SweepConfig, objective, optimize, sweep
from .reproduce import reproduce_paper
from .thermal import (
    ConductionCalibrationTest,
    ThermalMeasurement,
    ThermalModel,
    estimate_rca,
    fit_kv,
    separate_losses,
    total_loss_from_temperature,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
