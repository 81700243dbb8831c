"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 infeasible problem,
4 acceptance failure. Reports go to ``--out`` or, when omitted, stdout.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .cable import InsulationParams, insulation_from_mapping, load_cable_catalog, load_insulation
from .catalogs import ENV_DIR, default_path
from .device_loss import SicDevice, load_device_catalog
from .errors import ConfigError, EvtolError, InfeasibleError, MeasurementError, ValidationError
from .mission import MissionConfig, compare_fixed_vs_reconfig, load_mission, load_pack, simulate_mission
from .optimizer import (
    Normalization,
    PwmMethod,
    SweepConfig,
    load_motor,
    load_range_map,
    optimize,
    summarize,
    summary_to_csv,
    sweep,
    sweep_to_csv,
)
from .reproduce import reproduce_paper
from .thermal import (
    ThermalModel,
    estimate_rca,
    extract_losses,
    fit_kv,
    load_calibration,
    load_measurements,
    losses_to_csv,
    predict_switching_loss,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_ACCEPTANCE = 4


# -- argument groups -------------------------------------------------------


def _add_catalog_args(p: argparse.ArgumentParser, kinds: tuple[str, ...]) -> None:
    helps = {
        "motor": "motor file",
        "devices": "SiC device catalog",
        "cables": "cable catalog",
        "ranges": "voltage-range to device map",
        "insulation": "insulation parameter file",
        "mission": "mission profile",
        "pack": "battery pack description",
    }
    for kind in kinds:
        p.add_argument(f"--{kind}", type=Path, default=None, help=f"{helps[kind]} (default: shipped file)")


def _add_sweep_args(p: argparse.ArgumentParser) -> None:
    d = SweepConfig()
    _add_catalog_args(p, ("motor", "devices", "cables", "ranges", "insulation"))
    p.add_argument(
        "--beta", type=float, default=d.beta, help=f"cable-area weight in (0, 1) (default {d.beta})"
    )
    p.add_argument("--vmin", type=float, default=d.v_min, help=f"lowest bus voltage, V (default {d.v_min:g})")
    p.add_argument(
        "--vmax", type=float, default=d.v_max, help=f"highest bus voltage, V (default {d.v_max:g})"
    )
    p.add_argument("--vstep", type=float, default=d.v_step, help=f"grid step, V (default {d.v_step:g})")
    p.add_argument("--fsw", type=float, default=d.f_sw, help=f"switching frequency, Hz (default {d.f_sw:g})")
    p.add_argument(
        "--pwm", choices=[m.value for m in PwmMethod], default=d.pwm_method.value, help="modulation scheme"
    )
    p.add_argument(
        "--normalization",
        choices=[n.value for n in Normalization],
        default=d.normalization.value,
        help="objective term scaling (default none)",
    )
    p.add_argument(
        "--v-norm", type=float, default=d.v_norm, help="reference voltage for reference_voltage scaling"
    )
    p.add_argument(
        "--eta-inverter",
        type=float,
        default=d.eta_inverter_assumed,
        help="inverter efficiency for cable current",
    )
    p.add_argument("--t-v-um", type=float, default=None, help="insulation void size, um (overrides file)")
    p.add_argument("--alpha-kv", type=float, default=None, help="insulation alpha, kV (overrides file)")
    p.add_argument("--c-cm", type=float, default=None, help="insulation constant C, cm (overrides file)")
    p.add_argument(
        "--eps-r", type=float, default=None, help="insulation relative permittivity (overrides file)"
    )
    p.add_argument("--out", type=Path, default=None, help="output CSV (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evtol-dclink",
        description="DC-link voltage selection, mission reconfiguration and thermal loss extraction.",
        epilog=f"Set {ENV_DIR} to replace the directory of default input files.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("optimize", help="sweep the bus voltage and report the optimum")
    _add_sweep_args(p)
    p.add_argument("--summary", action="store_true", help="print the optimum for beta 0.2 and 0.8")

    p = sub.add_parser("sweep", help="write the per-voltage sweep table")
    _add_sweep_args(p)

    p = sub.add_parser("mission-sim", help="simulate a mission on a reconfigurable pack")
    _add_catalog_args(p, ("mission", "pack", "motor", "devices", "ranges"))
    p.add_argument(
        "--device", default=None, help="part_id to use (default: range-map device at the fixed bus voltage)"
    )
    p.add_argument("--fsw", type=float, default=MissionConfig().f_sw, help="switching frequency, Hz")
    p.add_argument("--pwm", choices=[m.value for m in PwmMethod], default=PwmMethod.SINE_TRIANGLE.value)
    p.add_argument("--margin", type=float, default=MissionConfig().margin, help="voltage headroom fraction")
    p.add_argument("--dt", type=float, default=MissionConfig().dt, help="time step, s")
    p.add_argument(
        "--compare-fixed", type=float, default=None, metavar="VOLTS", help="also run a fixed bus at VOLTS"
    )
    p.add_argument("--comparison-out", type=Path, default=None, help="per-segment comparison CSV")
    p.add_argument("--out", type=Path, default=None, help="time-series CSV (default stdout)")

    p = sub.add_parser("thermal-extract", help="split bench losses from case temperatures")
    p.add_argument(
        "--calib", type=Path, default=None, help="DC calibration CSV (default: shipped bench data)"
    )
    p.add_argument("--runs", type=Path, default=None, help="inverter run CSV (default: shipped bench data)")
    p.add_argument(
        "--rdson", type=float, default=None, help="on-resistance, ohm (overrides the calibration file)"
    )
    p.add_argument("--rjc", type=float, default=None, help="junction-to-case resistance, C/W")
    p.add_argument(
        "--rca", type=float, default=None, help="skip calibration and use this case-to-ambient value"
    )
    p.add_argument("--p-cond", type=float, default=None, help="pin the module conduction loss, W")
    p.add_argument("--v-ref", type=float, default=400.0, help="reference voltage of the fitted law, V")
    p.add_argument("--out", type=Path, default=None, help="output CSV (default stdout)")

    p = sub.add_parser("reproduce-paper", help="run every reference study and the acceptance checks")
    p.add_argument("--out-dir", type=Path, default=Path("reproduction"), help="directory for the CSVs")
    p.add_argument("--property-cases", type=int, default=1000, help="randomised property cases")
    return parser


# -- commands --------------------------------------------------------------


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _pick(path: Path | None, kind: str) -> Path:
    return path if path is not None else default_path(kind)


def _insulation(args) -> InsulationParams:
    base = load_insulation(_pick(args.insulation, "insulation"))
    values = {"t_v_um": base.t_v * 1e4, "alpha_kV": base.alpha, "c_cm": base.c_const, "eps_r": base.eps_r}
    for flag, key in (("t_v_um", "t_v_um"), ("alpha_kv", "alpha_kV"), ("c_cm", "c_cm"), ("eps_r", "eps_r")):
        if getattr(args, flag) is not None:
            values[key] = getattr(args, flag)
    return insulation_from_mapping(values)


def _run_sweep(args):
    cfg = SweepConfig(
        v_min=args.vmin,
        v_max=args.vmax,
        v_step=args.vstep,
        beta=args.beta,
        f_sw=args.fsw,
        eta_inverter_assumed=args.eta_inverter,
        pwm_method=args.pwm,
        normalization=args.normalization,
        v_norm=args.v_norm,
    )
    return sweep(
        load_motor(_pick(args.motor, "motor")),
        cfg,
        load_device_catalog(_pick(args.devices, "devices")),
        load_range_map(_pick(args.ranges, "ranges")),
        load_cable_catalog(_pick(args.cables, "cables")),
        _insulation(args),
    )


def cmd_sweep(args) -> int:
    _emit(sweep_to_csv(_run_sweep(args)), args.out)
    return EXIT_OK


def cmd_optimize(args) -> int:
    result = _run_sweep(args)
    best = optimize(result)
    if args.out is not None:
        args.out.write_text(sweep_to_csv(result), encoding="utf-8")
    print(
        f"optimum: {best.v_dc:g} V, {best.device_id}, loss {best.p_loss:.1f} W, "
        f"cable {best.a_cu:g} cm2 (r_c {best.r_c:.4f} cm, t_i {best.t_i:.4f} cm), f = {best.f_obj:.6g}"
    )
    if args.summary:
        sys.stdout.write(summary_to_csv(summarize(result, (0.2, 0.8))))
    return EXIT_OK


def cmd_mission(args) -> int:
    profile = load_mission(_pick(args.mission, "mission"))
    pack = load_pack(_pick(args.pack, "pack"))
    motor = load_motor(_pick(args.motor, "motor"))
    devices = load_device_catalog(_pick(args.devices, "devices"))
    if args.device is not None:
        if args.device not in devices:
            raise ConfigError(f"unknown device {args.device!r}; known: {', '.join(sorted(devices))}")
        device = devices[args.device]
    else:
        ranges = load_range_map(_pick(args.ranges, "ranges"))
        ranges.check_against(devices)
        v = args.compare_fixed if args.compare_fixed is not None else ranges.v_max
        device = devices[ranges.device_for(min(max(v, ranges.v_min), ranges.v_max))]
    cfg = MissionConfig(f_sw=args.fsw, pwm_method=args.pwm, margin=args.margin, dt=args.dt)
    if args.compare_fixed is None:
        report = simulate_mission(profile, pack, motor, device, cfg)
    else:
        comp = compare_fixed_vs_reconfig(profile, pack, motor, device, args.compare_fixed, cfg)
        report = comp.reconfigured
        if args.comparison_out is not None:
            args.comparison_out.write_text(comp.to_csv(), encoding="utf-8")
        print(
            f"inverter loss: fixed {comp.fixed.energy_lost_inverter / 1e3:.1f} kJ ({comp.n_fixed} cells), "
            f"reconfigured {comp.reconfigured.energy_lost_inverter / 1e3:.1f} kJ, "
            f"saved {comp.energy_saved / 1e3:.1f} kJ",
            file=sys.stderr,
        )
    _emit(report.to_csv(), args.out)
    return EXIT_OK


def cmd_thermal(args) -> int:
    runs = load_measurements(_pick(args.runs, "runs"))
    if args.rca is not None:
        if args.rdson is None and args.p_cond is None:
            raise ConfigError("--rca without calibration needs --rdson or --p-cond")
        r_ca, rds, rjc = args.rca, args.rdson, args.rjc or 0.0
    else:
        calib = load_calibration(_pick(args.calib, "calib"), args.rdson, args.rjc)
        r_ca, rds, rjc = estimate_rca(calib), calib[0].r_ds_on, calib[0].r_jc
    model = ThermalModel(r_ca, rjc)
    if args.p_cond is not None:
        rows = extract_losses(runs, model, p_cond_tot=args.p_cond)
    else:
        rows = extract_losses(runs, model, r_ds_on=rds)
    probe = SicDevice("bench", 1.0e4, 1.0, rds or 1.0, 0.0, args.v_ref)
    fit = fit_kv(runs, [r.p_sw_mos for r in rows], probe)
    pred = [predict_switching_loss(m, fit, args.v_ref) for m in runs]
    _emit(losses_to_csv(rows, pred), args.out)
    print(
        f"r_ca {r_ca:.3f} C/W; fitted k_v {fit.k_v:.4f}, scale {fit.scale:.4g} W/A at {args.v_ref:g} V, "
        f"rms log residual {fit.rms_residual:.4f}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_reproduce(args) -> int:
    checks = reproduce_paper(args.out_dir, args.property_cases)
    for c in checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.criterion}. {c.name}: {c.detail}")
    failed = [c for c in checks if not c.passed]
    if failed:
        print(f"failing criteria: {', '.join(str(c.criterion) for c in failed)}", file=sys.stderr)
        return EXIT_ACCEPTANCE
    return EXIT_OK


COMMANDS = {
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "mission-sim": cmd_mission,
    "thermal-extract": cmd_thermal,
    "reproduce-paper": cmd_reproduce,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ValidationError, OSError) as exc:
        # measurement inconsistencies are input problems too
        kind = "measurement" if isinstance(exc, MeasurementError) else "config"
        print(f"{kind} error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except EvtolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
