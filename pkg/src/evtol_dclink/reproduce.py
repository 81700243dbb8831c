"""End-to-end reproduction of the reference design study.

:func:`reproduce_paper` runs the weighted voltage sweeps, the 89 kW cable
study, the thermal extraction of the bench data and the mission
comparison, writes one CSV per study and an acceptance summary, and
returns the list of :class:`Check` results. Output is byte-deterministic.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .cable import cable_mass_per_length, select_cable, size_cable
from .catalogs import Catalogs, default_path, load_catalogs
from .device_loss import SicDevice, switch_avg_current_array, switch_rms_current_array
from .mission import compare_fixed_vs_reconfig, plan_reconfiguration
from .optimizer import (
    Normalization,
    SweepConfig,
    device_boundaries,
    optimize,
    summarize,
    summary_to_csv,
    sweep,
    sweep_to_csv,
)
from .thermal import (
    ThermalMeasurement,
    ThermalModel,
    estimate_rca,
    extract_losses,
    fit_kv,
    load_calibration,
    load_measurements,
    losses_to_csv,
    predict_switching_loss,
    rca_per_test,
)

CABLE_STUDY_POWER_W = 89e3
CABLE_STUDY_VOLTAGES = (500.0, 1000.0)
R_CA_REFERENCE = 3.41
P_COND_REFERENCE = 0.800
KV_SET = (1.05, 1.4, 2.0, 3.0)


@dataclass(frozen=True)
class Check:
    criterion: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0  # wall time, reported but never written to files


# -- individual studies ----------------------------------------------------


def check_currents(n_points: int = 64, seed: int = 1) -> Check:
    """Closed-form switch currents against a periodic quadrature of the waveforms."""
    rng = np.random.default_rng(seed)
    theta = np.linspace(0.0, 2.0 * math.pi, 4096, endpoint=False)
    worst = 0.0
    start = time.perf_counter()
    for _ in range(n_points):
        i_m = rng.uniform(1.0, 400.0)
        m = rng.uniform(0.05, 1.0)
        phi = rng.uniform(0.0, math.pi / 2)
        # uniform-grid mean is exact for trigonometric polynomials of this order
        duty = 0.5 + 0.5 * m * np.sin(theta + phi)
        i = i_m * np.sin(theta)
        rms = math.sqrt(np.mean(i * i * duty))
        avg = np.mean(i * duty)
        worst = max(
            worst,
            abs(switch_rms_current_array(i_m) / rms - 1),
            abs(switch_avg_current_array(i_m, m, math.cos(phi)) / avg - 1),
        )
    elapsed = time.perf_counter() - start
    return Check(
        1,
        "switch currents vs quadrature",
        worst < 1e-6 and elapsed < 1.0,
        f"max rel err {worst:.2e} over {n_points} points",
        elapsed,
    )


def thermal_study(
    cat_dir_calib: Path, cat_dir_runs: Path, reference: Path
) -> tuple[list[Check], dict[str, str]]:
    calib = load_calibration(cat_dir_calib)
    per_test = rca_per_test(calib)
    r_ca = estimate_rca(calib)
    ok2 = all(abs(a - b) <= 0.01 for a, b in zip(per_test, (3.36, 3.46))) and abs(r_ca - 3.41) <= 0.01
    c2 = Check(
        2,
        "case-to-ambient resistance",
        ok2,
        f"per test {', '.join(f'{x:.3f}' for x in per_test)}; mean {r_ca:.3f} C/W",
    )

    runs = load_measurements(cat_dir_runs)
    model = ThermalModel(R_CA_REFERENCE, calib[0].r_jc)
    rows = extract_losses(runs, model, p_cond_tot=P_COND_REFERENCE)
    ref = _read_reference(reference)
    worst = 0.0
    for r in rows:
        exp = ref[r.v_dc]
        got = (r.p_loss_tot, r.p_sw_tot, r.p_sw_mos, r.p_cond_mos)
        worst = max(worst, *(abs(g - e) for g, e in zip(got, exp)))
    c3 = Check(
        3,
        "bench loss extraction",
        worst <= 0.01 and len(rows) == len(ref),
        f"{4 * len(rows)} cells, max abs err {worst:.4f} W",
    )

    # the regression uses the current-derived conduction loss
    rds = calib[0].r_ds_on
    measured = extract_losses(runs, model, r_ds_on=rds)
    probe = SicDevice("bench", 1200.0, 50.0, rds, 0.0, 400.0)
    fit = fit_kv(runs, [r.p_sw_mos for r in measured], probe)
    pred = [predict_switching_loss(m, fit, probe.v_ref) for m in runs]
    rel = max(abs(p / r.p_sw_mos - 1) for p, r in zip(pred, measured))
    synth_err = _synthetic_fit_error()
    ok9 = math.isfinite(fit.k_v) and rel <= 0.25 and synth_err <= 1e-9
    c9 = Check(
        9,
        "switching-law fit",
        ok9,
        f"bench k_v {fit.k_v:.3f}, worst row {100 * rel:.1f}%; synthetic k_v error {synth_err:.1e}",
    )

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["test", "p_cond_W", "t_case_C", "t_amb_C", "r_ca_C_W"])
    for k, (t, r) in enumerate(zip(calib, per_test), start=1):
        w.writerow([k, f"{(t.t_case - t.t_amb) / r:.3f}", f"{t.t_case:g}", f"{t.t_amb:g}", f"{r:.3f}"])
    w.writerow(["mean", "", "", "", f"{r_ca:.3f}"])
    fit_csv = io.StringIO()
    fw = csv.writer(fit_csv, lineterminator="\n")
    fw.writerow(["k_v", "scale_W_per_A", "rms_log_residual", "v_ref_V"])
    fw.writerow([f"{fit.k_v:.6f}", f"{fit.scale:.6f}", f"{fit.rms_residual:.6f}", f"{probe.v_ref:g}"])
    files = {
        "thermal_calibration.csv": buf.getvalue(),
        "thermal_extraction.csv": losses_to_csv(rows),
        "thermal_fit.csv": losses_to_csv(measured, pred) + "\n" + fit_csv.getvalue(),
    }
    return [c2, c3, c9], files


def _read_reference(path: Path) -> dict[float, tuple[float, ...]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return {
            float(r["v_dc_V"]): (
                float(r["p_loss_tot_W"]),
                float(r["p_sw_tot_W"]),
                float(r["p_sw_mos_W"]),
                float(r["p_cond_mos_W"]),
            )
            for r in csv.DictReader(fh)
        }


def _synthetic_fit_error(k_v: float = 1.4) -> float:
    dev = SicDevice("synthetic", 1200.0, 50.0, 0.03, 100e-6, 600.0, k_v)
    runs = [
        ThermalMeasurement(v, 200.0 / v, 30.0, 22.0, 20e3, 4.0, 0.8) for v in (200.0, 300.0, 400.0, 500.0)
    ]
    p = [20e3 * dev.e_on_plus_e_off * (r.v_dc / dev.v_ref) ** k_v * r.m * r.i_m * r.cos_phi / 4 for r in runs]
    return abs(fit_kv(runs, p, dev).k_v - k_v)


def cable_study(cat: Catalogs) -> tuple[list[Check], str]:
    sizes = [size_cable(CABLE_STUDY_POWER_W, v, cat.cables, cat.insulation) for v in CABLE_STUDY_VOLTAGES]
    lo, hi = sizes
    t_ratio = hi.t_i / lo.t_i
    r_red = 1 - hi.r_c / lo.r_c
    vol_red = 1 - hi.entry.cross_section_a_cu / lo.entry.cross_section_a_cu
    c4 = Check(
        4, "insulation thickness ratio", 1.08 <= t_ratio <= 1.12, f"t_i(1 kV)/t_i(0.5 kV) = {t_ratio:.4f}"
    )
    c5 = Check(
        5,
        "copper radius and volume",
        0.38 <= r_red <= 0.48 and 0.63 <= vol_red <= 0.73,
        f"radius -{100 * r_red:.1f}%, volume -{100 * vol_red:.1f}%",
    )
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["v_dc_V", "i_dc_A", "a_cu_cm2", "ampacity_A", "r_c_cm", "t_i_cm", "mass_kg_per_m"])
    for s in sizes:
        w.writerow(
            [
                f"{s.v_dc:g}",
                f"{s.i_dc:.2f}",
                f"{s.entry.cross_section_a_cu:g}",
                f"{s.entry.ampacity:g}",
                f"{s.r_c:.4f}",
                f"{s.t_i:.4f}",
                f"{cable_mass_per_length(s.entry, s.r_c, s.t_i):.4f}",
            ]
        )
    return [c4, c5], buf.getvalue()


def optimization_study(cat: Catalogs) -> tuple[Check, dict[str, str]]:
    result = sweep(cat.motor, SweepConfig(), cat.devices, cat.ranges, cat.cables, cat.insulation)
    low, high = summarize(result, (0.2, 0.8))
    ratio = low.a_cu / high.a_cu
    dp = high.p_loss - low.p_loss
    ok = (
        abs(low.v_dc_opt - 600.0) <= 60.0
        and 840.0 <= high.v_dc_opt <= 1000.0
        and math.isclose(high.a_cu, 0.1)
        and math.isclose(ratio, 2.5)
        and abs(dp) < 0.1 * min(low.p_loss, high.p_loss)
    )
    detail = (
        f"beta 0.2 -> {low.v_dc_opt:g} V ({low.a_cu:g} cm2, {low.p_loss:.0f} W); "
        f"beta 0.8 -> {high.v_dc_opt:g} V ({high.a_cu:g} cm2, {high.p_loss:.0f} W); "
        f"area ratio {ratio:.2f}; loss delta {dp:.1f} W"
    )
    files = {
        "optimization_summary.csv": summary_to_csv([low, high]),
        "sweep_beta_0.2.csv": sweep_to_csv(result, 0.2),
        "sweep_beta_0.8.csv": sweep_to_csv(result, 0.8),
    }
    return Check(6, "optimal bus voltage", ok, detail), files


def property_suite(cat: Catalogs, n_cases: int = 1000, seed: int = 7) -> Check:
    """Randomised optimizer and cable properties."""
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    failures: list[str] = []
    _, amps = cat.cables.arrays()
    for k in range(n_cases):
        motor = replace(cat.motor, i_m=cat.motor.i_m * rng.uniform(0.7, 1.3))
        cfg = SweepConfig(f_sw=rng.uniform(5e3, 50e3))
        result = sweep(motor, cfg, cat.devices, cat.ranges, cat.cables, cat.insulation)
        b1, b2 = np.sort(rng.uniform(0.02, 0.98, 2))
        p1, p2 = optimize(result, b1), optimize(result, b2)
        if p2.a_cu > p1.a_cu + 1e-12 or p2.p_loss < p1.p_loss - 1e-9:
            failures.append(f"case {k}: beta monotonicity")
        c = rng.uniform(0.01, 100.0)
        f = result.scores(b1)
        ok = result.feasible
        if np.argmin(np.where(ok, f, np.inf)) != np.argmin(np.where(ok, c * f, np.inf)):
            failures.append(f"case {k}: scale invariance")
        scaled = replace(result, a_mm2=result.a_mm2 * c)
        g1 = result.scores(b1, Normalization.MAX_OVER_SWEEP)
        g2 = scaled.scores(b1, Normalization.MAX_OVER_SWEEP)
        if not np.allclose(g1[ok], g2[ok], rtol=1e-12, atol=0):
            failures.append(f"case {k}: normalised unit invariance")
        edges = {(a, b) for a, b, _ in device_boundaries(result)}
        if not {(500.0, 510.0), (1000.0, 1010.0)} <= edges:
            failures.append(f"case {k}: missing device discontinuity")
        i1, i2 = np.sort(rng.uniform(0.0, amps[-1], 2))
        if select_cable(i1, cat.cables).cross_section_a_cu > select_cable(i2, cat.cables).cross_section_a_cu:
            failures.append(f"case {k}: cable monotonicity")
    elapsed = time.perf_counter() - start
    detail = f"{n_cases} cases"
    if failures:
        detail += f"; {len(failures)} failures, first: {failures[0]}"
    return Check(7, "randomised properties", not failures and elapsed < 10.0, detail, elapsed)


def mission_study(cat: Catalogs) -> tuple[Check, str]:
    plan = [n for _, n in plan_reconfiguration(cat.mission, cat.pack, cat.motor)]
    ordered = plan[0] == plan[-1] >= plan[1] >= plan[2]
    base = cat.devices[cat.ranges.device_for(1000.0)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k_v", "n_fixed", "loss_fixed_J", "loss_reconfig_J", "saved_J", "max_balance_residual"])
    ok = ordered
    worst_res = 0.0
    for k_v in KV_SET:
        rep = compare_fixed_vs_reconfig(cat.mission, cat.pack, cat.motor, replace(base, k_v=k_v))
        res = max(s.balance_residual for s in rep.fixed.segments + rep.reconfigured.segments)
        worst_res = max(worst_res, res)
        ok = ok and rep.energy_saved > 0 and res < 1e-3
        w.writerow(
            [
                f"{k_v:g}",
                rep.n_fixed,
                f"{rep.fixed.energy_lost_inverter:.1f}",
                f"{rep.reconfigured.energy_lost_inverter:.1f}",
                f"{rep.energy_saved:.1f}",
                f"{res:.2e}",
            ]
        )
    detail = f"cells per segment {plan}; max balance residual {worst_res:.1e}"
    return Check(8, "mission reconfiguration", ok, detail), buf.getvalue()


# -- driver ----------------------------------------------------------------


def reproduce_paper(out_dir: str | Path, n_property_cases: int = 1000) -> list[Check]:
    """Run every study, write the CSVs into ``out_dir`` and return the checks."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cat = load_catalogs()
    files: dict[str, str] = {}
    checks: list[Check] = [check_currents()]

    runs = default_path("runs")
    cs, fs = thermal_study(default_path("calib"), runs, runs.with_name("bench_reference.csv"))
    checks += cs
    files.update(fs)

    cs, files["cable_study.csv"] = cable_study(cat)
    checks += cs

    c, fs = optimization_study(cat)
    checks.append(c)
    files.update(fs)

    c, files["mission_comparison.csv"] = mission_study(cat)
    checks.append(c)

    checks.append(property_suite(cat, n_property_cases))
    checks.sort(key=lambda c: c.criterion)

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["criterion", "name", "status", "detail"])
    for c in checks:
        w.writerow([c.criterion, c.name, "PASS" if c.passed else "FAIL", c.detail])
    files["acceptance_summary.csv"] = buf.getvalue()
    for name in sorted(files):
        (out / name).write_text(files[name], encoding="utf-8")
    return checks
