"""Experiment runner: quasi-random DOE sweeps, deviation statistics,
convergence-time measurement and per-update latency benchmarks.

`doe run` writes one CSV of per-run rows, a JSON summary, histogram bins
and rendered figures into the output directory; identical specs produce
byte-identical CSV output.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import Confidence, LandingSession, Stage, TakeoffSession
from .forces import AtmosphereParams, RunwayParams
from .presets import aircraft_preset
from .simulator import Scenario, ScenarioInfeasible, run_scenario
from .sobol import scale_to_bounds, sobol_sequence
from .statics import (IntegratorConfig, LandingConfig, NonConvergence,
                      TakeoffConfig, compute_asdr, compute_ldr)

CONVERGENCE_BAND = 0.02

DEFAULT_TAKEOFF_DIMENSIONS = [
    ("aircraft.mass", 58000.0, 78000.0),
    ("runway.headwind", -5.0, 10.0),
    ("runway.slope", -0.02, 0.02),
    ("atmosphere.air_density", 1.05, 1.30),
    ("v1", 55.0, 75.0),
]
DEFAULT_LANDING_DIMENSIONS = [
    ("aircraft.mass", 55000.0, 66000.0),
    ("runway.headwind", 0.0, 5.0),
    ("runway.slope", -0.02, 0.02),
    ("atmosphere.air_density", 1.05, 1.30),
    ("vref", 60.0, 75.0),
    ("autobrake_decel", 1.2, 3.0),
]
DOE_RUNWAY_LENGTH = 4000.0  # long enough that DOE points stay feasible


class NeverConverged(Exception):
    """The prediction series never settles inside the band."""


def convergence_time(series, final_value: float,
                     band: float = CONVERGENCE_BAND) -> float:
    """Earliest time after which every value stays within +-band of final.

    `series` is an iterable of (t, value) in time order.
    """
    pts = list(series)
    if not pts:
        raise ValueError("empty prediction series")
    limit = band * abs(final_value)
    last_violation = None
    for i, (_, v) in enumerate(pts):
        if abs(v - final_value) > limit:
            last_violation = i
    if last_violation is None:
        return pts[0][0]
    if last_violation == len(pts) - 1:
        raise NeverConverged(
            f"series still outside the {band:.0%} band at its end")
    return pts[last_violation + 1][0]


@dataclass(frozen=True)
class DoeSpec:
    procedure: str                       # "takeoff" | "landing"
    num_points: int = 200
    dimensions: tuple = ()               # of (path, low, high); defaults per procedure
    base_seed: int = 0
    noise_scale: float = 1.0
    frame_rate: float = 20.0
    flap_setting: str | None = None      # default: 5 takeoff, 30 landing
    runway_length: float = DOE_RUNWAY_LENGTH
    thresholds: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.procedure not in ("takeoff", "landing"):
            raise ValueError("procedure must be 'takeoff' or 'landing'")
        if self.num_points < 1:
            raise ValueError("num_points must be >= 1")
        dims = self.dimensions or tuple(
            DEFAULT_TAKEOFF_DIMENSIONS if self.procedure == "takeoff"
            else DEFAULT_LANDING_DIMENSIONS)
        object.__setattr__(self, "dimensions", tuple(tuple(d) for d in dims))
        for path, low, high in self.dimensions:
            if not (np.isfinite(low) and np.isfinite(high) and low < high):
                raise ValueError(f"bad bounds for {path}: [{low}, {high}]")

    @classmethod
    def from_json(cls, path: str | Path) -> "DoeSpec":
        with open(path) as f:
            raw = json.load(f)
        dims = tuple((d["path"], d["low"], d["high"])
                     for d in raw.get("dimensions", []))
        return cls(procedure=raw["procedure"],
                   num_points=raw.get("num_points", 200),
                   dimensions=dims,
                   base_seed=raw.get("base_seed", 0),
                   noise_scale=raw.get("noise_scale", 1.0),
                   frame_rate=raw.get("frame_rate", 20.0),
                   flap_setting=raw.get("flap_setting"),
                   runway_length=raw.get("runway_length", DOE_RUNWAY_LENGTH),
                   thresholds=raw.get("thresholds", {}))


def sobol_points(spec: DoeSpec) -> np.ndarray:
    """DOE configuration points: the Sobol sequence mapped into the bounds."""
    unit = sobol_sequence(len(spec.dimensions), spec.num_points)
    return scale_to_bounds(unit, [(lo, hi) for _, lo, hi in spec.dimensions])


def _build_configs(spec: DoeSpec, point) -> tuple:
    """Materialize one DOE point into a takeoff or landing configuration."""
    values = dict(zip((p for p, _, _ in spec.dimensions), point))
    aircraft_over = {}
    runway_kw = {"length": spec.runway_length}
    atmo_kw = {}
    top = {}
    for path, value in values.items():
        group, _, name = path.partition(".")
        if group == "aircraft":
            aircraft_over[name] = value
        elif group == "runway":
            runway_kw[name] = value
        elif group == "atmosphere":
            atmo_kw[name] = value
        else:
            top[path] = value

    runway = RunwayParams(**runway_kw)
    atmosphere = AtmosphereParams(**atmo_kw)
    if spec.procedure == "takeoff":
        flap = spec.flap_setting or "5"
        aircraft = aircraft_preset(flap_setting=flap, **aircraft_over)
        v1 = top.get("v1", 65.0)
        return TakeoffConfig(aircraft, runway, atmosphere,
                             v1=v1, vr=v1 + 5.0, v2=v1 + 10.0), values
    flap = spec.flap_setting or "30"
    aircraft = aircraft_preset(flap_setting=flap, **aircraft_over)
    return LandingConfig(aircraft, runway, atmosphere,
                         vref=top.get("vref", 68.0),
                         vapp=top.get("vref", 68.0) + 2.5,
                         autobrake_decel=top.get("autobrake_decel", 2.2)), values


@dataclass
class RunRow:
    index: int
    params: dict
    static_total: float = float("nan")
    actual_total: float = float("nan")
    deviation: float = float("nan")       # (static - actual) / actual
    convergence_accel_s: float | None = None    # takeoff roll, from start
    convergence_braking_s: float | None = None  # from braking onset
    infeasible: bool = False
    note: str = ""


@dataclass
class RunReport:
    procedure: str
    spec: DoeSpec
    rows: list[RunRow]

    @property
    def feasible_rows(self):
        return [r for r in self.rows if not r.infeasible]

    def aggregates(self) -> dict:
        rows = self.feasible_rows
        devs = [r.deviation for r in rows]
        agg = {
            "procedure": self.procedure,
            "num_points": len(self.rows),
            "num_infeasible": len(self.rows) - len(rows),
            "deviation_mean": statistics.fmean(devs) if devs else None,
            "deviation_std": statistics.stdev(devs) if len(devs) > 1 else None,
            "conservative_fraction":
                (sum(1 for d in devs if d >= 0.0) / len(devs)) if devs else None,
        }
        for key in ("convergence_accel_s", "convergence_braking_s"):
            vals = sorted(getattr(r, key) for r in rows
                          if getattr(r, key) is not None)
            if vals:
                agg[key.replace("_s", "") + "_median_s"] = \
                    statistics.median(vals)
                agg[key.replace("_s", "") + "_p90_s"] = \
                    vals[min(len(vals) - 1, int(0.9 * len(vals)))]
        return agg


def _takeoff_run(spec: DoeSpec, index: int, point) -> RunRow:
    cfg, values = _build_configs(spec, point)
    row = RunRow(index=index, params=values)
    integrator = IntegratorConfig(reaction_time_at_v1=0.0)
    try:
        static = compute_asdr(cfg, integrator)
        scenario = Scenario(kind="rto", takeoff=cfg, rto_at_speed=cfg.v1,
                            noise_seed=spec.base_seed + index,
                            noise_scale=spec.noise_scale,
                            frame_rate=spec.frame_rate)
        frames, truth = run_scenario(scenario)
    except (NonConvergence, ScenarioInfeasible, ValueError) as e:
        row.infeasible = True
        row.note = str(e)
        return row

    row.static_total = static.total
    row.actual_total = truth.stop_position
    row.deviation = (static.total - truth.stop_position) / truth.stop_position

    session = TakeoffSession(cfg, integrator, static)
    roll_series = []
    rto_series = []
    rto_t0 = None
    for frame in frames:
        snap = session.step(frame)
        if snap.confidence is Confidence.SEEDING:
            continue
        if snap.procedure_stage is Stage.TAKEOFF_ROLL:
            roll_series.append((frame.timestamp - session.start_time,
                                snap.dynamic_required_distance))
        elif snap.procedure_stage is Stage.RTO_BRAKING:
            if rto_t0 is None:
                rto_t0 = frame.timestamp
            rto_series.append((frame.timestamp - rto_t0, snap.stop_position))
    try:
        if roll_series:
            row.convergence_accel_s = convergence_time(
                roll_series, roll_series[-1][1])
        if rto_series:
            row.convergence_braking_s = convergence_time(
                rto_series, rto_series[-1][1])
    except NeverConverged as e:
        row.note = f"convergence: {e}"
    return row


def _landing_run(spec: DoeSpec, index: int, point) -> RunRow:
    cfg, values = _build_configs(spec, point)
    row = RunRow(index=index, params=values)
    try:
        static = compute_ldr(cfg)
        scenario = Scenario(kind="landing", landing=cfg,
                            noise_seed=spec.base_seed + index,
                            noise_scale=spec.noise_scale,
                            frame_rate=spec.frame_rate)
        frames, truth = run_scenario(scenario)
    except (NonConvergence, ScenarioInfeasible, ValueError) as e:
        row.infeasible = True
        row.note = str(e)
        return row

    row.static_total = static.total
    row.actual_total = truth.stop_position
    row.deviation = (static.total - truth.stop_position) / truth.stop_position

    session = LandingSession(cfg, static)
    braking_series = []
    braking_t0 = None
    for frame in frames:
        snap = session.step(frame)
        if snap.procedure_stage is Stage.LANDING_BRAKING \
                and snap.confidence >= Confidence.CONVERGING:
            if braking_t0 is None:
                braking_t0 = frame.timestamp
            braking_series.append((frame.timestamp - braking_t0,
                                   snap.stop_position))
    try:
        if braking_series:
            row.convergence_braking_s = convergence_time(
                braking_series, braking_series[-1][1])
    except NeverConverged as e:
        row.note = f"convergence: {e}"
    return row


def run_doe(spec: DoeSpec, progress=None) -> RunReport:
    """Execute every DOE point: static calculation, simulated ground truth,
    and the dynamic pipeline for convergence statistics."""
    points = sobol_points(spec)
    runner = _takeoff_run if spec.procedure == "takeoff" else _landing_run
    rows = []
    for i, point in enumerate(points):
        rows.append(runner(spec, i, point))
        if progress is not None:
            progress(i + 1, len(points))
    return RunReport(procedure=spec.procedure, spec=spec, rows=rows)


# -- report files -------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return format(x, ".10g")
    return str(x)


def write_report(report: RunReport, outdir: str | Path,
                 render_figures: bool = True) -> dict:
    """Write runs.csv, summary.json, histogram bins and figures.

    Returns the summary dict.  CSV/JSON content is deterministic for a
    given spec; figures are rendered alongside for quick inspection.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    param_names = [p for p, _, _ in report.spec.dimensions]
    with open(outdir / "runs.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["index", *param_names, "static_total_m", "actual_total_m",
                    "deviation", "convergence_accel_s", "convergence_braking_s",
                    "infeasible", "note"])
        for r in report.rows:
            w.writerow([r.index, *(_fmt(r.params.get(p)) for p in param_names),
                        _fmt(r.static_total), _fmt(r.actual_total),
                        _fmt(r.deviation), _fmt(r.convergence_accel_s),
                        _fmt(r.convergence_braking_s), _fmt(r.infeasible),
                        r.note])

    devs = np.array([r.deviation for r in report.feasible_rows])
    if devs.size:
        counts, edges = np.histogram(devs * 100.0, bins=20)
        with open(outdir / "deviation_bins.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["bin_low_pct", "bin_high_pct", "count"])
            for i, c in enumerate(counts):
                w.writerow([_fmt(float(edges[i])), _fmt(float(edges[i + 1])),
                            int(c)])

    summary = {"spec": {
        "procedure": report.spec.procedure,
        "num_points": report.spec.num_points,
        "dimensions": [list(d) for d in report.spec.dimensions],
        "base_seed": report.spec.base_seed,
        "noise_scale": report.spec.noise_scale,
    }, "aggregates": report.aggregates()}
    summary["threshold_failures"] = check_thresholds(report)
    with open(outdir / "summary.json", "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")

    if render_figures and devs.size:
        from . import plots
        plots.deviation_histogram(
            devs * 100.0, outdir / "deviation_histogram.png",
            title=f"{report.procedure}: static vs measured distance")
        conv = [r.convergence_braking_s for r in report.feasible_rows
                if r.convergence_braking_s is not None]
        if conv:
            plots.convergence_histogram(
                conv, outdir / "convergence_braking.png",
                title=f"{report.procedure}: braking convergence time")
    return summary


def check_thresholds(report: RunReport) -> list[str]:
    """Evaluate the optional acceptance gates in the spec; returns failures."""
    th = report.spec.thresholds
    agg = report.aggregates()
    failures = []

    def gate(name, value, limit, ok):
        if not ok:
            failures.append(f"{name}: {value} vs limit {limit}")

    if "max_abs_deviation_mean" in th and agg["deviation_mean"] is not None:
        lim = th["max_abs_deviation_mean"]
        gate("deviation_mean", agg["deviation_mean"], lim,
             abs(agg["deviation_mean"]) <= lim)
    if "max_deviation_std" in th and agg["deviation_std"] is not None:
        lim = th["max_deviation_std"]
        gate("deviation_std", agg["deviation_std"], lim,
             agg["deviation_std"] <= lim)
    if "min_conservative_fraction" in th and agg["conservative_fraction"] is not None:
        lim = th["min_conservative_fraction"]
        gate("conservative_fraction", agg["conservative_fraction"], lim,
             agg["conservative_fraction"] >= lim)
    if "max_convergence_braking_median_s" in th:
        val = agg.get("convergence_braking_median_s")
        lim = th["max_convergence_braking_median_s"]
        gate("convergence_braking_median_s", val, lim,
             val is not None and val <= lim)
    if "max_convergence_accel_median_s" in th:
        val = agg.get("convergence_accel_median_s")
        lim = th["max_convergence_accel_median_s"]
        gate("convergence_accel_median_s", val, lim,
             val is not None and val <= lim)
    return failures


# -- latency ------------------------------------------------------------------

def latency_bench(n_frames: int = 2000, warmup: int = 200) -> dict:
    """Wall-clock per-frame dynamic-update cost, acceleration vs braking.

    Replays deterministic rejected-takeoff telemetry through fresh sessions
    until n_frames of each update kind have been timed.
    """
    aircraft = aircraft_preset()
    runway = RunwayParams(length=4000.0)
    atmosphere = AtmosphereParams()
    cfg = TakeoffConfig(aircraft, runway, atmosphere, v1=65.0, vr=70.0, v2=75.0)
    integrator = IntegratorConfig(reaction_time_at_v1=0.0)
    static = compute_asdr(cfg, integrator)
    frames, _ = run_scenario(Scenario(kind="rto", takeoff=cfg, rto_at_speed=65.0,
                                      noise_scale=1.0, noise_seed=11))

    accel_ns: list[int] = []
    braking_ns: list[int] = []
    skipped = 0
    while len(accel_ns) < n_frames or len(braking_ns) < n_frames:
        session = TakeoffSession(cfg, integrator, static)
        for frame in frames:
            t0 = time.perf_counter_ns()
            snap = session.step(frame)
            elapsed = time.perf_counter_ns() - t0
            if snap.confidence is Confidence.SEEDING:
                continue
            if skipped < warmup:
                skipped += 1
                continue
            if snap.procedure_stage is Stage.TAKEOFF_ROLL:
                accel_ns.append(elapsed)
            else:
                braking_ns.append(elapsed)

    def stats(ns):
        ms = [x / 1e6 for x in ns[:n_frames]]
        return {"mean_ms": statistics.fmean(ms),
                "std_ms": statistics.stdev(ms),
                "median_ms": statistics.median(ms),
                "n": len(ms)}

    return {"acceleration": stats(accel_ns), "braking": stats(braking_ns)}
