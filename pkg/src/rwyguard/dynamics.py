"""Per-frame dynamic prediction for takeoff and landing.

A session owns the estimator state for one procedure: it detects the
procedure start, collects the regression seed window, advances the
recursive fits, detects landing stages, and assembles one
PredictionSnapshot per telemetry frame.  Sessions are single-writer;
snapshots are immutable.
"""

from __future__ import annotations

import bisect
import collections
import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .estimators import (MovingAverage, NoRoot, QuadraticModel, RlsEstimator,
                         distance_until, fit_linear_seed, rls_update,
                         seed_rls_from_linear, time_to_speed)
from .forces import net_acceleration
from .statics import (FREE_ROLL_SPEED_FRACTION, DistanceBreakdown,
                      IntegratorConfig, LandingConfig, TakeoffConfig,
                      braking_decel_effective, compute_asdr, compute_ldr,
                      landing_segment_distances)
from .telemetry import TelemetryFrame

IDLE_THROTTLE_THRESHOLD = 0.1
SEED_WINDOW = (8.0, 10.0)        # s after takeoff start
SPOOL_FRACTION = 0.95            # of commanded throttle
SPOOL_HOLD_S = 1.0               # s the fraction must hold
DIVERGENCE_SINK_FLOOR = 0.05     # m/s; flatter descent has no time-to-floor
HEALTHY_SINK = 0.5               # m/s; estimates made below this are suspect
BRAKING_SEED_SAMPLES = 3         # quadratic fit needs this many points
STOPPED_SPEED = 0.2              # m/s

FT = 0.3048
PRE_APPROACH_CEILING_M = 300.0 * FT
STAGE_FLOOR_M = {"pre_approach": 50.0 * FT, "approach": 20.0 * FT, "flare": 0.0}

# Moving-average window lengths in samples at the nominal 20 Hz frame rate;
# the flare window also serves the ground stages.
MA_WINDOWS = {"pre_approach": 40, "approach": 20, "flare": 8}

STABILITY_SPAN_S = 1.0           # prediction must hold this long ...
STABILITY_BAND = 0.005           # ... within this fraction to count as converged


class Stage(enum.Enum):
    TAKEOFF_ROLL = "TakeoffRoll"
    RTO_BRAKING = "RtoBraking"
    PRE_APPROACH = "PreApproach"
    APPROACH = "Approach"
    FLARE = "Flare"
    FREE_ROLL = "FreeRoll"
    LANDING_BRAKING = "LandingBraking"


class Confidence(enum.IntEnum):
    SEEDING = 0
    CONVERGING = 1
    CONVERGED = 2


@dataclass(frozen=True)
class PredictionSnapshot:
    procedure_stage: Stage
    dynamic_required_distance: float  # m
    stop_position: float              # m from threshold
    stop_margin: float                # m to runway end, positive = inside
    delta_from_static: float          # fraction
    confidence: Confidence
    bdr: float | None = None          # m, takeoff only


def throttle_above_idle(frame: TelemetryFrame,
                        threshold: float = IDLE_THROTTLE_THRESHOLD) -> bool:
    """Raw start trigger; the session latches the first crossing."""
    return frame.throttle_fraction > threshold


def is_rto(frame: TelemetryFrame,
           threshold: float = IDLE_THROTTLE_THRESHOLD) -> bool:
    """Brakes applied with the levers back at idle while still rolling."""
    return (frame.on_ground and frame.brakes_applied
            and frame.throttle_fraction <= threshold)


def landing_stage_of(height_agl: float, on_ground: bool,
                     brakes_applied: bool) -> Stage | None:
    """Stage from instantaneous signals; None above the 300 ft gate.

    on_ground overrides height, since gear compression can report a small
    residual AGL.
    """
    if on_ground:
        return Stage.LANDING_BRAKING if brakes_applied else Stage.FREE_ROLL
    if height_agl > PRE_APPROACH_CEILING_M:
        return None
    if height_agl > STAGE_FLOOR_M["pre_approach"]:
        return Stage.PRE_APPROACH
    if height_agl > STAGE_FLOOR_M["approach"]:
        return Stage.APPROACH
    return Stage.FLARE


class BrakingTable:
    """Max-braking stop distance by speed, precomputed once per session.

    One fine-step braking integration from the ceiling speed down to zero
    yields the whole distance-to-stop curve; per-frame lookups interpolate.
    """

    def __init__(self, config: TakeoffConfig, ceiling_speed: float, dt: float = 0.01):
        speeds = [0.0]
        dists = [0.0]
        v = ceiling_speed
        travelled = [0.0]
        path_v = [v]
        t = 0.0
        while v > 0.0 and t < 600.0:
            a = net_acceleration(v, 0.0, True, config.aircraft, config.runway,
                                 config.atmosphere)
            if a >= 0.0:
                raise ValueError("braking does not decelerate with these parameters")
            v_next = v + a * dt
            if v_next <= 0.0:
                tau = v / -a
                travelled.append(travelled[-1] + 0.5 * v * tau)
                path_v.append(0.0)
                break
            travelled.append(travelled[-1] + 0.5 * (v + v_next) * dt)
            path_v.append(v_next)
            v = v_next
            t += dt
        total = travelled[-1]
        # distance to stop from speed s = total run minus distance already covered
        pairs = sorted(zip(path_v, (total - d for d in travelled)))
        self._speeds = [p[0] for p in pairs]
        self._dists = [p[1] for p in pairs]

    def distance_from(self, speed: float) -> float:
        if speed <= 0.0:
            return 0.0
        if speed >= self._speeds[-1]:
            return self._dists[-1]
        i = bisect.bisect_left(self._speeds, speed)
        v0, v1 = self._speeds[i - 1], self._speeds[i]
        d0, d1 = self._dists[i - 1], self._dists[i]
        w = (speed - v0) / (v1 - v0)
        return d0 + w * (d1 - d0)


class _StabilityTracker:
    """Converged once the estimate holds a narrow band for a full span."""

    def __init__(self, span_s: float = STABILITY_SPAN_S,
                 band: float = STABILITY_BAND):
        self.span = span_s
        self.band = band
        self._points = collections.deque()

    def update(self, t: float, value: float) -> Confidence:
        self._points.append((t, value))
        while self._points and self._points[0][0] < t - self.span - 1e-9:
            self._points.popleft()
        if self._points[-1][0] - self._points[0][0] < self.span - 1e-9:
            return Confidence.CONVERGING
        ref = abs(value) if value != 0 else 1.0
        spread = max(v for _, v in self._points) - min(v for _, v in self._points)
        return Confidence.CONVERGED if spread / ref <= self.band else Confidence.CONVERGING

    def reset(self):
        self._points.clear()


class _QuadraticSpeedFit:
    """RLS over regressor (t^2, t, 1) against observed speed.

    Seeded with the expected deceleration (autobrake command, or the force
    model at braking onset) and a prior that keeps the ill-conditioned
    curvature term quiet until enough of the braking run has been seen.
    Observations are bin-averaged over a short sliding window (mean time
    against mean speed, which stays unbiased for a linear trend) to keep
    sensor noise from whipping the long extrapolation around.
    """

    PRIOR_DIAG = (0.002, 0.5, 25.0)   # variances for (t^2, t, 1) coefficients
    STEADY_CURVATURE_VAR = 1.0e-5      # when the decel rate is commanded steady
    SMOOTH_WINDOW = 8                  # samples

    def __init__(self, v0: float, decel_guess: float = 0.0,
                 steady_rate: bool = False):
        prior = list(self.PRIOR_DIAG)
        if steady_rate:
            prior[0] = self.STEADY_CURVATURE_VAR
        self.rls = RlsEstimator(
            theta=np.array([0.0, -abs(decel_guess), v0]),
            P=np.diag(prior).astype(float))
        self.samples = 0
        self._window = collections.deque(maxlen=self.SMOOTH_WINDOW)

    def update(self, tau: float, speed: float):
        self._window.append((tau, speed))
        t_mean = sum(t for t, _ in self._window) / len(self._window)
        v_mean = sum(v for _, v in self._window) / len(self._window)
        self.rls = rls_update(self.rls, (t_mean * t_mean, t_mean, 1.0), v_mean)
        self.samples += 1

    def model(self) -> QuadraticModel:
        c2, c1, c0 = self.rls.theta
        return QuadraticModel(alpha=2.0 * c2, beta=c1, gamma=c0)

    def remaining_distance(self, tau_now: float, current_speed: float) -> float:
        """Distance from now until the fitted speed reaches zero.

        Raises NoRoot when the fit never stops (feeds the max-brake advisory).
        """
        if current_speed <= STOPPED_SPEED:
            return 0.0
        model = self.model()
        if model.speed_at(tau_now) <= 0.0:
            return 0.0
        tau_stop = time_to_speed(model, 0.0, tau_now)
        return max(distance_until(model, tau_now, tau_stop), 0.0)


class TakeoffSession:
    """Dynamic prediction state for one takeoff (and a possible RTO)."""

    def __init__(self, config: TakeoffConfig, integrator: IntegratorConfig,
                 static: DistanceBreakdown | None = None):
        self.config = config
        self.integrator = integrator
        self.static = static if static is not None else compute_asdr(config, integrator)
        self.runway_length = config.runway.length
        self.v1_ground = config.v1_ground_speed
        self.reaction_distance = self.v1_ground * integrator.reaction_time_at_v1
        self.braking_table = BrakingTable(config, ceiling_speed=config.v2 + 15.0)
        self.bdr_at_v1 = self.braking_table.distance_from(self.v1_ground)

        self.started = False
        self.start_time = math.nan
        self.start_position = 0.0
        self._commanded = 0.0
        self._spool_hold_from: float | None = None
        self.spool_complete_time: float | None = None
        self.gamma: float | None = None
        self._seed_samples: list[tuple[float, float]] = []
        self._seed_anchor: tuple[float, float] | None = None  # (time, speed) fallback
        self.rls = None
        self.v1_reached = False
        self.rto_active = False
        self._rto_fit: _QuadraticSpeedFit | None = None
        self._rto_t0 = math.nan
        self._stability = _StabilityTracker()
        self._last: PredictionSnapshot | None = None

    # -- helpers -------------------------------------------------------------

    def _echo_static(self, frame: TelemetryFrame) -> PredictionSnapshot:
        stop = self.start_position + self.static.total
        return PredictionSnapshot(
            procedure_stage=Stage.TAKEOFF_ROLL,
            dynamic_required_distance=self.static.total,
            stop_position=stop,
            stop_margin=self.runway_length - stop,
            delta_from_static=0.0,
            confidence=Confidence.SEEDING,
            bdr=self.braking_table.distance_from(frame.ground_speed),
        )

    def _hold_last(self, frame: TelemetryFrame, stage: Stage) -> PredictionSnapshot:
        base = self._last if self._last is not None else self._echo_static(frame)
        return replace(base, procedure_stage=stage,
                       confidence=min(base.confidence, Confidence.CONVERGING),
                       bdr=self.braking_table.distance_from(frame.ground_speed))

    def _track_spool(self, frame: TelemetryFrame):
        # the lever plateau is the commanded level; while it is still rising
        # the engines are spooling and the hold timer keeps restarting
        if frame.throttle_fraction > self._commanded + 1e-3:
            self._commanded = frame.throttle_fraction
            self._spool_hold_from = None
        if self.gamma is not None or self._commanded <= 0.0:
            return
        if frame.throttle_fraction >= SPOOL_FRACTION * self._commanded:
            if self._spool_hold_from is None:
                self._spool_hold_from = frame.timestamp
            elif frame.timestamp - self._spool_hold_from >= SPOOL_HOLD_S:
                self.spool_complete_time = frame.timestamp
                self.gamma = frame.ground_speed
        else:
            self._spool_hold_from = None

    def _anchor(self) -> tuple[float, float]:
        """Model time origin and the speed there (gamma)."""
        if self.gamma is not None:
            return self.spool_complete_time, self.gamma
        return self._seed_anchor

    # -- frame handling ------------------------------------------------------

    def step(self, frame: TelemetryFrame) -> PredictionSnapshot:
        if not self.started:
            if throttle_above_idle(frame):
                self.started = True
                self.start_time = frame.timestamp
                self.start_position = frame.distance_along_runway
            else:
                snap = self._echo_static(frame)
                self._last = snap
                return snap

        if self.rto_active or is_rto(frame):
            snap = self._rto_step(frame)
        else:
            snap = self._roll_step(frame)
        self._last = snap
        return snap

    def _roll_step(self, frame: TelemetryFrame) -> PredictionSnapshot:
        t_rel = frame.timestamp - self.start_time
        self._track_spool(frame)
        if frame.ground_speed >= self.v1_ground:
            self.v1_reached = True

        if self.rls is None:
            if t_rel < SEED_WINDOW[0]:
                return self._echo_static(frame)
            if self._seed_anchor is None:
                self._seed_anchor = (frame.timestamp, frame.ground_speed)
            t0, _ = self._anchor()
            if t_rel <= SEED_WINDOW[1]:
                self._seed_samples.append((frame.timestamp - t0, frame.acceleration))
                if t_rel < SEED_WINDOW[1]:
                    return self._echo_static(frame)
            if len(self._seed_samples) < 2:
                return self._echo_static(frame)
            self.rls = seed_rls_from_linear(fit_linear_seed(self._seed_samples))
        else:
            t0, _ = self._anchor()
            tau = frame.timestamp - t0
            self.rls = rls_update(self.rls, (tau, 1.0), frame.acceleration)

        t0, gamma = self._anchor()
        tau_now = frame.timestamp - t0
        model = QuadraticModel(alpha=float(self.rls.theta[0]),
                               beta=float(self.rls.theta[1]), gamma=gamma)
        if frame.ground_speed >= self.v1_ground or model.speed_at(tau_now) >= self.v1_ground:
            d_remaining = 0.0
        else:
            try:
                tau_v1 = time_to_speed(model, self.v1_ground, tau_now)
                d_remaining = max(distance_until(model, tau_now, tau_v1), 0.0)
            except NoRoot:
                # fit says V1 is never attained; hold the last sane estimate
                return self._hold_last(frame, Stage.TAKEOFF_ROLL)

        stop = (frame.distance_along_runway + d_remaining
                + self.bdr_at_v1 + self.reaction_distance)
        dyn_asd = stop - self.start_position
        delta = (dyn_asd - self.static.total) / self.static.total
        confidence = self._stability.update(frame.timestamp, dyn_asd)
        return PredictionSnapshot(
            procedure_stage=Stage.TAKEOFF_ROLL,
            dynamic_required_distance=dyn_asd,
            stop_position=stop,
            stop_margin=self.runway_length - stop,
            delta_from_static=delta,
            confidence=confidence,
            bdr=self.braking_table.distance_from(frame.ground_speed),
        )

    def _rto_step(self, frame: TelemetryFrame) -> PredictionSnapshot:
        if not self.rto_active:
            self.rto_active = True
            self._rto_t0 = frame.timestamp
            decel = -net_acceleration(frame.ground_speed, 0.0, True,
                                      self.config.aircraft, self.config.runway,
                                      self.config.atmosphere)
            self._rto_fit = _QuadraticSpeedFit(v0=frame.ground_speed,
                                               decel_guess=decel)
            self._stability.reset()
        tau = frame.timestamp - self._rto_t0
        self._rto_fit.update(tau, frame.ground_speed)
        if self._rto_fit.samples < BRAKING_SEED_SAMPLES \
                and frame.ground_speed > STOPPED_SPEED:
            return self._hold_last(frame, Stage.RTO_BRAKING)
        try:
            d_remaining = self._rto_fit.remaining_distance(tau, frame.ground_speed)
        except NoRoot:
            # fit does not stop; surfaces upstream as the max-brake advisory
            return self._hold_last(frame, Stage.RTO_BRAKING)
        stop = frame.distance_along_runway + d_remaining
        dyn_asd = stop - self.start_position
        delta = (dyn_asd - self.static.total) / self.static.total
        confidence = self._stability.update(frame.timestamp, stop)
        return PredictionSnapshot(
            procedure_stage=Stage.RTO_BRAKING,
            dynamic_required_distance=dyn_asd,
            stop_position=stop,
            stop_margin=self.runway_length - stop,
            delta_from_static=delta,
            confidence=confidence,
            bdr=self.braking_table.distance_from(frame.ground_speed),
        )


class LandingSession:
    """Dynamic prediction state for one landing."""

    def __init__(self, config: LandingConfig,
                 static: DistanceBreakdown | None = None):
        self.config = config
        self.static = static if static is not None else compute_ldr(config)
        self.runway_length = config.runway.length
        self._ma_speed = {k: MovingAverage(w) for k, w in MA_WINDOWS.items()}
        self._ma_sink = {k: MovingAverage(w) for k, w in MA_WINDOWS.items()}
        self.stage: Stage | None = None
        self._stage_entry_time = math.nan
        self.touchdown_time: float | None = None
        self._braking_fit: _QuadraticSpeedFit | None = None
        self._braking_t0 = math.nan
        self._stability = _StabilityTracker()
        self._last: PredictionSnapshot | None = None
        self._last_descending: PredictionSnapshot | None = None

    def _echo_static(self) -> PredictionSnapshot:
        return PredictionSnapshot(
            procedure_stage=Stage.PRE_APPROACH,
            dynamic_required_distance=self.static.total,
            stop_position=self.static.total,
            stop_margin=self.runway_length - self.static.total,
            delta_from_static=0.0,
            confidence=Confidence.SEEDING,
        )

    def _hold_last(self, stage: Stage) -> PredictionSnapshot:
        base = self._last if self._last is not None else self._echo_static()
        return replace(base, procedure_stage=stage,
                       confidence=min(base.confidence, Confidence.CONVERGING))

    _STAGE_ORDER = [Stage.PRE_APPROACH, Stage.APPROACH, Stage.FLARE,
                    Stage.FREE_ROLL, Stage.LANDING_BRAKING]

    def _advance_stage(self, frame: TelemetryFrame) -> Stage | None:
        raw = landing_stage_of(frame.height_agl, frame.on_ground,
                               frame.brakes_applied)
        if raw is None:
            return self.stage
        if self.stage is None or (self._STAGE_ORDER.index(raw)
                                  > self._STAGE_ORDER.index(self.stage)):
            self.stage = raw
            self._stage_entry_time = frame.timestamp
            if raw is Stage.FREE_ROLL and self.touchdown_time is None:
                self.touchdown_time = frame.timestamp
            if raw is Stage.LANDING_BRAKING and self.touchdown_time is None:
                self.touchdown_time = frame.timestamp
        return self.stage

    def _window_key(self) -> str:
        if self.stage is Stage.PRE_APPROACH:
            return "pre_approach"
        if self.stage is Stage.APPROACH:
            return "approach"
        return "flare"  # flare window also serves the ground stages

    def step(self, frame: TelemetryFrame) -> PredictionSnapshot:
        for ma in self._ma_speed.values():
            ma.update(frame.ground_speed)
        for ma in self._ma_sink.values():
            ma.update(-frame.vertical_speed)
        stage = self._advance_stage(frame)
        if stage is None:
            snap = self._echo_static()
            self._last = snap
            return snap

        key = self._window_key()
        gs = self._ma_speed[key].current_mean
        sink = self._ma_sink[key].current_mean
        if len(self._ma_speed[key]) < 3:
            snap = self._hold_last(stage)
            self._last = snap
            return snap

        if stage in (Stage.PRE_APPROACH, Stage.APPROACH, Stage.FLARE):
            snap = self._airborne_step(frame, stage, gs, sink)
        elif stage is Stage.FREE_ROLL:
            snap = self._free_roll_step(frame, gs)
        else:
            snap = self._braking_step(frame)
        self._last = snap
        return snap

    def _finish(self, frame: TelemetryFrame, stage: Stage,
                remaining: float) -> PredictionSnapshot:
        stop = frame.distance_along_runway + remaining
        delta = (stop - self.static.total) / self.static.total
        confidence = self._stability.update(frame.timestamp, stop)
        return PredictionSnapshot(
            procedure_stage=stage,
            dynamic_required_distance=stop,
            stop_position=stop,
            stop_margin=self.runway_length - stop,
            delta_from_static=delta,
            confidence=confidence,
        )

    def _airborne_step(self, frame, stage, gs, sink) -> PredictionSnapshot:
        # the guard watches the most responsive sink average so a level-off
        # trips it promptly instead of bleeding through a long window
        responsive_sink = self._ma_sink["flare"].current_mean
        if responsive_sink < DIVERGENCE_SINK_FLOOR:
            # level flight: time-to-floor is undefined; fall back to the last
            # estimate made while the descent was still established
            base = self._last_descending or self._last
            if base is not None:
                return replace(base, procedure_stage=stage,
                               confidence=min(base.confidence,
                                              Confidence.CONVERGING))
            return self._hold_last(stage)
        floors = {Stage.PRE_APPROACH: STAGE_FLOOR_M["pre_approach"],
                  Stage.APPROACH: STAGE_FLOOR_M["approach"],
                  Stage.FLARE: STAGE_FLOOR_M["flare"]}
        t_rem = max(frame.height_agl - floors[stage], 0.0) / sink
        d_stage = gs * t_rem
        live = landing_segment_distances(self.config, gs)
        healthy = responsive_sink >= HEALTHY_SINK
        if stage is Stage.PRE_APPROACH:
            downstream = live["approach"] + live["flare"] + live["free_roll"] + live["braking"]
        elif stage is Stage.APPROACH:
            downstream = live["flare"] + live["free_roll"] + live["braking"]
        else:
            # in the flare the speed is already bleeding toward touchdown, so
            # the rollout speed estimate is the known touchdown target until
            # the live average decays below it (avoids a double reduction)
            touchdown_speed = min(FREE_ROLL_SPEED_FRACTION * self.config.vref, gs)
            downstream = (touchdown_speed * self.config.free_roll_duration
                          + touchdown_speed ** 2
                          / (2.0 * braking_decel_effective(self.config)))
        return self._finish(frame, stage, d_stage + downstream)

    def _free_roll_step(self, frame, gs) -> PredictionSnapshot:
        time_in = frame.timestamp - self._stage_entry_time
        roll_remaining = gs * max(self.config.free_roll_duration - time_in, 0.0)
        braking = gs * gs / (2.0 * braking_decel_effective(self.config))
        return self._finish(frame, Stage.FREE_ROLL, roll_remaining + braking)

    def _braking_step(self, frame) -> PredictionSnapshot:
        if self._braking_fit is None:
            self._braking_t0 = frame.timestamp
            self._braking_fit = _QuadraticSpeedFit(
                v0=frame.ground_speed,
                decel_guess=braking_decel_effective(self.config),
                steady_rate=True)  # the autobrake holds its commanded rate
            self._stability.reset()
        tau = frame.timestamp - self._braking_t0
        self._braking_fit.update(tau, frame.ground_speed)
        if self._braking_fit.samples < BRAKING_SEED_SAMPLES \
                and frame.ground_speed > STOPPED_SPEED:
            return self._hold_last(Stage.LANDING_BRAKING)
        try:
            remaining = self._braking_fit.remaining_distance(tau, frame.ground_speed)
        except NoRoot:
            return self._hold_last(Stage.LANDING_BRAKING)
        return self._finish(frame, Stage.LANDING_BRAKING, remaining)
