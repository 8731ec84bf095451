"""Static required-distance calculations.

Takeoff distances come from time integration of the force model; landing
distances from the four-phase closed-form model (approach geometry, flare
and free roll at fixed speed fractions, constant-rate braking).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .forces import (AircraftParams, AtmosphereParams, RunwayParams, G,
                     ground_speed_for, net_acceleration)

FT = 0.3048                    # m per foot
APPROACH_DROP_M = 30.0 * FT    # 50 ft gate down to 20 ft flare point
FLARE_SPEED_FRACTION = 0.98    # mean speed through the flare
FREE_ROLL_SPEED_FRACTION = 0.925  # speed after touchdown, 7.5% off the reference
FREE_ROLL_DURATION_S = 3.5


class NonConvergence(Exception):
    """Target speed not crossed within the simulation-time budget."""


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 0.05                 # s
    max_sim_time: float = 300.0      # s
    reaction_time_at_v1: float = 2.0  # s, set 0 to drop the allowance

    def __post_init__(self):
        if not (0 < self.dt <= 0.5):
            raise ValueError("dt must be in (0, 0.5] s")
        if self.max_sim_time < 60:
            raise ValueError("max_sim_time must be >= 60 s")
        if self.reaction_time_at_v1 < 0:
            raise ValueError("reaction_time_at_v1 must be >= 0")


@dataclass(frozen=True)
class TakeoffConfig:
    aircraft: AircraftParams
    runway: RunwayParams
    atmosphere: AtmosphereParams
    v1: float  # m/s
    vr: float  # m/s
    v2: float  # m/s

    def __post_init__(self):
        if not (0 < self.v1 <= self.vr <= self.v2):
            raise ValueError("need 0 < v1 <= vr <= v2")
        # reference speeds are airspeeds; the wheels must still be rolling
        # meaningfully fast at the decision speed
        v1_ground = ground_speed_for(self.v1, self.runway)
        if v1_ground <= 5.0:
            raise ValueError("headwind leaves no usable ground speed at v1")
        # v1 must be achievable: positive net acceleration across the roll
        for k in range(9):
            v = v1_ground * k / 8.0
            if net_acceleration(v, 1.0, False, self.aircraft, self.runway,
                                self.atmosphere) <= 0.0:
                raise ValueError(
                    f"v1 not achievable: net acceleration <= 0 at {v:.1f} m/s")

    @property
    def v1_ground_speed(self) -> float:
        return ground_speed_for(self.v1, self.runway)


@dataclass(frozen=True)
class LandingConfig:
    aircraft: AircraftParams
    runway: RunwayParams
    atmosphere: AtmosphereParams
    vref: float                      # m/s at the 50 ft gate
    vapp: float = 0.0                # m/s, informational
    glide_path: float = math.radians(3.0)
    flare_duration: float = 5.0      # s
    free_roll_duration: float = FREE_ROLL_DURATION_S
    autobrake_decel: float = 2.2     # m/s^2, from the autobrake detent table

    def __post_init__(self):
        if self.vref <= 0:
            raise ValueError("vref must be > 0")
        if self.autobrake_decel <= 0:
            raise ValueError("autobrake_decel must be > 0")
        if not (0.02 < self.glide_path < 0.08):
            raise ValueError("glide_path must be in (0.02, 0.08) rad")


@dataclass(frozen=True)
class DistanceBreakdown:
    """Ordered per-segment distances plus their total."""

    segments: tuple  # of (label, distance_m)
    total: float
    exceeds_runway: bool = False  # advisory only

    def __post_init__(self):
        if any(d < -1e-9 for _, d in self.segments):
            raise ValueError("segment distances must be >= 0")
        if abs(self.total - sum(d for _, d in self.segments)) > 1e-9:
            raise ValueError("total must equal the segment sum")


def _make_breakdown(segments, runway_length=None) -> DistanceBreakdown:
    total = sum(d for _, d in segments)
    exceeds = runway_length is not None and total > runway_length
    return DistanceBreakdown(tuple(segments), total, exceeds)


def integrate_to_speed(start_speed: float, target_speed: float, throttle: float,
                       braking: bool, config, integrator: IntegratorConfig
                       ) -> tuple[float, float]:
    """Distance and time to go from start_speed to target_speed.

    Time-marches the force model at integrator.dt; per-step distance uses
    the average of entry and exit speed so constant-acceleration cases are
    exact, and the final partial step is solved at the exact crossing.
    `config` supplies aircraft/runway/atmosphere.

    Raises NonConvergence if the target is not crossed within
    max_sim_time (e.g. overweight for the conditions).
    """
    if target_speed == start_speed:
        return 0.0, 0.0
    accelerating = target_speed > start_speed
    aircraft, runway, atmo = config.aircraft, config.runway, config.atmosphere
    dt = integrator.dt
    v = start_speed
    d = 0.0
    t = 0.0
    while t < integrator.max_sim_time:
        a = net_acceleration(v, throttle, braking, aircraft, runway, atmo)
        v_next = v + a * dt
        crossed = v_next >= target_speed if accelerating else v_next <= target_speed
        if crossed:
            # a != 0 here, otherwise v_next == v and no crossing occurred
            tau = (target_speed - v) / a
            d += 0.5 * (v + target_speed) * tau
            t += tau
            return d, t
        d += 0.5 * (v + v_next) * dt
        v = v_next
        t += dt
    raise NonConvergence(
        f"speed {target_speed:.1f} m/s not reached from {start_speed:.1f} m/s "
        f"within {integrator.max_sim_time:.0f} s")


def compute_asdr(config: TakeoffConfig,
                 integrator: IntegratorConfig) -> DistanceBreakdown:
    """Accelerate-stop distance: roll to V1, optional reaction, brake to 0.

    V1 is an airspeed; all distances are over the ground, so the roll
    targets (and braking starts from) the corresponding ground speed.
    """
    v1_ground = config.v1_ground_speed
    accel_d, _ = integrate_to_speed(0.0, v1_ground, 1.0, False, config, integrator)
    segments = [("accelerate", accel_d)]
    if integrator.reaction_time_at_v1 > 0:
        segments.append(("reaction", v1_ground * integrator.reaction_time_at_v1))
    brake_d, _ = integrate_to_speed(v1_ground, 0.0, 0.0, True, config, integrator)
    segments.append(("brake", brake_d))
    return _make_breakdown(segments, config.runway.length)


def compute_bdr(current_speed: float, config: TakeoffConfig,
                integrator: IntegratorConfig) -> float:
    """Braking distance required from the current speed under max braking."""
    if current_speed <= 0:
        return 0.0
    d, _ = integrate_to_speed(current_speed, 0.0, 0.0, True, config, integrator)
    return d


def braking_decel_effective(config: LandingConfig) -> float:
    """Autobrake deceleration with the runway slope folded in."""
    decel = config.autobrake_decel + G * math.sin(config.runway.slope)
    if decel <= 0:
        raise ValueError("downhill slope cancels the selected autobrake rate")
    return decel


def landing_segment_distances(config: LandingConfig, speed: float) -> dict:
    """Per-stage landing distances with the reference speed replaced by `speed`.

    Used both for the static breakdown (speed = vref) and by the dynamic
    predictor with live speed estimates.
    """
    touchdown_speed = FREE_ROLL_SPEED_FRACTION * speed
    return {
        "approach": APPROACH_DROP_M / math.tan(config.glide_path),
        "flare": FLARE_SPEED_FRACTION * speed * config.flare_duration,
        "free_roll": touchdown_speed * config.free_roll_duration,
        "braking": touchdown_speed ** 2 / (2.0 * braking_decel_effective(config)),
    }


def compute_ldr(config: LandingConfig) -> DistanceBreakdown:
    """Landing distance: approach from 50 ft, flare, free roll, braking."""
    d = landing_segment_distances(config, config.vref)
    segments = [(name, d[name]) for name in
                ("approach", "flare", "free_roll", "braking")]
    return _make_breakdown(segments, config.runway.length)
