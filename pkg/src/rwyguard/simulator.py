"""Deterministic point-mass flight simulator.

Generates takeoff, rejected-takeoff and landing trajectories from the same
force model the static predictor integrates, plus kinematic approach/flare
profiles for landing, and emits them as telemetry frames or wire-format
datagrams.  Desk-scale stand-in for a full flight simulator feed.
"""

from __future__ import annotations

import dataclasses
import json
import math
import socket as socket_mod
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .forces import (AircraftParams, AtmosphereParams, G, RunwayParams,
                     ground_speed_for, net_acceleration)
from .statics import (FREE_ROLL_SPEED_FRACTION, FT, LandingConfig, TakeoffConfig,
                      braking_decel_effective)
from .telemetry import ChannelMapping, TelemetryFrame, encode_datagram, frame_to_records

SUBSTEP_DT = 0.005          # s, internal integration step
LIFTOFF_CLIMB_RATE = 10.0   # m/s target after rotation
FLARE_TAU = 1.6             # s, vertical-speed decay constant in the flare
TOUCHDOWN_SINK = 0.5        # m/s, asymptotic sink rate at touchdown
FLARE_SPEED_SHED_TIME = 4.5  # s over which the flare bleeds 7.5% of speed
LANDING_START_AGL = 120.0   # m, above the 300 ft pre-approach gate

DEFAULT_NOISE_STD = {
    "ground_speed": 0.15,        # m/s
    "vertical_speed": 0.12,      # m/s
    "height_agl": 0.30,          # m
    "distance_along_runway": 1.0,  # m
    "acceleration": 0.05,        # m/s^2
}


class ScenarioInfeasible(Exception):
    """The aircraft cannot fly the commanded profile with these parameters."""


@dataclass
class Scenario:
    """One reproducible simulator run."""
    kind: str                      # "takeoff" | "rto" | "thrust_loss" | "landing"
    takeoff: TakeoffConfig | None = None
    landing: LandingConfig | None = None
    rto_at_speed: float | None = None
    thrust_loss_time: float | None = None
    thrust_loss_fraction: float = 1.0
    noise_seed: int = 0
    noise_std: dict = field(default_factory=dict)   # overrides DEFAULT_NOISE_STD
    noise_scale: float = 1.0                        # 0 disables noise entirely
    spoolup_duration: float = 4.0  # s
    frame_rate: float = 20.0       # Hz

    def __post_init__(self):
        if not (5.0 <= self.frame_rate <= 100.0):
            raise ValueError("frame_rate must be within [5, 100] Hz")
        if self.kind in ("takeoff", "rto", "thrust_loss") and self.takeoff is None:
            raise ValueError(f"{self.kind} scenario needs a takeoff config")
        if self.kind == "rto" and self.rto_at_speed is None:
            raise ValueError("rto scenario needs rto_at_speed")
        if self.kind == "landing" and self.landing is None:
            raise ValueError("landing scenario needs a landing config")

    def channel_noise(self) -> dict:
        std = dict(DEFAULT_NOISE_STD)
        std.update(self.noise_std)
        return {k: v * self.noise_scale for k, v in std.items()}


@dataclass
class SimState:
    t: float = 0.0
    v: float = 0.0        # ground speed, m/s
    x: float = 0.0        # m from runway threshold
    h: float = 0.0        # m AGL
    vv: float = 0.0       # m/s, negative descending
    throttle: float = 0.0
    brakes: bool = False
    on_ground: bool = True
    accel: float = 0.0    # last ground acceleration, m/s^2


def step(state: SimState, dt: float, aircraft: AircraftParams,
         runway: RunwayParams, atmosphere: AtmosphereParams) -> SimState:
    """Semi-implicit Euler ground-roll update; a stopped aircraft stays put."""
    a = net_acceleration(state.v, state.throttle, state.brakes,
                         aircraft, runway, atmosphere)
    if state.v <= 0.0 and a < 0.0:
        a = 0.0  # static friction holds against residual decelerating forces
    v_next = max(state.v + a * dt, 0.0)
    state.accel = a
    state.v = v_next
    state.x += v_next * dt
    state.t += dt
    return state


@dataclass
class GroundTruth:
    """Distances and event times measured from the trajectory itself."""
    kind: str
    stop_position: float | None = None
    stop_time: float | None = None
    rto_time: float | None = None
    rto_speed: float | None = None
    accel_distance: float | None = None
    v1_time: float | None = None
    v1_distance: float | None = None
    touchdown_time: float | None = None
    touchdown_position: float | None = None
    braking_start_time: float | None = None
    braking_start_position: float | None = None
    segment_distances: dict = field(default_factory=dict)


def _degraded(aircraft: AircraftParams, fraction: float) -> AircraftParams:
    return dataclasses.replace(
        aircraft,
        max_static_thrust=aircraft.max_static_thrust * fraction,
        thrust_speed_slope=aircraft.thrust_speed_slope * fraction,
        idle_thrust=aircraft.idle_thrust * fraction)


class FlightSimulator:
    """Advances one scenario and collects frames plus ground truth."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.state = SimState()
        self.truth = GroundTruth(kind=scenario.kind)
        self.frames: list[TelemetryFrame] = []
        self._rng = np.random.default_rng(scenario.noise_seed)
        self._noise = scenario.channel_noise()
        self._frame_interval = 1.0 / scenario.frame_rate
        self._next_frame_t = 0.0

    # -- telemetry ----------------------------------------------------------

    def _emit_frame(self):
        s = self.state
        n = self._noise

        def jitter(value, key):
            std = n.get(key, 0.0)
            return value if std == 0.0 else value + self._rng.normal(0.0, std)

        self.frames.append(TelemetryFrame(
            timestamp=round(s.t, 6),
            ground_speed=max(jitter(s.v, "ground_speed"), 0.0),
            vertical_speed=jitter(s.vv, "vertical_speed"),
            height_agl=max(jitter(s.h, "height_agl"), 0.0),
            distance_along_runway=jitter(s.x, "distance_along_runway"),
            acceleration=jitter(s.accel, "acceleration"),
            throttle_fraction=s.throttle,
            on_ground=s.on_ground,
            brakes_applied=s.brakes,
        ))

    def _maybe_emit(self):
        if self.state.t >= self._next_frame_t - 1e-9:
            self._emit_frame()
            self._next_frame_t += self._frame_interval

    # -- takeoff family -----------------------------------------------------

    def _run_takeoff(self) -> None:
        sc = self.scenario
        cfg = sc.takeoff
        aircraft = cfg.aircraft
        # commanded speeds are airspeeds; triggers act on ground speed
        v1_ground = ground_speed_for(cfg.v1, cfg.runway)
        vr_ground = ground_speed_for(cfg.vr, cfg.runway)
        rto_ground = (ground_speed_for(sc.rto_at_speed, cfg.runway)
                      if sc.kind == "rto" else None)
        s = self.state
        braking = False
        max_t = 300.0

        while s.t < max_t:
            self._maybe_emit()
            if sc.kind == "thrust_loss" and sc.thrust_loss_time is not None \
                    and s.t >= sc.thrust_loss_time and aircraft is cfg.aircraft:
                aircraft = _degraded(cfg.aircraft, sc.thrust_loss_fraction)
            if not braking:
                s.throttle = min(s.t / sc.spoolup_duration, 1.0)
            step(s, SUBSTEP_DT, aircraft, cfg.runway, cfg.atmosphere)

            if not braking and self.truth.v1_time is None and s.v >= v1_ground:
                self.truth.v1_time = s.t
                self.truth.v1_distance = s.x

            if rto_ground is not None and not braking and s.v >= rto_ground:
                braking = True
                s.throttle = 0.0
                s.brakes = True
                self.truth.rto_time = s.t
                self.truth.rto_speed = s.v
                self.truth.accel_distance = s.x
                self.truth.braking_start_time = s.t
                self.truth.braking_start_position = s.x

            if braking and s.v <= 0.0:
                self.truth.stop_time = s.t
                self.truth.stop_position = s.x
                self.truth.segment_distances = {
                    "accelerate": self.truth.accel_distance,
                    "brake": s.x - self.truth.accel_distance,
                }
                self._run_out(1.0, aircraft, cfg.runway, cfg.atmosphere)
                return

            if rto_ground is None and s.v >= vr_ground:
                self._climb_out(aircraft, cfg)
                return

        raise ScenarioInfeasible("takeoff never reached its end condition")

    def _climb_out(self, aircraft, cfg: TakeoffConfig):
        """Rotation and initial climb; fidelity matters little past V1."""
        s = self.state
        s.on_ground = False
        while s.h < 60.0 and s.t < 300.0:
            self._maybe_emit()
            s.vv = min(s.vv + 4.0 * SUBSTEP_DT, LIFTOFF_CLIMB_RATE)
            drag_decel = net_acceleration(s.v, s.throttle, False, aircraft,
                                          cfg.runway, cfg.atmosphere)
            climb_drain = G * s.vv / max(s.v, 1.0)
            s.accel = drag_decel - climb_drain
            s.v = max(s.v + s.accel * SUBSTEP_DT, 0.0)
            s.x += s.v * SUBSTEP_DT
            s.h += s.vv * SUBSTEP_DT
            s.t += SUBSTEP_DT

    def _run_out(self, duration, aircraft, runway, atmosphere):
        """A short stopped tail so consumers see the final state."""
        s = self.state
        end = s.t + duration
        while s.t < end:
            self._maybe_emit()
            step(s, SUBSTEP_DT, aircraft, runway, atmosphere)

    # -- landing ------------------------------------------------------------

    def _run_landing(self) -> None:
        cfg = self.scenario.landing
        s = self.state
        glide = cfg.glide_path
        ground_speed = cfg.vref - cfg.runway.headwind
        if ground_speed <= 5.0:
            raise ScenarioInfeasible("headwind leaves no usable ground speed")

        s.v = ground_speed
        s.h = LANDING_START_AGL
        s.vv = -ground_speed * math.tan(glide)
        s.x = -(s.h - 50.0 * FT) / math.tan(glide)  # 50 ft gate sits over the threshold
        s.on_ground = False
        s.throttle = 0.0

        flare_floor = 20.0 * FT
        sink_at_flare = None
        flare_t0 = None
        touchdown_speed_target = FREE_ROLL_SPEED_FRACTION * ground_speed
        brake_decel = braking_decel_effective(cfg)

        while s.t < 600.0:
            self._maybe_emit()
            if s.on_ground:
                if not s.brakes and s.t - self.truth.touchdown_time >= cfg.free_roll_duration:
                    s.brakes = True
                    self.truth.braking_start_time = s.t
                    self.truth.braking_start_position = s.x
                if s.brakes:
                    # autobrake holds its commanded rate (slope folded in)
                    s.accel = -brake_decel
                    s.v = max(s.v + s.accel * SUBSTEP_DT, 0.0)
                    s.x += s.v * SUBSTEP_DT
                    s.t += SUBSTEP_DT
                    if s.v <= 0.0:
                        self._finish_landing(cfg)
                        return
                else:
                    step(s, SUBSTEP_DT, cfg.aircraft, cfg.runway, cfg.atmosphere)
            else:
                in_flare = s.h <= flare_floor
                if in_flare and flare_t0 is None:
                    flare_t0 = s.t
                    sink_at_flare = -s.vv
                    self.truth.segment_distances["approach"] = s.x
                if in_flare:
                    tau = s.t - flare_t0
                    sink = TOUCHDOWN_SINK + (sink_at_flare - TOUCHDOWN_SINK) \
                        * math.exp(-tau / FLARE_TAU)
                    s.vv = -sink
                    shed_rate = (ground_speed - touchdown_speed_target) / FLARE_SPEED_SHED_TIME
                    s.v = max(s.v - shed_rate * SUBSTEP_DT, touchdown_speed_target)
                s.accel = 0.0
                s.x += s.v * SUBSTEP_DT
                s.h += s.vv * SUBSTEP_DT
                s.t += SUBSTEP_DT
                if s.h <= 0.0:
                    s.h = 0.0
                    s.vv = 0.0
                    s.on_ground = True
                    self.truth.touchdown_time = s.t
                    self.truth.touchdown_position = s.x
                    seg = self.truth.segment_distances
                    seg["flare"] = s.x - seg.get("approach", 0.0)

        raise ScenarioInfeasible("landing never reached a stop")

    def _finish_landing(self, cfg):
        s = self.state
        self.truth.stop_time = s.t
        self.truth.stop_position = s.x
        seg = self.truth.segment_distances
        seg["free_roll"] = self.truth.braking_start_position - self.truth.touchdown_position
        seg["braking"] = s.x - self.truth.braking_start_position
        self._run_out(1.0, cfg.aircraft, cfg.runway, cfg.atmosphere)

    # -- entry --------------------------------------------------------------

    def run(self):
        if self.scenario.kind in ("takeoff", "rto", "thrust_loss"):
            self._run_takeoff()
        elif self.scenario.kind == "landing":
            self._run_landing()
        else:
            raise ValueError(f"unknown scenario kind {self.scenario.kind!r}")
        return self.frames, self.truth


def run_scenario(scenario: Scenario):
    """Frames plus trajectory-measured ground truth; deterministic per seed."""
    return FlightSimulator(scenario).run()


def scenario_from_json(path: str | Path) -> Scenario:
    """Build a Scenario from a JSON file (see docs/config_schema.md)."""
    from .presets import aircraft_preset, autobrake_decel

    with open(path) as f:
        raw = json.load(f)

    def build_aircraft(section):
        a = dict(section.get("aircraft", {}))
        flap = str(a.pop("flap_setting", "5"))
        preset = a.pop("preset", "narrowbody")
        return aircraft_preset(preset, flap, **a)

    def build_common(section):
        return (build_aircraft(section),
                RunwayParams(**section["runway"]),
                AtmosphereParams(**section.get("atmosphere", {})))

    kind = raw["kind"]
    takeoff = landing = None
    if kind in ("takeoff", "rto", "thrust_loss"):
        sec = raw["takeoff"]
        aircraft, runway, atmo = build_common(sec)
        takeoff = TakeoffConfig(aircraft, runway, atmo, v1=sec["v1"],
                                vr=sec["vr"], v2=sec["v2"])
    if kind == "landing":
        sec = raw["landing"]
        aircraft, runway, atmo = build_common(sec)
        decel = sec.get("autobrake_decel")
        if decel is None:
            decel = autobrake_decel(sec.get("autobrake", "AB3"))
        landing = LandingConfig(aircraft, runway, atmo, vref=sec["vref"],
                                vapp=sec.get("vapp", sec["vref"] + 2.5),
                                autobrake_decel=decel)
    return Scenario(
        kind=kind,
        takeoff=takeoff,
        landing=landing,
        rto_at_speed=raw.get("rto_at_speed"),
        thrust_loss_time=raw.get("thrust_loss_time"),
        thrust_loss_fraction=raw.get("thrust_loss_fraction", 1.0),
        noise_seed=raw.get("noise_seed", 0),
        noise_std=raw.get("noise_std", {}),
        noise_scale=raw.get("noise_scale", 1.0),
        spoolup_duration=raw.get("spoolup_duration", 4.0),
        frame_rate=raw.get("frame_rate", 20.0),
    )


def emit_datagrams(frames, mapping: ChannelMapping, udp_target: tuple[str, int],
                   frame_rate: float = 20.0, time_scale: float = 1.0,
                   sock=None) -> int:
    """Send frames as wire datagrams paced at frame_rate * time_scale.

    Returns the number of datagrams sent; send failures are counted as
    unsent but do not abort the stream.
    """
    own_sock = sock is None
    if own_sock:
        sock = socket_mod.socket(socket_mod.AF_INET, socket_mod.SOCK_DGRAM)
    interval = 1.0 / (frame_rate * time_scale)
    sent = 0
    try:
        next_deadline = time.monotonic()
        for frame in frames:
            now = time.monotonic()
            if now < next_deadline:
                time.sleep(next_deadline - now)
            payload = encode_datagram(frame_to_records(frame, mapping))
            try:
                sock.sendto(payload, udp_target)
                sent += 1
            except OSError:
                pass
            next_deadline += interval
    finally:
        if own_sock:
            sock.close()
    return sent
