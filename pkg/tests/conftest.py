"""Shared fixtures and telemetry synthesis helpers.

The static-profile generators replay the static model's own assumptions as
telemetry, which lets tests check the dynamic predictor's self-consistency
independently of the flight simulator.
"""

from __future__ import annotations

import math

import pytest

from rwyguard.forces import AtmosphereParams, RunwayParams, net_acceleration
from rwyguard.presets import aircraft_preset
from rwyguard.statics import (FT, IntegratorConfig, LandingConfig,
                              TakeoffConfig, braking_decel_effective)
from rwyguard.telemetry import TelemetryFrame


@pytest.fixture
def aircraft():
    return aircraft_preset()


@pytest.fixture
def landing_aircraft():
    return aircraft_preset(flap_setting="30")


@pytest.fixture
def runway():
    return RunwayParams(length=2900.0)


@pytest.fixture
def atmosphere():
    return AtmosphereParams()


@pytest.fixture
def takeoff_config(aircraft, runway, atmosphere):
    return TakeoffConfig(aircraft, runway, atmosphere, v1=65.0, vr=70.0, v2=75.0)


@pytest.fixture
def landing_config(landing_aircraft, runway, atmosphere):
    return LandingConfig(landing_aircraft, runway, atmosphere, vref=68.0,
                         vapp=70.5, autobrake_decel=2.2)


@pytest.fixture
def integrator():
    return IntegratorConfig()


@pytest.fixture
def integrator_no_reaction():
    return IntegratorConfig(reaction_time_at_v1=0.0)


def frame(t, *, v=0.0, vv=0.0, h=0.0, x=0.0, a=0.0, throttle=0.0,
          ground=True, brakes=False) -> TelemetryFrame:
    return TelemetryFrame(
        timestamp=t, ground_speed=v, vertical_speed=vv, height_agl=h,
        distance_along_runway=x, acceleration=a, throttle_fraction=throttle,
        on_ground=ground, brakes_applied=brakes)


def takeoff_frames_from_force_model(config: TakeoffConfig, rate: float = 20.0,
                                    until_speed: float | None = None):
    """Telemetry replaying the static model: full throttle from standstill."""
    target = until_speed if until_speed is not None else config.v1
    dt = 1.0 / rate
    frames = []
    t, v, x = 0.0, 0.0, 0.0
    while v < target:
        a = net_acceleration(v, 1.0, False, config.aircraft, config.runway,
                             config.atmosphere)
        frames.append(frame(t, v=v, x=x, a=a, throttle=1.0))
        v_next = v + a * dt
        x += 0.5 * (v + v_next) * dt
        v = v_next
        t += dt
    frames.append(frame(t, v=v, x=x, a=0.0, throttle=1.0))
    return frames


def landing_frames_from_static_profile(config: LandingConfig,
                                       rate: float = 20.0,
                                       start_agl: float = 95.0):
    """Telemetry flying exactly the static landing assumptions.

    Constant-speed 3-degree glide crossing 50 ft over the threshold, a flare
    of exactly flare_duration with the speed ramping to the touchdown
    fraction (sink rate eased in just above the flare gate), the fixed free
    roll, then constant-rate braking to a stop.
    """
    dt = 1.0 / rate
    vref = config.vref
    tan_g = math.tan(config.glide_path)
    flare_gate = 20.0 * FT
    ease_gate = 30.0 * FT   # sink ramps down between here and the flare gate
    touchdown_speed = 0.925 * vref
    decel = braking_decel_effective(config)

    frames = []
    t = 0.0
    h = start_agl
    x = -(h - 50.0 * FT) / tan_g
    v = vref
    glide_sink = vref * tan_g
    flare_sink = flare_gate / config.flare_duration

    # descent: glide, sink easing, flare
    flare_t0 = None
    while h > 0.0:
        if h > ease_gate:
            sink = glide_sink
        elif h > flare_gate:
            w = (h - flare_gate) / (ease_gate - flare_gate)
            sink = flare_sink + w * (glide_sink - flare_sink)
        else:
            if flare_t0 is None:
                flare_t0 = t
            sink = flare_sink
            v = max(vref + (touchdown_speed - vref)
                    * (t - flare_t0) / config.flare_duration, touchdown_speed)
        frames.append(frame(t, v=v, vv=-sink, h=h, x=x, ground=False))
        x += v * dt
        h -= sink * dt
        t += dt

    # free roll then braking
    roll_end = t + config.free_roll_duration
    v = touchdown_speed
    while t < roll_end:
        frames.append(frame(t, v=v, h=0.0, x=x, ground=True))
        x += v * dt
        t += dt
    while v > 0.0:
        frames.append(frame(t, v=v, h=0.0, x=x, a=-decel, ground=True,
                            brakes=True))
        v_next = max(v - decel * dt, 0.0)
        x += 0.5 * (v + v_next) * dt
        v = v_next
        t += dt
    frames.append(frame(t, v=0.0, h=0.0, x=x, ground=True, brakes=True))
    return frames
