"""Named parameter presets and JSON configuration loading.

Presets are calibration inputs tuned to produce plausible twin-jet
narrow-body distances; they are configuration, not certified performance
data.  The JSON schema is documented in docs/config_schema.md.
"""

from __future__ import annotations

import json
from pathlib import Path

from .forces import AircraftParams, AtmosphereParams, RunwayParams

# (Cd, Cl) in the ground run per flap detent.
FLAP_TABLE = {
    "1":  (0.055, 0.35),
    "5":  (0.065, 0.50),
    "15": (0.080, 0.75),
    "25": (0.095, 0.95),
    "30": (0.105, 1.05),
    "40": (0.125, 1.20),
}

# Autobrake detent -> commanded steady deceleration, m/s^2.
AUTOBRAKE_TABLE = {
    "AB1": 1.2,
    "AB2": 1.5,
    "AB3": 2.2,
    "MAX": 3.0,
}

# Twin-engine narrow-body airliner, mid takeoff weight.
NARROWBODY = dict(
    mass=70000.0,
    wing_area=124.6,
    max_static_thrust=240000.0,
    thrust_speed_slope=400.0,
    idle_thrust=8000.0,
    rolling_friction_mu=0.02,
    braking_friction_mu=0.40,
)


def aircraft_preset(name: str = "narrowbody", flap_setting: str = "5",
                    **overrides) -> AircraftParams:
    """Build an AircraftParams from a named preset and a flap detent."""
    if name != "narrowbody":
        raise KeyError(f"unknown aircraft preset: {name!r}")
    if flap_setting not in FLAP_TABLE:
        raise KeyError(f"unknown flap detent: {flap_setting!r}")
    cd, cl = FLAP_TABLE[flap_setting]
    params = dict(NARROWBODY, drag_coefficient_ground=cd,
                  lift_coefficient_ground=cl, flap_setting=flap_setting)
    params.update(overrides)
    return AircraftParams(**params)


def autobrake_decel(detent: str) -> float:
    if detent not in AUTOBRAKE_TABLE:
        raise KeyError(f"unknown autobrake detent: {detent!r}")
    return AUTOBRAKE_TABLE[detent]


def load_config_file(path: str | Path) -> dict:
    """Load aircraft/runway/atmosphere bundles from a JSON preset file.

    Returns a dict with whichever of the keys "aircraft", "runway",
    "atmosphere" the file defines, as constructed parameter objects.
    """
    with open(path) as f:
        raw = json.load(f)
    out = {}
    if "aircraft" in raw:
        a = dict(raw["aircraft"])
        flap = str(a.pop("flap_setting", "5"))
        preset = a.pop("preset", "narrowbody")
        out["aircraft"] = aircraft_preset(preset, flap, **a)
    if "runway" in raw:
        out["runway"] = RunwayParams(**raw["runway"])
    if "atmosphere" in raw:
        out["atmosphere"] = AtmosphereParams(**raw["atmosphere"])
    return out
