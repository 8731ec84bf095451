"""Longitudinal force model for an aircraft rolling on a runway.

Four forces act along the runway axis: thrust, aerodynamic drag, wheel
friction (normal force reduced by lift) and the along-slope component of
weight.  Net acceleration follows from Newton's second law.  All functions
here are pure over immutable parameter bundles and safe to call from any
thread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

G = 9.80665  # m/s^2, standard gravity

# Sign convention: forces positive when they oppose nothing, i.e. thrust is
# positive forward, drag/friction are returned as positive magnitudes and
# subtracted in net_acceleration, slope gravity is signed (positive uphill).


@dataclass(frozen=True)
class AircraftParams:
    """Physical configuration of the aircraft on the ground.

    Thrust decays affinely with ground speed and is floored at half the
    static rating; coefficients are per flap detent and are calibration
    inputs, not ground truth.
    """

    mass: float                      # kg
    wing_area: float                 # m^2
    drag_coefficient_ground: float   # Cd in ground run, per flap setting
    lift_coefficient_ground: float   # Cl in ground run, per flap setting
    max_static_thrust: float         # N, all engines at sea-level static
    thrust_speed_slope: float        # N per (m/s), >= 0
    idle_thrust: float               # N
    rolling_friction_mu: float
    braking_friction_mu: float
    flap_setting: str = "5"          # detent label, informational

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError("mass must be > 0")
        if self.wing_area <= 0:
            raise ValueError("wing_area must be > 0")
        if not (0 <= self.rolling_friction_mu < self.braking_friction_mu <= 1):
            raise ValueError("need 0 <= rolling mu < braking mu <= 1")
        if not (self.max_static_thrust > self.idle_thrust >= 0):
            raise ValueError("need max_static_thrust > idle_thrust >= 0")
        if self.thrust_speed_slope < 0:
            raise ValueError("thrust_speed_slope must be >= 0")


@dataclass(frozen=True)
class RunwayParams:
    length: float          # m
    slope: float = 0.0     # rad, positive = uphill in direction of motion
    elevation: float = 0.0  # m
    headwind: float = 0.0  # m/s, positive = headwind

    def __post_init__(self):
        if self.length <= 0:
            raise ValueError("runway length must be > 0")
        if abs(self.slope) >= 0.05:
            raise ValueError("|slope| must be < 0.05 rad")
        if not (-25.0 <= self.headwind <= 25.0):
            raise ValueError("headwind must be within [-25, +25] m/s")


@dataclass(frozen=True)
class AtmosphereParams:
    air_density: float = 1.225  # kg/m^3
    temperature: float = 288.15  # K
    gravity: float = field(default=G)

    def __post_init__(self):
        if not (0.5 < self.air_density <= 1.5):
            raise ValueError("air_density must be in (0.5, 1.5] kg/m^3")
        if self.gravity != G:
            raise ValueError("gravity is fixed at 9.80665 m/s^2")


def airspeed(ground_speed: float, runway: RunwayParams) -> float:
    """Relative wind speed for the aerodynamic terms, clamped at zero."""
    return max(ground_speed + runway.headwind, 0.0)


def ground_speed_for(airspeed_: float, runway: RunwayParams) -> float:
    """Ground speed at which the given airspeed is flown (reference speeds
    like V1 and Vref are airspeeds)."""
    return airspeed_ - runway.headwind


def thrust_force(ground_speed: float, throttle_fraction: float,
                 aircraft: AircraftParams) -> float:
    """Net thrust at the given ground speed and lever position.

    Full-rating thrust decays affinely with speed and never drops below
    half the static rating; the lever interpolates between idle and that
    full-rating curve.
    """
    full = max(aircraft.max_static_thrust
               - aircraft.thrust_speed_slope * ground_speed,
               0.5 * aircraft.max_static_thrust)
    return throttle_fraction * full + (1.0 - throttle_fraction) * aircraft.idle_thrust


def drag_force(airspeed_: float, atmosphere: AtmosphereParams,
               aircraft: AircraftParams) -> float:
    """Quadratic aerodynamic drag 0.5*rho*V^2*S*Cd, V being airspeed."""
    return (0.5 * atmosphere.air_density * airspeed_ * airspeed_
            * aircraft.wing_area * aircraft.drag_coefficient_ground)


def _lift(airspeed_: float, atmosphere: AtmosphereParams,
          aircraft: AircraftParams) -> float:
    return (0.5 * atmosphere.air_density * airspeed_ * airspeed_
            * aircraft.wing_area * aircraft.lift_coefficient_ground)


def friction_force(ground_speed: float, braking: bool,
                   atmosphere: AtmosphereParams, aircraft: AircraftParams,
                   runway: RunwayParams) -> float:
    """Wheel friction on the runway.

    The normal force is weight (along the runway normal) minus lift and is
    clamped at zero, so friction vanishes once lift carries the aircraft.
    """
    v_air = airspeed(ground_speed, runway)
    normal = max(aircraft.mass * atmosphere.gravity * math.cos(runway.slope)
                 - _lift(v_air, atmosphere, aircraft), 0.0)
    mu = aircraft.braking_friction_mu if braking else aircraft.rolling_friction_mu
    return mu * normal


def slope_gravity_force(aircraft: AircraftParams, runway: RunwayParams) -> float:
    """Along-slope weight component, positive when it opposes uphill motion."""
    return aircraft.mass * G * math.sin(runway.slope)


def net_acceleration(ground_speed: float, throttle: float, braking: bool,
                     aircraft: AircraftParams, runway: RunwayParams,
                     atmosphere: AtmosphereParams) -> float:
    """(thrust - drag - friction - slope gravity) / mass."""
    v_air = airspeed(ground_speed, runway)
    total = (thrust_force(ground_speed, throttle, aircraft)
             - drag_force(v_air, atmosphere, aircraft)
             - friction_force(ground_speed, braking, atmosphere, aircraft, runway)
             - slope_gravity_force(aircraft, runway))
    return total / aircraft.mass
