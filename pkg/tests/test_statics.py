import dataclasses
import math

import pytest

from rwyguard.forces import AtmosphereParams, G, RunwayParams
from rwyguard.presets import aircraft_preset
from rwyguard.statics import (DistanceBreakdown, IntegratorConfig,
                              LandingConfig, NonConvergence, TakeoffConfig,
                              compute_asdr, compute_bdr, compute_ldr,
                              integrate_to_speed)


def constant_accel_aircraft(accel: float, mass: float = 70000.0):
    """Drag-free, friction-free aircraft with speed-independent thrust."""
    return aircraft_preset(
        mass=mass, max_static_thrust=accel * mass, thrust_speed_slope=0.0,
        idle_thrust=0.0, rolling_friction_mu=0.0,
        drag_coefficient_ground=0.0, lift_coefficient_ground=0.0)


def constant_decel_config(decel: float, v1: float = 65.0):
    """Braking deceleration equals `decel` at any speed (no aero terms)."""
    mass = 70000.0
    aircraft = aircraft_preset(
        mass=mass, max_static_thrust=3.0 * mass, thrust_speed_slope=0.0,
        idle_thrust=0.0, drag_coefficient_ground=0.0,
        lift_coefficient_ground=0.0, rolling_friction_mu=0.0,
        braking_friction_mu=decel / G)
    return TakeoffConfig(aircraft, RunwayParams(length=4000.0),
                         AtmosphereParams(), v1=v1, vr=v1 + 5, v2=v1 + 10)


class TestIntegrateToSpeed:
    def test_constant_accel_matches_closed_form(self):
        cfg = TakeoffConfig(constant_accel_aircraft(2.0),
                            RunwayParams(length=4000.0), AtmosphereParams(),
                            v1=60.0, vr=65.0, v2=70.0)
        d, t = integrate_to_speed(0.0, 60.0, 1.0, False, cfg,
                                  IntegratorConfig())
        assert d == pytest.approx(60.0 ** 2 / (2 * 2.0), abs=1.0)
        assert t == pytest.approx(30.0, abs=0.05)

    def test_degenerate_interval(self, takeoff_config, integrator):
        assert integrate_to_speed(30.0, 30.0, 1.0, False, takeoff_config,
                                  integrator) == (0.0, 0.0)

    def test_dt_refinement_changes_little(self, takeoff_config):
        coarse, _ = integrate_to_speed(0.0, 65.0, 1.0, False, takeoff_config,
                                       IntegratorConfig(dt=0.05))
        fine, _ = integrate_to_speed(0.0, 65.0, 1.0, False, takeoff_config,
                                     IntegratorConfig(dt=0.025))
        assert abs(coarse - fine) < 1.0

    def test_closed_form_across_distances(self):
        # within 1 m of v^2/2a out to 3000 m
        for accel, target in ((2.0, 109.5), (1.5, 80.0), (3.0, 60.0)):
            cfg = TakeoffConfig(constant_accel_aircraft(accel),
                                RunwayParams(length=8000.0), AtmosphereParams(),
                                v1=target, vr=target + 5, v2=target + 10)
            d, _ = integrate_to_speed(0.0, target, 1.0, False, cfg,
                                      IntegratorConfig())
            assert abs(d - target ** 2 / (2 * accel)) < 1.0

    def test_deceleration_closed_form(self):
        cfg = constant_decel_config(3.0)
        d, _ = integrate_to_speed(65.0, 0.0, 0.0, True, cfg, IntegratorConfig())
        assert d == pytest.approx(65.0 ** 2 / 6.0, abs=1.0)

    def test_nonconvergence_when_unreachable(self):
        import types
        # thrust too weak to ever reach 80 m/s
        weak = aircraft_preset(max_static_thrust=30000.0, idle_thrust=500.0)
        env = types.SimpleNamespace(aircraft=weak,
                                    runway=RunwayParams(length=4000.0),
                                    atmosphere=AtmosphereParams())
        with pytest.raises(NonConvergence):
            integrate_to_speed(0.0, 80.0, 1.0, False, env, IntegratorConfig())


class TestComputeAsdr:
    def test_reaction_segment_arithmetic(self, takeoff_config):
        with_reaction = compute_asdr(takeoff_config,
                                     IntegratorConfig(reaction_time_at_v1=2.0))
        without = compute_asdr(takeoff_config,
                               IntegratorConfig(reaction_time_at_v1=0.0))
        assert with_reaction.total - without.total == pytest.approx(
            65.0 * 2.0, abs=1e-9)
        labels = [s[0] for s in with_reaction.segments]
        assert labels == ["accelerate", "reaction", "brake"]
        assert [s[0] for s in without.segments] == ["accelerate", "brake"]

    def test_total_is_segment_sum(self, takeoff_config, integrator):
        bd = compute_asdr(takeoff_config, integrator)
        assert bd.total == pytest.approx(sum(d for _, d in bd.segments))

    def test_monotone_in_v1(self, aircraft, runway, atmosphere, integrator):
        totals = []
        for v1 in (55.0, 60.0, 65.0, 70.0):
            cfg = TakeoffConfig(aircraft, runway, atmosphere,
                                v1=v1, vr=v1 + 5, v2=v1 + 10)
            totals.append(compute_asdr(cfg, integrator).total)
        assert totals == sorted(totals)

    def test_monotone_in_mass(self, runway, atmosphere, integrator):
        totals = []
        for mass in (60000.0, 66000.0, 72000.0, 78000.0):
            cfg = TakeoffConfig(aircraft_preset(mass=mass), runway, atmosphere,
                                v1=65.0, vr=70.0, v2=75.0)
            totals.append(compute_asdr(cfg, integrator).total)
        assert totals == sorted(totals)

    def test_monotone_in_tailwind(self, aircraft, atmosphere, integrator):
        totals = []
        for headwind in (10.0, 5.0, 0.0, -5.0):
            r = RunwayParams(length=2900.0, headwind=headwind)
            cfg = TakeoffConfig(aircraft, r, atmosphere,
                                v1=65.0, vr=70.0, v2=75.0)
            totals.append(compute_asdr(cfg, integrator).total)
        assert totals == sorted(totals)

    def test_exceeds_runway_flag(self, aircraft, atmosphere, integrator):
        short = RunwayParams(length=900.0)
        cfg = TakeoffConfig(aircraft, short, atmosphere,
                            v1=65.0, vr=70.0, v2=75.0)
        assert compute_asdr(cfg, integrator).exceeds_runway

    def test_v1_achievability_enforced(self, runway, atmosphere):
        weak = aircraft_preset(max_static_thrust=30000.0, idle_thrust=500.0)
        with pytest.raises(ValueError, match="achievable"):
            TakeoffConfig(weak, runway, atmosphere, v1=80.0, vr=85.0, v2=90.0)


class TestComputeBdr:
    def test_zero_speed(self, takeoff_config, integrator):
        assert compute_bdr(0.0, takeoff_config, integrator) == 0.0

    def test_equals_asdr_brake_segment_at_v1(self, takeoff_config):
        integ = IntegratorConfig(reaction_time_at_v1=0.0)
        asdr = compute_asdr(takeoff_config, integ)
        brake = dict(asdr.segments)["brake"]
        assert compute_bdr(65.0, takeoff_config, integ) == pytest.approx(brake)

    def test_monotone_in_speed(self, takeoff_config, integrator):
        prev = -1.0
        for v in range(0, 81, 5):
            d = compute_bdr(float(v), takeoff_config, integrator)
            assert d > prev or (v == 0 and d == 0.0)
            prev = d


class TestComputeLdr:
    def test_approach_geometry(self, landing_config):
        bd = compute_ldr(landing_config)
        approach = dict(bd.segments)["approach"]
        assert approach == pytest.approx(9.144 / math.tan(0.05236), abs=0.2)
        assert approach == pytest.approx(174.5, abs=0.2)

    def test_free_roll(self, landing_config):
        free_roll = dict(compute_ldr(landing_config).segments)["free_roll"]
        assert free_roll == pytest.approx(0.925 * 68.0 * 3.5, abs=0.05)

    def test_braking_segment(self, landing_config):
        braking = dict(compute_ldr(landing_config).segments)["braking"]
        assert braking == pytest.approx((0.925 * 68.0) ** 2 / 4.4, abs=0.1)

    def test_flare_segment(self, landing_config):
        flare = dict(compute_ldr(landing_config).segments)["flare"]
        assert flare == pytest.approx(0.98 * 68.0 * 5.0, abs=1e-9)

    def test_monotone_in_vref(self, landing_aircraft, runway, atmosphere):
        totals = [compute_ldr(LandingConfig(landing_aircraft, runway,
                                            atmosphere, vref=v)).total
                  for v in (60.0, 65.0, 70.0, 75.0)]
        assert totals == sorted(totals)

    def test_decreasing_in_autobrake(self, landing_aircraft, runway, atmosphere):
        totals = [compute_ldr(LandingConfig(landing_aircraft, runway,
                                            atmosphere, vref=68.0,
                                            autobrake_decel=d)).total
                  for d in (1.2, 1.5, 2.2, 3.0)]
        assert totals == sorted(totals, reverse=True)

    def test_slope_folds_into_braking(self, landing_aircraft, atmosphere):
        level = compute_ldr(LandingConfig(
            landing_aircraft, RunwayParams(length=2900.0), atmosphere,
            vref=68.0, autobrake_decel=2.2))
        uphill = compute_ldr(LandingConfig(
            landing_aircraft, RunwayParams(length=2900.0, slope=0.02),
            atmosphere, vref=68.0, autobrake_decel=2.2))
        vt = 0.925 * 68.0
        expected = vt ** 2 / (2 * (2.2 + G * math.sin(0.02)))
        assert dict(uphill.segments)["braking"] == pytest.approx(expected)
        assert uphill.total < level.total


class TestDistanceBreakdown:
    def test_total_must_match(self):
        with pytest.raises(ValueError):
            DistanceBreakdown((("a", 10.0), ("b", 5.0)), total=16.0)

    def test_negative_segment_rejected(self):
        with pytest.raises(ValueError):
            DistanceBreakdown((("a", -1.0),), total=-1.0)
