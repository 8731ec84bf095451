import math

import numpy as np
import pytest

from conftest import (frame, landing_frames_from_static_profile,
                      takeoff_frames_from_force_model)
from rwyguard.dynamics import (BrakingTable, Confidence, LandingSession,
                               Stage, TakeoffSession, is_rto,
                               landing_stage_of, throttle_above_idle)
from rwyguard.simulator import Scenario, run_scenario
from rwyguard.statics import (IntegratorConfig, compute_bdr, compute_ldr,
                              landing_segment_distances)

FT = 0.3048


class TestStartDetection:
    def test_below_threshold(self):
        assert not throttle_above_idle(frame(0.0, throttle=0.05))

    def test_above_threshold(self):
        assert throttle_above_idle(frame(0.0, throttle=0.8))

    def test_latched_in_session(self, takeoff_config, integrator):
        session = TakeoffSession(takeoff_config, integrator)
        session.step(frame(0.0, throttle=0.0))
        assert not session.started
        session.step(frame(0.05, throttle=0.5, a=1.0))
        assert session.started
        t0 = session.start_time
        # a later idle frame does not reset the latch
        session.step(frame(0.10, throttle=0.05, a=0.5))
        assert session.started and session.start_time == t0


class TestLandingStageDetection:
    def test_boundaries(self):
        # stages span half-open height bands, upper edge included
        assert landing_stage_of(300.0 * FT, False, False) is Stage.PRE_APPROACH
        assert landing_stage_of(300.0 * FT + 0.1, False, False) is None
        assert landing_stage_of(50.0 * FT + 0.01, False, False) is Stage.PRE_APPROACH
        assert landing_stage_of(50.0 * FT, False, False) is Stage.APPROACH
        assert landing_stage_of(20.0 * FT + 0.01, False, False) is Stage.APPROACH
        assert landing_stage_of(20.0 * FT, False, False) is Stage.FLARE

    def test_ground_overrides_height(self):
        assert landing_stage_of(0.4, True, False) is Stage.FREE_ROLL
        assert landing_stage_of(0.4, True, True) is Stage.LANDING_BRAKING

    def test_pure_function(self):
        for _ in range(3):
            assert landing_stage_of(30.0, False, False) is Stage.PRE_APPROACH

    def test_session_stage_never_regresses(self, landing_config):
        session = LandingSession(landing_config)
        descend = [frame(0.0, v=68, vv=-3.5, h=80.0, x=-1000, ground=False),
                   frame(0.05, v=68, vv=-3.5, h=14.0, x=-30, ground=False),
                   # altitude jitter back above the approach gate
                   frame(0.10, v=68, vv=-3.5, h=15.5, x=-25, ground=False)]
        stages = [session.step(f).procedure_stage for f in descend]
        assert stages[1] is Stage.APPROACH
        assert stages[2] is Stage.APPROACH  # no regression to PRE_APPROACH


class TestRtoDetection:
    def test_requires_all_three(self):
        assert is_rto(frame(0.0, brakes=True, throttle=0.05, ground=True))
        assert not is_rto(frame(0.0, brakes=True, throttle=0.5, ground=True))
        assert not is_rto(frame(0.0, brakes=False, throttle=0.05, ground=True))
        assert not is_rto(frame(0.0, brakes=True, throttle=0.05, ground=False))


class TestTakeoffSession:
    def test_pre_seed_echoes_static(self, takeoff_config, integrator):
        session = TakeoffSession(takeoff_config, integrator)
        snap = session.step(frame(5.0, v=14.0, x=40.0, a=2.9, throttle=1.0))
        assert snap.confidence is Confidence.SEEDING
        assert snap.dynamic_required_distance == pytest.approx(
            session.static.total)
        assert snap.delta_from_static == 0.0

    def test_margin_plus_position_is_runway_length(self, takeoff_config,
                                                    integrator):
        frames = takeoff_frames_from_force_model(takeoff_config)
        session = TakeoffSession(takeoff_config, integrator)
        for f in frames:
            snap = session.step(f)
            assert snap.stop_margin + snap.stop_position == pytest.approx(
                takeoff_config.runway.length, abs=1e-9)

    def test_polynomial_telemetry_matches_closed_form(self, aircraft, runway,
                                                      atmosphere, integrator):
        # a(t) = -0.04 t + 2.2 peaks at 60.5 m/s, so target v1 = 50:
        # t* = (110 - sqrt(110^2 - 4*2500))/2 = 32.087 s, d(t*) analytic
        from rwyguard.statics import TakeoffConfig
        cfg = TakeoffConfig(aircraft, runway, atmosphere,
                            v1=50.0, vr=55.0, v2=60.0)
        alpha, beta = -0.04, 2.2
        v1_g = cfg.v1_ground_speed

        def v(t):
            return beta * t + 0.5 * alpha * t * t

        def d(t):
            return 0.5 * beta * t * t + alpha * t ** 3 / 6.0

        t_star = min(np.roots([0.5 * alpha, beta, -v1_g]))
        assert v(t_star) == pytest.approx(v1_g)
        session = TakeoffSession(cfg, integrator)
        snap = None
        t = 0.0
        while v(t) < v1_g - 0.5:
            snap = session.step(frame(t, v=v(t), x=d(t), a=alpha * t + beta,
                                      throttle=1.0))
            t += 0.05
        assert snap.confidence >= Confidence.CONVERGING
        predicted_v1_distance = (snap.stop_position - session.bdr_at_v1
                                 - session.reaction_distance)
        assert predicted_v1_distance == pytest.approx(d(t_star), abs=1.0)

    def test_rto_constant_decel_closed_form(self, takeoff_config,
                                            integrator_no_reaction):
        session = TakeoffSession(takeoff_config, integrator_no_reaction)
        # roll long enough to latch the start, then brake at a constant 3 m/s^2
        t = 0.0
        x = 0.0
        while t < 1.0:
            session.step(frame(t, v=65.0, x=x, a=0.0, throttle=1.0))
            x += 65.0 * 0.05
            t += 0.05
        x_rto = x
        v = 65.0
        snap = None
        while v > 0.5:
            snap = session.step(frame(t, v=v, x=x, a=-3.0, throttle=0.0,
                                      brakes=True))
            t += 0.05
            v = 65.0 - 3.0 * (t - 1.0)
            x = x_rto + 65.0 * (t - 1.0) - 1.5 * (t - 1.0) ** 2
        assert snap.procedure_stage is Stage.RTO_BRAKING
        expected_stop = x_rto + 65.0 ** 2 / 6.0
        assert snap.stop_position == pytest.approx(expected_stop, abs=1.0)

    def test_rto_already_stopped(self, takeoff_config, integrator):
        session = TakeoffSession(takeoff_config, integrator)
        session.step(frame(0.0, v=30.0, x=0.0, a=2.0, throttle=1.0))
        snap = session.step(frame(0.05, v=0.0, x=500.0, throttle=0.0,
                                  brakes=True))
        assert snap.procedure_stage is Stage.RTO_BRAKING
        assert snap.stop_position == pytest.approx(500.0)

    def test_self_consistency_on_force_model_replay(self, takeoff_config,
                                                    integrator_no_reaction):
        frames = takeoff_frames_from_force_model(takeoff_config)
        session = TakeoffSession(takeoff_config, integrator_no_reaction)
        last_roll = None
        for f in frames:
            snap = session.step(f)
            if snap.procedure_stage is Stage.TAKEOFF_ROLL \
                    and snap.confidence >= Confidence.CONVERGING:
                last_roll = snap
        assert last_roll is not None
        assert abs(last_roll.delta_from_static) < 0.005

    def test_v1_reached_flag(self, takeoff_config, integrator):
        session = TakeoffSession(takeoff_config, integrator)
        session.step(frame(0.0, v=0.0, a=3.0, throttle=1.0))
        assert not session.v1_reached
        session.step(frame(0.05, v=takeoff_config.v1_ground_speed + 0.5,
                           x=700.0, a=2.0, throttle=1.0))
        assert session.v1_reached


class TestBrakingTable:
    def test_matches_integrator(self, takeoff_config, integrator):
        table = BrakingTable(takeoff_config, ceiling_speed=90.0)
        for v in (5.0, 20.0, 40.0, 65.0, 80.0):
            assert table.distance_from(v) == pytest.approx(
                compute_bdr(v, takeoff_config, integrator), abs=0.5)

    def test_zero_speed(self, takeoff_config):
        table = BrakingTable(takeoff_config, ceiling_speed=90.0)
        assert table.distance_from(0.0) == 0.0

    def test_monotone(self, takeoff_config):
        table = BrakingTable(takeoff_config, ceiling_speed=90.0)
        dists = [table.distance_from(v) for v in np.linspace(0, 85, 60)]
        assert all(b >= a for a, b in zip(dists, dists[1:]))


class TestLandingSession:
    def test_above_gate_echoes_static(self, landing_config):
        session = LandingSession(landing_config)
        snap = session.step(frame(0.0, v=68, vv=-3.5, h=150.0, x=-2500,
                                  ground=False))
        assert snap.confidence is Confidence.SEEDING
        assert snap.stop_position == pytest.approx(session.static.total)

    def test_airborne_ratio_arithmetic(self, landing_config):
        session = LandingSession(landing_config)
        snap = None
        for i in range(6):
            snap = session.step(frame(i * 0.05, v=70.0, vv=-3.0, h=45.0,
                                      x=-700.0, ground=False))
        live = landing_segment_distances(landing_config, 70.0)
        downstream = (live["approach"] + live["flare"] + live["free_roll"]
                      + live["braking"])
        d_stage = snap.stop_position - (-700.0) - downstream
        assert d_stage == pytest.approx(70.0 * (45.0 - 15.24) / 3.0, abs=0.1)

    def test_free_roll_remainder(self, landing_config):
        session = LandingSession(landing_config)
        t = 0.0
        x = 300.0
        snap = None
        while t <= 2.0001:
            snap = session.step(frame(t, v=62.0, h=0.0, x=x, ground=True))
            t += 0.05
            x += 62.0 * 0.05
        elapsed = snap and 2.0
        roll_remainder = 62.0 * (landing_config.free_roll_duration - elapsed)
        braking_est = 62.0 ** 2 / (2.0 * 2.2)
        expected = snap.stop_position - (x - 62.0 * 0.05)
        assert expected == pytest.approx(roll_remainder + braking_est, abs=0.5)

    def test_divergence_guard_holds_last(self, landing_config):
        session = LandingSession(landing_config)
        for i in range(6):
            good = session.step(frame(i * 0.05, v=68.0, vv=-3.4, h=40.0,
                                      x=-600.0, ground=False))
        # level off: vertical speed collapses to zero
        for i in range(30):
            snap = session.step(frame(0.3 + i * 0.05, v=68.0, vv=0.0, h=40.0,
                                      x=-600.0, ground=False))
        assert snap.confidence is Confidence.CONVERGING
        assert snap.stop_position == pytest.approx(good.stop_position)

    def test_margin_invariant_every_frame(self, landing_config):
        frames = landing_frames_from_static_profile(landing_config)
        session = LandingSession(landing_config)
        for f in frames:
            snap = session.step(f)
            assert snap.stop_margin + snap.stop_position == pytest.approx(
                landing_config.runway.length, abs=1e-9)

    def test_static_profile_self_consistency(self, landing_config):
        # telemetry that flies the static assumptions lands on the static
        # total; the braking-stage prediction settles within 0.5%
        frames = landing_frames_from_static_profile(landing_config)
        session = LandingSession(landing_config)
        braking = []
        t0 = None
        for f in frames:
            snap = session.step(f)
            if snap.procedure_stage is Stage.LANDING_BRAKING:
                if t0 is None:
                    t0 = f.timestamp
                braking.append((f.timestamp - t0, snap))
        late = [s for dt, s in braking if dt >= 4.0]
        assert late, "braking stage too short to judge"
        assert all(abs(s.delta_from_static) < 0.005 for s in late)

    def test_stage_handoff_continuity(self, landing_config):
        frames = landing_frames_from_static_profile(landing_config)
        session = LandingSession(landing_config)
        prev = None
        for f in frames:
            snap = session.step(f)
            if snap.confidence is Confidence.SEEDING:
                continue
            if prev is not None and snap.procedure_stage is not prev.procedure_stage:
                jump = abs(snap.stop_position - prev.stop_position)
                assert jump / prev.stop_position < 0.05, (
                    f"{prev.procedure_stage} -> {snap.procedure_stage} "
                    f"jumped {jump:.1f} m")
            prev = snap

    def test_noisy_simulated_landing_converges(self, landing_config):
        frames, truth = run_scenario(Scenario(kind="landing",
                                              landing=landing_config,
                                              noise_scale=1.0, noise_seed=21))
        session = LandingSession(landing_config)
        final = None
        for f in frames:
            final = session.step(f)
        assert final.stop_position == pytest.approx(truth.stop_position,
                                                    abs=15.0)
