import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tailquad.rewards import (
    FootContactTracker,
    RewardBreakdown,
    RewardCoefficients,
    compose_total,
    foot_airtime_reward,
    general_constraint_reward,
    reorient_reward,
    turning_reward,
    update_contact_tracker,
)


def make_tracker(stance, swing, contact=None):
    stance = np.asarray(stance, dtype=float).reshape(1, 4)
    swing = np.asarray(swing, dtype=float).reshape(1, 4)
    if contact is None:
        contact = stance > swing
    return FootContactTracker(stance, swing, np.asarray(contact).reshape(1, 4))


def turning_inputs(**overrides):
    base = dict(
        v_cmd_xy=np.array([[2.0, 0.0]]),
        v_xy=np.array([[2.0, 0.0]]),
        heading_cmd=np.array([[1.0, 0.0, 0.0]]),
        heading_body=np.array([[1.0, 0.0, 0.0]]),
        w_z=np.array([0.0]),
        turn_sign=np.array([1.0]),
        tracker=make_tracker([0.1, 0.1, 0.0, 0.0], [0.0, 0.0, 0.1, 0.1]),
        foot_heights=np.full((1, 4), 0.09),
        v_z=np.array([0.0]),
        tilt_angle=np.array([0.0]),
        arm_pos=np.zeros((1, 6)),
        arm_nominal=np.zeros(6),
    )
    base.update(overrides)
    return base


class TestGeneralConstraint:
    def test_all_nominal_zero(self):
        z = np.zeros((1, 12))
        out = general_constraint_reward(z, z, z, z, z, np.zeros(12))
        for v in out.values():
            np.testing.assert_allclose(v, 0.0)

    def test_joint_position_coefficient(self):
        q = np.zeros((1, 12))
        q[0, 0] = 1.0  # squared deviation 1
        out = general_constraint_reward(q, np.zeros((1, 12)), np.zeros((1, 12)),
                                        np.zeros((1, 12)), np.zeros((1, 12)), np.zeros(12))
        assert out["r_p"][0] == pytest.approx(-4.0)

    def test_torque_coefficient(self):
        tau = np.full((1, 4), 5.0)  # ||tau||^2 = 100
        z = np.zeros((1, 4))
        out = general_constraint_reward(z, z, tau, z, z, np.zeros(4))
        assert out["r_tau"][0] == pytest.approx(-0.2)

    def test_size_mismatch_rejected(self):
        with pytest.raises(ValueError):
            general_constraint_reward(np.zeros((1, 12)), np.zeros((1, 11)),
                                      np.zeros((1, 12)), np.zeros((1, 12)),
                                      np.zeros((1, 12)), np.zeros(12))


class TestTurningReward:
    def test_perfect_velocity_tracking_run_column(self):
        terms = turning_reward("run", **turning_inputs())
        assert terms["r_v"][0] == pytest.approx(2.0)

    def test_zero_yaw_rate_turn_column(self):
        terms = turning_reward("turn", **turning_inputs())
        assert terms["r_w"][0] == pytest.approx(3.0 * (3.0 - 12.0))

    def test_high_yaw_rate_saturates(self):
        terms = turning_reward("turn", **turning_inputs(w_z=np.array([1e3])))
        assert terms["r_w"][0] == pytest.approx(9.0)

    def test_run_column_ignores_yaw_rate(self):
        fast = turning_reward("run", **turning_inputs(w_z=np.array([5.0])))
        slow = turning_reward("run", **turning_inputs(w_z=np.array([-5.0])))
        assert fast["r_w"][0] == slow["r_w"][0] == 0.0

    def test_sign_correction_rewards_commanded_direction(self):
        cw = turning_reward("turn", **turning_inputs(w_z=np.array([-3.0]),
                                                     turn_sign=np.array([-1.0])))
        ccw = turning_reward("turn", **turning_inputs(w_z=np.array([-3.0]),
                                                      turn_sign=np.array([1.0])))
        assert cw["r_w"][0] > ccw["r_w"][0]

    def test_airtime_below_cutoff(self):
        tracker = make_tracker([0.22, 0, 0, 0], [0.10, 0, 0, 0],
                               contact=[True, False, False, False])
        # other three feet have zero durations -> floor term 0.2 each
        val = foot_airtime_reward(0.5, tracker.stance, tracker.swing)
        assert val[0] == pytest.approx(0.5 * 0.22 + 3 * 0.5 * 0.2)

    def test_airtime_zero_at_cutoff(self):
        val = foot_airtime_reward(0.5, np.array([[0.30, 0.25, 0.0, 0.0]]),
                                  np.array([[0.0, 0.0, 0.3, 0.26]]))
        assert val[0] == pytest.approx(2 * 0.0 + 0.0 + 0.0)

    def test_turn_column_drops_orientation_and_arm(self):
        inputs = turning_inputs(tilt_angle=np.array([0.5]), arm_pos=np.ones((1, 6)))
        run = turning_reward("run", **inputs)
        turn = turning_reward("turn", **inputs)
        assert run["r_ori"][0] == pytest.approx(-100.0 * 0.25)
        assert run["r_arm"][0] == pytest.approx(-15.0 * 6.0)
        assert turn["r_ori"][0] == 0.0
        assert turn["r_arm"][0] == 0.0


class TestReorientReward:
    def common(self, region, **overrides):
        base = dict(
            tilt_angle=np.array([0.0]),
            v_cmd_xy=np.zeros((1, 2)),
            v_xy=np.zeros((1, 2)),
            nominal_height=0.29,
            base_height=np.array([0.29]),
            tracker=make_tracker([0.1] * 4, [0.0] * 4),
            foot_heights=np.full((1, 4), 0.09),
            arm_pos=np.zeros((1, 6)),
            arm_nominal=np.zeros(6),
        )
        base.update(overrides)
        return reorient_reward(region, **base)

    def test_air_perfect_alignment(self):
        terms = self.common("air")
        assert terms["r_ori"][0] == pytest.approx(5.0)

    def test_air_velocity_error_scores_zero(self):
        terms = self.common("air", v_xy=np.array([[3.0, 1.0]]))
        assert terms["r_v"][0] == 0.0

    def test_ground_velocity_and_height(self):
        terms = self.common("ground")
        assert terms["r_v"][0] + terms["r_h"][0] == pytest.approx(2.5 + 5.0)

    def test_ground_height_exponential(self):
        terms = self.common("ground", base_height=np.array([0.19]))
        assert terms["r_h"][0] == pytest.approx(5.0 * math.exp(-10.0 * 0.1))

    def test_yaw_rate_disabled_by_default(self):
        terms = self.common("air", tilt_angle=np.array([0.3]))
        assert terms["r_w"][0] == 0.0


class TestComposeTotal:
    def test_zero_constraints_identity(self):
        assert compose_total([5.0], [0.0]) == pytest.approx(5.0)

    def test_negative_constraint_decay(self):
        assert compose_total([5.0], [-50.0]) == pytest.approx(5.0 * math.exp(-1.0))

    def test_zero_objective_zero_total(self):
        assert compose_total([0.0], [-123.0]) == 0.0

    @given(st.floats(0.01, 10.0), st.floats(-100.0, 0.0), st.floats(-100.0, 0.0))
    @settings(max_examples=100)
    def test_monotone_in_constraints(self, pos, neg_a, neg_b):
        lo, hi = sorted([neg_a, neg_b])
        assert compose_total([pos], [lo]) <= compose_total([pos], [hi]) + 1e-15

    def test_breakdown_total_identity(self):
        rng = np.random.default_rng(0)
        task = {"r_v": rng.uniform(0, 2, 8), "r_phi": rng.uniform(0, 4, 8),
                "r_cl": -rng.uniform(0, 5, 8)}
        gen = {"r_p": -rng.uniform(0, 3, 8)}
        bd = RewardBreakdown.build(task, gen, ("r_v", "r_phi"), ("r_cl",))
        np.testing.assert_allclose(bd.total, bd.recompute_total(), atol=1e-12)
        np.testing.assert_allclose(
            bd.total, (task["r_v"] + task["r_phi"])
            * np.exp(0.02 * (task["r_cl"] + gen["r_p"])), atol=1e-12)


class TestContactTracker:
    def test_continuous_contact_accumulates(self):
        tracker = FootContactTracker.zeros(1)
        flags = np.ones((1, 4), dtype=bool)
        for _ in range(30):
            tracker = update_contact_tracker(tracker, flags, 0.01)
        np.testing.assert_allclose(tracker.stance, 0.3)
        np.testing.assert_allclose(tracker.swing, 0.0)

    def test_touchdown_resets_stance_and_freezes_swing(self):
        tracker = FootContactTracker.zeros(1)
        swing_flags = np.zeros((1, 4), dtype=bool)
        for _ in range(15):
            tracker = update_contact_tracker(tracker, swing_flags, 0.01)
        assert tracker.swing[0, 0] == pytest.approx(0.15)
        tracker = update_contact_tracker(tracker, ~swing_flags, 0.01)
        assert tracker.stance[0, 0] == pytest.approx(0.01)
        assert tracker.swing[0, 0] == pytest.approx(0.15)  # frozen until liftoff

    def test_alternating_every_step_stays_small(self):
        tracker = FootContactTracker.zeros(1)
        flags = np.zeros((1, 4), dtype=bool)
        for _ in range(20):
            flags = ~flags
            tracker = update_contact_tracker(tracker, flags, 0.01)
        assert tracker.stance.max() <= 0.01 + 1e-12
        assert tracker.swing.max() <= 0.01 + 1e-12

    def test_requires_positive_dt(self):
        with pytest.raises(ValueError):
            update_contact_tracker(FootContactTracker.zeros(1),
                                   np.ones((1, 4), dtype=bool), 0.0)


class TestCoefficients:
    def test_defaults_valid(self):
        RewardCoefficients()

    def test_sign_violation_rejected(self):
        with pytest.raises(ValueError):
            RewardCoefficients(general={"k_p": 1.0, "k_pdot": -0.005,
                                        "k_tau": -0.002, "k_s": -4.0})

    def test_override_merge(self):
        rc = RewardCoefficients().with_overrides(
            {"turning": {"turn": {"k_w": 5.0}}, "reward_factor": 0.05})
        assert rc.turning["turn"]["k_w"] == 5.0
        assert rc.turning["run"]["k_w"] == 0.0
        assert rc.reward_factor == 0.05

    def test_bounded_objectives(self):
        # objective terms never exceed their coefficients
        rng = np.random.default_rng(1)
        for _ in range(200):
            inputs = turning_inputs(
                v_xy=rng.normal(0, 3, (1, 2)),
                w_z=rng.normal(0, 4, (1,)),
                tilt_angle=rng.uniform(0, np.pi, (1,)),
            )
            terms = turning_reward("turn", **inputs)
            assert terms["r_v"][0] <= 2.0 + 1e-12
            assert terms["r_phi"][0] <= 4.5 + 1e-12
            assert -27.0 - 1e-12 <= terms["r_w"][0] <= 9.0 + 1e-12  # floored sign-corrected rate
