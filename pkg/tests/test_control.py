import numpy as np
import pytest
import torch

from tailquad.control import (
    JointHistory,
    ObservationLayout,
    PDGains,
    PolicyNetwork,
    RunningNorm,
    ValueNetwork,
    build_observation,
    gaussian_log_prob,
    pd_torque,
    policy_forward,
    scale_action,
)
from tailquad.dynamics import SimState
from tailquad.models import load_robot
from tailquad.mathutils import quat_from_axis_angle


@pytest.fixture(scope="module")
def robot():
    return load_robot("widowx250s", 2)


class TestObservation:
    def test_layout_segments_cover_exactly(self):
        layout = ObservationLayout(18, True)
        segs = sorted(layout.segments.values())
        assert segs[0][0] == 0
        for (a0, a1), (b0, b1) in zip(segs, segs[1:]):
            assert a1 == b0
        assert layout.size == 18 * 4 + 3 + 3 + 6 + 4

    def test_reset_history_equals_current(self, robot):
        tree, quad, tail, state = robot
        hist = JointHistory.reset_to(state.joint_pos)
        layout = ObservationLayout(tree.n_joints, False)
        obs = build_observation(state, hist, None, layout)
        s = layout.segments
        np.testing.assert_allclose(obs[:, s["hist_prev"][0]:s["hist_prev"][1]],
                                   state.joint_pos)
        np.testing.assert_allclose(obs[:, s["hist_prev2"][0]:s["hist_prev2"][1]],
                                   state.joint_pos)

    def test_commandless_layout_has_no_command(self):
        layout = ObservationLayout(18, False)
        a, b = layout.segments["command"]
        assert a == b == layout.size

    def test_body_frame_velocity_rotates_with_yaw(self, robot):
        tree, _, _, state = robot
        st = state.copy()
        st.base_vel[:] = [1.0, 0.0, 0.0]
        st.base_quat[:] = quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), np.pi / 2)
        hist = JointHistory.reset_to(st.joint_pos)
        layout = ObservationLayout(tree.n_joints, False)
        obs = build_observation(st, hist, None, layout)
        a, b = layout.segments["lin_vel"]
        # world +x velocity seen from a 90-degree-yawed body is -y
        np.testing.assert_allclose(obs[0, a:b], [0.0, -1.0, 0.0], atol=1e-12)

    def test_command_relative_heading(self, robot):
        tree, _, _, state = robot
        hist = JointHistory.reset_to(state.joint_pos)
        layout = ObservationLayout(tree.n_joints, True)
        cmd = {"v_x": np.full(2, 1.5), "v_y": np.zeros(2), "heading": np.full(2, np.pi / 3)}
        obs = build_observation(state, hist, cmd, layout)
        a, b = layout.segments["command"]
        np.testing.assert_allclose(obs[0, a:b],
                                   [1.5, 0.0, np.sin(np.pi / 3), np.cos(np.pi / 3)],
                                   atol=1e-12)

    def test_segments_do_not_alias(self, robot):
        tree, _, _, state = robot
        layout = ObservationLayout(tree.n_joints, False)
        hist = JointHistory.reset_to(state.joint_pos)
        base = build_observation(state, hist, None, layout)
        st = state.copy()
        st.joint_vel[:, 3] = 9.0
        changed = build_observation(st, hist, None, layout)
        diff = np.nonzero(base[0] != changed[0])[0]
        a, b = layout.segments["joint_vel"]
        assert diff.tolist() == [a + 3]


class TestActionPath:
    def test_zero_action_maps_to_nominal(self, robot):
        tree, quad, tail, _ = robot
        from tailquad.models import nominal_joint_positions
        q_nom = nominal_joint_positions(quad, tail)
        out = scale_action(np.zeros((1, 18)), q_nom, tree.joint_limits)
        np.testing.assert_allclose(out[0], q_nom)

    def test_unit_action_offsets_by_factor(self, robot):
        tree, quad, tail, _ = robot
        from tailquad.models import nominal_joint_positions
        q_nom = nominal_joint_positions(quad, tail)
        a = np.zeros((1, 18))
        a[0, 4] = 1.0
        out = scale_action(a, q_nom, tree.joint_limits)
        assert out[0, 4] == pytest.approx(q_nom[4] + 0.3)

    def test_huge_action_clamped_to_limits(self, robot):
        tree, quad, tail, _ = robot
        from tailquad.models import nominal_joint_positions
        q_nom = nominal_joint_positions(quad, tail)
        out = scale_action(np.full((1, 18), 1e3), q_nom, tree.joint_limits)
        np.testing.assert_allclose(out[0], tree.joint_limits[:, 1])

    def test_pd_zero_error_zero_torque(self):
        q = np.zeros((1, 12))
        np.testing.assert_allclose(pd_torque(q, q, q), 0.0)

    def test_pd_proportional_gain(self):
        q_des = np.full((1, 1), 0.1)
        tau = pd_torque(q_des, np.zeros((1, 1)), np.zeros((1, 1)))
        assert tau[0, 0] == pytest.approx(1.7)

    def test_pd_damping_gain(self):
        tau = pd_torque(np.zeros((1, 1)), np.zeros((1, 1)), np.ones((1, 1)))
        assert tau[0, 0] == pytest.approx(-0.4)

    def test_pd_torque_limit(self):
        tau = pd_torque(np.full((1, 1), 10.0), np.zeros((1, 1)), np.zeros((1, 1)),
                        torque_limit=17.0)
        assert tau[0, 0] == 17.0

    def test_nominal_rest_state_zero_torque(self, robot):
        tree, quad, tail, state = robot
        from tailquad.models import nominal_joint_positions
        q_nom = nominal_joint_positions(quad, tail)
        q_des = scale_action(np.zeros((2, 18)), q_nom, tree.joint_limits)
        tau = pd_torque(q_des, state.joint_pos, state.joint_vel)
        np.testing.assert_allclose(tau, 0.0, atol=1e-12)


class TestPolicyNetwork:
    def test_zero_weights_zero_mean(self):
        net = PolicyNetwork(10, 4, hidden=(16, 8), seed=0)
        with torch.no_grad():
            for p in net.mean_net.parameters():
                p.zero_()
        mean, action, _ = policy_forward(net, np.random.default_rng(0).normal(size=(5, 10)),
                                         deterministic=True)
        np.testing.assert_allclose(mean, 0.0)
        np.testing.assert_allclose(action, 0.0)

    def test_log_prob_of_mean_is_normalizer(self):
        net = PolicyNetwork(6, 3, hidden=(8,), seed=1, init_log_std=np.log(0.5))
        obs = np.random.default_rng(1).normal(size=(4, 6))
        mean, action, logp = policy_forward(net, obs, deterministic=True)
        expected = -3 * (np.log(0.5) + 0.5 * np.log(2 * np.pi))
        np.testing.assert_allclose(logp, expected, atol=1e-12)

    def test_same_seed_same_sample(self):
        net = PolicyNetwork(6, 3, hidden=(8,), seed=2)
        obs = np.random.default_rng(2).normal(size=(4, 6))
        g1 = torch.Generator().manual_seed(77)
        g2 = torch.Generator().manual_seed(77)
        _, a1, lp1 = policy_forward(net, obs, generator=g1)
        _, a2, lp2 = policy_forward(net, obs, generator=g2)
        np.testing.assert_array_equal(a1, a2)
        np.testing.assert_array_equal(lp1, lp2)

    def test_dimension_mismatch_rejected(self):
        net = PolicyNetwork(6, 3, hidden=(8,))
        with pytest.raises(ValueError):
            policy_forward(net, np.zeros((2, 7)))

    def test_forward_finite_on_many_random_draws(self):
        net = PolicyNetwork(20, 6, hidden=(32, 16), seed=3)
        obs = np.random.default_rng(3).normal(scale=50.0, size=(100_000, 20))
        with torch.no_grad():
            out = net(torch.as_tensor(obs, dtype=torch.float64))
        assert torch.isfinite(out).all()

    def test_log_prob_matches_torch_distribution(self):
        net = PolicyNetwork(5, 2, hidden=(8,), seed=4)
        obs = torch.randn(7, 5, dtype=torch.float64,
                          generator=torch.Generator().manual_seed(0))
        mean = net(obs)
        action = mean + 0.3
        dist = torch.distributions.Normal(mean, torch.exp(net.log_std))
        np.testing.assert_allclose(
            gaussian_log_prob(mean, net.log_std, action).detach().numpy(),
            dist.log_prob(action).sum(-1).detach().numpy(), atol=1e-12)


class TestValueAndNorm:
    def test_value_scalar_output(self):
        net = ValueNetwork(9, hidden=(16,))
        out = net(torch.zeros(3, 9, dtype=torch.float64))
        assert out.shape == (3,)

    def test_running_norm_converges_to_batch_stats(self):
        rng = np.random.default_rng(5)
        data = rng.normal(loc=3.0, scale=2.0, size=(10_000, 4))
        norm = RunningNorm.for_dim(4)
        for chunk in np.split(data, 10):
            norm.update(chunk)
        np.testing.assert_allclose(norm.mean, data.mean(axis=0), atol=0.02)
        np.testing.assert_allclose(np.sqrt(norm.var), data.std(axis=0), atol=0.02)

    def test_round_trip(self):
        norm = RunningNorm.for_dim(3)
        norm.update(np.random.default_rng(6).normal(size=(50, 3)))
        again = RunningNorm.from_dict(norm.to_dict())
        np.testing.assert_allclose(again.mean, norm.mean)
        np.testing.assert_allclose(again.var, norm.var)

    def test_gains_validated(self):
        with pytest.raises(ValueError):
            PDGains(kp=0.0)
