import numpy as np
import pytest

from tailquad.configio import ConfigError, load_config, model_config_path, save_config
from tailquad.dynamics import forward_kinematics
from tailquad.models import (
    build_robot,
    load_quadruped_spec,
    load_robot,
    load_tail_spec,
    nominal_joint_positions,
    nominal_state,
    quadruped_spec_from_config,
    tail_inertia_about_mount,
)


class TestBuildRobot:
    def test_no_tail_twelve_joints(self):
        quad = load_quadruped_spec()
        tree = build_robot(quad)
        assert tree.n_joints == 12
        leg_mass = sum(quad.leg_masses.values())
        assert tree.total_mass == pytest.approx(quad.base_mass + 4 * leg_mass)

    def test_widowx_mass_and_reach(self):
        quad = load_quadruped_spec()
        tail = load_tail_spec("widowx250s")
        tree = build_robot(quad, tail)
        assert tree.n_joints == 18
        tail_mass = tree.mass[[i for i, n in enumerate(tree.names) if n.startswith("tail_")]]
        assert tail_mass.sum() == pytest.approx(2.35)
        # chain reach: straightened tail tip sits total_length from the mount
        from tailquad.dynamics import SimState
        kin = forward_kinematics(tree, SimState.zeros(tree, 1))
        mount = kin.link_pos[0, tree.names.index("tail_0")]
        tip = kin.markers["tail_tip"][0]
        assert np.linalg.norm(tip - mount) == pytest.approx(1.3)

    def test_viperx_mass_and_reach(self):
        quad = load_quadruped_spec()
        tail = load_tail_spec("viperx300s")
        tree = build_robot(quad, tail)
        tail_mass = tree.mass[[i for i, n in enumerate(tree.names) if n.startswith("tail_")]]
        assert tail_mass.sum() == pytest.approx(3.6)
        from tailquad.dynamics import SimState
        kin = forward_kinematics(tree, SimState.zeros(tree, 1))
        mount = kin.link_pos[0, tree.names.index("tail_0")]
        tip = kin.markers["tail_tip"][0]
        assert np.linalg.norm(tip - mount) == pytest.approx(1.5)

    def test_tail_mounted_rear_pointing_backward(self):
        tree, _, _, _ = load_robot("widowx250s")
        from tailquad.dynamics import SimState
        kin = forward_kinematics(tree, SimState.zeros(tree, 1))
        tip = kin.markers["tail_tip"][0]
        assert tip[0] < -0.19  # straightened tail extends behind the trunk

    def test_invalid_variant_rejected(self):
        with pytest.raises(ConfigError):
            load_robot("bigdog")


class TestNominalState:
    def test_joints_at_nominal_zero_velocity(self):
        tree, quad, tail, state = load_robot("viperx300s")
        np.testing.assert_allclose(state.joint_pos[0], nominal_joint_positions(quad, tail))
        np.testing.assert_allclose(state.joint_vel, 0.0)
        np.testing.assert_allclose(state.base_vel, 0.0)
        np.testing.assert_allclose(state.base_ang_vel, 0.0)

    def test_feet_on_ground_plane(self):
        tree, quad, tail, state = load_robot("widowx250s")
        kin = forward_kinematics(tree, state)
        for name in ("foot_FL", "foot_FR", "foot_RL", "foot_RR"):
            assert abs(kin.markers[name][0, 2]) < 0.01

    def test_tail_folded_over_body(self):
        tree, quad, tail, state = load_robot("widowx250s")
        kin = forward_kinematics(tree, state)
        tip = kin.markers["tail_tip"][0]
        assert abs(tip[0]) < 0.6 and tip[2] > state.base_pos[0, 2]

    def test_wrong_tree_rejected(self):
        quad = load_quadruped_spec()
        tail = load_tail_spec("widowx250s")
        bare = build_robot(quad)
        with pytest.raises(ConfigError):
            nominal_state(bare, quad, tail)


class TestTailAuthority:
    def test_viper_strictly_larger_inertia_about_mount(self):
        quad = load_quadruped_spec()
        widow_tree = build_robot(quad, load_tail_spec("widowx250s"))
        viper_tree = build_robot(quad, load_tail_spec("viperx300s"))
        i_widow = tail_inertia_about_mount(widow_tree, load_tail_spec("widowx250s"))
        i_viper = tail_inertia_about_mount(viper_tree, load_tail_spec("viperx300s"))
        assert i_viper > i_widow


class TestConfigRoundTrip:
    def test_model_config_round_trip(self, tmp_path):
        tree = load_config(model_config_path("minicheetah"))
        out = tmp_path / "copy.cfg"
        save_config(tree, out)
        again = load_config(out)
        assert again == tree
        spec_a = quadruped_spec_from_config(tree)
        spec_b = quadruped_spec_from_config(again)
        assert spec_a.nominal_height == spec_b.nominal_height
        np.testing.assert_allclose(spec_a.leg_nominal, spec_b.leg_nominal)

    def test_includes_merge(self, tmp_path):
        base = tmp_path / "base.cfg"
        base.write_text("a: 1\nnested: {x: 1, y: 2}\n")
        top = tmp_path / "top.cfg"
        top.write_text("include: base.cfg\nnested: {y: 3}\nb: 2\n")
        tree = load_config(top)
        assert tree == {"a": 1, "nested": {"x": 1, "y": 3}, "b": 2}

    def test_missing_file_is_config_error(self):
        with pytest.raises(ConfigError):
            load_config("/nonexistent/path.cfg")
