import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tailquad.mathutils import (
    SpatialInertia,
    angle_between,
    combine_inertias,
    inertia_about_point,
    quat_from_axis_angle,
    quat_integrate,
    quat_multiply,
    quat_normalize,
    quat_rotate,
    quat_to_matrix,
    transform_inertia,
)


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


vec3 = st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3).filter(
    lambda v: np.linalg.norm(v) > 1e-3)


class TestAngleBetween:
    def test_identical(self):
        assert angle_between((0, 0, 1), (0, 0, 1)) == 0.0

    def test_antipodal(self):
        assert angle_between((0, 0, 1), (0, 0, -1)) == pytest.approx(np.pi)

    def test_orthogonal(self):
        assert angle_between((0, 0, 1), (1, 0, 0)) == pytest.approx(np.pi / 2)

    def test_non_unit_rejected(self):
        with pytest.raises(ValueError):
            angle_between((0, 0, 2), (0, 0, 1))

    @given(vec3, vec3)
    def test_symmetric(self, a, b):
        u, v = unit(a), unit(b)
        assert angle_between(u, v) == pytest.approx(angle_between(v, u), abs=1e-12)

    @given(vec3, vec3, vec3)
    @settings(max_examples=200)
    def test_triangle_inequality(self, a, b, c):
        u, v, w = unit(a), unit(b), unit(c)
        assert angle_between(u, w) <= angle_between(u, v) + angle_between(v, w) + 1e-9

    def test_batched(self):
        u = np.array([[0, 0, 1.0], [1, 0, 0]])
        v = np.array([[0, 0, 1.0], [0, 1, 0]])
        np.testing.assert_allclose(angle_between(u, v), [0.0, np.pi / 2])


class TestQuaternion:
    def test_integrate_zero_rate_identity(self):
        q = quat_normalize([0.3, 0.5, -0.2, 0.7])
        np.testing.assert_allclose(quat_integrate(q, np.zeros(3), 0.1), q, atol=1e-15)

    def test_integrate_half_turn_yaw(self):
        # closed-form axis-angle exponential: pi about z in one second
        q = quat_integrate(np.array([1.0, 0, 0, 0]), np.array([0, 0, np.pi]), 1.0)
        expected = quat_from_axis_angle(np.array([0, 0, 1.0]), np.pi)
        np.testing.assert_allclose(q, expected, atol=1e-9)
        np.testing.assert_allclose(quat_to_matrix(q) @ [1, 0, 0], [-1, 0, 0], atol=1e-9)

    def test_flow_composition_constant_rate(self):
        q0 = quat_normalize([0.9, 0.1, -0.3, 0.2])
        w = np.array([0.4, -1.2, 0.7])
        whole = quat_integrate(q0, w, 0.02)
        halves = quat_integrate(quat_integrate(q0, w, 0.01), w, 0.01)
        np.testing.assert_allclose(whole, halves, atol=1e-12)

    def test_integrate_requires_positive_dt(self):
        with pytest.raises(ValueError):
            quat_integrate(np.array([1.0, 0, 0, 0]), np.zeros(3), 0.0)

    def test_norm_preserved_many_random_steps(self):
        rng = np.random.default_rng(11)
        q = quat_normalize(rng.normal(size=(10_000, 4)))
        w = rng.normal(scale=5.0, size=(10_000, 3))
        for _ in range(100):
            q = quat_integrate(q, w, 1e-3)
        np.testing.assert_allclose(np.linalg.norm(q, axis=-1), 1.0, atol=1e-9)

    def test_canonical_sign(self):
        q = quat_normalize([-0.5, 0.5, 0.5, 0.5])
        assert q[0] >= 0.0

    def test_rotate_matches_matrix(self):
        rng = np.random.default_rng(4)
        q = quat_normalize(rng.normal(size=4))
        v = rng.normal(size=3)
        np.testing.assert_allclose(quat_rotate(q, v), quat_to_matrix(q) @ v, atol=1e-12)

    def test_multiply_composes_rotations(self):
        rng = np.random.default_rng(5)
        qa = quat_normalize(rng.normal(size=4))
        qb = quat_normalize(rng.normal(size=4))
        np.testing.assert_allclose(
            quat_to_matrix(quat_multiply(qa, qb)),
            quat_to_matrix(qa) @ quat_to_matrix(qb), atol=1e-12)


class TestSpatialInertia:
    def box(self):
        return SpatialInertia(mass=2.0, com=[0.1, -0.2, 0.3],
                              inertia=np.diag([0.4, 0.5, 0.6]))

    def test_rejects_nonpositive_mass(self):
        with pytest.raises(ValueError):
            SpatialInertia(mass=0.0)

    def test_rejects_asymmetric(self):
        bad = np.diag([1.0, 1.0, 1.0])
        bad[0, 1] = 0.5
        with pytest.raises(ValueError):
            SpatialInertia(mass=1.0, inertia=bad)

    def test_rejects_triangle_violation(self):
        with pytest.raises(ValueError):
            SpatialInertia(mass=1.0, inertia=np.diag([0.1, 0.1, 0.5]))

    def test_identity_transform_unchanged(self):
        si = self.box()
        out = transform_inertia(si, np.eye(3), np.zeros(3))
        assert out.mass == si.mass
        np.testing.assert_allclose(out.com, si.com)
        np.testing.assert_allclose(out.inertia, si.inertia)

    def test_point_mass_parallel_axis(self):
        # near-point mass translated d: inertia about the new origin gains m d^2
        m, d = 3.0, 0.7
        tiny = SpatialInertia(mass=m, com=np.zeros(3), inertia=np.eye(3) * 1e-12)
        moved = transform_inertia(tiny, np.eye(3), [d, 0.0, 0.0])
        about_origin = inertia_about_point(moved, np.zeros(3))
        np.testing.assert_allclose(about_origin, np.diag([0.0, m * d * d, m * d * d]), atol=1e-9)

    def test_round_trip(self):
        si = self.box()
        rot = quat_to_matrix(quat_normalize([0.6, 0.4, -0.3, 0.2]))
        t = np.array([0.3, -0.1, 0.8])
        there = transform_inertia(si, rot, t)
        back = transform_inertia(there, rot.T, -rot.T @ t)
        np.testing.assert_allclose(back.com, si.com, atol=1e-9)
        np.testing.assert_allclose(back.inertia, si.inertia, atol=1e-9)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=50)
    def test_transform_preserves_positive_definiteness(self, seed):
        rng = np.random.default_rng(seed)
        d = rng.uniform(0.1, 2.0, 3)
        # enforce triangle inequality on the generated principal moments
        d = np.minimum(d, d.sum() - d)
        si = SpatialInertia(mass=rng.uniform(0.1, 5.0), com=rng.normal(size=3),
                            inertia=np.diag(d))
        rot = quat_to_matrix(quat_normalize(rng.normal(size=4)))
        out = transform_inertia(si, rot, rng.normal(size=3))
        assert np.all(np.linalg.eigvalsh(out.inertia) > 0.0)
        np.testing.assert_allclose(out.inertia, out.inertia.T, atol=1e-12)

    def test_combine_two_point_masses(self):
        a = SpatialInertia(1.0, [1.0, 0, 0], np.eye(3) * 1e-12)
        b = SpatialInertia(1.0, [-1.0, 0, 0], np.eye(3) * 1e-12)
        c = combine_inertias([a, b])
        assert c.mass == 2.0
        np.testing.assert_allclose(c.com, np.zeros(3), atol=1e-12)
        np.testing.assert_allclose(c.inertia[1, 1], 2.0, atol=1e-9)
