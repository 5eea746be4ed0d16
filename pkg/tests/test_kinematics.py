"""Chain validation and forward kinematics against a hand-rolled 4x4 oracle."""

import math
import random

import numpy as np
import pytest

from expressforge.kinematics import (
    BaseFrame,
    ChainError,
    JointSpec,
    KinematicChain,
    chain_from_dict,
    chain_to_dict,
    clamp_to_limits,
    default_chain,
    forward_kinematics,
    link_positions,
    validate_chain,
)


# --- independent oracle: naive homogeneous-matrix composition -----------------


def _mat_mul(a, b):
    return [
        [sum(a[i][k] * b[k][j] for k in range(4)) for j in range(4)]
        for i in range(4)
    ]


def _translation(v):
    return [
        [1.0, 0.0, 0.0, v[0]],
        [0.0, 1.0, 0.0, v[1]],
        [0.0, 0.0, 1.0, v[2]],
        [0.0, 0.0, 0.0, 1.0],
    ]


def _axis_angle(axis, angle_deg):
    ux, uy, uz = axis
    t = math.radians(angle_deg)
    c, s = math.cos(t), math.sin(t)
    ic = 1 - c
    return [
        [c + ux * ux * ic, ux * uy * ic - uz * s, ux * uz * ic + uy * s, 0.0],
        [uy * ux * ic + uz * s, c + uy * uy * ic, uy * uz * ic - ux * s, 0.0],
        [uz * ux * ic - uy * s, uz * uy * ic + ux * s, c + uz * uz * ic, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]


def oracle_fk(chain, angles_deg):
    m = [[float(chain.base_frame.matrix()[i][j]) for j in range(4)] for i in range(4)]
    for joint, angle in zip(chain.joints, angles_deg):
        m = _mat_mul(m, _translation(joint.link_offset_mm))
        m = _mat_mul(m, _axis_angle(joint.rotation_axis, angle))
    position = [m[i][3] for i in range(3)]
    orientation = [[m[i][j] for j in range(3)] for i in range(3)]
    return position, orientation


def _random_chain(rng, n_joints):
    axes = [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)]
    joints = tuple(
        JointSpec(
            name=f"j{i}",
            link_offset_mm=(
                rng.uniform(-100, 100),
                rng.uniform(-100, 100),
                rng.uniform(0, 150),
            ),
            rotation_axis=rng.choice(axes),
            min_deg=-170.0,
            max_deg=170.0,
        )
        for i in range(n_joints)
    )
    return KinematicChain(name=f"test-{n_joints}", joints=joints)


# --- validation ----------------------------------------------------------------


class TestValidateChain:
    def test_default_chain_is_valid(self):
        assert validate_chain(default_chain()) == []

    def test_degenerate_limits_named(self):
        chain = default_chain()
        joints = list(chain.joints)
        joints[2] = JointSpec(joints[2].name, joints[2].link_offset_mm,
                              joints[2].rotation_axis, 0.0, 0.0)
        report = validate_chain(KinematicChain("bad", tuple(joints)))
        assert len(report) == 1
        assert joints[2].name in report[0]
        assert "degenerate limits" in report[0]

    def test_non_unit_axis_reported(self):
        joint = JointSpec("j1", (0, 0, 50), (0.0, 0.0, 2.0), -90, 90)
        report = validate_chain(KinematicChain("bad", (joint,)))
        assert any("non-unit axis" in p for p in report)

    def test_duplicate_names_and_empty_chain(self):
        j = JointSpec("same", (0, 0, 1), (0, 0, 1.0), -10, 10)
        assert any("duplicate" in p for p in validate_chain(KinematicChain("d", (j, j))))
        assert validate_chain(KinematicChain("e", ())) == ["chain has no joints"]


# --- forward kinematics ----------------------------------------------------------


class TestForwardKinematics:
    def test_zero_angles_sum_offsets(self, chain):
        pose = forward_kinematics(chain, [0.0] * 6)
        expected = np.sum([j.link_offset_mm for j in chain.joints], axis=0)
        np.testing.assert_allclose(pose.position_mm, expected, atol=1e-12)
        np.testing.assert_allclose(pose.orientation, np.eye(3), atol=1e-12)

    def test_single_joint_quarter_turn(self):
        # offset (100,0,0) then rotate 90 deg about z: the offset is applied
        # before the rotation, so the position stays on the x axis while the
        # frame turns. Expected matrix computed by hand:
        #   T = Trans(100,0,0) @ Rz(90)
        joint = JointSpec("j1", (100.0, 0.0, 0.0), (0.0, 0.0, 1.0), -180, 180)
        chain = KinematicChain("one", (joint,))
        pose = forward_kinematics(chain, [90.0])
        np.testing.assert_allclose(pose.position_mm, [100.0, 0.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(
            pose.orientation,
            [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
            atol=1e-12,
        )
        # and a second link offset now moves along the rotated frame's x = +y
        joint2 = JointSpec("j2", (50.0, 0.0, 0.0), (0.0, 0.0, 1.0), -180, 180)
        chain2 = KinematicChain("two", (joint, joint2))
        pose2 = forward_kinematics(chain2, [90.0, 0.0])
        np.testing.assert_allclose(pose2.position_mm, [100.0, 50.0, 0.0], atol=1e-12)

    def test_out_of_limits_names_joint(self, chain):
        q = [0.0] * 6
        q[0] = 200.0
        with pytest.raises(ChainError, match=r"joint 0 .*200.*165"):
            forward_kinematics(chain, q)

    def test_length_mismatch(self, chain):
        with pytest.raises(ChainError, match="3 angles"):
            forward_kinematics(chain, [0.0, 0.0, 0.0])

    def test_determinism_bitwise(self, chain):
        rng = random.Random(7)
        q = [rng.uniform(-160, 160) for _ in range(6)]
        a = forward_kinematics(chain, q)
        b = forward_kinematics(chain, q)
        assert a.position_mm.tobytes() == b.position_mm.tobytes()
        assert a.orientation.tobytes() == b.orientation.tobytes()

    def test_matches_oracle_on_random_small_chains(self):
        rng = random.Random(42)
        for _ in range(300):
            chain = _random_chain(rng, rng.randint(1, 3))
            q = [rng.uniform(-170, 170) for _ in chain.joints]
            pose = forward_kinematics(chain, q)
            position, orientation = oracle_fk(chain, q)
            np.testing.assert_allclose(pose.position_mm, position, atol=1e-9)
            np.testing.assert_allclose(pose.orientation, orientation, atol=1e-9)

    def test_orientation_orthonormal_on_random_configs(self, chain):
        rng = random.Random(9)
        for _ in range(1000):
            q = [rng.uniform(j.min_deg, j.max_deg) for j in chain.joints]
            pose = forward_kinematics(chain, q)
            np.testing.assert_allclose(
                pose.orientation.T @ pose.orientation, np.eye(3), atol=1e-6
            )
            assert abs(np.linalg.det(pose.orientation) - 1.0) < 1e-6

    def test_link_positions_end_matches_fk(self, chain):
        rng = random.Random(11)
        q = [rng.uniform(-150, 150) for _ in range(6)]
        points = link_positions(chain, q)
        assert len(points) == 7
        pose = forward_kinematics(chain, q)
        np.testing.assert_allclose(points[-1], pose.position_mm, atol=1e-9)

    def test_base_frame_offset_applied(self):
        joint = JointSpec("j1", (0.0, 0.0, 100.0), (0.0, 0.0, 1.0), -90, 90)
        chain = KinematicChain(
            "based", (joint,), BaseFrame(position_mm=(5.0, 6.0, 7.0))
        )
        pose = forward_kinematics(chain, [0.0])
        np.testing.assert_allclose(pose.position_mm, [5.0, 6.0, 107.0], atol=1e-12)


# --- clamping -------------------------------------------------------------------


class TestClamp:
    def test_in_range_unchanged(self, chain):
        q = [10.0, -20.0, 0.0, 45.0, -45.0, 160.0]
        assert clamp_to_limits(chain, q) == q

    def test_upper_clamp(self, chain):
        q = [200.0] + [0.0] * 5
        assert clamp_to_limits(chain, q)[0] == 165.0

    def test_idempotent_and_valid_on_random_inputs(self, chain):
        rng = random.Random(3)
        for _ in range(1000):
            q = [rng.uniform(-400, 400) for _ in range(6)]
            once = clamp_to_limits(chain, q)
            assert clamp_to_limits(chain, once) == once
            for joint, angle in zip(chain.joints, once):
                assert joint.min_deg <= angle <= joint.max_deg

    def test_length_mismatch(self, chain):
        with pytest.raises(ChainError):
            clamp_to_limits(chain, [0.0])


# --- serialization ----------------------------------------------------------------


class TestChainJson:
    def test_round_trip(self, chain):
        data = chain_to_dict(chain)
        assert data["schema"] == "chain/1"
        assert chain_from_dict(data) == chain

    def test_bad_schema_rejected(self, chain):
        data = chain_to_dict(chain)
        data["schema"] = "chain/999"
        with pytest.raises(ChainError, match="schema"):
            chain_from_dict(data)

    def test_invalid_chain_rejected_on_load(self, chain):
        data = chain_to_dict(chain)
        data["joints"][0]["rotation_axis"] = [0, 0, 2]
        with pytest.raises(ChainError, match="non-unit axis"):
            chain_from_dict(data)
