"""Virtual serial-arm model: chain validation, forward kinematics, joint limits.

The arm is described as an ordered list of joints. Each joint first
translates along its fixed link offset, then rotates about its axis by the
commanded angle, so the end-effector pose is

    base @ T(offset_1) @ R(axis_1, q_1) @ ... @ T(offset_n) @ R(axis_n, q_n)

Angles are degrees at every public boundary and radians internally. All
functions here are pure: same inputs give bitwise-identical outputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

CHAIN_SCHEMA = "chain/1"

AXIS_UNIT_TOL = 1e-9


class ChainError(ValueError):
    """Raised for joint-vector/chain mismatches and limit violations."""


@dataclass(frozen=True)
class JointSpec:
    """One revolute joint: fixed link offset, rotation axis and limits."""

    name: str
    link_offset_mm: tuple[float, float, float]
    rotation_axis: tuple[float, float, float]
    min_deg: float
    max_deg: float


@dataclass(frozen=True)
class BaseFrame:
    position_mm: tuple[float, float, float] = (0.0, 0.0, 0.0)
    rotation_rpy_deg: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = _rpy_matrix(*self.rotation_rpy_deg)
        m[:3, 3] = self.position_mm
        return m


@dataclass(frozen=True)
class KinematicChain:
    name: str
    joints: tuple[JointSpec, ...]
    base_frame: BaseFrame = BaseFrame()

    def __len__(self) -> int:
        return len(self.joints)

    def joint_names(self) -> list[str]:
        return [j.name for j in self.joints]


@dataclass(frozen=True)
class Pose:
    """End-effector position (mm) and orientation as a 3x3 rotation matrix."""

    position_mm: np.ndarray
    orientation: np.ndarray


def _rpy_matrix(roll_deg: float, pitch_deg: float, yaw_deg: float) -> np.ndarray:
    """Rotation from roll/pitch/yaw about fixed x/y/z axes (Rz @ Ry @ Rx)."""
    r, p, y = (math.radians(a) for a in (roll_deg, pitch_deg, yaw_deg))
    cr, sr = math.cos(r), math.sin(r)
    cp, sp = math.cos(p), math.sin(p)
    cy, sy = math.cos(y), math.sin(y)
    rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    return rz @ ry @ rx


def _axis_rotation(axis: Sequence[float], angle_rad: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    ux, uy, uz = axis
    c = math.cos(angle_rad)
    s = math.sin(angle_rad)
    ic = 1.0 - c
    return np.array(
        [
            [c + ux * ux * ic, ux * uy * ic - uz * s, ux * uz * ic + uy * s],
            [uy * ux * ic + uz * s, c + uy * uy * ic, uy * uz * ic - ux * s],
            [uz * ux * ic - uy * s, uz * uy * ic + ux * s, c + uz * uz * ic],
        ]
    )


def validate_chain(chain: KinematicChain) -> list[str]:
    """Return a list of invariant violations; empty means the chain is valid."""
    problems: list[str] = []
    if not chain.joints:
        problems.append("chain has no joints")
    seen: set[str] = set()
    for joint in chain.joints:
        if joint.name in seen:
            problems.append(f"duplicate joint name '{joint.name}'")
        seen.add(joint.name)
        norm = math.sqrt(sum(a * a for a in joint.rotation_axis))
        if abs(norm - 1.0) > AXIS_UNIT_TOL:
            problems.append(
                f"joint '{joint.name}': non-unit axis (norm {norm:.6g})"
            )
        if not joint.min_deg < joint.max_deg:
            problems.append(
                f"joint '{joint.name}': degenerate limits "
                f"[{joint.min_deg}, {joint.max_deg}]"
            )
    return problems


def _check_lengths(chain: KinematicChain, angles_deg: Sequence[float]) -> None:
    if len(angles_deg) != len(chain.joints):
        raise ChainError(
            f"joint vector has {len(angles_deg)} angles, "
            f"chain '{chain.name}' has {len(chain.joints)} joints"
        )


def check_limits(chain: KinematicChain, angles_deg: Sequence[float]) -> None:
    """Raise ChainError naming the first joint whose angle is out of limits."""
    _check_lengths(chain, angles_deg)
    for i, (joint, angle) in enumerate(zip(chain.joints, angles_deg)):
        if not joint.min_deg <= angle <= joint.max_deg:
            raise ChainError(
                f"joint {i} ('{joint.name}') angle {angle} out of limits "
                f"[{joint.min_deg}, {joint.max_deg}]"
            )


def clamp_to_limits(
    chain: KinematicChain, angles_deg: Sequence[float]
) -> list[float]:
    """Clamp each angle into its joint's [min_deg, max_deg]. Idempotent."""
    _check_lengths(chain, angles_deg)
    return [
        min(max(a, j.min_deg), j.max_deg)
        for j, a in zip(chain.joints, angles_deg)
    ]


def forward_kinematics(
    chain: KinematicChain, angles_deg: Sequence[float]
) -> Pose:
    """End-effector pose for the given joint angles (degrees, within limits)."""
    check_limits(chain, angles_deg)
    t = chain.base_frame.matrix()
    for joint, angle in zip(chain.joints, angles_deg):
        step = np.eye(4)
        step[:3, 3] = joint.link_offset_mm
        step[:3, :3] = _axis_rotation(joint.rotation_axis, math.radians(angle))
        t = t @ step
    return Pose(position_mm=t[:3, 3].copy(), orientation=t[:3, :3].copy())


def link_positions(
    chain: KinematicChain, angles_deg: Sequence[float]
) -> list[tuple[float, float, float]]:
    """Origin of the base frame and of each joint frame, for rendering.

    Returns len(chain)+1 points; the last is the end-effector position.
    """
    check_limits(chain, angles_deg)
    t = chain.base_frame.matrix()
    points = [tuple(float(v) for v in t[:3, 3])]
    for joint, angle in zip(chain.joints, angles_deg):
        step = np.eye(4)
        step[:3, 3] = joint.link_offset_mm
        step[:3, :3] = _axis_rotation(joint.rotation_axis, math.radians(angle))
        t = t @ step
        points.append(tuple(float(v) for v in t[:3, 3]))
    return points


def default_chain() -> KinematicChain:
    """Six-joint arm with roughly 280 mm reach and symmetric +/-165 deg limits.

    The geometry is an approximation for visualization; real deployments load
    their own chain.json.
    """
    limits = (-165.0, 165.0)
    joints = (
        JointSpec("j1", (0.0, 0.0, 130.0), (0.0, 0.0, 1.0), *limits),
        JointSpec("j2", (0.0, 0.0, 50.0), (0.0, 1.0, 0.0), *limits),
        JointSpec("j3", (0.0, 0.0, 90.0), (0.0, 1.0, 0.0), *limits),
        JointSpec("j4", (0.0, 0.0, 75.0), (0.0, 1.0, 0.0), *limits),
        JointSpec("j5", (0.0, 0.0, 40.0), (0.0, 0.0, 1.0), *limits),
        JointSpec("j6", (0.0, 0.0, 25.0), (1.0, 0.0, 0.0), *limits),
    )
    return KinematicChain(name="virtual-280", joints=joints)


def chain_to_dict(chain: KinematicChain) -> dict:
    return {
        "schema": CHAIN_SCHEMA,
        "name": chain.name,
        "base_frame": {
            "position_mm": list(chain.base_frame.position_mm),
            "rotation_rpy_deg": list(chain.base_frame.rotation_rpy_deg),
        },
        "joints": [
            {
                "name": j.name,
                "link_offset_mm": list(j.link_offset_mm),
                "rotation_axis": list(j.rotation_axis),
                "min_deg": j.min_deg,
                "max_deg": j.max_deg,
            }
            for j in chain.joints
        ],
    }


def chain_from_dict(data: dict) -> KinematicChain:
    if data.get("schema") != CHAIN_SCHEMA:
        raise ChainError(
            f"expected schema '{CHAIN_SCHEMA}', got {data.get('schema')!r}"
        )
    base = data.get("base_frame", {})
    chain = KinematicChain(
        name=data["name"],
        joints=tuple(
            JointSpec(
                name=j["name"],
                link_offset_mm=tuple(j["link_offset_mm"]),
                rotation_axis=tuple(j["rotation_axis"]),
                min_deg=j["min_deg"],
                max_deg=j["max_deg"],
            )
            for j in data["joints"]
        ),
        base_frame=BaseFrame(
            position_mm=tuple(base.get("position_mm", (0.0, 0.0, 0.0))),
            rotation_rpy_deg=tuple(base.get("rotation_rpy_deg", (0.0, 0.0, 0.0))),
        ),
    )
    problems = validate_chain(chain)
    if problems:
        raise ChainError("invalid chain: " + "; ".join(problems))
    return chain


def load_chain(path: str | Path) -> KinematicChain:
    return chain_from_dict(json.loads(Path(path).read_text()))
