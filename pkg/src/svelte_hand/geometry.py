"""Kinematic and force model of the 3-finger, 2-DoF hand.

Two motors drive three fingers: motor 1 drives Finger 1 ("the thumb")
through a 3:1 gear over a 100 deg joint range; motor 2 directly drives the
flipper bridge that carries Fingers 2 and 3 over a 90 deg range.  Grasp
geometry is evaluated in the grasp plane.

Coordinate conventions (grasp plane, angles CCW in degrees):
  +x        : the flipper motor's center axis (flipper_angle = 0 direction)
  P1        : Finger 1 pivot at the origin
  P2        : flipper pivot at motor_axis_separation along bearing
              PIVOT_BASELINE_BEARING_DEG
  f1_angle  : 0 = fully open; closing rotates the finger clockwise
              (toward the flipper side).  Finger 1 ray direction is
              (F1_MOUNT_ANGLE_DEG + inter_motor_offset) - f1_angle.
  flipper_angle : measured from the flipper motor center axis, positive
              toward Finger 1.  The bridge ray direction equals the angle.

Contact sites:
  pinch       Finger 1 tip vs Finger 2 tip.  Both flipper finger tips ride
              at FLIPPER_TIP_RADIUS_RATIO * finger_length about P2 (the
              fingers root on the bridge, not on the motor axis).
  opposition  Finger 1 tip vs the flipper tip midpoint (same in-plane site).
  lateral     Finger 1 middle section vs the side of Finger 3, both at
              side_contact_offset from their pivots; side surfaces meet, so
              SIDE_CONTACT_CLEARANCE_MM of skin is subtracted from the
              centerline distance.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

# Structural conventions of the planar model.  These are fixed by the hand's
# construction, not fitted by calibration.
PIVOT_BASELINE_BEARING_DEG = 20.0     # mean of the pinch/opp flipper setpoints
F1_MOUNT_ANGLE_DEG = 58.0             # F1 zero axis = mount + inter_motor_offset
FLIPPER_TIP_RADIUS_RATIO = 0.75       # flipper tip radius / finger_length
SIDE_CONTACT_CLEARANCE_MM = 10.0      # combined skin standoff of two side surfaces

GEAR_RATIO_F1 = 3.0
GEAR_RATIO_FLIPPER = 1.0
F1_JOINT_RANGE = (0.0, 100.0)
FLIPPER_RANGE = (-50.0, 40.0)

GRAVITY_M_S2 = 9.81


class ControlMode(enum.Enum):
    POSITION = "position"
    TORQUE = "torque"


class Finger(enum.IntEnum):
    F1 = 1
    F2 = 2
    F3 = 3


class GraspMode(enum.Enum):
    """The three grasp modes with their flipper setpoints (degrees)."""

    PINCH = 25.0
    LATERAL = -46.0
    OPPOSITION = 15.0

    @property
    def flipper_setpoint(self) -> float:
        return self.value


class LimitViolation(ValueError):
    """A commanded or observed angle is outside its joint range."""


@dataclass(frozen=True)
class HandGeometry:
    """Calibrated lengths plus the fixed ranges/ratios of the hand.

    Lengths in mm, angles in degrees, masses in grams.  finger_mass and
    hand_mass are metadata only; nothing in the model uses them.
    """

    finger_length: float
    side_contact_offset: float
    motor_axis_separation: float
    inter_motor_offset: float = 15.0
    gear_ratio_f1: float = GEAR_RATIO_F1
    gear_ratio_flipper: float = GEAR_RATIO_FLIPPER
    f1_joint_range: tuple[float, float] = F1_JOINT_RANGE
    flipper_range: tuple[float, float] = FLIPPER_RANGE
    finger_mass: float = 37.0
    hand_mass: float = 361.0

    def __post_init__(self):
        for name in ("finger_length", "side_contact_offset", "motor_axis_separation"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")
        lo, hi = self.f1_joint_range
        if not math.isclose(hi - lo, 100.0, abs_tol=1e-9):
            raise ValueError("f1_joint_range must span exactly 100 degrees")
        lo, hi = self.flipper_range
        if not math.isclose(hi - lo, 90.0, abs_tol=1e-9):
            raise ValueError("flipper_range must span exactly 90 degrees")
        for mode in GraspMode:
            if not (lo <= mode.flipper_setpoint <= hi):
                raise ValueError(
                    f"flipper_range must contain the {mode.name} setpoint "
                    f"{mode.flipper_setpoint}"
                )

    @property
    def f1_axis_deg(self) -> float:
        """World direction of Finger 1 at f1_angle = 0."""
        return F1_MOUNT_ANGLE_DEG + self.inter_motor_offset

    @property
    def flipper_pivot(self) -> np.ndarray:
        b = math.radians(PIVOT_BASELINE_BEARING_DEG)
        return self.motor_axis_separation * np.array([math.cos(b), math.sin(b)])

    @property
    def flipper_tip_radius(self) -> float:
        return FLIPPER_TIP_RADIUS_RATIO * self.finger_length

    def check_f1(self, f1_angle: float) -> None:
        lo, hi = self.f1_joint_range
        if not (lo - 1e-9 <= f1_angle <= hi + 1e-9):
            raise LimitViolation(
                f"f1 joint angle {f1_angle:.3f} deg outside [{lo}, {hi}]"
            )

    def check_flipper(self, flipper_angle: float) -> None:
        lo, hi = self.flipper_range
        if not (lo - 1e-9 <= flipper_angle <= hi + 1e-9):
            raise LimitViolation(
                f"flipper joint angle {flipper_angle:.3f} deg outside [{lo}, {hi}]"
            )

    def joint_in_range(self, f1_angle: float, flipper_angle: float) -> bool:
        try:
            self.check_f1(f1_angle)
            self.check_flipper(flipper_angle)
        except LimitViolation:
            return False
        return True


@dataclass(frozen=True)
class ForceSpec:
    """Fingertip force caps in newtons."""

    max_normal_tip: float = 2.5
    max_tangential_f1: float = 6.3
    max_tangential_flipper: float = 2.2

    def __post_init__(self):
        ratio = self.max_tangential_f1 / self.max_tangential_flipper
        if not (0.85 * GEAR_RATIO_F1 <= ratio <= 1.15 * GEAR_RATIO_F1):
            raise ValueError(
                f"tangential cap ratio {ratio:.3f} inconsistent with the "
                f"{GEAR_RATIO_F1}:1 gear ratio (15% band)"
            )

    def tangential_cap(self, finger: Finger) -> float:
        return self.max_tangential_f1 if finger is Finger.F1 else self.max_tangential_flipper


@dataclass(frozen=True)
class JointState:
    """Joint-side state.  f1_torque_setpoint is the motor-side torque command
    in N*mm (what the servo register carries); it is meaningful only when
    f1_mode is TORQUE."""

    f1_angle: float
    flipper_angle: float
    f1_mode: ControlMode = ControlMode.POSITION
    flipper_mode: ControlMode = ControlMode.POSITION
    f1_torque_setpoint: float = 0.0


@dataclass(frozen=True)
class MotorState:
    """Motor-side mirror of JointState (angles scaled by the gear ratios)."""

    f1_angle: float
    flipper_angle: float
    f1_mode: ControlMode = ControlMode.POSITION
    flipper_mode: ControlMode = ControlMode.POSITION
    f1_torque_setpoint: float = 0.0


def joint_to_motor(joint: JointState, geom: HandGeometry) -> MotorState:
    """Map joint-side angles to motor-side angles (3:1 for f1, 1:1 flipper)."""
    geom.check_f1(joint.f1_angle)
    geom.check_flipper(joint.flipper_angle)
    return MotorState(
        f1_angle=joint.f1_angle * geom.gear_ratio_f1,
        flipper_angle=joint.flipper_angle * geom.gear_ratio_flipper,
        f1_mode=joint.f1_mode,
        flipper_mode=joint.flipper_mode,
        f1_torque_setpoint=joint.f1_torque_setpoint,
    )


def motor_to_joint(motor: MotorState, geom: HandGeometry) -> JointState:
    """Exact inverse of joint_to_motor; raises LimitViolation when the
    resulting joint angles fall outside the joint ranges."""
    joint = JointState(
        f1_angle=motor.f1_angle / geom.gear_ratio_f1,
        flipper_angle=motor.flipper_angle / geom.gear_ratio_flipper,
        f1_mode=motor.f1_mode,
        flipper_mode=motor.flipper_mode,
        f1_torque_setpoint=motor.f1_torque_setpoint,
    )
    geom.check_f1(joint.f1_angle)
    geom.check_flipper(joint.flipper_angle)
    return joint


def _unit(deg: float) -> np.ndarray:
    r = math.radians(deg)
    return np.array([math.cos(r), math.sin(r)])


def contact_sites(
    mode: GraspMode, f1_angle: float, flipper_angle: float, geom: HandGeometry
) -> tuple[np.ndarray, np.ndarray]:
    """The mode's two opposing contact sites in the grasp plane (mm).

    Returns (finger-1 site, flipper-side site).
    """
    th1 = geom.f1_axis_deg - f1_angle
    p2 = geom.flipper_pivot
    if mode is GraspMode.LATERAL:
        a = geom.side_contact_offset * _unit(th1)
        b = p2 + geom.side_contact_offset * _unit(flipper_angle)
    else:
        a = geom.finger_length * _unit(th1)
        b = p2 + geom.flipper_tip_radius * _unit(flipper_angle)
    return a, b


def aperture(mode: GraspMode, joint: JointState, geom: HandGeometry) -> float:
    """Opening between the mode's two contact sites, in mm.

    Pinch and opposition measure tip-to-tip distance.  Lateral measures the
    side-surface gap: centerline distance minus the skin clearance, clamped
    at zero once the surfaces touch.
    """
    geom.check_f1(joint.f1_angle)
    geom.check_flipper(joint.flipper_angle)
    a, b = contact_sites(mode, joint.f1_angle, joint.flipper_angle, geom)
    dist = float(np.linalg.norm(b - a))
    if mode is GraspMode.LATERAL:
        return max(dist - SIDE_CONTACT_CLEARANCE_MM, 0.0)
    return dist


def aperture_at(
    mode: GraspMode, f1_angle: float, geom: HandGeometry, flipper_angle: float | None = None
) -> float:
    """Aperture with the flipper held at the mode setpoint (or as given)."""
    fl = mode.flipper_setpoint if flipper_angle is None else flipper_angle
    return aperture(mode, JointState(f1_angle=f1_angle, flipper_angle=fl), geom)


def max_aperture(mode: GraspMode, geom: HandGeometry) -> float:
    """Mode opening at fully open f1 with the flipper at the mode setpoint."""
    return aperture_at(mode, geom.f1_joint_range[0], geom)


def closure_f1_angle(mode: GraspMode, width_mm: float, geom: HandGeometry) -> float | None:
    """Smallest f1 angle at which the mode aperture has closed onto an
    object of the given width; None when the opening never reaches it.

    Searched on the monotone branch from fully open down to the aperture
    minimum (the fingers stall against each other past it).
    """
    lo, hi = geom.f1_joint_range
    grid = np.linspace(lo, hi, 2001)
    ap = np.array([aperture_at(mode, f, geom) for f in grid])
    i_min = int(np.argmin(ap))
    if width_mm >= ap[0]:
        return None if width_mm > ap[0] else float(grid[0])
    if width_mm < ap[i_min]:
        return None
    j = int(np.searchsorted(-ap[: i_min + 1], -width_mm))
    j = min(max(j, 1), i_min)
    # linear refinement between grid[j-1] and grid[j]
    a0, a1 = ap[j - 1], ap[j]
    t = 0.0 if a0 == a1 else (a0 - width_mm) / (a0 - a1)
    return float(grid[j - 1] + t * (grid[j] - grid[j - 1]))


def fingertip_force(
    motor_torque: float,
    finger: Finger,
    geom: HandGeometry,
    spec: ForceSpec = ForceSpec(),
) -> float:
    """Tangential fingertip force (N) for a motor torque in N*mm, saturated
    at the finger's cap."""
    if motor_torque < 0.0:
        raise ValueError("motor torque must be non-negative")
    gear = geom.gear_ratio_f1 if finger is Finger.F1 else geom.gear_ratio_flipper
    raw = motor_torque * gear / geom.finger_length
    return min(raw, spec.tangential_cap(finger))


def contact_normal_force(
    motor_torque: float, geom: HandGeometry, spec: ForceSpec = ForceSpec()
) -> float:
    """Normal force a torque-driven closure can press into one contact (N),
    saturated at the per-fingertip normal cap."""
    if motor_torque < 0.0:
        raise ValueError("motor torque must be non-negative")
    raw = motor_torque * geom.gear_ratio_f1 / geom.finger_length
    return min(raw, spec.max_normal_tip)


def with_lengths(
    geom: HandGeometry,
    finger_length: float,
    side_contact_offset: float,
    motor_axis_separation: float,
) -> HandGeometry:
    return replace(
        geom,
        finger_length=finger_length,
        side_contact_offset=side_contact_offset,
        motor_axis_separation=motor_axis_separation,
    )
