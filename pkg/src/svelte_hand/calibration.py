"""Least-squares calibration of the hand lengths from measured openings.

Three observations (the maximum pinch / lateral / opposition openings at
fully open f1) determine the three free lengths {finger_length,
side_contact_offset, motor_axis_separation}.  The structural angles -- the
15 deg inter-motor offset and the mode setpoints -- stay fixed.

Geometry files are plain JSON with the HandGeometry field names as keys,
lengths in mm and angles in degrees.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

from .geometry import GraspMode, HandGeometry, JointState, aperture

# Search box for plausible hand dimensions (mm).  Targets that cannot be met
# inside it are rejected as infeasible rather than "fitted" by a degenerate
# millimetre-scale hand.
LENGTH_BOUNDS = {
    "finger_length": (40.0, 120.0),
    "side_contact_offset": (20.0, 80.0),
    "motor_axis_separation": (2.0, 60.0),
}
MAX_RESIDUAL_RMS_MM = 1.0

CALIBRATED_GEOMETRY_RESOURCE = "geometry.calibrated.json"


class CalibrationError(RuntimeError):
    def __init__(self, message: str, best_rms: float | None = None):
        super().__init__(message)
        self.best_rms = best_rms


@dataclass(frozen=True)
class CalibrationResult:
    geometry: HandGeometry
    targets: tuple[float, float, float]       # pinch, lateral, opposition mm
    residuals: tuple[float, float, float]     # fitted - target, mm
    rms: float


def _apertures_fully_open(geom: HandGeometry) -> np.ndarray:
    out = []
    for mode in (GraspMode.PINCH, GraspMode.LATERAL, GraspMode.OPPOSITION):
        joint = JointState(f1_angle=0.0, flipper_angle=mode.flipper_setpoint)
        out.append(aperture(mode, joint, geom))
    return np.array(out)


def calibrate_geometry(
    pinch_mm: float, lateral_mm: float, opposition_mm: float
) -> CalibrationResult:
    """Fit the three hand lengths to the three measured maximum openings.

    Raises CalibrationError when any target is non-positive or when no
    geometry inside the plausible bounds reproduces the targets with
    residual RMS below 1 mm.
    """
    targets = (float(pinch_mm), float(lateral_mm), float(opposition_mm))
    if any(t <= 0.0 for t in targets):
        raise CalibrationError(f"aperture targets must be positive, got {targets}")

    t = np.array(targets)

    def residuals(x):
        geom = HandGeometry(
            finger_length=x[0], side_contact_offset=x[1], motor_axis_separation=x[2]
        )
        return _apertures_fully_open(geom) - t

    lo = np.array([LENGTH_BOUNDS[k][0] for k in
                   ("finger_length", "side_contact_offset", "motor_axis_separation")])
    hi = np.array([LENGTH_BOUNDS[k][1] for k in
                   ("finger_length", "side_contact_offset", "motor_axis_separation")])

    best = None
    for x0 in ((70.0, 45.0, 20.0), (90.0, 60.0, 35.0), (55.0, 30.0, 10.0)):
        fit = least_squares(residuals, x0, bounds=(lo, hi), xtol=1e-14, ftol=1e-14)
        if best is None or fit.cost < best.cost:
            best = fit

    res = residuals(best.x)
    rms = float(np.sqrt(np.mean(res**2)))
    if rms >= MAX_RESIDUAL_RMS_MM:
        raise CalibrationError(
            f"no geometry reproduces openings {targets} "
            f"(best residual RMS {rms:.3f} mm)",
            best_rms=rms,
        )
    geom = HandGeometry(
        finger_length=float(best.x[0]),
        side_contact_offset=float(best.x[1]),
        motor_axis_separation=float(best.x[2]),
    )
    return CalibrationResult(
        geometry=geom,
        targets=targets,
        residuals=tuple(float(r) for r in res),
        rms=rms,
    )


def geometry_to_dict(geom: HandGeometry) -> dict:
    return {
        "finger_length": geom.finger_length,
        "side_contact_offset": geom.side_contact_offset,
        "motor_axis_separation": geom.motor_axis_separation,
        "inter_motor_offset": geom.inter_motor_offset,
        "gear_ratio_f1": geom.gear_ratio_f1,
        "gear_ratio_flipper": geom.gear_ratio_flipper,
        "f1_joint_range": list(geom.f1_joint_range),
        "flipper_range": list(geom.flipper_range),
        "finger_mass": geom.finger_mass,
        "hand_mass": geom.hand_mass,
    }


def geometry_from_dict(data: dict) -> HandGeometry:
    return HandGeometry(
        finger_length=float(data["finger_length"]),
        side_contact_offset=float(data["side_contact_offset"]),
        motor_axis_separation=float(data["motor_axis_separation"]),
        inter_motor_offset=float(data.get("inter_motor_offset", 15.0)),
        gear_ratio_f1=float(data.get("gear_ratio_f1", 3.0)),
        gear_ratio_flipper=float(data.get("gear_ratio_flipper", 1.0)),
        f1_joint_range=tuple(data.get("f1_joint_range", (0.0, 100.0))),
        flipper_range=tuple(data.get("flipper_range", (-50.0, 40.0))),
        finger_mass=float(data.get("finger_mass", 37.0)),
        hand_mass=float(data.get("hand_mass", 361.0)),
    )


def save_geometry(geom: HandGeometry, path: str | Path) -> None:
    Path(path).write_text(json.dumps(geometry_to_dict(geom), indent=2) + "\n")


def load_geometry(path: str | Path) -> HandGeometry:
    return geometry_from_dict(json.loads(Path(path).read_text()))


def load_calibrated_geometry() -> HandGeometry:
    """The calibrated geometry shipped with the package (fit to the
    63 / 80 / 72 mm openings)."""
    ref = resources.files("svelte_hand").joinpath(
        f"data/{CALIBRATED_GEOMETRY_RESOURCE}"
    )
    return geometry_from_dict(json.loads(ref.read_text()))
