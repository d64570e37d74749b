"""Control and simulation stack for a 3-finger, 2-DoF tactile robot hand.

Subsystems: calibrated planar hand model (geometry, calibration), grasp-mode
sequencing controller (controller), servo bus codec and emulator (bus),
tactile image simulator (tactile), quasi-static grasp world and demos
(world), socket control service (service, protocol), and the operator CLI
(cli).
"""

from .geometry import (
    ControlMode,
    Finger,
    ForceSpec,
    GraspMode,
    HandGeometry,
    JointState,
    LimitViolation,
    MotorState,
    aperture,
    fingertip_force,
    joint_to_motor,
    motor_to_joint,
)
from .calibration import (
    CalibrationError,
    CalibrationResult,
    calibrate_geometry,
    load_calibrated_geometry,
    load_geometry,
    save_geometry,
)

__version__ = "0.1.0"
