"""Grasp-mode sequencing state machine.

Every grasp runs the same program: open Finger 1 in position mode, move the
flipper to the mode setpoint in position mode, then close Finger 1 in
torque mode while the flipper keeps holding its position so load cannot
drag it.  Contact is detected by the torque-driven finger stalling.  A
twist maneuver (pinch only) wiggles the flipper sinusoidally while Finger 1
keeps pressing.

The controller is a single-writer machine: one agent calls step()/commands
in tick order; snapshot() may be called concurrently.
"""

from __future__ import annotations

import enum
import math
import threading
from dataclasses import dataclass

from .geometry import (
    ControlMode,
    ForceSpec,
    GraspMode,
    HandGeometry,
    JointState,
)

STALL_VELOCITY_DEG_S = 0.1
FLIPPER_FAULT_TOLERANCE_FACTOR = 5.0


class ControllerPhase(enum.Enum):
    IDLE = "Idle"
    OPENING_F1 = "OpeningF1"
    POSITIONING_FLIPPER = "PositioningFlipper"
    CLOSING_F1 = "ClosingF1"
    HOLDING = "Holding"
    TWISTING = "Twisting"
    RELEASING = "Releasing"
    FAULT = "Fault"


_LEGAL_TRANSITIONS = {
    (ControllerPhase.IDLE, ControllerPhase.OPENING_F1),
    (ControllerPhase.OPENING_F1, ControllerPhase.POSITIONING_FLIPPER),
    (ControllerPhase.POSITIONING_FLIPPER, ControllerPhase.CLOSING_F1),
    (ControllerPhase.CLOSING_F1, ControllerPhase.HOLDING),
    (ControllerPhase.CLOSING_F1, ControllerPhase.RELEASING),
    (ControllerPhase.HOLDING, ControllerPhase.TWISTING),
    (ControllerPhase.TWISTING, ControllerPhase.HOLDING),
    (ControllerPhase.HOLDING, ControllerPhase.RELEASING),
    (ControllerPhase.TWISTING, ControllerPhase.RELEASING),
    (ControllerPhase.RELEASING, ControllerPhase.IDLE),
}


@dataclass(frozen=True)
class GraspCommandConfig:
    open_position: float = 0.0        # f1 joint target, deg
    position_tolerance: float = 0.5   # deg
    close_torque: float = 100.0       # N*mm at the f1 motor
    settle_ticks: int = 10
    twist_amplitude: float = 5.0      # deg
    twist_period: float = 1.0         # s


@dataclass(frozen=True)
class AxisCommand:
    mode: ControlMode
    position: float | None = None   # joint deg, position mode
    torque: float | None = None     # motor N*mm, torque mode


@dataclass(frozen=True)
class ActuatorCommand:
    f1: AxisCommand
    flipper: AxisCommand


@dataclass(frozen=True)
class ControllerSnapshot:
    tick: int
    time_s: float
    phase: ControllerPhase
    mode: GraspMode | None
    command: ActuatorCommand | None
    fault_reason: str | None


class GraspController:
    def __init__(
        self,
        geometry: HandGeometry,
        force_spec: ForceSpec = ForceSpec(),
        config: GraspCommandConfig = GraspCommandConfig(),
    ):
        self.geometry = geometry
        self.force_spec = force_spec
        self.config = config
        self._lock = threading.RLock()
        self._phase = ControllerPhase.IDLE
        self._mode: GraspMode | None = None
        self._tick = 0
        self._time = 0.0
        self._twist_time = 0.0
        self._settle = 0
        self._prev_f1: float | None = None
        self._last_command: ActuatorCommand | None = None
        self._fault_reason: str | None = None
        self.trace: list[dict] = []

    # -- commands ------------------------------------------------------------

    def start_grasp(
        self, mode: GraspMode, config: GraspCommandConfig | None = None
    ) -> tuple[bool, str]:
        with self._lock:
            if self._phase is not ControllerPhase.IDLE:
                return False, f"busy: phase is {self._phase.value}, release first"
            cfg = config if config is not None else self.config
            ok, reason = self._validate_config(mode, cfg)
            if not ok:
                return False, reason
            self.config = cfg
            self._mode = mode
            self._settle = 0
            self._transition(ControllerPhase.OPENING_F1)
            return True, "grasp started"

    def twist(self) -> tuple[bool, str]:
        with self._lock:
            if self._phase is not ControllerPhase.HOLDING:
                return False, f"twist requires Holding, phase is {self._phase.value}"
            if self._mode is not GraspMode.PINCH:
                return False, "twist only in pinch grasp"
            self._twist_time = 0.0
            self._transition(ControllerPhase.TWISTING)
            return True, "twisting"

    def release(self) -> tuple[bool, str]:
        with self._lock:
            if self._phase is ControllerPhase.IDLE:
                return True, "already idle"
            if self._phase in (
                ControllerPhase.HOLDING,
                ControllerPhase.TWISTING,
                ControllerPhase.CLOSING_F1,
            ):
                self._settle = 0
                self._transition(ControllerPhase.RELEASING)
                return True, "releasing"
            return False, f"cannot release from {self._phase.value}"

    # -- tick ----------------------------------------------------------------

    def step(self, dt: float, feedback: JointState) -> ActuatorCommand:
        with self._lock:
            if dt < 0.0:
                raise ValueError("dt must be non-negative")
            if dt == 0.0:
                return self._last_command or self._outputs(feedback)

            self._check_faults(dt, feedback)
            if self._phase not in (ControllerPhase.IDLE, ControllerPhase.FAULT):
                self._advance_phase(dt, feedback)

            if self._phase is ControllerPhase.TWISTING:
                self._twist_time += dt

            command = self._outputs(feedback)
            self._last_command = command
            self._prev_f1 = feedback.f1_angle
            self._record(feedback, command)
            self._time += dt
            self._tick += 1
            return command

    def snapshot(self) -> ControllerSnapshot:
        with self._lock:
            return ControllerSnapshot(
                tick=self._tick,
                time_s=self._time,
                phase=self._phase,
                mode=self._mode,
                command=self._last_command,
                fault_reason=self._fault_reason,
            )

    @property
    def phase(self) -> ControllerPhase:
        with self._lock:
            return self._phase

    @property
    def mode(self) -> GraspMode | None:
        with self._lock:
            return self._mode

    # -- internals -------------------------------------------------------------

    def _validate_config(
        self, mode: GraspMode, cfg: GraspCommandConfig
    ) -> tuple[bool, str]:
        geom = self.geometry
        lo, hi = geom.f1_joint_range
        if not (lo <= cfg.open_position <= hi):
            return False, f"open position {cfg.open_position} outside f1 range"
        if cfg.close_torque <= 0.0:
            return False, "close torque must be positive"
        raw = cfg.close_torque * geom.gear_ratio_f1 / geom.finger_length
        if raw > self.force_spec.max_tangential_f1:
            return False, (
                f"close torque {cfg.close_torque:.1f} N*mm would exceed the "
                f"{self.force_spec.max_tangential_f1} N fingertip cap"
            )
        if cfg.twist_amplitude <= 0.0:
            return False, "twist amplitude must be positive"
        if mode is GraspMode.PINCH:
            # twisting is only legal in pinch; the sweep must stay in range
            flo, fhi = geom.flipper_range
            sp = mode.flipper_setpoint
            if not (flo <= sp - cfg.twist_amplitude and sp + cfg.twist_amplitude <= fhi):
                return False, "twist amplitude leaves the flipper range"
        if cfg.settle_ticks < 1:
            return False, "settle ticks must be at least 1"
        if cfg.twist_period <= 0.0:
            return False, "twist period must be positive"
        if cfg.position_tolerance <= 0.0:
            return False, "position tolerance must be positive"
        return True, "ok"

    def _transition(self, new_phase: ControllerPhase) -> None:
        if new_phase is not ControllerPhase.FAULT:
            assert (self._phase, new_phase) in _LEGAL_TRANSITIONS, (
                f"illegal transition {self._phase} -> {new_phase}"
            )
        self._phase = new_phase
        self._settle = 0

    def _fault(self, reason: str) -> None:
        self._fault_reason = reason
        self._phase = ControllerPhase.FAULT

    def _check_faults(self, dt: float, feedback: JointState) -> None:
        if self._phase in (ControllerPhase.IDLE, ControllerPhase.FAULT):
            return
        if not self.geometry.joint_in_range(feedback.f1_angle, feedback.flipper_angle):
            self._fault(
                f"feedback outside joint limits "
                f"(f1={feedback.f1_angle:.2f}, flipper={feedback.flipper_angle:.2f})"
            )
            return
        if self._phase is ControllerPhase.CLOSING_F1 and self._mode is not None:
            deviation = abs(feedback.flipper_angle - self._mode.flipper_setpoint)
            if deviation > FLIPPER_FAULT_TOLERANCE_FACTOR * self.config.position_tolerance:
                self._fault(
                    f"flipper deviated {deviation:.2f} deg from its setpoint "
                    f"during closure"
                )

    def _advance_phase(self, dt: float, feedback: JointState) -> None:
        cfg = self.config
        phase = self._phase
        if phase is ControllerPhase.OPENING_F1:
            if abs(feedback.f1_angle - cfg.open_position) < cfg.position_tolerance:
                self._settle += 1
            else:
                self._settle = 0
            if self._settle >= cfg.settle_ticks:
                self._transition(ControllerPhase.POSITIONING_FLIPPER)
        elif phase is ControllerPhase.POSITIONING_FLIPPER:
            sp = self._mode.flipper_setpoint
            if abs(feedback.flipper_angle - sp) < cfg.position_tolerance:
                self._settle += 1
            else:
                self._settle = 0
            if self._settle >= cfg.settle_ticks:
                self._transition(ControllerPhase.CLOSING_F1)
        elif phase is ControllerPhase.CLOSING_F1:
            if self._prev_f1 is None:
                return
            velocity = (feedback.f1_angle - self._prev_f1) / dt
            if abs(velocity) < STALL_VELOCITY_DEG_S:
                self._settle += 1
            else:
                self._settle = 0
            if self._settle >= cfg.settle_ticks:
                self._transition(ControllerPhase.HOLDING)
        elif phase is ControllerPhase.RELEASING:
            if abs(feedback.f1_angle - cfg.open_position) < cfg.position_tolerance:
                self._settle += 1
            else:
                self._settle = 0
            if self._settle >= cfg.settle_ticks:
                self._mode = None
                self._transition(ControllerPhase.IDLE)

    def _outputs(self, feedback: JointState) -> ActuatorCommand:
        cfg = self.config
        phase = self._phase
        position = ControlMode.POSITION
        torque = ControlMode.TORQUE
        sp = self._mode.flipper_setpoint if self._mode is not None else 0.0

        if phase is ControllerPhase.IDLE:
            f1 = AxisCommand(position, position=cfg.open_position)
            flipper = AxisCommand(position, position=self._clamp_flipper(
                feedback.flipper_angle))
        elif phase is ControllerPhase.OPENING_F1:
            f1 = AxisCommand(position, position=cfg.open_position)
            flipper = AxisCommand(position, position=self._clamp_flipper(
                feedback.flipper_angle))
        elif phase is ControllerPhase.POSITIONING_FLIPPER:
            f1 = AxisCommand(position, position=cfg.open_position)
            flipper = AxisCommand(position, position=sp)
        elif phase in (ControllerPhase.CLOSING_F1, ControllerPhase.HOLDING):
            f1 = AxisCommand(torque, torque=cfg.close_torque)
            flipper = AxisCommand(position, position=sp)
        elif phase is ControllerPhase.TWISTING:
            target = sp + cfg.twist_amplitude * math.sin(
                2.0 * math.pi * self._twist_time / cfg.twist_period
            )
            f1 = AxisCommand(torque, torque=cfg.close_torque)
            flipper = AxisCommand(position, position=target)
        elif phase is ControllerPhase.RELEASING:
            f1 = AxisCommand(position, position=cfg.open_position)
            flipper = AxisCommand(position, position=sp if self._mode else
                                  self._clamp_flipper(feedback.flipper_angle))
        else:  # FAULT: go limp on f1, hold the flipper where it is
            f1 = AxisCommand(torque, torque=0.0)
            flipper = AxisCommand(position, position=self._clamp_flipper(
                feedback.flipper_angle))
        return ActuatorCommand(f1=f1, flipper=flipper)

    def _clamp_flipper(self, angle: float) -> float:
        lo, hi = self.geometry.flipper_range
        return min(max(angle, lo), hi)

    def _record(self, feedback: JointState, command: ActuatorCommand) -> None:
        self.trace.append(
            {
                "tick": self._tick,
                "phase": self._phase.value,
                "mode": self._mode.name.title() if self._mode else None,
                "f1_angle": feedback.f1_angle,
                "flipper_angle": feedback.flipper_angle,
                "f1_mode": command.f1.mode.value,
                "f1_target": command.f1.position,
                "f1_torque": command.f1.torque,
                "flipper_mode": command.flipper.mode.value,
                "flipper_target": command.flipper.position,
                "fault": self._fault_reason,
            }
        )
