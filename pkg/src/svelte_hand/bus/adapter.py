"""High-level hand access over a bus transport.

Maps joint-side controller commands onto servo register transactions:
joint angles scale through the gear ratios, positions quantize to
0.088 deg/count, torques to the goal-current LSB.  Control-mode changes run
the required torque-off / operating-mode / torque-on write sequence.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from ..controller import ActuatorCommand
from ..geometry import ControlMode, HandGeometry, JointState
from .emulator import TORQUE_NMM_PER_COUNT
from .packets import BusPacket, Instruction, StreamDecoder, encode_packet
from .registers import (
    OperatingMode,
    POSITION_DEG_PER_COUNT,
    Register,
)

F1_SERVO_ID = 1
FLIPPER_SERVO_ID = 2


class BusTimeout(RuntimeError):
    pass


@dataclass
class ServoShadow:
    """Last mode/targets written, to skip redundant transactions."""

    operating_mode: int | None = None
    torque_enable: bool | None = None
    goal_position: int | None = None
    goal_current: int | None = None


class HandBus:
    """One hand on one bus: servo 1 drives f1, servo 2 the flipper."""

    def __init__(self, transport, geometry: HandGeometry, timeout_s: float = 0.05):
        self.transport = transport
        self.geometry = geometry
        self.timeout_s = timeout_s
        self._decoder = StreamDecoder()
        self._shadow = {F1_SERVO_ID: ServoShadow(), FLIPPER_SERVO_ID: ServoShadow()}

    # -- transactions ------------------------------------------------------

    def _transact(self, packet: BusPacket, expect_status: bool = True) -> BusPacket | None:
        self.transport.send(encode_packet(packet))
        if not expect_status:
            return None
        deadline = time.monotonic() + self.timeout_s
        while True:
            for response in self._decoder.feed(self.transport.recv()):
                if response.instruction is Instruction.STATUS:
                    return response
            if time.monotonic() >= deadline:
                raise BusTimeout(f"no status for {packet.instruction.name}")
            time.sleep(0.0005)

    def ping(self, servo_id: int) -> bool:
        try:
            status = self._transact(BusPacket(servo_id, Instruction.PING))
        except BusTimeout:
            return False
        return status is not None and status.device_id == servo_id

    def read_register(self, servo_id: int, register: Register, size: int) -> int:
        params = int(register).to_bytes(2, "little") + size.to_bytes(2, "little")
        status = self._transact(BusPacket(servo_id, Instruction.READ, params))
        raw = int.from_bytes(status.params[:size], "little")
        bits = size * 8
        if raw >= 1 << (bits - 1):
            raw -= 1 << bits
        return raw

    def write_register(self, servo_id: int, register: Register, value: int, size: int) -> int:
        raw = value & ((1 << (size * 8)) - 1)
        params = int(register).to_bytes(2, "little") + raw.to_bytes(size, "little")
        status = self._transact(BusPacket(servo_id, Instruction.WRITE, params))
        return status.error_field

    def sync_write_positions(self, targets: dict[int, int]) -> None:
        params = int(Register.GOAL_POSITION).to_bytes(2, "little") + (4).to_bytes(2, "little")
        for servo_id, counts in sorted(targets.items()):
            params += bytes([servo_id]) + (counts & 0xFFFFFFFF).to_bytes(4, "little")
        self._transact(
            BusPacket(0xFE, Instruction.SYNC_WRITE, params), expect_status=False
        )

    # -- joint-level interface ----------------------------------------------

    def read_feedback(self) -> JointState:
        f1_counts = self.read_register(F1_SERVO_ID, Register.PRESENT_POSITION, 4)
        fl_counts = self.read_register(FLIPPER_SERVO_ID, Register.PRESENT_POSITION, 4)
        f1_motor = f1_counts * POSITION_DEG_PER_COUNT
        fl_motor = fl_counts * POSITION_DEG_PER_COUNT
        shadow_f1 = self._shadow[F1_SERVO_ID]
        return JointState(
            f1_angle=f1_motor / self.geometry.gear_ratio_f1,
            flipper_angle=fl_motor / self.geometry.gear_ratio_flipper,
            f1_mode=(
                ControlMode.TORQUE
                if shadow_f1.operating_mode == OperatingMode.CURRENT
                else ControlMode.POSITION
            ),
            flipper_mode=ControlMode.POSITION,
            f1_torque_setpoint=(shadow_f1.goal_current or 0) * TORQUE_NMM_PER_COUNT,
        )

    def apply_command(self, command: ActuatorCommand) -> None:
        self._apply_axis(F1_SERVO_ID, command.f1, self.geometry.gear_ratio_f1)
        self._apply_axis(FLIPPER_SERVO_ID, command.flipper, self.geometry.gear_ratio_flipper)

    def _apply_axis(self, servo_id: int, axis, gear: float) -> None:
        shadow = self._shadow[servo_id]
        want_mode = (
            OperatingMode.POSITION
            if axis.mode is ControlMode.POSITION
            else OperatingMode.CURRENT
        )
        if shadow.operating_mode != want_mode:
            self.write_register(servo_id, Register.TORQUE_ENABLE, 0, 1)
            self.write_register(servo_id, Register.OPERATING_MODE, int(want_mode), 1)
            self.write_register(servo_id, Register.TORQUE_ENABLE, 1, 1)
            shadow.operating_mode = int(want_mode)
            shadow.torque_enable = True
        elif shadow.torque_enable is not True:
            self.write_register(servo_id, Register.TORQUE_ENABLE, 1, 1)
            shadow.torque_enable = True

        if axis.mode is ControlMode.POSITION:
            counts = round(axis.position * gear / POSITION_DEG_PER_COUNT)
            if shadow.goal_position != counts:
                self.write_register(servo_id, Register.GOAL_POSITION, counts, 4)
                shadow.goal_position = counts
        else:
            counts = round(axis.torque / TORQUE_NMM_PER_COUNT)
            if shadow.goal_current != counts:
                self.write_register(servo_id, Register.GOAL_CURRENT, counts, 2)
                shadow.goal_current = counts

    def torque_off(self) -> None:
        for servo_id in (F1_SERVO_ID, FLIPPER_SERVO_ID):
            self.write_register(servo_id, Register.TORQUE_ENABLE, 0, 1)
            self._shadow[servo_id].torque_enable = False
