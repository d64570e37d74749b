"""Register map for the emulated XM430-class servo (the subset the
controller uses).  Multi-byte registers are little-endian; GOAL_POSITION
and PRESENT_POSITION are signed 32-bit in 0.088 deg/count, GOAL_CURRENT and
PRESENT_CURRENT signed 16-bit, PRESENT_VELOCITY signed 32-bit in
0.229 rpm/count."""

from __future__ import annotations

import enum
from dataclasses import dataclass


class Register(enum.IntEnum):
    MODEL_NUMBER = 0
    OPERATING_MODE = 11
    TORQUE_ENABLE = 64
    GOAL_CURRENT = 102
    GOAL_POSITION = 116
    PRESENT_CURRENT = 126
    PRESENT_VELOCITY = 128
    PRESENT_POSITION = 132


REGISTER_SIZES = {
    Register.MODEL_NUMBER: 2,
    Register.OPERATING_MODE: 1,
    Register.TORQUE_ENABLE: 1,
    Register.GOAL_CURRENT: 2,
    Register.GOAL_POSITION: 4,
    Register.PRESENT_CURRENT: 2,
    Register.PRESENT_VELOCITY: 4,
    Register.PRESENT_POSITION: 4,
}

READ_ONLY = {
    Register.MODEL_NUMBER,
    Register.PRESENT_CURRENT,
    Register.PRESENT_VELOCITY,
    Register.PRESENT_POSITION,
}

SIGNED = {
    Register.GOAL_CURRENT,
    Register.GOAL_POSITION,
    Register.PRESENT_CURRENT,
    Register.PRESENT_VELOCITY,
    Register.PRESENT_POSITION,
}


class OperatingMode(enum.IntEnum):
    CURRENT = 0    # constant-torque mode
    POSITION = 3


class StatusError(enum.IntEnum):
    NONE = 0x00
    DATA_RANGE = 0x04
    ACCESS = 0x07


MODEL_NUMBER_XM430_W210 = 1030

POSITION_DEG_PER_COUNT = 0.088
VELOCITY_DEG_S_PER_COUNT = 0.229 * 6.0  # 0.229 rpm/count


def _signed(value: int, size: int) -> int:
    bits = size * 8
    if value >= 1 << (bits - 1):
        value -= 1 << bits
    return value


def _unsigned(value: int, size: int) -> int:
    bits = size * 8
    return value & ((1 << bits) - 1)


@dataclass
class RegisterFile:
    """One servo's register storage with access-rule enforcement.

    Warnings count reads/writes on addresses outside the emulated subset;
    those reads return zeros.
    """

    operating_mode: int = OperatingMode.POSITION
    torque_enable: bool = False
    goal_current: int = 0
    goal_position: int = 0
    present_current: int = 0
    present_velocity: int = 0
    present_position: int = 0
    unknown_access_warnings: int = 0

    _FIELDS = {
        Register.MODEL_NUMBER: "_model_number",
        Register.OPERATING_MODE: "operating_mode",
        Register.TORQUE_ENABLE: "torque_enable",
        Register.GOAL_CURRENT: "goal_current",
        Register.GOAL_POSITION: "goal_position",
        Register.PRESENT_CURRENT: "present_current",
        Register.PRESENT_VELOCITY: "present_velocity",
        Register.PRESENT_POSITION: "present_position",
    }

    @property
    def _model_number(self) -> int:
        return MODEL_NUMBER_XM430_W210

    def read(self, address: int, length: int) -> bytes:
        """Raw register read; unknown addresses read as zeros."""
        out = bytearray()
        addr = address
        remaining = length
        while remaining > 0:
            reg = None
            for r in Register:
                if r == addr:
                    reg = r
                    break
            if reg is None or REGISTER_SIZES[reg] > remaining:
                self.unknown_access_warnings += 1
                out.append(0)
                addr += 1
                remaining -= 1
                continue
            size = REGISTER_SIZES[reg]
            value = getattr(self, self._FIELDS[reg])
            value = int(value)
            out += _unsigned(value, size).to_bytes(size, "little")
            addr += size
            remaining -= size
        return bytes(out)

    def write(self, address: int, data: bytes) -> StatusError:
        """Raw register write; returns the status error code."""
        addr = address
        buf = bytes(data)
        while buf:
            reg = None
            for r in Register:
                if r == addr:
                    reg = r
                    break
            if reg is None or REGISTER_SIZES[reg] > len(buf):
                self.unknown_access_warnings += 1
                addr += 1
                buf = buf[1:]
                continue
            size = REGISTER_SIZES[reg]
            raw = int.from_bytes(buf[:size], "little")
            value = _signed(raw, size) if reg in SIGNED else raw
            err = self._apply(reg, value)
            if err is not StatusError.NONE:
                return err
            addr += size
            buf = buf[size:]
        return StatusError.NONE

    def _apply(self, reg: Register, value: int) -> StatusError:
        if reg in READ_ONLY:
            return StatusError.ACCESS
        if reg is Register.OPERATING_MODE:
            if self.torque_enable:
                return StatusError.ACCESS
            if value not in (OperatingMode.CURRENT, OperatingMode.POSITION):
                return StatusError.DATA_RANGE
            self.operating_mode = int(value)
        elif reg is Register.TORQUE_ENABLE:
            if value not in (0, 1):
                return StatusError.DATA_RANGE
            self.torque_enable = bool(value)
        elif reg is Register.GOAL_CURRENT:
            self.goal_current = value
        elif reg is Register.GOAL_POSITION:
            self.goal_position = value
        return StatusError.NONE
