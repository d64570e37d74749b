"""In-process two-servo bus emulator.

Dynamics (motor side, degrees):
  position mode   first-order lag toward goal with time constant TAU_S and
                  velocity clamp OMEGA_MAX_DEG_S
  current mode    constant torque proportional to goal_current; the horn
                  moves at MOBILITY_DEG_S_PER_NMM * (applied - external)
                  so it stalls when the external load balances the command

Transactions (ping/read/write/sync-write) and stepping are serialized by a
single lock; byte streams in and out are exactly the wire format.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from .packets import (
    BROADCAST_ID,
    BusPacket,
    Instruction,
    StreamDecoder,
    encode_packet,
)
from .registers import (
    MODEL_NUMBER_XM430_W210,
    OperatingMode,
    POSITION_DEG_PER_COUNT,
    RegisterFile,
    StatusError,
    VELOCITY_DEG_S_PER_COUNT,
)

TAU_S = 0.05
OMEGA_MAX_DEG_S = 360.0
TORQUE_NMM_PER_COUNT = 4.76   # current LSB x motor torque constant
MOBILITY_DEG_S_PER_NMM = 1.0  # horn speed per unit net torque in current mode


@dataclass
class ServoEmulator:
    """One servo: register file + horn state."""

    device_id: int
    registers: RegisterFile = field(default_factory=RegisterFile)
    position_deg: float = 0.0   # motor side, continuous
    velocity_deg_s: float = 0.0

    def sync_registers(self) -> None:
        self.registers.present_position = round(self.position_deg / POSITION_DEG_PER_COUNT)
        self.registers.present_velocity = round(self.velocity_deg_s / VELOCITY_DEG_S_PER_COUNT)
        self.registers.present_current = (
            self.registers.goal_current
            if self.registers.torque_enable
            and self.registers.operating_mode == OperatingMode.CURRENT
            else 0
        )

    @property
    def applied_torque_nmm(self) -> float:
        """Torque commanded in current mode (N*mm, signed)."""
        if not self.registers.torque_enable:
            return 0.0
        if self.registers.operating_mode != OperatingMode.CURRENT:
            return 0.0
        return self.registers.goal_current * TORQUE_NMM_PER_COUNT

    def step(self, dt: float, external_torque_nmm: float = 0.0) -> None:
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        regs = self.registers
        if not regs.torque_enable:
            self.velocity_deg_s = 0.0
        elif regs.operating_mode == OperatingMode.POSITION:
            goal_deg = regs.goal_position * POSITION_DEG_PER_COUNT
            v = (goal_deg - self.position_deg) / TAU_S
            self.velocity_deg_s = max(-OMEGA_MAX_DEG_S, min(OMEGA_MAX_DEG_S, v))
            self.position_deg += self.velocity_deg_s * dt
        else:
            net = self.applied_torque_nmm - external_torque_nmm
            v = MOBILITY_DEG_S_PER_NMM * net
            self.velocity_deg_s = max(-OMEGA_MAX_DEG_S, min(OMEGA_MAX_DEG_S, v))
            self.position_deg += self.velocity_deg_s * dt
        self.sync_registers()


class TwoServoBus:
    """Wire-level facade over two servo emulators."""

    def __init__(self, ids=(1, 2)):
        self.servos = {i: ServoEmulator(device_id=i) for i in ids}
        self.external_torque_nmm = {i: 0.0 for i in ids}
        self._lock = threading.Lock()
        for s in self.servos.values():
            s.sync_registers()

    def servo(self, device_id: int) -> ServoEmulator:
        return self.servos[device_id]

    def step(self, dt: float) -> None:
        with self._lock:
            for i, s in self.servos.items():
                s.step(dt, self.external_torque_nmm[i])

    def set_external_torque(self, device_id: int, torque_nmm: float) -> None:
        with self._lock:
            self.external_torque_nmm[device_id] = torque_nmm

    # -- transactions ------------------------------------------------------

    def handle_packet(self, packet: BusPacket) -> list[BusPacket]:
        with self._lock:
            return self._dispatch(packet)

    def _dispatch(self, packet: BusPacket) -> list[BusPacket]:
        if packet.instruction is Instruction.STATUS:
            return []  # not ours to answer
        if packet.instruction is Instruction.SYNC_WRITE:
            self._sync_write(packet.params)
            return []  # sync write has no status response
        if packet.device_id == BROADCAST_ID:
            # broadcast ping answered by every servo in id order
            if packet.instruction is Instruction.PING:
                return [self._ping_status(i) for i in sorted(self.servos)]
            return []
        servo = self.servos.get(packet.device_id)
        if servo is None:
            return []  # nobody home: the bus stays silent
        if packet.instruction is Instruction.PING:
            return [self._ping_status(servo.device_id)]
        if packet.instruction is Instruction.READ:
            if len(packet.params) != 4:
                return [self._status(servo.device_id, StatusError.DATA_RANGE)]
            addr = int.from_bytes(packet.params[0:2], "little")
            length = int.from_bytes(packet.params[2:4], "little")
            data = servo.registers.read(addr, length)
            return [self._status(servo.device_id, StatusError.NONE, data)]
        if packet.instruction is Instruction.WRITE:
            if len(packet.params) < 2:
                return [self._status(servo.device_id, StatusError.DATA_RANGE)]
            addr = int.from_bytes(packet.params[0:2], "little")
            err = servo.registers.write(addr, packet.params[2:])
            servo.sync_registers()
            return [self._status(servo.device_id, err)]
        return []

    def _sync_write(self, params: bytes) -> None:
        if len(params) < 4:
            return
        addr = int.from_bytes(params[0:2], "little")
        width = int.from_bytes(params[2:4], "little")
        body = params[4:]
        stride = 1 + width
        for k in range(len(body) // stride):
            entry = body[k * stride:(k + 1) * stride]
            servo = self.servos.get(entry[0])
            if servo is not None:
                servo.registers.write(addr, entry[1:])
                servo.sync_registers()

    def _ping_status(self, device_id: int) -> BusPacket:
        params = MODEL_NUMBER_XM430_W210.to_bytes(2, "little") + bytes([38])
        return BusPacket(device_id, Instruction.STATUS, params, error_field=0)

    def _status(self, device_id: int, err: StatusError, data: bytes = b"") -> BusPacket:
        return BusPacket(device_id, Instruction.STATUS, data, error_field=int(err))


class EmulatorTransport:
    """Byte-stream transport backed by the in-process emulator."""

    def __init__(self, bus: TwoServoBus):
        self.bus = bus
        self._decoder = StreamDecoder()
        self._outbox = bytearray()

    def send(self, data: bytes) -> None:
        for packet in self._decoder.feed(data):
            for response in self.bus.handle_packet(packet):
                self._outbox += encode_packet(response)

    def recv(self, max_bytes: int = 4096) -> bytes:
        out = bytes(self._outbox[:max_bytes])
        del self._outbox[: len(out)]
        return out

    def close(self) -> None:
        pass
