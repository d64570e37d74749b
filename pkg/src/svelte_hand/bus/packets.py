"""Bit-exact codec for the v2.0 servo bus packet protocol.

Frame layout:

    FF FF FD 00 | id | length (2, LE) | instruction | [error] | params | crc (2, LE)

length counts everything after the length field.  The payload (instruction
byte onward, before the CRC) is byte-stuffed: every FF FF FD gets an FD
appended so the header pattern FF FF FD 00 can only open a frame.  The CRC
(poly 0x8005, init 0) covers all preceding bytes.

decode_stream is total: arbitrary input never raises; bad frames are
counted and skipped, a trailing partial frame is returned as remainder.
Only canonically stuffed frames decode, so every decoded packet re-encodes
to exactly the consumed bytes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .crc import crc16

HEADER = b"\xff\xff\xfd\x00"
BROADCAST_ID = 0xFE
MAX_DEVICE_ID = 252
# length field = instruction + [error] + stuffed params + 2 CRC bytes <= 0xFFFF
_MAX_LENGTH_FIELD = 0xFFFF


class Instruction(enum.IntEnum):
    PING = 0x01
    READ = 0x02
    WRITE = 0x03
    SYNC_WRITE = 0x83
    STATUS = 0x55


class EncodeError(ValueError):
    pass


@dataclass(frozen=True)
class BusPacket:
    device_id: int
    instruction: Instruction
    params: bytes = b""
    error_field: int = 0  # status packets only

    def __post_init__(self):
        if not (0 <= self.device_id <= MAX_DEVICE_ID or self.device_id == BROADCAST_ID):
            raise ValueError(f"device id {self.device_id} outside 0..252 / broadcast")
        if not isinstance(self.instruction, Instruction):
            object.__setattr__(self, "instruction", Instruction(self.instruction))
        if not (0 <= self.error_field <= 0xFF):
            raise ValueError("error field must fit one byte")
        if self.error_field and self.instruction is not Instruction.STATUS:
            raise ValueError("error field is only meaningful on status packets")


@dataclass
class StreamDiagnostics:
    crc_errors: int = 0
    malformed: int = 0
    discarded_bytes: int = 0


def _stuff(payload: bytes) -> bytes:
    out = bytearray()
    for b in payload:
        out.append(b)
        if len(out) >= 3 and out[-3:] == b"\xff\xff\xfd":
            out.append(0xFD)
    return bytes(out)


def _destuff(payload: bytes) -> bytes | None:
    """Inverse of _stuff; None when the payload is not canonically stuffed."""
    out = bytearray()
    i = 0
    n = len(payload)
    while i < n:
        out.append(payload[i])
        if len(out) >= 3 and out[-3:] == b"\xff\xff\xfd":
            if i + 1 >= n or payload[i + 1] != 0xFD:
                return None
            i += 1  # swallow the stuffing byte
        i += 1
    return bytes(out)


def encode_packet(packet: BusPacket) -> bytes:
    payload = bytes([packet.instruction])
    if packet.instruction is Instruction.STATUS:
        payload += bytes([packet.error_field])
    payload += packet.params
    stuffed = _stuff(payload)
    length = len(stuffed) + 2
    if length > _MAX_LENGTH_FIELD:
        raise EncodeError(
            f"params too long: stuffed payload {len(stuffed)} exceeds the "
            f"16-bit length field"
        )
    frame = bytearray(HEADER)
    frame.append(packet.device_id)
    frame += length.to_bytes(2, "little")
    frame += stuffed
    frame += crc16(bytes(frame)).to_bytes(2, "little")
    return bytes(frame)


def _parse_frame(frame: bytes) -> BusPacket | None:
    """Body of a CRC-valid frame -> packet, or None if malformed."""
    device_id = frame[4]
    if not (device_id <= MAX_DEVICE_ID or device_id == BROADCAST_ID):
        return None
    payload = _destuff(frame[7:-2])
    if payload is None or not payload:
        return None
    try:
        instruction = Instruction(payload[0])
    except ValueError:
        return None
    error_field = 0
    params = payload[1:]
    if instruction is Instruction.STATUS:
        if not params:
            return None
        error_field = params[0]
        params = params[1:]
    return BusPacket(device_id, instruction, bytes(params), error_field)


def decode_stream(
    data: bytes, diagnostics: StreamDiagnostics | None = None
) -> tuple[list[BusPacket], bytes]:
    """Greedily extract well-formed frames from a byte stream.

    Returns (packets, remainder); the remainder is any trailing bytes that
    could still become a frame once more data arrives.
    """
    diag = diagnostics if diagnostics is not None else StreamDiagnostics()
    packets: list[BusPacket] = []
    pos = 0
    n = len(data)
    while True:
        start = data.find(HEADER, pos)
        if start < 0:
            # keep a trailing partial header, discard the rest
            keep = 0
            for k in (3, 2, 1):
                if n - pos >= k and data[n - k:] == HEADER[:k]:
                    keep = k
                    break
            diag.discarded_bytes += (n - pos) - keep
            return packets, bytes(data[n - keep:])
        diag.discarded_bytes += start - pos
        pos = start
        if n - pos < 7:
            return packets, bytes(data[pos:])
        length = int.from_bytes(data[pos + 5: pos + 7], "little")
        if length < 3:
            diag.malformed += 1
            pos += 1
            continue
        end = pos + 7 + length
        if end > n:
            return packets, bytes(data[pos:])
        frame = data[pos:end]
        if crc16(frame[:-2]) != int.from_bytes(frame[-2:], "little"):
            diag.crc_errors += 1
            pos += 1
            continue
        packet = _parse_frame(frame)
        if packet is None:
            diag.malformed += 1
            pos = end
            continue
        packets.append(packet)
        pos = end


class StreamDecoder:
    """Incremental wrapper around decode_stream keeping remainder state."""

    def __init__(self):
        self._buffer = b""
        self.diagnostics = StreamDiagnostics()

    def feed(self, data: bytes) -> list[BusPacket]:
        packets, self._buffer = decode_stream(self._buffer + data, self.diagnostics)
        return packets
