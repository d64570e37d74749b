"""Wire protocol of the control service.

Every message is one JSON object in UTF-8, prefixed by a 4-byte big-endian
byte length.  Clients send command messages and receive exactly one ack or
reject per request id; the service multiplexes telemetry messages onto the
same stream.  Binary tactile payloads travel base64-encoded inside JSON.

See docs/protocol.md for the full schema and golden example bytes.
"""

from __future__ import annotations

import base64
import json
import struct
from dataclasses import dataclass

MAX_MESSAGE_BYTES = 8 * 1024 * 1024

COMMAND_KINDS = (
    "start_grasp",
    "release",
    "twist",
    "jog",
    "set_config",
    "load_object",
)

TELEMETRY_KINDS = (
    "snapshot",
    "joint_state",
    "phase_change",
    "tactile_frame",
    "grasp_outcome",
    "fault",
)


class ProtocolError(ValueError):
    pass


def frame_message(message: dict) -> bytes:
    payload = json.dumps(message, sort_keys=False, separators=(",", ":")).encode()
    if len(payload) > MAX_MESSAGE_BYTES:
        raise ProtocolError("message too large")
    return struct.pack(">I", len(payload)) + payload


def parse_frames(buffer: bytes) -> tuple[list[dict | ProtocolError], bytes]:
    """Extract complete messages; returns (messages, remainder).

    A frame whose payload is not a JSON object yields a ProtocolError entry
    in the message list and decoding continues at the next frame (the
    framing itself is still intact).  An oversize length raises: framing
    can no longer be trusted.
    """
    messages: list[dict | ProtocolError] = []
    pos = 0
    n = len(buffer)
    while n - pos >= 4:
        (length,) = struct.unpack_from(">I", buffer, pos)
        if length > MAX_MESSAGE_BYTES:
            raise ProtocolError(f"frame length {length} exceeds limit")
        if n - pos - 4 < length:
            break
        payload = buffer[pos + 4: pos + 4 + length]
        pos += 4 + length
        try:
            message = json.loads(payload.decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            messages.append(ProtocolError(f"bad message payload: {e}"))
            continue
        if not isinstance(message, dict):
            messages.append(ProtocolError("message must be a JSON object"))
            continue
        messages.append(message)
    return messages, bytes(buffer[pos:])


class MessageStream:
    """Incremental reader over a socket-like object with recv()."""

    def __init__(self, sock):
        self.sock = sock
        self._buffer = b""

    def read_messages(self, max_bytes: int = 65536) -> list[dict]:
        data = self.sock.recv(max_bytes)
        if not data:
            raise ConnectionError("stream closed")
        self._buffer += data
        messages, self._buffer = parse_frames(self._buffer)
        return [m for m in messages if isinstance(m, dict)]


# -- command construction / validation ----------------------------------------

def command_message(kind: str, request_id: int, **fields) -> dict:
    if kind not in COMMAND_KINDS:
        raise ProtocolError(f"unknown command kind {kind!r}")
    return {"type": "command", "kind": kind, "request_id": request_id, **fields}


def validate_command(message: dict) -> tuple[str, int, dict]:
    """Returns (kind, request_id, fields) or raises ProtocolError."""
    if message.get("type") != "command":
        raise ProtocolError("expected a command message")
    kind = message.get("kind")
    if kind not in COMMAND_KINDS:
        raise ProtocolError(f"unknown command kind {kind!r}")
    request_id = message.get("request_id")
    if not isinstance(request_id, int):
        raise ProtocolError("request_id must be an integer")
    fields = {k: v for k, v in message.items()
              if k not in ("type", "kind", "request_id")}
    if kind == "start_grasp" and not isinstance(fields.get("mode"), str):
        raise ProtocolError("start_grasp needs a mode string")
    if kind == "jog":
        if fields.get("joint") not in ("f1", "flipper"):
            raise ProtocolError("jog joint must be 'f1' or 'flipper'")
        if not isinstance(fields.get("position_deg"), (int, float)):
            raise ProtocolError("jog needs a numeric position_deg")
    if kind == "set_config" and not isinstance(fields.get("config"), dict):
        raise ProtocolError("set_config needs a config object")
    if kind == "load_object" and not isinstance(fields.get("object"), dict):
        raise ProtocolError("load_object needs an object description")
    return kind, request_id, fields


def ack_message(request_id: int, tick: int) -> dict:
    return {"type": "ack", "request_id": request_id, "tick": tick}


def reject_message(request_id: int, reason: str) -> dict:
    return {"type": "reject", "request_id": request_id, "reason": reason}


def error_message(reason: str, request_id: int | None = None) -> dict:
    message = {"type": "error", "reason": reason}
    if request_id is not None:
        message["request_id"] = request_id
    return message


def telemetry_message(kind: str, tick: int, timestamp: float, **fields) -> dict:
    if kind not in TELEMETRY_KINDS:
        raise ProtocolError(f"unknown telemetry kind {kind!r}")
    return {
        "type": "telemetry",
        "kind": kind,
        "tick": tick,
        "timestamp": timestamp,
        **fields,
    }


def tactile_payload(pgm: bytes) -> str:
    return base64.b64encode(pgm).decode("ascii")


def tactile_frame_bytes(payload: str) -> bytes:
    return base64.b64decode(payload.encode("ascii"))
