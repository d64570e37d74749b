"""Long-running control service.

One tick thread owns the controller, the bus, and the grasp world; command
intake and telemetry fan-out talk to it only through queues.  Commands
apply at the next tick boundary and are acked with the tick they applied
at.  Telemetry never blocks the tick: slow subscribers lose oldest
telemetry first (acks and rejects are never dropped) and the per-connection
drop counter rides on subsequent samples.

New subscribers always receive a full state snapshot before any live
telemetry.
"""

from __future__ import annotations

import collections
import json
import os
import socket
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .bus.adapter import HandBus
from .bus.serial_link import SerialTransport
from .calibration import load_calibrated_geometry, load_geometry
from .controller import (
    ActuatorCommand,
    AxisCommand,
    ControllerPhase,
    GraspCommandConfig,
    GraspController,
)
from .geometry import ControlMode, GraspMode, HandGeometry
from .protocol import (
    ProtocolError,
    ack_message,
    error_message,
    frame_message,
    parse_frames,
    reject_message,
    tactile_payload,
    telemetry_message,
    validate_command,
)
from .tactile import frame_metrics, pgm_bytes
from .world import GraspWorld, SimObject

TELEMETRY_QUEUE_LIMIT = 256


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 0                      # 0 = pick a free port
    bus: str = "emulator"              # or "serial"
    serial_device: str = "/dev/ttyUSB0"
    serial_baud: int = 57600
    tick_hz: float = 100.0
    telemetry_decimation: int = 5      # joint samples every N ticks
    tactile_decimation: int = 10       # tactile frames at most every N ticks
    geometry_path: str | None = None   # None = packaged calibrated geometry

    @staticmethod
    def from_file(path: str | Path) -> "ServiceConfig":
        data = json.loads(Path(path).read_text())
        cfg = ServiceConfig()
        for key in vars(cfg):
            if key in data:
                setattr(cfg, key, data[key])
        return cfg

    @staticmethod
    def load(path: str | Path | None = None) -> "ServiceConfig":
        """Config file plus environment overrides (SVELTE_HAND_CONFIG as the
        file fallback, SVELTE_HAND_SOCKET as host:port, SVELTE_HAND_BUS)."""
        if path is None:
            path = os.environ.get("SVELTE_HAND_CONFIG")
        cfg = ServiceConfig.from_file(path) if path else ServiceConfig()
        sock = os.environ.get("SVELTE_HAND_SOCKET")
        if sock:
            host, _, port = sock.rpartition(":")
            cfg.host = host or cfg.host
            cfg.port = int(port)
        bus = os.environ.get("SVELTE_HAND_BUS")
        if bus:
            cfg.bus = bus
        return cfg


class _Subscriber:
    def __init__(self, sock: socket.socket, address):
        self.sock = sock
        self.address = address
        self.telemetry = collections.deque(maxlen=TELEMETRY_QUEUE_LIMIT)
        self.replies = collections.deque()
        self.dropped = 0
        self.lock = threading.Lock()
        self.event = threading.Event()
        self.closed = False
        self.snapshot_sent = False

    def queue_telemetry(self, message: dict) -> None:
        with self.lock:
            if len(self.telemetry) == self.telemetry.maxlen:
                self.dropped += 1
            self.telemetry.append(message)
        self.event.set()

    def queue_reply(self, message: dict) -> None:
        with self.lock:
            self.replies.append(message)
        self.event.set()

    def drain(self) -> list[dict]:
        with self.lock:
            out = list(self.replies) + list(self.telemetry)
            self.replies.clear()
            self.telemetry.clear()
        return out


class ControlService:
    def __init__(self, config: ServiceConfig = ServiceConfig(),
                 geometry: HandGeometry | None = None):
        self.config = config
        if geometry is not None:
            self.geometry = geometry
        elif config.geometry_path:
            self.geometry = load_geometry(config.geometry_path)
        else:
            self.geometry = load_calibrated_geometry()
        self.dt = 1.0 / config.tick_hz

        self.grasp_config = GraspCommandConfig()
        if config.bus == "emulator":
            self.world = GraspWorld(self.geometry, config=self.grasp_config)
            self.controller = self.world.controller
            self.hand = self.world.hand
        elif config.bus == "serial":
            self.world = None
            transport = SerialTransport(config.serial_device, config.serial_baud)
            self.hand = HandBus(transport, self.geometry)
            self.controller = GraspController(self.geometry, config=self.grasp_config)
        else:
            raise ValueError(f"unknown bus backend {config.bus!r}")

        self.tick = 0
        self._idle_command = ActuatorCommand(
            f1=AxisCommand(ControlMode.POSITION, position=0.0),
            flipper=AxisCommand(ControlMode.POSITION, position=0.0),
        )
        self._commands: collections.deque = collections.deque()
        self._commands_lock = threading.Lock()
        self._subscribers: list[_Subscriber] = []
        self._subscribers_lock = threading.Lock()
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._server: socket.socket | None = None
        self._last_phase = self.controller.phase
        self._was_busy = False
        self._outcome_published = False
        self.bound_port: int | None = None
        self.tick_durations: collections.deque = collections.deque(maxlen=2048)

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> None:
        self._server = socket.create_server(
            (self.config.host, self.config.port), reuse_port=False
        )
        self._server.settimeout(0.2)
        self.bound_port = self._server.getsockname()[1]
        self._threads = [
            threading.Thread(target=self._tick_loop, name="tick", daemon=True),
            threading.Thread(target=self._accept_loop, name="accept", daemon=True),
        ]
        for t in self._threads:
            t.start()

    def stop(self) -> None:
        self._stop.set()
        for t in self._threads:
            t.join(timeout=2.0)
        if self._server is not None:
            self._server.close()
        with self._subscribers_lock:
            for sub in self._subscribers:
                sub.closed = True
                sub.event.set()
                try:
                    sub.sock.close()
                except OSError:
                    pass
            self._subscribers.clear()

    def serve_forever(self) -> None:
        if self._server is None:
            self.start()
        try:
            while not self._stop.is_set():
                time.sleep(0.2)
        except KeyboardInterrupt:
            pass
        finally:
            self.stop()

    # -- tick thread -----------------------------------------------------------

    def _tick_loop(self) -> None:
        period = self.dt
        next_deadline = time.monotonic() + period
        while not self._stop.is_set():
            t0 = time.monotonic()
            self._run_one_tick()
            self.tick_durations.append(time.monotonic() - t0)
            delay = next_deadline - time.monotonic()
            next_deadline += period
            if delay > 0:
                time.sleep(delay)
            elif delay < -1.0:
                next_deadline = time.monotonic() + period

    def _run_one_tick(self) -> None:
        self._process_commands()
        feedback = self.hand.read_feedback()
        command = self.controller.step(self.dt, feedback)
        if self.controller.phase is ControllerPhase.IDLE:
            if self._was_busy:
                # back from a grasp: park where the controller left things
                self._idle_command = command
                self._was_busy = False
            command = self._idle_command
        else:
            self._was_busy = True
        self.hand.apply_command(command)
        if self.world is not None:
            self.world._apply_contact_torques(feedback, command)
            self.world.bus.step(self.dt)
            self.world.tick_index += 1
        self._publish(feedback)
        self.tick += 1

    def _process_commands(self) -> None:
        while True:
            with self._commands_lock:
                if not self._commands:
                    return
                sub, message = self._commands.popleft()
            try:
                kind, request_id, fields = validate_command(message)
            except ProtocolError as e:
                sub.queue_reply(error_message(str(e), message.get("request_id")
                                              if isinstance(message, dict) else None))
                continue
            accepted, reason = self._apply_command(kind, fields)
            if accepted:
                sub.queue_reply(ack_message(request_id, self.tick))
            else:
                sub.queue_reply(reject_message(request_id, reason))

    def _apply_command(self, kind: str, fields: dict) -> tuple[bool, str]:
        if kind == "start_grasp":
            try:
                mode = GraspMode[fields["mode"].upper()]
            except KeyError:
                return False, f"unknown grasp mode {fields['mode']!r}"
            self._outcome_published = False
            return self.controller.start_grasp(mode, self.grasp_config)
        if kind == "release":
            return self.controller.release()
        if kind == "twist":
            return self.controller.twist()
        if kind == "jog":
            return self._jog(fields["joint"], float(fields["position_deg"]))
        if kind == "set_config":
            return self._set_config(fields["config"])
        if kind == "load_object":
            return self._load_object(fields["object"])
        return False, f"unhandled command {kind}"

    def _jog(self, joint: str, position_deg: float) -> tuple[bool, str]:
        if self.controller.phase is not ControllerPhase.IDLE:
            return False, "jog only while idle"
        geom = self.geometry
        if joint == "f1":
            lo, hi = geom.f1_joint_range
        else:
            lo, hi = geom.flipper_range
        if not (lo <= position_deg <= hi):
            return False, (
                f"{joint} target {position_deg:.1f} deg outside [{lo}, {hi}]"
            )
        f1 = self._idle_command.f1
        flipper = self._idle_command.flipper
        if joint == "f1":
            f1 = AxisCommand(ControlMode.POSITION, position=position_deg)
        else:
            flipper = AxisCommand(ControlMode.POSITION, position=position_deg)
        self._idle_command = ActuatorCommand(f1=f1, flipper=flipper)
        return True, "jogging"

    def _set_config(self, data: dict) -> tuple[bool, str]:
        if self.controller.phase is not ControllerPhase.IDLE:
            return False, "config changes only while idle"
        try:
            cfg = GraspCommandConfig(
                open_position=float(data.get("open_position", self.grasp_config.open_position)),
                position_tolerance=float(data.get("position_tolerance", self.grasp_config.position_tolerance)),
                close_torque=float(data.get("close_torque", self.grasp_config.close_torque)),
                settle_ticks=int(data.get("settle_ticks", self.grasp_config.settle_ticks)),
                twist_amplitude=float(data.get("twist_amplitude", self.grasp_config.twist_amplitude)),
                twist_period=float(data.get("twist_period", self.grasp_config.twist_period)),
            )
        except (TypeError, ValueError) as e:
            return False, f"bad config: {e}"
        self.grasp_config = cfg
        self.controller.config = cfg
        return True, "config updated"

    def _load_object(self, data: dict) -> tuple[bool, str]:
        if self.world is None:
            return False, "object loading requires the emulator bus"
        try:
            obj = SimObject.from_dict(data)
        except (KeyError, TypeError, ValueError) as e:
            return False, f"bad object: {e}"
        self.world.load_object(obj)
        return True, f"loaded {obj.name}"

    # -- telemetry --------------------------------------------------------------

    def _publish(self, feedback) -> None:
        now = time.monotonic()
        phase = self.controller.phase
        events = []
        if phase is not self._last_phase:
            events.append(
                telemetry_message(
                    "phase_change", self.tick, now,
                    phase=phase.value,
                    mode=self.controller.mode.name.title() if self.controller.mode else None,
                )
            )
            if phase is ControllerPhase.FAULT:
                events.append(
                    telemetry_message(
                        "fault", self.tick, now,
                        reason=self.controller.snapshot().fault_reason,
                    )
                )
            if (
                phase is ControllerPhase.HOLDING
                and not self._outcome_published
                and self.world is not None
                and self.world.sim_object is not None
            ):
                outcome = self.world.evaluate_outcome()
                events.append(
                    telemetry_message(
                        "grasp_outcome", self.tick, now, outcome=outcome.to_dict()
                    )
                )
                self._outcome_published = True
                events.extend(self._tactile_events(outcome, now))
            self._last_phase = phase
        if self.tick % self.config.telemetry_decimation == 0:
            events.append(self._joint_sample(feedback, now))
        if (
            self.tick % self.config.tactile_decimation == 0
            and phase in (ControllerPhase.HOLDING, ControllerPhase.TWISTING)
            and self.world is not None
            and self.world.sim_object is not None
            and self._outcome_published
        ):
            outcome = self.world.evaluate_outcome()
            events.extend(self._tactile_events(outcome, now))
        if not events:
            return
        with self._subscribers_lock:
            subs = list(self._subscribers)
        for sub in subs:
            if not sub.snapshot_sent:
                sub.queue_telemetry(self._snapshot_message(feedback, now))
                sub.snapshot_sent = True
            for event in events:
                sub.queue_telemetry(event)

    def _joint_sample(self, feedback, now: float) -> dict:
        return telemetry_message(
            "joint_state", self.tick, now,
            f1_angle=feedback.f1_angle,
            flipper_angle=feedback.flipper_angle,
            f1_mode=feedback.f1_mode.value,
            flipper_mode=feedback.flipper_mode.value,
            phase=self.controller.phase.value,
        )

    def _snapshot_message(self, feedback, now: float) -> dict:
        snap = self.controller.snapshot()
        return telemetry_message(
            "snapshot", self.tick, now,
            phase=snap.phase.value,
            mode=snap.mode.name.title() if snap.mode else None,
            f1_angle=feedback.f1_angle,
            flipper_angle=feedback.flipper_angle,
            f1_range=list(self.geometry.f1_joint_range),
            flipper_range=list(self.geometry.flipper_range),
            gel_thickness_mm=(
                self.world.optics.skin.gel_thickness if self.world else 2.0
            ),
            config={
                "open_position": self.grasp_config.open_position,
                "position_tolerance": self.grasp_config.position_tolerance,
                "close_torque": self.grasp_config.close_torque,
                "settle_ticks": self.grasp_config.settle_ticks,
                "twist_amplitude": self.grasp_config.twist_amplitude,
                "twist_period": self.grasp_config.twist_period,
            },
            object=(
                self.world.sim_object.to_dict()
                if self.world and self.world.sim_object
                else None
            ),
            fault=snap.fault_reason,
        )

    def _tactile_events(self, outcome, now: float) -> list[dict]:
        if self.world is None:
            return []
        events = []
        frames = self.world.render_contact_frames(outcome)
        for finger, frame in sorted(frames.items()):
            metrics = frame_metrics(frame, self.world.optics)
            events.append(
                telemetry_message(
                    "tactile_frame", self.tick, now,
                    finger=finger,
                    payload_pgm_b64=tactile_payload(
                        pgm_bytes(frame, self.world.optics.skin.gel_thickness)
                    ),
                    contact_area_mm2=metrics.contact_area_mm2,
                    centroid_s=metrics.centroid.s if metrics.centroid else None,
                    centroid_u=metrics.centroid.u if metrics.centroid else None,
                    max_depth_mm=metrics.max_depth_mm,
                )
            )
        return events

    # -- socket plumbing ---------------------------------------------------------

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                sock, address = self._server.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            sub = _Subscriber(sock, address)
            with self._subscribers_lock:
                self._subscribers.append(sub)
            threading.Thread(
                target=self._reader_loop, args=(sub,), daemon=True,
                name=f"reader-{address}",
            ).start()
            threading.Thread(
                target=self._writer_loop, args=(sub,), daemon=True,
                name=f"writer-{address}",
            ).start()

    def _drop_subscriber(self, sub: _Subscriber) -> None:
        sub.closed = True
        sub.event.set()
        with self._subscribers_lock:
            if sub in self._subscribers:
                self._subscribers.remove(sub)
        try:
            sub.sock.close()
        except OSError:
            pass

    def _reader_loop(self, sub: _Subscriber) -> None:
        buffer = b""
        sub.sock.settimeout(0.5)
        while not self._stop.is_set() and not sub.closed:
            try:
                data = sub.sock.recv(65536)
            except socket.timeout:
                continue
            except OSError:
                break
            if not data:
                break
            buffer += data
            try:
                messages, buffer = parse_frames(buffer)
            except ProtocolError as e:
                # framing is unrecoverable: report and resync from empty
                sub.queue_reply(error_message(str(e)))
                buffer = b""
                continue
            for message in messages:
                if isinstance(message, ProtocolError):
                    sub.queue_reply(error_message(str(message)))
                    continue
                with self._commands_lock:
                    self._commands.append((sub, message))
        self._drop_subscriber(sub)

    def _writer_loop(self, sub: _Subscriber) -> None:
        while not sub.closed:
            sub.event.wait(timeout=0.25)
            sub.event.clear()
            for message in sub.drain():
                if sub.dropped and message.get("kind") == "joint_state":
                    message = dict(message)
                    message["dropped"] = sub.dropped
                try:
                    sub.sock.sendall(frame_message(message))
                except (OSError, ProtocolError):
                    self._drop_subscriber(sub)
                    return


class ServiceClient:
    """Blocking convenience client for the CLI and tests."""

    def __init__(self, host: str, port: int, timeout: float = 5.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self.timeout = timeout
        self._buffer = b""
        self._request_id = 0
        self.telemetry: collections.deque = collections.deque()

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass

    def _read_some(self) -> list[dict]:
        data = self.sock.recv(65536)
        if not data:
            raise ConnectionError("service closed the stream")
        self._buffer += data
        messages, self._buffer = parse_frames(self._buffer)
        return [m for m in messages if isinstance(m, dict)]

    def command(self, kind: str, **fields) -> dict:
        """Send one command and block for its ack/reject/error."""
        self._request_id += 1
        request_id = self._request_id
        message = {"type": "command", "kind": kind,
                   "request_id": request_id, **fields}
        self.sock.sendall(frame_message(message))
        deadline = time.monotonic() + self.timeout
        while time.monotonic() < deadline:
            for msg in self._read_some():
                if msg.get("type") == "telemetry":
                    self.telemetry.append(msg)
                elif msg.get("request_id") == request_id or msg.get("type") == "error":
                    return msg
        raise TimeoutError(f"no reply to {kind}")

    def poll_telemetry(self, wait: float = 0.0) -> list[dict]:
        end = time.monotonic() + wait
        out = list(self.telemetry)
        self.telemetry.clear()
        while True:
            try:
                self.sock.settimeout(max(end - time.monotonic(), 0.01))
                for msg in self._read_some():
                    if msg.get("type") == "telemetry":
                        out.append(msg)
            except (socket.timeout, TimeoutError):
                pass
            finally:
                self.sock.settimeout(self.timeout)
            if time.monotonic() >= end:
                return out

    def wait_for_phase(self, phase: str, timeout: float = 20.0) -> bool:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            for msg in self.poll_telemetry(wait=0.1):
                if msg.get("kind") in ("phase_change", "snapshot", "joint_state") \
                        and msg.get("phase") == phase:
                    return True
        return False
