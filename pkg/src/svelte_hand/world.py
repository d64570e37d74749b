"""Quasi-static grasp world.

Couples the sequencing controller to the emulated servo bus through the
wire protocol, feeds contact reaction torques back into the torque-driven
closure, and scores holds with a Coulomb friction balance: an object is
held when closure reached it and the contact set's friction capacity covers
its weight in the worst in-plane direction.

Per-contact normal force is the torque-derived squeeze force saturated at
the fingertip normal cap; in a wrap the opposing contacts each carry the
full squeeze preload.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bus.adapter import F1_SERVO_ID, HandBus
from .bus.emulator import EmulatorTransport, TwoServoBus
from .controller import (
    ActuatorCommand,
    ControllerPhase,
    GraspCommandConfig,
    GraspController,
)
from .geometry import (
    ControlMode,
    Finger,
    ForceSpec,
    GraspMode,
    GRAVITY_M_S2,
    HandGeometry,
    JointState,
    aperture_at,
    contact_normal_force,
    max_aperture,
)
from .tactile import (
    HexIndenter,
    OpticsMap,
    SphereIndenter,
    SurfaceCoord,
    TactileFrame,
    default_optics_map,
    render_contact,
)

CONTACT_TOLERANCE_MM = 3.0
HARD_STOP_MARGIN_DEG = 0.5
SELF_CONTACT_MARGIN_DEG = 0.3
GEL_STIFFNESS_N_PER_MM = 2.0

# where the mode's contacts land on each finger's skin (fraction of length)
TIP_SITE_FRACTION = 0.88
SIDE_SITE_FRACTION = 0.50

MODE_CONTACT_FINGERS = {
    GraspMode.PINCH: (Finger.F1, Finger.F2),
    GraspMode.LATERAL: (Finger.F1, Finger.F3),
    GraspMode.OPPOSITION: (Finger.F1, Finger.F2, Finger.F3),
}


@dataclass(frozen=True)
class BoxShape:
    width: float    # across the grasp at zero rotation, mm
    depth: float
    height: float

    def __post_init__(self):
        if min(self.width, self.depth, self.height) <= 0.0:
            raise ValueError("box dimensions must be positive")

    def across_grasp(self, rotation_deg: float) -> float:
        r = math.radians(rotation_deg)
        return self.width * abs(math.cos(r)) + self.depth * abs(math.sin(r))

    def contact_patch_mm(self) -> float:
        return min(self.depth, self.height)


@dataclass(frozen=True)
class CylinderShape:
    radius: float
    length: float

    def __post_init__(self):
        if min(self.radius, self.length) <= 0.0:
            raise ValueError("cylinder dimensions must be positive")

    def across_grasp(self, rotation_deg: float) -> float:
        return 2.0 * self.radius

    def contact_patch_mm(self) -> float:
        return self.radius


@dataclass(frozen=True)
class SimObject:
    name: str
    shape: BoxShape | CylinderShape
    mass_g: float
    friction: float
    position: tuple[float, float] = (0.0, 0.0)
    rotation_deg: float = 0.0

    def __post_init__(self):
        if self.mass_g < 0.0:
            raise ValueError("mass must be non-negative")
        if not (0.0 < self.friction <= 2.0):
            raise ValueError("friction coefficient must be in (0, 2]")

    @property
    def grasp_width(self) -> float:
        return self.shape.across_grasp(self.rotation_deg)

    @property
    def weight_n(self) -> float:
        return self.mass_g / 1000.0 * GRAVITY_M_S2

    def to_dict(self) -> dict:
        shape: dict
        if isinstance(self.shape, BoxShape):
            shape = {"kind": "box", "width": self.shape.width,
                     "depth": self.shape.depth, "height": self.shape.height}
        else:
            shape = {"kind": "cylinder", "radius": self.shape.radius,
                     "length": self.shape.length}
        return {
            "name": self.name,
            "shape": shape,
            "mass_g": self.mass_g,
            "friction": self.friction,
            "position": list(self.position),
            "rotation_deg": self.rotation_deg,
        }

    @staticmethod
    def from_dict(data: dict) -> "SimObject":
        s = data["shape"]
        if s["kind"] == "box":
            shape = BoxShape(s["width"], s["depth"], s["height"])
        elif s["kind"] == "cylinder":
            shape = CylinderShape(s["radius"], s["length"])
        else:
            raise ValueError(f"unknown shape kind {s['kind']!r}")
        return SimObject(
            name=data["name"],
            shape=shape,
            mass_g=float(data["mass_g"]),
            friction=float(data["friction"]),
            position=tuple(data.get("position", (0.0, 0.0))),
            rotation_deg=float(data.get("rotation_deg", 0.0)),
        )


@dataclass(frozen=True)
class Contact:
    finger: Finger
    site: SurfaceCoord
    normal_force_n: float
    tangential_force_n: float


@dataclass(frozen=True)
class GraspOutcome:
    held: bool
    reason: str
    mode: GraspMode
    object_name: str | None
    contacts: tuple[Contact, ...]
    slack_mm: float | None
    capacity_n: float
    weight_n: float

    def to_dict(self) -> dict:
        return {
            "held": self.held,
            "reason": self.reason,
            "mode": self.mode.name.title(),
            "object": self.object_name,
            "contacts": [
                {
                    "finger": c.finger.value,
                    "site_s": c.site.s,
                    "site_u": c.site.u,
                    "normal_force_n": c.normal_force_n,
                    "tangential_force_n": c.tangential_force_n,
                }
                for c in self.contacts
            ],
            "slack_mm": self.slack_mm,
            "capacity_n": self.capacity_n,
            "weight_n": self.weight_n,
        }


class StallCause(enum.Enum):
    NONE = "none"
    OBJECT = "object"
    SELF_CONTACT = "self_contact"
    HARD_STOP = "hard_stop"


class GraspWorld:
    """Stepwise coupling of controller, bus emulator, object, and skin."""

    def __init__(
        self,
        geometry: HandGeometry,
        config: GraspCommandConfig = GraspCommandConfig(),
        sim_object: SimObject | None = None,
        optics: OpticsMap | None = None,
        force_spec: ForceSpec = ForceSpec(),
        dt: float = 0.01,
    ):
        self.geometry = geometry
        self.force_spec = force_spec
        self.dt = dt
        self.sim_object = sim_object
        self.optics = optics if optics is not None else default_optics_map()
        self.bus = TwoServoBus()
        self.hand = HandBus(EmulatorTransport(self.bus), geometry)
        self.controller = GraspController(geometry, force_spec, config)
        self.tick_index = 0
        self.stall_cause = StallCause.NONE
        self._self_contact_f1 = {
            mode: self._aperture_argmin(mode) for mode in GraspMode
        }

    def _aperture_argmin(self, mode: GraspMode) -> float:
        lo, hi = self.geometry.f1_joint_range
        grid = np.linspace(lo, hi, 2001)
        ap = np.array([aperture_at(mode, float(f), self.geometry) for f in grid])
        return float(grid[int(np.argmin(ap))])

    def load_object(self, sim_object: SimObject | None) -> None:
        self.sim_object = sim_object

    def tick(self) -> ActuatorCommand:
        feedback = self.hand.read_feedback()
        command = self.controller.step(self.dt, feedback)
        self.hand.apply_command(command)
        self._apply_contact_torques(feedback, command)
        self.bus.step(self.dt)
        self.tick_index += 1
        return command

    def _apply_contact_torques(self, feedback: JointState, command: ActuatorCommand) -> None:
        mode = self.controller.mode
        closing = (
            command.f1.mode is ControlMode.TORQUE
            and command.f1.torque is not None
            and command.f1.torque > 0.0
            and mode is not None
        )
        cause = StallCause.NONE
        if closing:
            f1 = feedback.f1_angle
            lo, hi = self.geometry.f1_joint_range
            in_range = self.geometry.joint_in_range(f1, feedback.flipper_angle)
            ap = aperture_at(mode, f1, self.geometry) if in_range else 0.0
            if (
                self.sim_object is not None
                and in_range
                and ap <= self.sim_object.grasp_width
            ):
                cause = StallCause.OBJECT
            elif f1 >= self._self_contact_f1[mode] - SELF_CONTACT_MARGIN_DEG:
                cause = StallCause.SELF_CONTACT
            elif f1 >= hi - HARD_STOP_MARGIN_DEG:
                cause = StallCause.HARD_STOP
        if cause is not StallCause.NONE:
            applied = self.bus.servo(F1_SERVO_ID).applied_torque_nmm
            self.bus.set_external_torque(F1_SERVO_ID, applied)
        else:
            self.bus.set_external_torque(F1_SERVO_ID, 0.0)
        self.stall_cause = cause

    # -- grasp evaluation ----------------------------------------------------

    def contact_sites_on_skin(self, mode: GraspMode) -> dict[Finger, SurfaceCoord]:
        L = self.optics.skin.length
        tip = SurfaceCoord(TIP_SITE_FRACTION * L, 0.0)
        side = SurfaceCoord(SIDE_SITE_FRACTION * L, 0.0)
        if mode is GraspMode.LATERAL:
            return {Finger.F1: tip, Finger.F3: side}
        return {f: tip for f in MODE_CONTACT_FINGERS[mode]}

    def evaluate_outcome(self) -> GraspOutcome:
        mode = self.controller.mode
        obj = self.sim_object
        if mode is None:
            raise RuntimeError("no grasp in progress")
        close_torque = self.controller.config.close_torque
        feedback = self.hand.read_feedback()
        ap_now = aperture_at(
            mode,
            min(max(feedback.f1_angle, 0.0), self.geometry.f1_joint_range[1]),
            self.geometry,
        )
        if obj is None:
            return GraspOutcome(
                held=False, reason="no object loaded", mode=mode, object_name=None,
                contacts=(), slack_mm=None, capacity_n=0.0, weight_n=0.0,
            )
        slack = max_aperture(mode, self.geometry) - obj.grasp_width
        if slack <= 0.0:
            return GraspOutcome(
                held=False, reason="aperture exceeded", mode=mode,
                object_name=obj.name, contacts=(), slack_mm=slack,
                capacity_n=0.0, weight_n=obj.weight_n,
            )
        contact_reached = ap_now <= obj.grasp_width + CONTACT_TOLERANCE_MM
        if not contact_reached:
            return GraspOutcome(
                held=False, reason="no contact", mode=mode, object_name=obj.name,
                contacts=(), slack_mm=slack, capacity_n=0.0, weight_n=obj.weight_n,
            )
        normal = contact_normal_force(close_torque, self.geometry, self.force_spec)
        sites = self.contact_sites_on_skin(mode)
        capacity = obj.friction * normal * len(sites)
        weight = obj.weight_n
        held = capacity >= weight
        contacts = []
        for finger, site in sites.items():
            share = weight / len(sites) if held else obj.friction * normal
            contacts.append(
                Contact(
                    finger=finger,
                    site=site,
                    normal_force_n=normal,
                    tangential_force_n=share,
                )
            )
        return GraspOutcome(
            held=held,
            reason="held" if held else "insufficient friction",
            mode=mode,
            object_name=obj.name,
            contacts=tuple(contacts),
            slack_mm=slack,
            capacity_n=capacity,
            weight_n=weight,
        )

    def render_contact_frames(self, outcome: GraspOutcome) -> dict[int, TactileFrame]:
        frames: dict[int, TactileFrame] = {}
        obj = self.sim_object
        if obj is None or not outcome.contacts:
            return frames
        if isinstance(obj.shape, CylinderShape):
            indenter = SphereIndenter(obj.shape.radius)
        else:
            indenter = HexIndenter(obj.shape.contact_patch_mm())
        for contact in outcome.contacts:
            depth = min(
                contact.normal_force_n / GEL_STIFFNESS_N_PER_MM,
                self.optics.skin.gel_thickness,
            )
            if depth <= 0.0:
                continue
            frames[contact.finger.value] = render_contact(
                indenter,
                contact.site,
                depth,
                self.optics,
                finger=contact.finger.value,
                tick=self.tick_index,
            )
        return frames


@dataclass
class SimulationReport:
    outcome: GraspOutcome
    trace: list[dict]
    frames: dict[int, TactileFrame]
    final_phase: ControllerPhase
    ticks: int


def simulate_grasp(
    mode: GraspMode,
    sim_object: SimObject | None,
    config: GraspCommandConfig = GraspCommandConfig(),
    geometry: HandGeometry | None = None,
    optics: OpticsMap | None = None,
    max_ticks: int = 4000,
) -> SimulationReport:
    """Run one full grasp against the emulator and score the hold."""
    if geometry is None:
        from .calibration import load_calibrated_geometry

        geometry = load_calibrated_geometry()
    world = GraspWorld(
        geometry, config=config, sim_object=sim_object, optics=optics
    )
    # object wider than the mode opening: refuse to even start closing
    if sim_object is not None and sim_object.grasp_width >= max_aperture(mode, geometry):
        outcome = GraspOutcome(
            held=False, reason="aperture exceeded", mode=mode,
            object_name=sim_object.name, contacts=(),
            slack_mm=max_aperture(mode, geometry) - sim_object.grasp_width,
            capacity_n=0.0, weight_n=sim_object.weight_n,
        )
        return SimulationReport(outcome, [], {}, ControllerPhase.IDLE, 0)

    accepted, reason = world.controller.start_grasp(mode, config)
    if not accepted:
        raise ValueError(f"grasp rejected: {reason}")
    for _ in range(max_ticks):
        world.tick()
        if world.controller.phase in (ControllerPhase.HOLDING, ControllerPhase.FAULT):
            break
    if world.controller.phase is ControllerPhase.FAULT:
        snap = world.controller.snapshot()
        outcome = GraspOutcome(
            held=False, reason=f"controller fault: {snap.fault_reason}",
            mode=mode, object_name=sim_object.name if sim_object else None,
            contacts=(), slack_mm=None, capacity_n=0.0,
            weight_n=sim_object.weight_n if sim_object else 0.0,
        )
        return SimulationReport(
            outcome, world.controller.trace, {}, world.controller.phase,
            world.tick_index,
        )
    if world.controller.phase is not ControllerPhase.HOLDING:
        outcome = GraspOutcome(
            held=False, reason="closure timed out", mode=mode,
            object_name=sim_object.name if sim_object else None,
            contacts=(), slack_mm=None, capacity_n=0.0,
            weight_n=sim_object.weight_n if sim_object else 0.0,
        )
        return SimulationReport(
            outcome, world.controller.trace, {}, world.controller.phase,
            world.tick_index,
        )
    if sim_object is None:
        outcome = world.evaluate_outcome()
        frames: dict[int, TactileFrame] = {}
    else:
        outcome = world.evaluate_outcome()
        frames = world.render_contact_frames(outcome)
    return SimulationReport(
        outcome, world.controller.trace, frames, world.controller.phase,
        world.tick_index,
    )


# -- demo tasks --------------------------------------------------------------

class DemoTask(enum.Enum):
    LEGO_PINCH = "lego-pinch"
    SCREWDRIVER_LATERAL = "screwdriver-lateral"
    FLASHLIGHT_OPPOSITION = "flashlight-opposition"


# Shipped demo objects.  The tasks name real props; these dimensions are
# package defaults, not measured values.
DEMO_OBJECTS = {
    DemoTask.LEGO_PINCH: SimObject(
        name="lego-2x4", shape=BoxShape(width=15.8, depth=31.8, height=9.6),
        mass_g=2.5, friction=0.8,
    ),
    DemoTask.SCREWDRIVER_LATERAL: SimObject(
        name="screwdriver", shape=CylinderShape(radius=12.0, length=200.0),
        mass_g=60.0, friction=0.8,
    ),
    DemoTask.FLASHLIGHT_OPPOSITION: SimObject(
        name="flashlight", shape=CylinderShape(radius=18.0, length=150.0),
        mass_g=150.0, friction=0.8,
    ),
}

DEMO_MODES = {
    DemoTask.LEGO_PINCH: GraspMode.PINCH,
    DemoTask.SCREWDRIVER_LATERAL: GraspMode.LATERAL,
    DemoTask.FLASHLIGHT_OPPOSITION: GraspMode.OPPOSITION,
}


def trace_to_jsonl(trace: list[dict]) -> str:
    return "".join(json.dumps(record, sort_keys=False) + "\n" for record in trace)


def run_demo(
    task: DemoTask,
    out_dir: str | Path,
    geometry: HandGeometry | None = None,
    config: GraspCommandConfig = GraspCommandConfig(),
    write_figures: bool = True,
) -> SimulationReport:
    """Execute a demo task and write its report directory:
    trace.jsonl, outcome.json, frame_<finger>_<tick>.pgm, and figures."""
    from .tactile import write_pgm

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if geometry is None:
        from .calibration import load_calibrated_geometry

        geometry = load_calibrated_geometry()
    report = simulate_grasp(
        DEMO_MODES[task], DEMO_OBJECTS[task], config=config, geometry=geometry
    )
    (out / "trace.jsonl").write_text(trace_to_jsonl(report.trace))
    (out / "outcome.json").write_text(
        json.dumps(report.outcome.to_dict(), indent=2, sort_keys=False) + "\n"
    )
    from .calibration import geometry_to_dict

    manifest = {
        "task": task.value,
        "config": {
            "open_position": config.open_position,
            "position_tolerance": config.position_tolerance,
            "close_torque": config.close_torque,
            "settle_ticks": config.settle_ticks,
            "twist_amplitude": config.twist_amplitude,
            "twist_period": config.twist_period,
        },
        "geometry": geometry_to_dict(geometry),
    }
    (out / "demo.json").write_text(json.dumps(manifest, indent=2) + "\n")
    for finger, frame in sorted(report.frames.items()):
        write_pgm(frame, out / f"frame_{finger}_{frame.tick}.pgm")
    if write_figures:
        from .reports import render_demo_figures

        render_demo_figures(report, out)
    return report
