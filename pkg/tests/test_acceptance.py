"""Acceptance gate: one test per criterion, each printing its verdict.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines.  Tolerances are pinned here and nowhere else.
"""

import json
import random

import numpy as np
import pytest

from svelte_hand.bus.packets import (
    BusPacket,
    Instruction,
    StreamDiagnostics,
    decode_stream,
    encode_packet,
)
from svelte_hand.calibration import calibrate_geometry
from svelte_hand.cli import main as cli_main
from svelte_hand.controller import GraspCommandConfig
from svelte_hand.geometry import (
    Finger,
    ForceSpec,
    GraspMode,
    JointState,
    LimitViolation,
    aperture,
    fingertip_force,
    joint_to_motor,
    max_aperture,
)
from svelte_hand.tactile import (
    SphereIndenter,
    SurfaceCoord,
    default_optics_map,
    frame_metrics,
    pixel_to_surface,
    render_contact,
)
from svelte_hand.world import (
    BoxShape,
    CylinderShape,
    DemoTask,
    SimObject,
    run_demo,
    simulate_grasp,
    trace_to_jsonl,
)


def verdict(name: str) -> None:
    print(f"\nACCEPTANCE {name}: PASS")


@pytest.fixture(scope="module")
def geom():
    return calibrate_geometry(63.0, 80.0, 72.0).geometry


def test_aperture_reproduction(geom):
    """calibrate 63 80 72 -> each mode opening within 0.5 mm at fully open."""
    targets = {GraspMode.PINCH: 63.0, GraspMode.LATERAL: 80.0,
               GraspMode.OPPOSITION: 72.0}
    for mode, target in targets.items():
        joint = JointState(f1_angle=0.0, flipper_angle=mode.flipper_setpoint)
        got = aperture(mode, joint, geom)
        assert abs(got - target) <= 0.5, f"{mode.name}: {got:.3f} vs {target}"
    verdict("aperture-reproduction (63/80/72 within 0.5 mm)")


def test_setpoint_fidelity(geom):
    """Controller traces carry flipper position targets of exactly
    25 / -46 / 15 degrees for pinch / lateral / opposition."""
    expected = {GraspMode.PINCH: 25.0, GraspMode.LATERAL: -46.0,
                GraspMode.OPPOSITION: 15.0}
    for mode, setpoint in expected.items():
        obj = SimObject("probe", CylinderShape(10.0, 80.0), 20.0, 0.8)
        report = simulate_grasp(mode, obj, geometry=geom)
        targets = {
            r["flipper_target"]
            for r in report.trace
            if r["phase"] in ("PositioningFlipper", "ClosingF1", "Holding")
        }
        assert targets == {setpoint}, f"{mode.name}: {targets}"
    verdict("setpoint-fidelity (25 / -46 / 15 exact)")


def test_sequencing_invariant_randomized(geom):
    """100 randomized grasps: open -> position -> torque-close ordering and
    flipper-stays-in-position-mode during closure; zero violations."""
    rng = random.Random(61375)
    cap_torque = 6.3 * geom.finger_length / geom.gear_ratio_f1
    violations = 0
    runs = 0
    for _ in range(100):
        mode = rng.choice(list(GraspMode))
        torque = rng.uniform(20.0, 0.98 * cap_torque)
        width = rng.uniform(5.0, max_aperture(mode, geom) - 1.0)
        if rng.random() < 0.5:
            shape = BoxShape(width, rng.uniform(10, 40), rng.uniform(10, 40))
        else:
            shape = CylinderShape(width / 2.0, rng.uniform(40, 150))
        obj = SimObject("rand", shape, rng.uniform(1.0, 300.0),
                        rng.uniform(0.2, 1.5))
        cfg = GraspCommandConfig(close_torque=torque)
        report = simulate_grasp(mode, obj, config=cfg, geometry=geom)
        runs += 1
        trace = report.trace
        assert trace, "empty trace"
        tol = cfg.position_tolerance
        sp = mode.flipper_setpoint
        close_ticks = [i for i, r in enumerate(trace) if r["phase"] == "ClosingF1"]
        if not close_ticks:
            violations += 1
            continue
        first_close = close_ticks[0]
        settled = [
            i for i, r in enumerate(trace[:first_close])
            if r["phase"] == "PositioningFlipper"
            and abs(r["flipper_angle"] - sp) < tol
        ]
        opened = [i for i, r in enumerate(trace) if r["phase"] == "OpeningF1"]
        if not settled or not opened or not (
            min(opened) < max(settled) < first_close
        ):
            violations += 1
            continue
        for r in trace:
            if r["phase"] in ("ClosingF1", "Holding", "Twisting"):
                if r["flipper_mode"] != "position" or r["f1_mode"] != "torque":
                    violations += 1
                    break
    assert runs == 100
    assert violations == 0
    verdict("sequencing-invariant (100 randomized runs, 0 violations)")


def test_range_and_gear_checks(geom):
    """f1 joint span 100 <-> motor span 300 at 3:1; flipper 90 at 1:1;
    out-of-range commands rejected."""
    lo = joint_to_motor(JointState(0.0, -50.0), geom)
    hi = joint_to_motor(JointState(100.0, 40.0), geom)
    assert hi.f1_angle - lo.f1_angle == pytest.approx(300.0, abs=1e-12)
    assert hi.flipper_angle - lo.flipper_angle == pytest.approx(90.0, abs=1e-12)
    with pytest.raises(LimitViolation):
        joint_to_motor(JointState(100.001, 0.0), geom)
    with pytest.raises(LimitViolation):
        joint_to_motor(JointState(0.0, 40.001), geom)
    with pytest.raises(LimitViolation):
        joint_to_motor(JointState(-0.001, 0.0), geom)
    verdict("range-gear (100<->300 at 3:1, 90 at 1:1, rejections)")


def test_force_consistency(geom):
    """Caps 2.5 / 6.3 / 2.2 N; in-model tangential ratio exactly 3.0 at equal
    torque; the cap ratio 6.3/2.2 within 15% of 3.0."""
    spec = ForceSpec()
    big = 1e6
    assert fingertip_force(big, Finger.F1, geom, spec) == pytest.approx(6.3)
    assert fingertip_force(big, Finger.F2, geom, spec) == pytest.approx(2.2)
    assert fingertip_force(big, Finger.F3, geom, spec) == pytest.approx(2.2)
    from svelte_hand.geometry import contact_normal_force

    assert contact_normal_force(big, geom, spec) == pytest.approx(2.5)
    torque = 30.0  # below all caps
    ratio = (fingertip_force(torque, Finger.F1, geom, spec)
             / fingertip_force(torque, Finger.F2, geom, spec))
    assert ratio == pytest.approx(3.0, abs=1e-12)
    assert 0.85 * 3.0 <= 6.3 / 2.2 <= 1.15 * 3.0
    verdict("force-consistency (caps, 3.0 ratio, 15% band)")


def crc16_bitwise_reference(data: bytes) -> int:
    crc = 0
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x8005) & 0xFFFF if crc & 0x8000 else (crc << 1) & 0xFFFF
    return crc


def test_codec_acceptance():
    """10^4 random round trips with zero failures; 10^5-string decoder fuzz
    with zero crashes; ping fixture matches the independent CRC oracle."""
    # fixture vs oracle
    frame = encode_packet(BusPacket(1, Instruction.PING))
    assert frame == bytes.fromhex("fffffd0001030001194e")
    assert crc16_bitwise_reference(frame[:-2]) == int.from_bytes(frame[-2:], "little")

    rng = random.Random(0xACCE)
    instrs = [Instruction.PING, Instruction.READ, Instruction.WRITE,
              Instruction.SYNC_WRITE, Instruction.STATUS]
    failures = 0
    for _ in range(10_000):
        n = rng.randrange(0, 32)
        params = bytearray(rng.randrange(256) for _ in range(n))
        if n > 2 and rng.random() < 0.25:
            k = rng.randrange(0, n - 2)
            params[k:k + 3] = b"\xff\xff\xfd"
        instr = rng.choice(instrs)
        pkt = BusPacket(
            rng.randrange(253), instr, bytes(params),
            error_field=rng.randrange(256) if instr is Instruction.STATUS else 0,
        )
        decoded, rest = decode_stream(encode_packet(pkt))
        if decoded != [pkt] or rest != b"":
            failures += 1
    assert failures == 0

    diag = StreamDiagnostics()
    for _ in range(100_000):
        blob = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 40)))
        packets, rest = decode_stream(blob, diag)  # must never raise
        for p in packets:
            assert encode_packet(p) in blob
    verdict("codec (10^4 round trips, 10^5 fuzz, ping fixture)")


def test_tactile_map_acceptance():
    """Full-skin 1 mm grid inside image bounds; surface<->pixel round trip
    within 1e-6 mm; sphere contact area within 5% of closed form."""
    optics = default_optics_map()
    for s, u, x, y in optics.grid_pixels(step_mm=1.0):
        assert 0.0 <= x <= optics.image_width - 1
        assert 0.0 <= y <= optics.image_height - 1
        back = pixel_to_surface(x, y, optics)
        assert abs(back.s - s) <= 1e-6 and abs(back.u - u) <= 1e-6
    r, depth = 6.0, 1.5
    frame = render_contact(SphereIndenter(r), SurfaceCoord(42.5, 0.0), depth, optics)
    area = frame_metrics(frame, optics).contact_area_mm2
    expected = np.pi * (2 * r * depth - depth**2)
    assert abs(area - expected) / expected <= 0.05
    verdict("tactile-map (coverage, 1e-6 round trip, 5% sphere area)")


def test_demo_acceptance(geom, tmp_path):
    """lego-pinch holds with exactly fingers 1+2; screwdriver-lateral
    contacts f1 tip + f3 side; flashlight-opposition holds with 3 fingers;
    62 mm box contacts, 64 mm box rejected."""
    lego = run_demo(DemoTask.LEGO_PINCH, tmp_path / "lego", geometry=geom)
    assert lego.outcome.held
    assert sorted(c.finger for c in lego.outcome.contacts) == [Finger.F1, Finger.F2]

    sd = run_demo(DemoTask.SCREWDRIVER_LATERAL, tmp_path / "sd", geometry=geom)
    assert sd.outcome.held
    by_finger = {c.finger: c for c in sd.outcome.contacts}
    assert sorted(by_finger) == [Finger.F1, Finger.F3]
    skin_length = 85.0
    assert by_finger[Finger.F1].site.s >= 0.8 * skin_length
    assert by_finger[Finger.F3].site.s == pytest.approx(0.5 * skin_length)

    fl = run_demo(DemoTask.FLASHLIGHT_OPPOSITION, tmp_path / "fl", geometry=geom)
    assert fl.outcome.held
    assert len(fl.outcome.contacts) == 3

    def pinch_box(width):
        obj = SimObject("box", BoxShape(width, 30.0, 20.0), 10.0, 0.8)
        return simulate_grasp(GraspMode.PINCH, obj, geometry=geom).outcome

    assert pinch_box(62.0).held
    wide = pinch_box(64.0)
    assert not wide.held and wide.reason == "aperture exceeded"
    verdict("demos (contact fingers, hold verdicts, 62/64 boundary)")


def test_determinism_acceptance(geom, tmp_path):
    """Byte-identical re-simulation of every demo trace; CLI replay agrees."""
    for task in DemoTask:
        a = run_demo(task, tmp_path / f"{task.value}-a", geometry=geom,
                     write_figures=False)
        b = run_demo(task, tmp_path / f"{task.value}-b", geometry=geom,
                     write_figures=False)
        ta = (tmp_path / f"{task.value}-a" / "trace.jsonl").read_bytes()
        tb = (tmp_path / f"{task.value}-b" / "trace.jsonl").read_bytes()
        assert ta == tb, f"{task.value} trace differs"
        assert trace_to_jsonl(a.trace).encode() == ta
    rc = cli_main(["replay", str(tmp_path / "lego-pinch-a" / "trace.jsonl")])
    assert rc == 0
    verdict("determinism (byte-identical traces, replay exit 0)")
