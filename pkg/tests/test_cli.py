"""CLI subcommands, exit codes, and the service round trip."""

import json

import pytest

from svelte_hand.cli import main
from svelte_hand.service import ControlService, ServiceConfig
from svelte_hand.tactile import read_pgm


def test_calibrate_writes_file_and_reports_residuals(tmp_path, capsys):
    out = tmp_path / "geom.json"
    rc = main(["calibrate", "63", "80", "72", "--out", str(out), "--json"])
    assert rc == 0
    printed = json.loads(capsys.readouterr().out)
    assert all(abs(r) < 0.5 for r in printed["residuals_mm"])
    data = json.loads(out.read_text())
    assert data["inter_motor_offset"] == 15.0


def test_calibrate_degenerate_exits_nonzero(tmp_path, capsys):
    rc = main(["calibrate", "0", "0", "0", "--out", str(tmp_path / "g.json")])
    assert rc == 3


def test_calibrate_shifted_targets_grow_finger(tmp_path):
    out_a = tmp_path / "a.json"
    out_b = tmp_path / "b.json"
    assert main(["calibrate", "63", "80", "72", "--out", str(out_a)]) == 0
    assert main(["calibrate", "73", "90", "82", "--out", str(out_b)]) == 0
    a = json.loads(out_a.read_text())
    b = json.loads(out_b.read_text())
    assert b["finger_length"] > a["finger_length"]


def test_demo_then_replay_self_consistent(tmp_path, capsys):
    out = tmp_path / "lego"
    rc = main(["demo", "lego-pinch", "--out", str(out), "--json"])
    assert rc == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["outcome"]["held"] is True
    assert (out / "trace.jsonl").exists()
    rc = main(["replay", str(out / "trace.jsonl")])
    assert rc == 0


def test_replay_detects_divergence(tmp_path, capsys):
    out = tmp_path / "lego"
    assert main(["demo", "lego-pinch", "--out", str(out)]) == 0
    trace = out / "trace.jsonl"
    lines = trace.read_text().splitlines()
    record = json.loads(lines[5])
    record["f1_angle"] += 0.5
    lines[5] = json.dumps(record)
    trace.write_text("\n".join(lines) + "\n")
    rc = main(["replay", str(trace)])
    assert rc == 3
    assert "tick 5" in capsys.readouterr().err


def test_demo_unknown_task_exit_2(capsys):
    assert main(["demo", "juggling"]) == 2


def test_export_frame(tmp_path):
    out = tmp_path / "probe.pgm"
    rc = main(["export-frame", "--shape", "hex", "--size", "13", "--depth",
               "1.0", "--center", "42.5,0", "--out", str(out)])
    assert rc == 0
    depth, _ = read_pgm(out.read_bytes())
    assert depth.max() == pytest.approx(1.0, abs=0.01)


def test_export_frame_bad_center_exit_2(tmp_path):
    rc = main(["export-frame", "--center", "400,0",
               "--out", str(tmp_path / "x.pgm")])
    assert rc == 2


def test_grasp_against_running_service():
    service = ControlService(ServiceConfig(port=0, tick_hz=200.0))
    service.start()
    try:
        socket_arg = f"127.0.0.1:{service.bound_port}"
        rc = main(["grasp", "lateral", "--socket", socket_arg, "--timeout", "30"])
        assert rc == 0
        rc = main(["twist", "--socket", socket_arg])
        assert rc == 2  # lateral hold: twist is pinch-only
        rc = main(["release", "--socket", socket_arg])
        assert rc == 0
    finally:
        service.stop()


def test_grasp_invalid_mode_exit_2():
    assert main(["grasp", "crush", "--socket", "127.0.0.1:1"]) == 2
