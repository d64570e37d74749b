// DOM behavior with a scripted wire: exactly-once sends, enablement,
// slider clamps, stale banner.

import { describe, expect, it } from "vitest";

import { ConsoleApp } from "../src/app.js";
import { FakeWire, snapshotMessage, tick } from "./util.js";

async function mountedApp() {
  const wire = new FakeWire();
  wire.autoAckTick = 99;
  const app = new ConsoleApp(document, async () => wire.stream());
  await app.connect();
  wire.reply(snapshotMessage());
  await tick();
  return { app, wire };
}

describe("console panel", () => {
  it("renders idle enablement after the snapshot", async () => {
    const { app } = await mountedApp();
    expect(app.panel.statusBanner.textContent).toContain("live");
    expect(app.panel.modeButtons.get("pinch")!.disabled).toBe(false);
    expect(app.panel.twistButton.disabled).toBe(true);
    expect(app.panel.releaseButton.disabled).toBe(true);
    app.close();
  });

  it("click pinch sends exactly one start_grasp; rapid clicks do not double-send", async () => {
    const { app, wire } = await mountedApp();
    wire.autoAckTick = null; // keep the command in flight
    const button = app.panel.modeButtons.get("pinch")!;
    button.click();
    button.click();
    button.click();
    await tick();
    const commands = wire.sentFrames.filter((f) => f["kind"] === "start_grasp");
    expect(commands.length).toBe(1);
    expect(commands[0]!["mode"]).toBe("pinch");
    // unique request ids per connection
    const ids = wire.sentFrames.map((f) => f["request_id"]);
    expect(new Set(ids).size).toBe(ids.length);
    app.close();
  });

  it("rejection reasons render verbatim", async () => {
    const { app, wire } = await mountedApp();
    wire.autoAckTick = null;
    app.panel.twistButton.disabled = false; // force-click an ineligible action
    app.panel.twistButton.click();
    await tick();
    const sent = wire.sentFrames.find((f) => f["kind"] === "twist")!;
    wire.reply({ type: "reject", request_id: sent["request_id"], reason: "twist only in pinch grasp" });
    await tick();
    expect(app.panel.rejectionLine.textContent).toBe("twist only in pinch grasp");
    app.close();
  });

  it("jog sliders clamp to the ranges served at connect", async () => {
    const { app, wire } = await mountedApp();
    expect(app.panel.jogFlipper.min).toBe("-50");
    expect(app.panel.jogFlipper.max).toBe("40");
    expect(app.panel.jogF1.min).toBe("0");
    expect(app.panel.jogF1.max).toBe("100");
    app.panel.jogFlipper.value = "40";
    app.panel.jogFlipper.dispatchEvent(new Event("change"));
    await tick();
    const jog = wire.sentFrames.find((f) => f["kind"] === "jog")!;
    expect(jog["position_deg"]).toBe(40);
    app.close();
  });

  it("disconnect shows the stale banner with the last tick and disables controls", async () => {
    const { app, wire } = await mountedApp();
    wire.reply({
      type: "telemetry", kind: "joint_state", tick: 77, timestamp: 0.7,
      f1_angle: 0, flipper_angle: 0, f1_mode: "position",
      flipper_mode: "position", phase: "Idle",
    });
    await tick();
    wire.dropConnection();
    await tick();
    expect(app.panel.statusBanner.textContent).toContain("STALE");
    expect(app.panel.statusBanner.textContent).toContain("77");
    expect(app.panel.modeButtons.get("pinch")!.disabled).toBe(true);
    app.close();
  });

  it("tactile panes track contact fingers and skip malformed payloads", async () => {
    const { app, wire } = await mountedApp();
    wire.reply(snapshotMessage({ phase: "Holding", mode: "Pinch" }));
    const pgmB64 = Buffer.from(
      `P5\n# mm_per_count 1.0e-3\n2 2\n65535\n` + "\0".repeat(8), "latin1",
    ).toString("base64");
    wire.reply({
      type: "telemetry", kind: "tactile_frame", tick: 300, timestamp: 3,
      finger: 1, payload_pgm_b64: pgmB64, contact_area_mm2: 12.5,
      centroid_s: 74.8, centroid_u: 0.1, max_depth_mm: 1.1,
    });
    wire.reply({
      type: "telemetry", kind: "tactile_frame", tick: 300, timestamp: 3,
      finger: 2, payload_pgm_b64: "garbage!", contact_area_mm2: 1,
      centroid_s: null, centroid_u: null, max_depth_mm: 0,
    });
    await tick();
    expect(app.panel.tactileFingers()).toEqual([1]);
    expect(app.state.frameErrors).toBe(1);
    app.close();
  });
});
