// DOM console: status banner, command panel, jog sliders, tactile views.
// Rendering is driven exclusively by UiState updates; every user
// interaction sends exactly one command through the session.

import type { GraspModeName } from "./messages.js";
import { base64ToBytes, decodePgm } from "./pgm.js";
import { depthToRgba } from "./heatmap.js";
import type { Session } from "./session.js";
import { clampToRange, enablement, type UiState } from "./state.js";

export const OBJECT_PRESETS: Record<string, Record<string, unknown>> = {
  "lego-2x4": {
    name: "lego-2x4",
    shape: { kind: "box", width: 15.8, depth: 31.8, height: 9.6 },
    mass_g: 2.5,
    friction: 0.8,
  },
  screwdriver: {
    name: "screwdriver",
    shape: { kind: "cylinder", radius: 12.0, length: 200.0 },
    mass_g: 60.0,
    friction: 0.8,
  },
  flashlight: {
    name: "flashlight",
    shape: { kind: "cylinder", radius: 18.0, length: 150.0 },
    mass_g: 150.0,
    friction: 0.8,
  },
};

const MODES: GraspModeName[] = ["pinch", "lateral", "opposition"];
const FINGERS = [1, 2, 3];

interface FingerPane {
  canvas: HTMLCanvasElement;
  metrics: HTMLElement;
  hasData: boolean;
  lastTick: number;
}

export class ConsolePanel {
  readonly root: HTMLElement;
  readonly statusBanner: HTMLElement;
  readonly phaseBadge: HTMLElement;
  readonly faultLine: HTMLElement;
  readonly rejectionLine: HTMLElement;
  readonly modeButtons = new Map<GraspModeName, HTMLButtonElement>();
  readonly twistButton: HTMLButtonElement;
  readonly releaseButton: HTMLButtonElement;
  readonly jogF1: HTMLInputElement;
  readonly jogFlipper: HTMLInputElement;
  readonly objectSelect: HTMLSelectElement;
  private readonly panes = new Map<number, FingerPane>();
  private state: UiState | null = null;

  constructor(
    doc: Document,
    private readonly session: Session,
  ) {
    this.root = doc.createElement("div");
    this.root.className = "console";

    this.statusBanner = doc.createElement("div");
    this.statusBanner.className = "status-banner";
    this.root.appendChild(this.statusBanner);

    this.phaseBadge = doc.createElement("span");
    this.phaseBadge.className = "phase-badge";
    this.root.appendChild(this.phaseBadge);

    this.faultLine = doc.createElement("div");
    this.faultLine.className = "fault";
    this.root.appendChild(this.faultLine);

    this.rejectionLine = doc.createElement("div");
    this.rejectionLine.className = "rejection";
    this.root.appendChild(this.rejectionLine);

    const commandRow = doc.createElement("div");
    commandRow.className = "commands";
    for (const mode of MODES) {
      const button = doc.createElement("button");
      button.textContent = mode;
      button.dataset["mode"] = mode;
      button.disabled = true;
      button.addEventListener("click", () => {
        void this.dispatch("start_grasp", { mode });
      });
      this.modeButtons.set(mode, button);
      commandRow.appendChild(button);
    }
    this.twistButton = doc.createElement("button");
    this.twistButton.textContent = "twist";
    this.twistButton.disabled = true;
    this.twistButton.addEventListener("click", () => {
      void this.dispatch("twist");
    });
    commandRow.appendChild(this.twistButton);

    this.releaseButton = doc.createElement("button");
    this.releaseButton.textContent = "release";
    this.releaseButton.disabled = true;
    this.releaseButton.addEventListener("click", () => {
      void this.dispatch("release");
    });
    commandRow.appendChild(this.releaseButton);
    this.root.appendChild(commandRow);

    this.objectSelect = doc.createElement("select");
    const none = doc.createElement("option");
    none.value = "";
    none.textContent = "(no object)";
    this.objectSelect.appendChild(none);
    for (const name of Object.keys(OBJECT_PRESETS)) {
      const option = doc.createElement("option");
      option.value = name;
      option.textContent = name;
      this.objectSelect.appendChild(option);
    }
    this.objectSelect.addEventListener("change", () => {
      const preset = OBJECT_PRESETS[this.objectSelect.value];
      if (preset) void this.dispatch("load_object", { object: preset });
    });
    this.root.appendChild(this.objectSelect);

    const jogRow = doc.createElement("div");
    jogRow.className = "jog";
    this.jogF1 = this.makeSlider(doc, jogRow, "f1");
    this.jogFlipper = this.makeSlider(doc, jogRow, "flipper");
    this.root.appendChild(jogRow);

    const tactileRow = doc.createElement("div");
    tactileRow.className = "tactile";
    for (const finger of FINGERS) {
      const pane = doc.createElement("div");
      const title = doc.createElement("h4");
      title.textContent = `finger ${finger}`;
      const canvas = doc.createElement("canvas");
      canvas.width = 320;
      canvas.height = 240;
      const metrics = doc.createElement("div");
      metrics.className = "metrics";
      metrics.textContent = "no contact";
      pane.append(title, canvas, metrics);
      tactileRow.appendChild(pane);
      this.panes.set(finger, { canvas, metrics, hasData: false, lastTick: -1 });
    }
    this.root.appendChild(tactileRow);
  }

  private makeSlider(doc: Document, parent: HTMLElement, joint: "f1" | "flipper"): HTMLInputElement {
    const slider = doc.createElement("input");
    slider.type = "range";
    slider.step = "0.5";
    slider.disabled = true;
    slider.dataset["joint"] = joint;
    slider.addEventListener("change", () => {
      const state = this.state;
      if (!state) return;
      const range = joint === "f1" ? state.f1Range : state.flipperRange;
      const value = clampToRange(Number(slider.value), range);
      void this.dispatch("jog", { joint, position_deg: value });
    });
    parent.appendChild(slider);
    return slider;
  }

  /** one command per interaction; repeats while in flight are no-ops */
  private async dispatch(kind: Parameters<Session["sendCommand"]>[0], fields: Record<string, unknown> = {}): Promise<void> {
    if (this.session.inFlight(kind)) return;
    this.rejectionLine.textContent = "";
    try {
      const reply = await this.session.sendCommand(kind, fields);
      if (reply.type === "reject") {
        this.rejectionLine.textContent = reply.reason;
      }
    } catch (err) {
      this.rejectionLine.textContent = String(err);
    }
  }

  /** fingers currently showing contact data */
  tactileFingers(): number[] {
    return [...this.panes.entries()]
      .filter(([, pane]) => pane.hasData)
      .map(([finger]) => finger)
      .sort();
  }

  update(state: UiState): void {
    this.state = state;
    const live = state.connected && state.synced;
    this.statusBanner.textContent = live
      ? `live | tick ${state.lastTick}`
      : `STALE - disconnected (last tick ${state.lastTick})`;
    this.statusBanner.classList.toggle("stale", !live);
    this.phaseBadge.textContent = state.mode
      ? `${state.phase} (${state.mode})`
      : state.phase;
    this.faultLine.textContent = state.fault ? `fault: ${state.fault}` : "";

    const controls = enablement(state);
    for (const button of this.modeButtons.values()) {
      button.disabled = !controls.graspButtons;
    }
    this.twistButton.disabled = !controls.twistButton;
    this.releaseButton.disabled = !controls.releaseButton;
    this.objectSelect.disabled = !controls.graspButtons;

    this.jogF1.min = String(state.f1Range[0]);
    this.jogF1.max = String(state.f1Range[1]);
    this.jogFlipper.min = String(state.flipperRange[0]);
    this.jogFlipper.max = String(state.flipperRange[1]);
    this.jogF1.disabled = !controls.jogSliders;
    this.jogFlipper.disabled = !controls.jogSliders;

    for (const [finger, pane] of this.panes) {
      const view = state.tactile[finger];
      if (!view) {
        pane.hasData = false;
        pane.lastTick = -1;
        pane.metrics.textContent = "no contact";
        continue;
      }
      if (view.tick === pane.lastTick) continue;
      pane.lastTick = view.tick;
      let image;
      try {
        image = decodePgm(base64ToBytes(view.payloadPgmB64));
      } catch {
        // malformed payload: skip the frame, surface the counter
        pane.metrics.textContent = `frame error (${state.frameErrors})`;
        continue;
      }
      pane.hasData = true;
      pane.metrics.textContent =
        `area ${view.contactAreaMm2.toFixed(1)} mm2, ` +
        `max ${view.maxDepthMm.toFixed(2)} mm` +
        (view.centroidS !== null
          ? `, centroid s=${view.centroidS.toFixed(1)}`
          : "");
      let ctx: CanvasRenderingContext2D | null = null;
      try {
        ctx = pane.canvas.getContext("2d");
      } catch {
        ctx = null; // headless DOM without canvas support
      }
      if (ctx) {
        const rgba = depthToRgba(image, state.gelThicknessMm);
        const imageData = new ImageData(rgba, image.width, image.height);
        pane.canvas.width = image.width;
        pane.canvas.height = image.height;
        ctx.putImageData(imageData, 0, 0);
      }
    }
  }
}
