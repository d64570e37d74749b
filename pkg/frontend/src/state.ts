// Console state as a pure function of (last snapshot + telemetry stream).
// applyTelemetry never mutates: identical streams reproduce identical state.

import type {
  GraspConfig,
  Phase,
  TactileFrameMessage,
  TelemetryMessage,
} from "./messages.js";

export interface FingerView {
  finger: number;
  payloadPgmB64: string;
  contactAreaMm2: number;
  centroidS: number | null;
  centroidU: number | null;
  maxDepthMm: number;
  tick: number;
}

export interface UiState {
  connected: boolean;
  /** no snapshot yet: panels render placeholders and controls stay off */
  synced: boolean;
  phase: Phase;
  mode: string | null;
  f1Angle: number;
  flipperAngle: number;
  f1Range: [number, number];
  flipperRange: [number, number];
  gelThicknessMm: number;
  config: GraspConfig | null;
  objectName: string | null;
  lastTick: number;
  fault: string | null;
  outcome: { held: boolean; reason: string; fingers: number[] } | null;
  /** latest frame per finger (bounded: old frames are replaced) */
  tactile: Record<number, FingerView>;
  droppedTelemetry: number;
  frameErrors: number;
}

export const initialState: UiState = {
  connected: false,
  synced: false,
  phase: "Idle",
  mode: null,
  f1Angle: 0,
  flipperAngle: 0,
  f1Range: [0, 100],
  flipperRange: [-50, 40],
  gelThicknessMm: 2,
  config: null,
  objectName: null,
  lastTick: 0,
  fault: null,
  outcome: null,
  tactile: {},
  droppedTelemetry: 0,
  frameErrors: 0,
};

export function onConnected(state: UiState): UiState {
  // fresh sync: everything before the incoming snapshot is stale
  return { ...initialState, connected: true };
}

export function onDisconnected(state: UiState): UiState {
  return { ...state, connected: false, synced: false };
}

function tactileView(msg: TactileFrameMessage): FingerView {
  return {
    finger: msg.finger,
    payloadPgmB64: msg.payload_pgm_b64,
    contactAreaMm2: msg.contact_area_mm2,
    centroidS: msg.centroid_s,
    centroidU: msg.centroid_u,
    maxDepthMm: msg.max_depth_mm,
    tick: msg.tick,
  };
}

export function applyTelemetry(state: UiState, msg: TelemetryMessage): UiState {
  // telemetry before the snapshot would interleave stale samples
  if (!state.synced && msg.kind !== "snapshot") return state;
  switch (msg.kind) {
    case "snapshot":
      return {
        ...state,
        synced: true,
        phase: msg.phase,
        mode: msg.mode,
        f1Angle: msg.f1_angle,
        flipperAngle: msg.flipper_angle,
        f1Range: msg.f1_range,
        flipperRange: msg.flipper_range,
        gelThicknessMm: msg.gel_thickness_mm,
        config: msg.config,
        objectName:
          msg.object && typeof msg.object["name"] === "string"
            ? (msg.object["name"] as string)
            : null,
        fault: msg.fault,
        lastTick: msg.tick,
        outcome: null,
        tactile: {},
      };
    case "joint_state":
      return {
        ...state,
        phase: msg.phase,
        f1Angle: msg.f1_angle,
        flipperAngle: msg.flipper_angle,
        lastTick: msg.tick,
        droppedTelemetry: msg.dropped ?? state.droppedTelemetry,
      };
    case "phase_change": {
      const leftHold = msg.phase === "Releasing" || msg.phase === "Idle";
      return {
        ...state,
        phase: msg.phase,
        mode: msg.phase === "Idle" ? null : msg.mode,
        lastTick: msg.tick,
        outcome: leftHold ? null : state.outcome,
        tactile: leftHold ? {} : state.tactile,
      };
    }
    case "tactile_frame":
      return {
        ...state,
        lastTick: msg.tick,
        tactile: { ...state.tactile, [msg.finger]: tactileView(msg) },
      };
    case "grasp_outcome":
      return {
        ...state,
        lastTick: msg.tick,
        outcome: {
          held: msg.outcome.held,
          reason: msg.outcome.reason,
          fingers: msg.outcome.contacts.map((c) => c.finger).sort(),
        },
      };
    case "fault":
      return { ...state, fault: msg.reason, lastTick: msg.tick };
  }
}

export function countFrameError(state: UiState): UiState {
  return { ...state, frameErrors: state.frameErrors + 1 };
}

// -- control enablement ---------------------------------------------------

export interface Enablement {
  graspButtons: boolean;
  twistButton: boolean;
  releaseButton: boolean;
  jogSliders: boolean;
}

export function enablement(state: UiState): Enablement {
  const live = state.connected && state.synced;
  return {
    graspButtons: live && state.phase === "Idle",
    twistButton: live && state.phase === "Holding" && state.mode === "Pinch",
    releaseButton:
      live &&
      (state.phase === "Holding" ||
        state.phase === "Twisting" ||
        state.phase === "ClosingF1"),
    jogSliders: live && state.phase === "Idle",
  };
}

export function clampToRange(value: number, range: [number, number]): number {
  return Math.min(Math.max(value, range[0]), range[1]);
}
