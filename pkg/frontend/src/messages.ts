// Message types of the control-service wire protocol (docs/protocol.md).

export type GraspModeName = "pinch" | "lateral" | "opposition";

export type CommandKind =
  | "start_grasp"
  | "release"
  | "twist"
  | "jog"
  | "set_config"
  | "load_object";

export interface CommandMessage {
  type: "command";
  kind: CommandKind;
  request_id: number;
  [field: string]: unknown;
}

export interface AckMessage {
  type: "ack";
  request_id: number;
  tick: number;
}

export interface RejectMessage {
  type: "reject";
  request_id: number;
  reason: string;
}

export interface ErrorMessage {
  type: "error";
  reason: string;
  request_id?: number;
}

export interface GraspConfig {
  open_position: number;
  position_tolerance: number;
  close_torque: number;
  settle_ticks: number;
  twist_amplitude: number;
  twist_period: number;
}

export type Phase =
  | "Idle"
  | "OpeningF1"
  | "PositioningFlipper"
  | "ClosingF1"
  | "Holding"
  | "Twisting"
  | "Releasing"
  | "Fault";

interface TelemetryBase {
  type: "telemetry";
  tick: number;
  timestamp: number;
}

export interface SnapshotMessage extends TelemetryBase {
  kind: "snapshot";
  phase: Phase;
  mode: string | null;
  f1_angle: number;
  flipper_angle: number;
  f1_range: [number, number];
  flipper_range: [number, number];
  gel_thickness_mm: number;
  config: GraspConfig;
  object: Record<string, unknown> | null;
  fault: string | null;
}

export interface JointStateMessage extends TelemetryBase {
  kind: "joint_state";
  f1_angle: number;
  flipper_angle: number;
  f1_mode: "position" | "torque";
  flipper_mode: "position" | "torque";
  phase: Phase;
  dropped?: number;
}

export interface PhaseChangeMessage extends TelemetryBase {
  kind: "phase_change";
  phase: Phase;
  mode: string | null;
}

export interface TactileFrameMessage extends TelemetryBase {
  kind: "tactile_frame";
  finger: number;
  payload_pgm_b64: string;
  contact_area_mm2: number;
  centroid_s: number | null;
  centroid_u: number | null;
  max_depth_mm: number;
}

export interface GraspOutcomeMessage extends TelemetryBase {
  kind: "grasp_outcome";
  outcome: {
    held: boolean;
    reason: string;
    mode: string;
    object: string | null;
    contacts: Array<{ finger: number; normal_force_n: number }>;
    [field: string]: unknown;
  };
}

export interface FaultMessage extends TelemetryBase {
  kind: "fault";
  reason: string;
}

export type TelemetryMessage =
  | SnapshotMessage
  | JointStateMessage
  | PhaseChangeMessage
  | TactileFrameMessage
  | GraspOutcomeMessage
  | FaultMessage;

export type ServiceMessage =
  | AckMessage
  | RejectMessage
  | ErrorMessage
  | TelemetryMessage;

export function isTelemetry(msg: ServiceMessage): msg is TelemetryMessage {
  return msg.type === "telemetry";
}

export function isReply(msg: ServiceMessage): msg is AckMessage | RejectMessage {
  return msg.type === "ack" || msg.type === "reject";
}
