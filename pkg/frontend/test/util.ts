// Test doubles: an in-memory byte stream pair with a scripted service side.

import { FrameParser, encodeFrame } from "../src/protocol.js";
import type { ByteStream } from "../src/session.js";

export class FakeWire {
  sentFrames: Array<Record<string, unknown>> = [];
  private parser = new FrameParser();
  private dataHandler: ((chunk: Uint8Array) => void) | null = null;
  private closeHandler: (() => void) | null = null;
  closed = false;
  /** auto-ack incoming commands with this tick when set */
  autoAckTick: number | null = null;

  stream(): ByteStream {
    return {
      send: (data) => {
        for (const raw of this.parser.push(data)) {
          const msg = raw as Record<string, unknown>;
          this.sentFrames.push(msg);
          if (this.autoAckTick !== null && msg["type"] === "command") {
            this.reply({
              type: "ack",
              request_id: msg["request_id"],
              tick: this.autoAckTick,
            });
          }
        }
      },
      onData: (handler) => {
        this.dataHandler = handler;
      },
      onClose: (handler) => {
        this.closeHandler = handler;
      },
      close: () => {
        this.closed = true;
        this.closeHandler?.();
      },
    };
  }

  reply(message: object): void {
    this.dataHandler?.(encodeFrame(message));
  }

  dropConnection(): void {
    this.closeHandler?.();
  }
}

export function snapshotMessage(overrides: Record<string, unknown> = {}) {
  return {
    type: "telemetry",
    kind: "snapshot",
    tick: 10,
    timestamp: 0.1,
    phase: "Idle",
    mode: null,
    f1_angle: 0,
    flipper_angle: 0,
    f1_range: [0, 100],
    flipper_range: [-50, 40],
    gel_thickness_mm: 2,
    config: {
      open_position: 0,
      position_tolerance: 0.5,
      close_torque: 100,
      settle_ticks: 10,
      twist_amplitude: 5,
      twist_period: 1,
    },
    object: null,
    fault: null,
    ...overrides,
  };
}

export async function tick(ms = 0): Promise<void> {
  await new Promise((resolve) => setTimeout(resolve, ms));
}
