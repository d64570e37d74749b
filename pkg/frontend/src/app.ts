// Wiring: session events -> pure state reducer -> panel rendering.

import type { TelemetryMessage } from "./messages.js";
import { ConsolePanel } from "./panels.js";
import { base64ToBytes, decodePgm } from "./pgm.js";
import { Session, type StreamFactory } from "./session.js";
import {
  applyTelemetry,
  countFrameError,
  initialState,
  onConnected,
  onDisconnected,
  type UiState,
} from "./state.js";

export class ConsoleApp {
  state: UiState = initialState;
  readonly session: Session;
  readonly panel: ConsolePanel;

  constructor(doc: Document, connectStream: StreamFactory) {
    this.session = new Session(connectStream, {
      telemetry: (msg) => this.onTelemetry(msg),
      connected: () => this.setState(onConnected(this.state)),
      disconnected: () => this.setState(onDisconnected(this.state)),
    });
    this.panel = new ConsolePanel(doc, this.session);
    this.panel.update(this.state);
  }

  private onTelemetry(msg: TelemetryMessage): void {
    if (msg.kind === "tactile_frame") {
      try {
        decodePgm(base64ToBytes(msg.payload_pgm_b64));
      } catch {
        this.setState(countFrameError(this.state));
        return; // frame skipped
      }
    }
    this.setState(applyTelemetry(this.state, msg));
  }

  private setState(next: UiState): void {
    if (next === this.state) return;
    this.state = next;
    this.panel.update(next);
  }

  async connect(): Promise<void> {
    await this.session.connect();
  }

  close(): void {
    this.session.close();
  }
}
