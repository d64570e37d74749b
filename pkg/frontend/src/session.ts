// Live session against the control service over any duplex byte stream
// (TCP in node, the WebSocket bridge in a browser).  One command in flight
// per kind: rapid repeat clicks cannot double-send, request ids stay unique
// per connection.

import type {
  AckMessage,
  CommandKind,
  RejectMessage,
  ServiceMessage,
} from "./messages.js";
import { isReply, isTelemetry } from "./messages.js";
import { encodeFrame, FrameParser } from "./protocol.js";
import type { TelemetryMessage } from "./messages.js";

export interface ByteStream {
  send(data: Uint8Array<ArrayBuffer>): void;
  onData(handler: (chunk: Uint8Array) => void): void;
  onClose(handler: () => void): void;
  close(): void;
}

export type StreamFactory = () => Promise<ByteStream>;

export interface SessionEvents {
  telemetry?: (msg: TelemetryMessage) => void;
  connected?: () => void;
  disconnected?: () => void;
  retrying?: (attempt: number, delayMs: number) => void;
}

export type CommandResult = AckMessage | RejectMessage;

interface Pending {
  resolve: (reply: CommandResult) => void;
  reject: (err: Error) => void;
  kind: CommandKind;
}

const BACKOFF_MS = [250, 500, 1000, 2000, 4000];

export class Session {
  private stream: ByteStream | null = null;
  private parser = new FrameParser();
  private nextRequestId = 1;
  private pending = new Map<number, Pending>();
  private pendingKinds = new Set<CommandKind>();
  private stopped = false;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly connectStream: StreamFactory,
    private readonly events: SessionEvents = {},
  ) {}

  async connect(): Promise<void> {
    this.stopped = false;
    await this.connectOnce(0);
  }

  private async connectOnce(attempt: number): Promise<void> {
    if (this.stopped) return;
    try {
      const stream = await this.connectStream();
      this.stream = stream;
      this.parser = new FrameParser();
      this.nextRequestId = 1;
      stream.onData((chunk) => this.handleChunk(chunk));
      stream.onClose(() => this.handleClose());
      this.events.connected?.();
    } catch {
      this.scheduleRetry(attempt + 1);
    }
  }

  private scheduleRetry(attempt: number): void {
    if (this.stopped) return;
    const delay = BACKOFF_MS[Math.min(attempt - 1, BACKOFF_MS.length - 1)] ?? 4000;
    this.events.retrying?.(attempt, delay);
    this.retryTimer = setTimeout(() => {
      void this.connectOnce(attempt);
    }, delay);
  }

  private handleClose(): void {
    this.stream = null;
    for (const [, p] of this.pending) {
      p.reject(new Error("connection lost"));
    }
    this.pending.clear();
    this.pendingKinds.clear();
    this.events.disconnected?.();
    this.scheduleRetry(1);
  }

  private handleChunk(chunk: Uint8Array): void {
    let messages: unknown[];
    try {
      messages = this.parser.push(chunk);
    } catch {
      this.stream?.close();
      return;
    }
    for (const raw of messages) {
      const msg = raw as ServiceMessage;
      if (isTelemetry(msg)) {
        this.events.telemetry?.(msg);
      } else if (isReply(msg)) {
        const p = this.pending.get(msg.request_id);
        if (p) {
          this.pending.delete(msg.request_id);
          this.pendingKinds.delete(p.kind);
          p.resolve(msg);
        }
      }
      // protocol errors without a request id are surfaced via telemetry of
      // the console's own making; nothing to do here
    }
  }

  get connected(): boolean {
    return this.stream !== null;
  }

  /** true when a command of this kind is still awaiting its reply */
  inFlight(kind: CommandKind): boolean {
    return this.pendingKinds.has(kind);
  }

  sendCommand(
    kind: CommandKind,
    fields: Record<string, unknown> = {},
  ): Promise<CommandResult> {
    if (!this.stream) {
      return Promise.reject(new Error("not connected"));
    }
    if (this.pendingKinds.has(kind)) {
      return Promise.reject(new Error(`${kind} already in flight`));
    }
    const request_id = this.nextRequestId++;
    const frame = encodeFrame({ type: "command", kind, request_id, ...fields });
    this.pendingKinds.add(kind);
    const promise = new Promise<CommandResult>((resolve, reject) => {
      this.pending.set(request_id, { resolve, reject, kind });
    });
    this.stream.send(frame);
    return promise;
  }

  close(): void {
    this.stopped = true;
    if (this.retryTimer !== null) clearTimeout(this.retryTimer);
    this.stream?.close();
    this.stream = null;
  }
}
