// Length-prefixed JSON framing: u32 big-endian byte length + UTF-8 JSON.

const MAX_MESSAGE_BYTES = 8 * 1024 * 1024;

export function encodeFrame(message: object): Uint8Array<ArrayBuffer> {
  const payload = new TextEncoder().encode(JSON.stringify(message));
  const frame = new Uint8Array(4 + payload.length);
  new DataView(frame.buffer).setUint32(0, payload.length, false);
  frame.set(payload, 4);
  return frame;
}

/** Incremental frame parser; tolerates arbitrary chunk boundaries. */
export class FrameParser {
  private buffer = new Uint8Array(0);
  /** frames whose payload failed to parse as a JSON object */
  badFrames = 0;

  push(chunk: Uint8Array): unknown[] {
    const merged = new Uint8Array(this.buffer.length + chunk.length);
    merged.set(this.buffer, 0);
    merged.set(chunk, this.buffer.length);
    this.buffer = merged;

    const out: unknown[] = [];
    let pos = 0;
    const view = new DataView(this.buffer.buffer, this.buffer.byteOffset);
    while (this.buffer.length - pos >= 4) {
      const length = view.getUint32(pos, false);
      if (length > MAX_MESSAGE_BYTES) {
        throw new Error(`frame length ${length} exceeds limit`);
      }
      if (this.buffer.length - pos - 4 < length) break;
      const payload = this.buffer.subarray(pos + 4, pos + 4 + length);
      pos += 4 + length;
      try {
        const parsed: unknown = JSON.parse(new TextDecoder().decode(payload));
        if (parsed !== null && typeof parsed === "object" && !Array.isArray(parsed)) {
          out.push(parsed);
        } else {
          this.badFrames += 1;
        }
      } catch {
        this.badFrames += 1;
      }
    }
    this.buffer = this.buffer.slice(pos);
    return out;
  }
}
