// Decoder for the service's tactile payload: 16-bit big-endian P5 PGM with
// the depth scale in a "# mm_per_count <v>" header comment, base64-wrapped.

export interface DepthImage {
  width: number;
  height: number;
  depthMm: Float32Array;
  mmPerCount: number;
}

export function base64ToBytes(b64: string): Uint8Array {
  if (typeof atob === "function") {
    const bin = atob(b64);
    const out = new Uint8Array(bin.length);
    for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
    return out;
  }
  return new Uint8Array(Buffer.from(b64, "base64"));
}

function isSpace(byte: number): boolean {
  return byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d;
}

export function decodePgm(data: Uint8Array): DepthImage {
  if (data[0] !== 0x50 || data[1] !== 0x35) {
    throw new Error("not a P5 PGM");
  }
  let pos = 2;
  let mmPerCount: number | null = null;
  const tokens: number[] = [];
  while (tokens.length < 3) {
    if (pos >= data.length) throw new Error("truncated PGM header");
    const byte = data[pos]!;
    if (isSpace(byte)) {
      pos += 1;
      continue;
    }
    if (byte === 0x23) {
      let end = pos;
      while (end < data.length && data[end] !== 0x0a) end += 1;
      const comment = new TextDecoder().decode(data.subarray(pos + 1, end)).trim();
      const parts = comment.split(/\s+/);
      if (parts[0] === "mm_per_count" && parts[1] !== undefined) {
        mmPerCount = Number(parts[1]);
      }
      pos = end + 1;
      continue;
    }
    let end = pos;
    while (end < data.length && !isSpace(data[end]!)) end += 1;
    tokens.push(Number(new TextDecoder().decode(data.subarray(pos, end))));
    pos = end;
  }
  pos += 1; // single whitespace after maxval
  const [width, height, maxval] = tokens as [number, number, number];
  if (maxval !== 65535) throw new Error("expected 16-bit PGM");
  if (mmPerCount === null || !Number.isFinite(mmPerCount)) {
    throw new Error("missing mm_per_count header");
  }
  const count = width * height;
  if (data.length - pos < count * 2) throw new Error("truncated PGM body");
  const depthMm = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    const hi = data[pos + 2 * i]!;
    const lo = data[pos + 2 * i + 1]!;
    depthMm[i] = ((hi << 8) | lo) * mmPerCount;
  }
  return { width, height, depthMm, mmPerCount };
}
