// Depth map -> RGBA pixels on a fixed 0..gel-thickness color scale.

import type { DepthImage } from "./pgm.js";

// compact inferno-like ramp; anchors in [0, 1]
const RAMP: Array<[number, number, number, number]> = [
  [0.0, 0, 0, 4],
  [0.25, 87, 16, 110],
  [0.5, 188, 55, 84],
  [0.75, 249, 142, 9],
  [1.0, 252, 255, 164],
];

function rampColor(t: number): [number, number, number] {
  const x = Math.min(Math.max(t, 0), 1);
  for (let i = 1; i < RAMP.length; i++) {
    const [t1, r1, g1, b1] = RAMP[i]!;
    if (x <= t1) {
      const [t0, r0, g0, b0] = RAMP[i - 1]!;
      const f = t1 === t0 ? 0 : (x - t0) / (t1 - t0);
      return [
        Math.round(r0 + f * (r1 - r0)),
        Math.round(g0 + f * (g1 - g0)),
        Math.round(b0 + f * (b1 - b0)),
      ];
    }
  }
  return [252, 255, 164];
}

export function depthToRgba(image: DepthImage, gelThicknessMm: number): Uint8ClampedArray<ArrayBuffer> {
  const out = new Uint8ClampedArray(image.width * image.height * 4);
  const scale = gelThicknessMm > 0 ? 1 / gelThicknessMm : 0;
  for (let i = 0; i < image.depthMm.length; i++) {
    const [r, g, b] = rampColor(image.depthMm[i]! * scale);
    out[4 * i] = r;
    out[4 * i + 1] = g;
    out[4 * i + 2] = b;
    out[4 * i + 3] = 255;
  }
  return out;
}
