import { EdgeMask } from "./types.js";

/**
 * Dilate an edge mask by one pixel (8-connected) for display. The
 * persisted mask is never dilated; this is a view-layer transform only.
 */
export function dilateForDisplay(mask: EdgeMask): EdgeMask {
  const { height, width, data } = mask;
  const out = new Uint8Array(height * width);
  for (let r = 0; r < height; r++) {
    for (let c = 0; c < width; c++) {
      if (!data[r * width + c]) continue;
      for (let dr = -1; dr <= 1; dr++) {
        for (let dc = -1; dc <= 1; dc++) {
          const rr = r + dr;
          const cc = c + dc;
          if (rr >= 0 && rr < height && cc >= 0 && cc < width) {
            out[rr * width + cc] = 1;
          }
        }
      }
    }
  }
  return { height, width, data: out };
}

export function countEdgePixels(mask: EdgeMask): number {
  let n = 0;
  for (const v of mask.data) n += v;
  return n;
}

/** Paint a mask into RGBA image data as a translucent overlay color. */
export function maskToRgba(
  mask: EdgeMask,
  rgba: [number, number, number, number],
): Uint8ClampedArray<ArrayBuffer> {
  const out = new Uint8ClampedArray(mask.height * mask.width * 4);
  for (let i = 0; i < mask.data.length; i++) {
    if (mask.data[i]) {
      out[i * 4] = rgba[0];
      out[i * 4 + 1] = rgba[1];
      out[i * 4 + 2] = rgba[2];
      out[i * 4 + 3] = rgba[3];
    }
  }
  return out;
}

/** Map a depth in meters to a heat color (near = warm, far = cool). */
export function depthToHeat(
  depth: number,
  minDepth: number,
  maxDepth: number,
): [number, number, number] {
  const span = Math.max(maxDepth - minDepth, 1e-9);
  const t = Math.min(1, Math.max(0, (depth - minDepth) / span));
  return [Math.round(255 * (1 - t)), Math.round(96 * t), Math.round(255 * t)];
}
