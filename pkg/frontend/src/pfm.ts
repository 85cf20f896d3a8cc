/** Minimal grayscale PFM reader for depth heat display. */

export interface PfmImage {
  height: number;
  width: number;
  // row-major, top-to-bottom; NaN where the source had no valid depth
  values: Float32Array;
}

export function parsePfm(buffer: ArrayBuffer): PfmImage {
  const bytes = new Uint8Array(buffer);
  // header: "Pf\n<w> <h>\n<scale>\n" in ASCII
  let offset = 0;
  const token = (): string => {
    while (bytes[offset] === 0x20 || bytes[offset] === 0x0a || bytes[offset] === 0x0d) {
      offset++;
    }
    const start = offset;
    while (
      offset < bytes.length &&
      bytes[offset] !== 0x20 &&
      bytes[offset] !== 0x0a &&
      bytes[offset] !== 0x0d
    ) {
      offset++;
    }
    return String.fromCharCode(...bytes.subarray(start, offset));
  };
  const magic = token();
  if (magic !== "Pf") {
    throw new Error(`not a grayscale PFM (magic ${magic})`);
  }
  const width = parseInt(token(), 10);
  const height = parseInt(token(), 10);
  const scale = parseFloat(token());
  offset++; // single whitespace byte terminating the header
  if (!(width > 0) || !(height > 0) || !Number.isFinite(scale)) {
    throw new Error("malformed PFM header");
  }
  const expected = width * height * 4;
  if (bytes.length - offset < expected) {
    throw new Error("truncated PFM payload");
  }
  const littleEndian = scale < 0;
  const view = new DataView(buffer, offset, expected);
  const values = new Float32Array(width * height);
  // PFM rows run bottom-to-top
  for (let r = 0; r < height; r++) {
    for (let c = 0; c < width; c++) {
      const src = ((height - 1 - r) * width + c) * 4;
      const v = view.getFloat32(src, littleEndian);
      values[r * width + c] = v > 0 && Number.isFinite(v) ? v : NaN;
    }
  }
  return { height, width, values };
}
