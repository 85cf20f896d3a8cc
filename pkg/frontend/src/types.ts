export interface ItemSummary {
  id: string;
  status: ItemStatus;
  source: string;
  has_depth: boolean;
}

export type ItemStatus = "todo" | "in_progress" | "done";

export interface ItemPayload {
  id: string;
  status: ItemStatus;
  source: string;
  height: number;
  width: number;
  edges_png_base64: string;
}

export type EditOp = "add_polyline" | "erase_polyline";

export interface EdgeEdit {
  op: EditOp;
  points: [number, number][]; // (row, col)
  brush_radius: number;
}

export interface ProbeResult {
  d1: number;
  d2: number;
  diff: number;
  exceeds_4m: boolean;
}

/** Row-major boolean edge mask. */
export interface EdgeMask {
  height: number;
  width: number;
  data: Uint8Array; // 0 | 1, length height*width
}
