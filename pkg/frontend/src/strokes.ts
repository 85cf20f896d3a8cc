import { Point, simplifyPolyline } from "./simplify.js";
import { EdgeEdit } from "./types.js";
import { Tool } from "./viewState.js";

/**
 * Turn a captured pointer stroke into a single EdgeEdit. Points arrive
 * in canvas pixel space and are mapped to integer image coordinates;
 * consecutive duplicates collapse, and the polyline is simplified
 * (Douglas-Peucker, 1 px) to bound journal size.
 *
 * Returns null when the stroke cannot form a valid edit (a draw stroke
 * needs at least two distinct points).
 */
export function strokeToEdit(
  tool: Tool,
  rawPoints: Point[],
  zoom: number,
  brushRadius: number,
): EdgeEdit | null {
  const snapped: Point[] = [];
  for (const [r, c] of rawPoints) {
    const p: Point = [Math.round(r / zoom), Math.round(c / zoom)];
    const prev = snapped[snapped.length - 1];
    if (!prev || prev[0] !== p[0] || prev[1] !== p[1]) {
      snapped.push(p);
    }
  }
  if (snapped.length === 0) return null;
  const simplified = simplifyPolyline(snapped, 1);
  if (tool === "draw") {
    if (simplified.length < 2) return null;
    return { op: "add_polyline", points: simplified, brush_radius: 0 };
  }
  if (tool === "erase") {
    return {
      op: "erase_polyline",
      points: simplified,
      brush_radius: brushRadius,
    };
  }
  return null; // probe strokes never become edits
}

export function clampToImage(
  points: Point[],
  height: number,
  width: number,
): Point[] {
  return points.map(([r, c]) => [
    Math.min(height - 1, Math.max(0, r)),
    Math.min(width - 1, Math.max(0, c)),
  ]);
}
