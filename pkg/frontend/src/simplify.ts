export type Point = [number, number]; // (row, col)

function perpendicularDistance(p: Point, a: Point, b: Point): number {
  const dr = b[0] - a[0];
  const dc = b[1] - a[1];
  const len2 = dr * dr + dc * dc;
  if (len2 === 0) {
    return Math.hypot(p[0] - a[0], p[1] - a[1]);
  }
  // distance from p to the infinite line through a-b
  return Math.abs(dr * (a[1] - p[1]) - dc * (a[0] - p[0])) / Math.sqrt(len2);
}

/**
 * Douglas-Peucker polyline simplification. Endpoints are always kept;
 * interior points survive only if they deviate from the chord by more
 * than `tolerance` pixels.
 */
export function simplifyPolyline(points: Point[], tolerance = 1): Point[] {
  if (points.length <= 2) {
    return points.slice();
  }
  const first = points[0];
  const last = points[points.length - 1];
  let maxDist = -1;
  let maxIdx = 0;
  for (let i = 1; i < points.length - 1; i++) {
    const d = perpendicularDistance(points[i], first, last);
    if (d > maxDist) {
      maxDist = d;
      maxIdx = i;
    }
  }
  if (maxDist <= tolerance) {
    return [first, last];
  }
  const left = simplifyPolyline(points.slice(0, maxIdx + 1), tolerance);
  const right = simplifyPolyline(points.slice(maxIdx), tolerance);
  return left.slice(0, -1).concat(right);
}
