import { describe, expect, it } from "vitest";
import { ViewState } from "../src/viewState";

describe("ViewState", () => {
  it("starts with draw tool, zoom 1, edges shown", () => {
    const v = new ViewState();
    expect(v.activeTool).toBe("draw");
    expect(v.zoom).toBe(1);
    expect(v.showEdges).toBe(true);
    expect(v.showDepthHeat).toBe(false);
  });

  it("rejects non-positive zoom", () => {
    const v = new ViewState();
    expect(() => v.setZoom(0)).toThrow();
    expect(() => v.setZoom(-2)).toThrow();
    expect(() => v.setZoom(NaN)).toThrow();
  });

  it("clamps zoom to a sane range", () => {
    const v = new ViewState();
    v.setZoom(1e9);
    expect(v.zoom).toBe(16);
    v.setZoom(1e-9);
    expect(v.zoom).toBe(0.25);
  });

  it("holds exactly one active tool", () => {
    const v = new ViewState();
    v.setTool("erase");
    expect(v.activeTool).toBe("erase");
    v.setTool("probe");
    expect(v.activeTool).toBe("probe");
  });

  it("rejects negative or fractional brush radius", () => {
    const v = new ViewState();
    expect(() => v.setBrushRadius(-1)).toThrow();
    expect(() => v.setBrushRadius(1.5)).toThrow();
    v.setBrushRadius(3);
    expect(v.brushRadius).toBe(3);
  });

  it("overlay toggles are display state only", () => {
    const v = new ViewState();
    const before = v.snapshot();
    v.toggleEdges();
    v.toggleEdges();
    expect(v.snapshot()).toEqual(before);
  });
});
