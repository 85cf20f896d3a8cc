export type Tool = "draw" | "erase" | "probe";

export interface ViewStateSnapshot {
  currentItem: string | null;
  zoom: number;
  showEdges: boolean;
  showDepthHeat: boolean;
  activeTool: Tool;
  brushRadius: number;
}

const MIN_ZOOM = 0.25;
const MAX_ZOOM = 16;

/**
 * Pure client view state. Holds nothing authoritative: the edge map
 * always comes back from the server, so reloading the page reproduces
 * the server state exactly.
 */
export class ViewState {
  private state: ViewStateSnapshot = {
    currentItem: null,
    zoom: 1,
    showEdges: true,
    showDepthHeat: false,
    activeTool: "draw",
    brushRadius: 0,
  };

  snapshot(): ViewStateSnapshot {
    return { ...this.state };
  }

  get zoom(): number {
    return this.state.zoom;
  }

  get activeTool(): Tool {
    return this.state.activeTool;
  }

  get brushRadius(): number {
    return this.state.brushRadius;
  }

  get currentItem(): string | null {
    return this.state.currentItem;
  }

  get showEdges(): boolean {
    return this.state.showEdges;
  }

  get showDepthHeat(): boolean {
    return this.state.showDepthHeat;
  }

  selectItem(id: string | null): void {
    this.state.currentItem = id;
  }

  setZoom(zoom: number): void {
    if (!Number.isFinite(zoom) || zoom <= 0) {
      throw new Error(`zoom must be > 0, got ${zoom}`);
    }
    this.state.zoom = Math.min(MAX_ZOOM, Math.max(MIN_ZOOM, zoom));
  }

  setTool(tool: Tool): void {
    this.state.activeTool = tool;
  }

  setBrushRadius(radius: number): void {
    if (!Number.isInteger(radius) || radius < 0) {
      throw new Error(`brush radius must be a non-negative integer`);
    }
    this.state.brushRadius = radius;
  }

  toggleEdges(): void {
    this.state.showEdges = !this.state.showEdges;
  }

  toggleDepthHeat(): void {
    this.state.showDepthHeat = !this.state.showDepthHeat;
  }
}
