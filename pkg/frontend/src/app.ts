import { AnnotationApi, ConflictError } from "./api.js";
import { dilateForDisplay, depthToHeat, maskToRgba } from "./overlay.js";
import { parsePfm, PfmImage } from "./pfm.js";
import { Point } from "./simplify.js";
import { clampToImage, strokeToEdit } from "./strokes.js";
import { EdgeMask, ItemPayload, ItemSummary } from "./types.js";
import { Tool, ViewState } from "./viewState.js";

const EDGE_COLOR: [number, number, number, number] = [255, 64, 64, 230];

async function decodeEdgesPng(base64: string): Promise<EdgeMask> {
  const img = new Image();
  await new Promise<void>((resolve, reject) => {
    img.onload = () => resolve();
    img.onerror = () => reject(new Error("failed to decode edge PNG"));
    img.src = `data:image/png;base64,${base64}`;
  });
  const canvas = document.createElement("canvas");
  canvas.width = img.width;
  canvas.height = img.height;
  const ctx = canvas.getContext("2d")!;
  ctx.drawImage(img, 0, 0);
  const rgba = ctx.getImageData(0, 0, img.width, img.height).data;
  const data = new Uint8Array(img.width * img.height);
  for (let i = 0; i < data.length; i++) {
    data[i] = rgba[i * 4] > 127 ? 1 : 0;
  }
  return { height: img.height, width: img.width, data };
}

class App {
  private readonly api = new AnnotationApi();
  private readonly view = new ViewState();
  private items: ItemSummary[] = [];
  private payload: ItemPayload | null = null;
  private edges: EdgeMask | null = null;
  private rgb: ImageBitmap | null = null;
  private depth: PfmImage | null = null;
  private stroke: Point[] | null = null;
  private probeFirst: [number, number] | null = null;

  private readonly canvas =
    document.getElementById("canvas") as HTMLCanvasElement;
  private readonly itemList =
    document.getElementById("item-list") as HTMLElement;
  private readonly statusBar =
    document.getElementById("status-bar") as HTMLElement;
  private readonly errorBanner =
    document.getElementById("error-banner") as HTMLElement;

  async start(): Promise<void> {
    this.canvas.addEventListener("pointerdown", (e) => this.onPointerDown(e));
    this.canvas.addEventListener("pointermove", (e) => this.onPointerMove(e));
    this.canvas.addEventListener("pointerup", () => this.onPointerUp());
    window.addEventListener("keydown", (e) => this.onKey(e));
    await this.refreshItems();
    if (this.items.length > 0) {
      await this.selectItem(this.items[0].id);
    }
  }

  private showError(message: string): void {
    this.errorBanner.textContent = message;
    this.errorBanner.hidden = false;
  }

  private clearError(): void {
    this.errorBanner.hidden = true;
  }

  private async refreshItems(): Promise<void> {
    try {
      this.items = await this.api.listItems();
      this.clearError();
    } catch (e) {
      this.showError(`could not load items: ${e}`);
      return;
    }
    this.itemList.replaceChildren(
      ...this.items.map((it) => {
        const li = document.createElement("li");
        li.textContent = `${it.id} [${it.status}]`;
        li.classList.toggle("active", it.id === this.view.currentItem);
        li.onclick = () => void this.selectItem(it.id);
        return li;
      }),
    );
  }

  private async selectItem(id: string): Promise<void> {
    this.view.selectItem(id);
    this.probeFirst = null;
    try {
      this.payload = await this.api.getItem(id);
      this.edges = await decodeEdgesPng(this.payload.edges_png_base64);
      this.rgb = null;
      this.depth = null;
      try {
        this.rgb = await createImageBitmap(await this.api.getImage(id));
      } catch {
        // items without RGB render edges on a neutral background
      }
      const summary = this.items.find((it) => it.id === id);
      if (summary?.has_depth) {
        this.depth = parsePfm(await this.api.getDepthPfm(id));
      }
      this.clearError();
    } catch (e) {
      this.showError(`could not load item ${id}: ${e}`);
      return;
    }
    await this.refreshItems();
    this.render();
  }

  /** Re-render from the server payload; local state is never trusted. */
  private applyServerPayload(payload: ItemPayload): void {
    void decodeEdgesPng(payload.edges_png_base64).then((mask) => {
      this.payload = payload;
      this.edges = mask;
      this.render();
    });
  }

  private render(): void {
    if (!this.payload || !this.edges) return;
    const { height, width } = this.edges;
    const zoom = this.view.zoom;
    this.canvas.width = Math.round(width * zoom);
    this.canvas.height = Math.round(height * zoom);
    const ctx = this.canvas.getContext("2d")!;
    ctx.imageSmoothingEnabled = false;
    ctx.fillStyle = "#303030";
    ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);
    if (this.rgb) {
      ctx.drawImage(this.rgb, 0, 0, this.canvas.width, this.canvas.height);
    }
    if (this.view.showDepthHeat && this.depth) {
      ctx.putImageData(this.depthHeatLayer(zoom), 0, 0);
    }
    if (this.view.showEdges) {
      // dilated for visibility only; the persisted map stays 1 px
      const display = dilateForDisplay(this.edges);
      const layer = new ImageData(
        maskToRgba(display, EDGE_COLOR), width, height);
      void createImageBitmap(layer).then((bmp) => {
        ctx.drawImage(bmp, 0, 0, this.canvas.width, this.canvas.height);
      });
    }
    this.statusBar.textContent =
      `${this.payload.id} [${this.payload.status}] ` +
      `tool=${this.view.activeTool} zoom=${zoom}x ` +
      `brush=${this.view.brushRadius}`;
  }

  private depthHeatLayer(zoom: number): ImageData {
    const d = this.depth!;
    let min = Infinity;
    let max = -Infinity;
    for (const v of d.values) {
      if (!Number.isNaN(v)) {
        min = Math.min(min, v);
        max = Math.max(max, v);
      }
    }
    const w = Math.round(d.width * zoom);
    const h = Math.round(d.height * zoom);
    const out = new ImageData(w, h);
    for (let r = 0; r < h; r++) {
      for (let c = 0; c < w; c++) {
        const v = d.values[
          Math.min(d.height - 1, Math.floor(r / zoom)) * d.width +
          Math.min(d.width - 1, Math.floor(c / zoom))
        ];
        const i = (r * w + c) * 4;
        if (!Number.isNaN(v)) {
          const [rr, gg, bb] = depthToHeat(v, min, max);
          out.data[i] = rr;
          out.data[i + 1] = gg;
          out.data[i + 2] = bb;
          out.data[i + 3] = 140;
        }
      }
    }
    return out;
  }

  private canvasPoint(e: PointerEvent): Point {
    const rect = this.canvas.getBoundingClientRect();
    return [e.clientY - rect.top, e.clientX - rect.left];
  }

  private onPointerDown(e: PointerEvent): void {
    if (!this.payload) return;
    if (this.view.activeTool === "probe") {
      void this.handleProbeClick(e);
      return;
    }
    this.stroke = [this.canvasPoint(e)];
  }

  private onPointerMove(e: PointerEvent): void {
    if (this.stroke) {
      this.stroke.push(this.canvasPoint(e));
    }
  }

  private onPointerUp(): void {
    if (!this.stroke || !this.payload || !this.edges) return;
    const stroke = this.stroke;
    this.stroke = null;
    const edit = strokeToEdit(
      this.view.activeTool, stroke, this.view.zoom, this.view.brushRadius);
    if (!edit) return;
    edit.points = clampToImage(
      edit.points, this.edges.height, this.edges.width) as [number, number][];
    void this.api
      .submitEdit(this.payload.id, edit)
      .then((payload) => {
        this.clearError();
        this.applyServerPayload(payload);
        void this.refreshItems();
      })
      .catch((err) => {
        // local stroke is already discarded; server state stands
        if (err instanceof ConflictError) {
          this.showError("item is being edited elsewhere; stroke discarded");
        } else {
          this.showError(`edit rejected: ${err}`);
        }
      });
  }

  private async handleProbeClick(e: PointerEvent): Promise<void> {
    if (!this.payload || !this.edges) return;
    const [r, c] = this.canvasPoint(e);
    const p: [number, number] = [
      Math.round(r / this.view.zoom),
      Math.round(c / this.view.zoom),
    ];
    if (!this.probeFirst) {
      this.probeFirst = p;
      this.statusBar.textContent = `probe: first point (${p[0]}, ${p[1]})`;
      return;
    }
    const first = this.probeFirst;
    this.probeFirst = null;
    try {
      const res = await this.api.probe(this.payload.id, first, p);
      const marker = res.exceeds_4m ? "≥ 4 m — likely depth edge" : "< 4 m";
      this.statusBar.textContent =
        `probe: ${res.d1.toFixed(2)} m vs ${res.d2.toFixed(2)} m, ` +
        `Δ ${res.diff.toFixed(2)} m (${marker})`;
    } catch (err) {
      this.showError(`probe failed: ${err}`);
    }
  }

  private onKey(e: KeyboardEvent): void {
    const tools: Record<string, Tool> = { d: "draw", e: "erase", q: "probe" };
    if (tools[e.key]) {
      this.view.setTool(tools[e.key]);
      this.render();
    } else if (e.key === "+" || e.key === "=") {
      this.view.setZoom(this.view.zoom * 2);
      this.render();
    } else if (e.key === "-") {
      this.view.setZoom(this.view.zoom / 2);
      this.render();
    } else if (e.key === "[") {
      this.view.setBrushRadius(Math.max(0, this.view.brushRadius - 1));
      this.render();
    } else if (e.key === "]") {
      this.view.setBrushRadius(this.view.brushRadius + 1);
      this.render();
    } else if (e.key === "o") {
      this.view.toggleEdges();
      this.render();
    } else if (e.key === "h") {
      this.view.toggleDepthHeat();
      this.render();
    } else if (e.key === "ArrowRight" || e.key === "ArrowLeft") {
      this.stepItem(e.key === "ArrowRight" ? 1 : -1);
    } else if (e.key === "g" && this.payload) {
      // explicit annotator action marks an item done
      void this.api
        .setStatus(this.payload.id, "done")
        .then(() => this.selectItem(this.payload!.id))
        .catch((err) => this.showError(`status change failed: ${err}`));
    }
  }

  private stepItem(delta: number): void {
    if (this.items.length === 0 || !this.view.currentItem) return;
    const idx = this.items.findIndex(
      (it) => it.id === this.view.currentItem);
    const next = (idx + delta + this.items.length) % this.items.length;
    void this.selectItem(this.items[next].id);
  }
}

new App().start().catch((e) => {
  const banner = document.getElementById("error-banner");
  if (banner) {
    banner.textContent = `startup failed: ${e}`;
    banner.hidden = false;
  }
});
