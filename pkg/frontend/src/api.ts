import {
  EdgeEdit,
  ItemPayload,
  ItemStatus,
  ItemSummary,
  ProbeResult,
} from "./types.js";

export class ConflictError extends Error {}
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

/**
 * Thin typed client over the annotation service. The server is the
 * source of truth: every mutation returns the authoritative item
 * payload and callers must render from that, never from local state.
 *
 * At most one mutation is in flight per item; a second submission while
 * one is pending is rejected locally rather than racing the journal.
 */
export class AnnotationApi {
  private pending = new Set<string>();

  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (u, i) => fetch(u, i),
  ) {}

  private async request(url: string, init?: RequestInit): Promise<Response> {
    const resp = await this.fetchImpl(this.baseUrl + url, init);
    if (resp.status === 409) {
      throw new ConflictError(await resp.text());
    }
    if (!resp.ok) {
      throw new ApiError(resp.status, await resp.text());
    }
    return resp;
  }

  async listItems(): Promise<ItemSummary[]> {
    return (await this.request("/items")).json();
  }

  async getItem(id: string): Promise<ItemPayload> {
    return (await this.request(`/items/${id}`)).json();
  }

  async getImage(id: string): Promise<Blob> {
    return (await this.request(`/items/${id}/image`)).blob();
  }

  async getDepthPfm(id: string): Promise<ArrayBuffer> {
    return (await this.request(`/items/${id}/depth`)).arrayBuffer();
  }

  hasPendingMutation(id: string): boolean {
    return this.pending.has(id);
  }

  async submitEdit(id: string, edit: EdgeEdit): Promise<ItemPayload> {
    if (this.pending.has(id)) {
      throw new ConflictError(`edit already in flight for item ${id}`);
    }
    this.pending.add(id);
    try {
      const resp = await this.request(`/items/${id}/edits`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(edit),
      });
      return resp.json();
    } finally {
      this.pending.delete(id);
    }
  }

  async probe(
    id: string,
    p1: [number, number],
    p2: [number, number],
  ): Promise<ProbeResult> {
    const resp = await this.request(`/items/${id}/probe`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ p1, p2 }),
    });
    return resp.json();
  }

  async setStatus(id: string, status: ItemStatus): Promise<void> {
    await this.request(`/items/${id}/status`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ status }),
    });
  }

  async exportGt(outDir: string): Promise<string> {
    const resp = await this.request("/export", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ out_dir: outDir }),
    });
    const body = await resp.json();
    return body.manifest_path;
  }
}
