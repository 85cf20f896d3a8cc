import { describe, expect, it } from "vitest";
import { AnnotationApi, ApiError, ConflictError } from "../src/api";
import { EdgeEdit, ItemPayload } from "../src/types";

const PAYLOAD: ItemPayload = {
  id: "a",
  status: "in_progress",
  source: "panoptic",
  height: 4,
  width: 4,
  edges_png_base64: "xxxx",
};

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

describe("AnnotationApi", () => {
  it("parses item listings", async () => {
    const api = new AnnotationApi("", async (url) => {
      expect(url).toBe("/items");
      return jsonResponse([
        { id: "a", status: "todo", source: "panoptic", has_depth: true },
      ]);
    });
    const items = await api.listItems();
    expect(items).toHaveLength(1);
    expect(items[0].id).toBe("a");
  });

  it("posts edits and returns the server payload verbatim", async () => {
    const edit: EdgeEdit = {
      op: "add_polyline",
      points: [[0, 0], [0, 3]],
      brush_radius: 0,
    };
    const api = new AnnotationApi("", async (url, init) => {
      expect(url).toBe("/items/a/edits");
      expect(init?.method).toBe("POST");
      expect(JSON.parse(init?.body as string)).toEqual(edit);
      return jsonResponse(PAYLOAD);
    });
    const payload = await api.submitEdit("a", edit);
    expect(payload).toEqual(PAYLOAD);
  });

  it("raises ConflictError on 409", async () => {
    const api = new AnnotationApi("", async () =>
      new Response("locked", { status: 409 }));
    await expect(
      api.submitEdit("a", {
        op: "add_polyline",
        points: [[0, 0], [1, 1]],
        brush_radius: 0,
      }),
    ).rejects.toBeInstanceOf(ConflictError);
  });

  it("raises ApiError with status on other failures", async () => {
    const api = new AnnotationApi("", async () =>
      new Response("bad", { status: 422 }));
    const err = await api.probe("a", [0, 0], [1, 1]).catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(422);
  });

  it("permits only one in-flight mutation per item", async () => {
    let release!: () => void;
    const gate = new Promise<void>((resolve) => (release = resolve));
    const api = new AnnotationApi("", async () => {
      await gate;
      return jsonResponse(PAYLOAD);
    });
    const edit: EdgeEdit = {
      op: "add_polyline",
      points: [[0, 0], [1, 1]],
      brush_radius: 0,
    };
    const first = api.submitEdit("a", edit);
    expect(api.hasPendingMutation("a")).toBe(true);
    await expect(api.submitEdit("a", edit)).rejects.toBeInstanceOf(
      ConflictError);
    release();
    await first;
    expect(api.hasPendingMutation("a")).toBe(false);
    // a new mutation is allowed once the first settles
    await api.submitEdit("a", edit);
  });

  it("export returns the manifest path", async () => {
    const api = new AnnotationApi("", async () =>
      jsonResponse({ manifest_path: "/tmp/out/manifest.json" }));
    expect(await api.exportGt("/tmp/out")).toBe("/tmp/out/manifest.json");
  });
});
