"""Local annotation backend: edge proposals, journaled edits, GT export.

State is event-sourced: every edit is appended to a per-item JSON-lines
journal and the current edge map is a pure fold of the initial proposal
plus the journal, so a crashed session replays to the same state.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core_io import (DepthMap, EdgeMap, read_depth_png16, read_edge_png8,
                      read_panoptic_png, read_pfm, write_edge_png8)
from .edges import PanopticMap, gt_from_panoptic

DISCONTINUITY_GUIDELINE_M = 4.0


class ConflictError(RuntimeError):
    """Another writer holds this item."""


class UnknownItemError(KeyError):
    pass


@dataclass(frozen=True)
class EdgeEdit:
    op: str                      # add_polyline | erase_polyline
    points: tuple                # of (row, col)
    brush_radius: int = 0        # erase only

    def __post_init__(self):
        if self.op not in ("add_polyline", "erase_polyline"):
            raise ValueError(f"unknown edit op {self.op!r}")
        pts = tuple((int(r), int(c)) for r, c in self.points)
        if self.op == "add_polyline" and len(pts) < 2:
            raise ValueError("add_polyline needs at least 2 points")
        if not pts:
            raise ValueError("edit needs at least 1 point")
        if self.brush_radius < 0:
            raise ValueError("brush_radius must be >= 0")
        object.__setattr__(self, "points", pts)

    def to_json(self) -> dict:
        return {"op": self.op, "points": [list(p) for p in self.points],
                "brush_radius": self.brush_radius}

    @classmethod
    def from_json(cls, d: dict) -> "EdgeEdit":
        return cls(op=d["op"], points=[tuple(p) for p in d["points"]],
                   brush_radius=d.get("brush_radius", 0))


def bresenham(p0: tuple[int, int], p1: tuple[int, int]) -> list[tuple[int, int]]:
    """Integer line rasterization between two (row, col) points, inclusive."""
    r0, c0 = p0
    r1, c1 = p1
    dr = abs(r1 - r0)
    dc = abs(c1 - c0)
    sr = 1 if r1 >= r0 else -1
    sc = 1 if c1 >= c0 else -1
    out = []
    if dc >= dr:
        err = dc // 2
        r = r0
        for c in range(c0, c1 + sc, sc):
            out.append((r, c))
            err -= dr
            if err < 0 and c != c1:
                r += sr
                err += dc
    else:
        err = dr // 2
        c = c0
        for r in range(r0, r1 + sr, sr):
            out.append((r, c))
            err -= dc
            if err < 0 and r != r1:
                c += sc
                err += dr
    return out


def rasterize_polyline(points) -> set[tuple[int, int]]:
    pts = list(points)
    out: set[tuple[int, int]] = set()
    if len(pts) == 1:
        out.add(tuple(pts[0]))
        return out
    for a, b in zip(pts, pts[1:]):
        out.update(bresenham(tuple(a), tuple(b)))
    return out


def apply_edit_to_mask(mask: np.ndarray, edit: EdgeEdit) -> np.ndarray:
    h, w = mask.shape
    for r, c in edit.points:
        if not (0 <= r < h and 0 <= c < w):
            raise ValueError(f"edit point ({r}, {c}) out of bounds")
    mask = mask.copy()
    stroke = rasterize_polyline(edit.points)
    if edit.op == "add_polyline":
        for r, c in stroke:
            mask[r, c] = True
        return mask
    # erase within brush_radius of any stroke pixel
    rad = edit.brush_radius
    er, ec = np.nonzero(mask)
    if er.size == 0:
        return mask
    srows = np.array([p[0] for p in stroke])
    scols = np.array([p[1] for p in stroke])
    d2 = (er[:, None] - srows[None, :]) ** 2 + (ec[:, None] - scols[None, :]) ** 2
    hit = (d2 <= rad * rad).any(axis=1)
    mask[er[hit], ec[hit]] = False
    return mask


@dataclass
class AnnotationItem:
    id: str
    rgb_path: str | None
    depth_path: str | None
    source: str                 # panoptic | edge_map_files
    status: str = "todo"        # todo | in_progress | done
    initial_edges: EdgeMap | None = None
    edges: EdgeMap | None = None


class AnnotationSession:
    """In-memory session over a dataset directory with durable journals."""

    def __init__(self, dataset_root: str | Path):
        self.root = Path(dataset_root)
        self.ann_dir = self.root / "annotations"
        self.items: dict[str, AnnotationItem] = {}
        self._locks: dict[str, threading.Lock] = {}

    # -- construction ------------------------------------------------------

    @classmethod
    def init_session(cls, dataset_root: str | Path,
                     proposal_source: str | None = None) -> "AnnotationSession":
        """Load manifest, materialize proposals, replay any journals.

        proposal_source forces 'panoptic' or 'edge_map_files' for every
        item; None infers per item from the manifest record.
        """
        sess = cls(dataset_root)
        manifest_path = sess.root / "manifest.json"
        if not manifest_path.exists():
            raise FileNotFoundError(f"missing manifest: {manifest_path}")
        records = json.loads(manifest_path.read_text())
        sess.ann_dir.mkdir(exist_ok=True)
        seen = set()
        for rec in records:
            item_id = str(rec["id"])
            if item_id in seen:
                raise ValueError(f"duplicate item id {item_id!r}")
            seen.add(item_id)
            if proposal_source is not None:
                source = proposal_source
            elif "panoptic_path" in rec:
                source = "panoptic"
            else:
                source = "edge_map_files"
            if source == "panoptic":
                seg, cls_id = read_panoptic_png(
                    (sess.root / rec["panoptic_path"]).read_bytes())
                excl = frozenset(frozenset(p)
                                 for p in rec.get("excluded_class_pairs", []))
                initial = gt_from_panoptic(PanopticMap(seg, cls_id, excl))
            elif source == "edge_map_files":
                initial = read_edge_png8(
                    (sess.root / rec["edges_path"]).read_bytes())
            else:
                raise ValueError(f"unknown proposal source {source!r}")
            item = AnnotationItem(
                id=item_id,
                rgb_path=rec.get("rgb_path"),
                depth_path=rec.get("depth_path"),
                source=source,
                initial_edges=initial,
                edges=initial,
            )
            sess.items[item_id] = item
            sess._locks[item_id] = threading.Lock()
            sess._replay(item)
        return sess

    # -- journal -----------------------------------------------------------

    def _journal_path(self, item_id: str) -> Path:
        return self.ann_dir / f"{item_id}.jsonl"

    def _state_path(self, item_id: str) -> Path:
        return self.ann_dir / f"{item_id}.state.json"

    def _replay(self, item: AnnotationItem) -> None:
        jp = self._journal_path(item.id)
        mask = item.initial_edges.mask.copy()
        if jp.exists():
            for line in jp.read_text().splitlines():
                if not line.strip():
                    continue
                edit = EdgeEdit.from_json(json.loads(line))
                mask = apply_edit_to_mask(mask, edit)
        item.edges = EdgeMap(mask)
        sp = self._state_path(item.id)
        if sp.exists():
            item.status = json.loads(sp.read_text())["status"]

    def journal_edits(self, item_id: str) -> list[EdgeEdit]:
        jp = self._journal_path(self._get(item_id).id)
        if not jp.exists():
            return []
        return [EdgeEdit.from_json(json.loads(line))
                for line in jp.read_text().splitlines() if line.strip()]

    # -- operations --------------------------------------------------------

    def _get(self, item_id: str) -> AnnotationItem:
        if item_id not in self.items:
            raise UnknownItemError(item_id)
        return self.items[item_id]

    def apply_edit(self, item_id: str, edit: EdgeEdit) -> EdgeMap:
        item = self._get(item_id)
        lock = self._locks[item_id]
        if not lock.acquire(blocking=False):
            raise ConflictError(f"item {item_id} is being edited by another writer")
        try:
            new_mask = apply_edit_to_mask(item.edges.mask, edit)
            with open(self._journal_path(item_id), "a") as f:
                f.write(json.dumps(edit.to_json()) + "\n")
                f.flush()
            item.edges = EdgeMap(new_mask)
            if item.status == "todo":
                self.set_status(item_id, "in_progress")
            # materialized snapshot (recovery convenience; journal is truth)
            (self.ann_dir / f"{item_id}.png").write_bytes(
                write_edge_png8(item.edges))
            return item.edges
        finally:
            lock.release()

    def load_depth(self, item_id: str) -> DepthMap:
        item = self._get(item_id)
        if not item.depth_path:
            raise ValueError(f"item {item_id} has no depth attached")
        data = (self.root / item.depth_path).read_bytes()
        if data[:8] == b"\x89PNG\r\n\x1a\n":
            return read_depth_png16(data)
        return read_pfm(data)

    def depth_probe(self, item_id: str, p1: tuple[int, int],
                    p2: tuple[int, int]) -> dict:
        depth = self.load_depth(item_id)
        for r, c in (p1, p2):
            if not (0 <= r < depth.height and 0 <= c < depth.width):
                raise ValueError(f"probe point ({r}, {c}) out of bounds")
            if not depth.valid[r, c]:
                raise ValueError(f"probe point ({r}, {c}) has no valid depth")
        d1 = float(depth.values[p1[0], p1[1]])
        d2 = float(depth.values[p2[0], p2[1]])
        diff = abs(d1 - d2)
        return {"d1": d1, "d2": d2, "diff": diff,
                "exceeds_4m": diff >= DISCONTINUITY_GUIDELINE_M}

    def set_status(self, item_id: str, status: str) -> None:
        if status not in ("todo", "in_progress", "done"):
            raise ValueError(f"unknown status {status!r}")
        item = self._get(item_id)
        item.status = status
        self._state_path(item_id).write_text(json.dumps({"status": status}))

    def export_gt(self, out_dir: str | Path) -> Path:
        """Write done items as PNG8 edge maps plus an evaluation manifest."""
        done = [it for it in self.items.values() if it.status == "done"]
        if not done:
            raise ValueError("no done items to export")
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        records = []
        for item in done:
            edge_path = out / f"{item.id}.png"
            edge_path.write_bytes(write_edge_png8(item.edges))
            rec = {"id": item.id, "gt_edges_path": str(edge_path)}
            if item.depth_path:
                p = str(self.root / item.depth_path)
                rec["pred_depth_path"] = p
                rec["gt_depth_path"] = p
            records.append(rec)
        manifest = out / "manifest.json"
        manifest.write_text(json.dumps(records, indent=2))
        return manifest


# ---------------------------------------------------------------------------
# HTTP service


from pydantic import BaseModel


class EditBody(BaseModel):
    op: str
    points: list[list[int]]
    brush_radius: int = 0


class ProbeBody(BaseModel):
    p1: list[int]
    p2: list[int]


class StatusBody(BaseModel):
    status: str


class ExportBody(BaseModel):
    out_dir: str


def create_app(session: AnnotationSession, ui_dir: str | Path | None = None,
               allowed_origins: tuple[str, ...] = ()):
    import base64

    from fastapi import FastAPI, HTTPException, Response
    from fastapi.middleware.cors import CORSMiddleware

    from .core_io import write_pfm

    app = FastAPI(title="depthedge annotation service")
    if allowed_origins:
        app.add_middleware(CORSMiddleware, allow_origins=list(allowed_origins),
                           allow_methods=["*"], allow_headers=["*"])

    def edges_payload(item) -> dict:
        return {
            "id": item.id,
            "status": item.status,
            "source": item.source,
            "height": item.edges.height,
            "width": item.edges.width,
            "edges_png_base64": base64.b64encode(
                write_edge_png8(item.edges)).decode("ascii"),
        }

    @app.get("/items")
    def list_items():
        return [{"id": it.id, "status": it.status, "source": it.source,
                 "has_depth": it.depth_path is not None}
                for it in session.items.values()]

    @app.get("/items/{item_id}")
    def get_item(item_id: str):
        try:
            return edges_payload(session._get(item_id))
        except UnknownItemError:
            raise HTTPException(404, f"unknown item {item_id}")

    @app.get("/items/{item_id}/image")
    def get_image(item_id: str):
        try:
            item = session._get(item_id)
        except UnknownItemError:
            raise HTTPException(404, f"unknown item {item_id}")
        if not item.rgb_path:
            raise HTTPException(404, "item has no RGB image")
        data = (session.root / item.rgb_path).read_bytes()
        return Response(content=data, media_type="image/png")

    @app.get("/items/{item_id}/depth")
    def get_depth(item_id: str):
        try:
            depth = session.load_depth(item_id)
        except UnknownItemError:
            raise HTTPException(404, f"unknown item {item_id}")
        except ValueError as e:
            raise HTTPException(404, str(e))
        return Response(content=write_pfm(depth),
                        media_type="application/octet-stream")

    @app.get("/items/{item_id}/edges")
    def get_edges(item_id: str):
        try:
            item = session._get(item_id)
        except UnknownItemError:
            raise HTTPException(404, f"unknown item {item_id}")
        return Response(content=write_edge_png8(item.edges),
                        media_type="image/png")

    @app.post("/items/{item_id}/edits")
    def post_edit(item_id: str, body: EditBody):
        try:
            edit = EdgeEdit(op=body.op,
                            points=[tuple(p) for p in body.points],
                            brush_radius=body.brush_radius)
            session.apply_edit(item_id, edit)
            return edges_payload(session._get(item_id))
        except UnknownItemError:
            raise HTTPException(404, f"unknown item {item_id}")
        except ConflictError as e:
            raise HTTPException(409, str(e))
        except ValueError as e:
            raise HTTPException(422, str(e))

    @app.post("/items/{item_id}/probe")
    def post_probe(item_id: str, body: ProbeBody):
        try:
            return session.depth_probe(item_id, tuple(body.p1), tuple(body.p2))
        except UnknownItemError:
            raise HTTPException(404, f"unknown item {item_id}")
        except ValueError as e:
            raise HTTPException(422, str(e))

    @app.post("/items/{item_id}/status")
    def post_status(item_id: str, body: StatusBody):
        try:
            session.set_status(item_id, body.status)
            return {"id": item_id, "status": body.status}
        except UnknownItemError:
            raise HTTPException(404, f"unknown item {item_id}")
        except ValueError as e:
            raise HTTPException(422, str(e))

    @app.post("/export")
    def post_export(body: ExportBody):
        try:
            manifest = session.export_gt(body.out_dir)
            return {"manifest_path": str(manifest)}
        except ValueError as e:
            raise HTTPException(422, str(e))

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True),
                  name="ui")

    return app
