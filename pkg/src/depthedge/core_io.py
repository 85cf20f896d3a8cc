"""Canonical data model, file formats and evaluation-region cropping.

Depth containers follow the KITTI convention for quantized depth
(16-bit PNG, meters = raw / 256, raw 0 = invalid) and PFM for dense
float depth.  Edge maps are 8-bit PNG (255 = edge), probability maps
are 16-bit PNG (prob = raw / 65535).
"""

from __future__ import annotations

import io
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

PNG16_SCALE = 256.0
PROB16_SCALE = 65535.0


class FormatError(ValueError):
    """Raised for malformed or unsupported image payloads."""


# ---------------------------------------------------------------------------
# domain types


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DepthMap:
    """Dense per-pixel depth in meters with a validity mask."""

    values: np.ndarray  # float64 (H, W), meters
    valid: np.ndarray   # bool (H, W)

    def __post_init__(self):
        values = _freeze(np.asarray(self.values, dtype=np.float64))
        valid = _freeze(np.asarray(self.valid, dtype=bool))
        if values.ndim != 2 or values.shape != valid.shape:
            raise ValueError("values/valid must be matching 2-D arrays")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError("dimensions must be >= 1")
        v = values[valid]
        if v.size and (not np.all(np.isfinite(v)) or np.any(v <= 0)):
            raise ValueError("valid depths must be finite and > 0")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", valid)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class SparseDepth:
    """Sparse (row, col, depth) samples in a fixed image frame."""

    height: int
    width: int
    rows: np.ndarray    # int64 (N,)
    cols: np.ndarray    # int64 (N,)
    depths: np.ndarray  # float64 (N,), meters

    def __post_init__(self):
        rows = _freeze(np.asarray(self.rows, dtype=np.int64).ravel())
        cols = _freeze(np.asarray(self.cols, dtype=np.int64).ravel())
        depths = _freeze(np.asarray(self.depths, dtype=np.float64).ravel())
        if not (rows.size == cols.size == depths.size):
            raise ValueError("rows/cols/depths must have equal length")
        if self.height < 1 or self.width < 1:
            raise ValueError("frame dimensions must be >= 1")
        if rows.size:
            if rows.min() < 0 or rows.max() >= self.height:
                raise ValueError("sample row out of bounds")
            if cols.min() < 0 or cols.max() >= self.width:
                raise ValueError("sample col out of bounds")
            if not np.all(np.isfinite(depths)) or np.any(depths <= 0):
                raise ValueError("sample depths must be finite and > 0")
            flat = rows * self.width + cols
            if np.unique(flat).size != flat.size:
                raise ValueError("duplicate sample pixel")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "depths", depths)

    def __len__(self) -> int:
        return self.rows.size

    @classmethod
    def from_samples(cls, height, width, samples) -> "SparseDepth":
        samples = list(samples)
        r = [s[0] for s in samples]
        c = [s[1] for s in samples]
        d = [s[2] for s in samples]
        return cls(height, width, np.array(r, dtype=np.int64),
                   np.array(c, dtype=np.int64), np.array(d, dtype=np.float64))

    def to_dense(self) -> DepthMap:
        values = np.zeros((self.height, self.width))
        valid = np.zeros((self.height, self.width), dtype=bool)
        values[self.rows, self.cols] = self.depths
        valid[self.rows, self.cols] = True
        return DepthMap(values, valid)


@dataclass(frozen=True)
class EdgeMap:
    """Binary set of edge pixels over an image frame."""

    mask: np.ndarray  # bool (H, W)

    def __post_init__(self):
        mask = _freeze(np.asarray(self.mask, dtype=bool))
        if mask.ndim != 2:
            raise ValueError("mask must be 2-D")
        object.__setattr__(self, "mask", mask)

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    @property
    def pixels(self) -> set[tuple[int, int]]:
        rr, cc = np.nonzero(self.mask)
        return set(zip(rr.tolist(), cc.tolist()))

    def count(self) -> int:
        return int(self.mask.sum())

    @classmethod
    def from_pixels(cls, height, width, pixels) -> "EdgeMap":
        mask = np.zeros((height, width), dtype=bool)
        for r, c in pixels:
            if not (0 <= r < height and 0 <= c < width):
                raise ValueError(f"edge pixel ({r}, {c}) out of bounds")
            mask[r, c] = True
        return cls(mask)


@dataclass(frozen=True)
class EdgeProbMap:
    """Per-pixel edge probability in [0, 1]."""

    probs: np.ndarray  # float64 (H, W)

    def __post_init__(self):
        probs = _freeze(np.asarray(self.probs, dtype=np.float64))
        if probs.ndim != 2:
            raise ValueError("probs must be 2-D")
        if probs.size and (probs.min() < 0.0 or probs.max() > 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
        object.__setattr__(self, "probs", probs)

    @property
    def height(self) -> int:
        return self.probs.shape[0]

    @property
    def width(self) -> int:
        return self.probs.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.probs.shape


@dataclass(frozen=True)
class EvalRegion:
    """Fractional sub-rectangle of the frame used for evaluation."""

    row_start_frac: float = 0.0
    row_end_frac: float = 1.0
    col_start_frac: float = 0.0
    col_end_frac: float = 1.0

    def __post_init__(self):
        for f in (self.row_start_frac, self.row_end_frac,
                  self.col_start_frac, self.col_end_frac):
            if not (0.0 <= f <= 1.0):
                raise ValueError("region fractions must lie in [0, 1]")
        if self.row_start_frac >= self.row_end_frac:
            raise ValueError("row_start_frac must be < row_end_frac")
        if self.col_start_frac >= self.col_end_frac:
            raise ValueError("col_start_frac must be < col_end_frac")

    def bounds(self, height: int, width: int) -> tuple[int, int, int, int]:
        r0 = int(round(self.row_start_frac * height))
        r1 = int(round(self.row_end_frac * height))
        c0 = int(round(self.col_start_frac * width))
        c1 = int(round(self.col_end_frac * width))
        if r1 <= r0 or c1 <= c0:
            raise ValueError("empty crop for this frame size")
        return r0, r1, c0, c1


# Bottom 60% of rows, full width.
BOTTOM_60 = EvalRegion(row_start_frac=0.40)
# Bottom 60% with Garg-style horizontal margins (opt-in preset).
BOTTOM_60_GARG = EvalRegion(0.40, 1.0, 0.0359, 0.9641)
FULL_FRAME = EvalRegion()


def crop_eval_region(m, region: EvalRegion):
    """Crop a map/sample-set to the region; coordinates re-based to the crop."""
    r0, r1, c0, c1 = region.bounds(m.height, m.width)
    if isinstance(m, DepthMap):
        return DepthMap(m.values[r0:r1, c0:c1], m.valid[r0:r1, c0:c1])
    if isinstance(m, EdgeMap):
        return EdgeMap(m.mask[r0:r1, c0:c1])
    if isinstance(m, EdgeProbMap):
        return EdgeProbMap(m.probs[r0:r1, c0:c1])
    if isinstance(m, SparseDepth):
        keep = ((m.rows >= r0) & (m.rows < r1) &
                (m.cols >= c0) & (m.cols < c1))
        return SparseDepth(r1 - r0, c1 - c0,
                           m.rows[keep] - r0, m.cols[keep] - c0,
                           m.depths[keep])
    raise TypeError(f"cannot crop {type(m).__name__}")


# ---------------------------------------------------------------------------
# 16-bit depth PNG (KITTI convention)


def _open_png(data: bytes) -> Image.Image:
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except Exception as e:
        raise FormatError(f"malformed PNG: {e}") from None
    if img.format != "PNG":
        raise FormatError(f"expected PNG, got {img.format}")
    return img


def read_depth_png16(data: bytes) -> DepthMap:
    img = _open_png(data)
    if img.mode in ("L", "P"):
        raise FormatError("8-bit PNG is not a valid 16-bit depth container")
    if img.mode not in ("I", "I;16", "I;16B"):
        raise FormatError(f"expected single-channel 16-bit PNG, got mode {img.mode}")
    raw = np.asarray(img, dtype=np.uint32)
    if raw.ndim != 2:
        raise FormatError("expected single-channel image")
    valid = raw > 0
    values = raw.astype(np.float64) / PNG16_SCALE
    values[~valid] = 0.0
    return DepthMap(values, valid)


def write_depth_png16(d: DepthMap) -> bytes:
    raw = np.rint(d.values * PNG16_SCALE).astype(np.int64)
    raw[~d.valid] = 0
    if raw.max(initial=0) > 0xFFFF:
        raise FormatError("depth exceeds 16-bit PNG range (> 255.996 m)")
    img = Image.fromarray(raw.astype(np.uint16))
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# 8-bit edge PNG and 16-bit probability PNG


def read_edge_png8(data: bytes) -> EdgeMap:
    img = _open_png(data)
    if img.mode != "L":
        raise FormatError(f"expected 8-bit single-channel PNG, got mode {img.mode}")
    raw = np.asarray(img, dtype=np.uint8)
    return EdgeMap(raw >= 128)


def write_edge_png8(e: EdgeMap) -> bytes:
    raw = np.where(e.mask, 255, 0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(raw, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def read_prob_png16(data: bytes) -> EdgeProbMap:
    img = _open_png(data)
    if img.mode not in ("I", "I;16", "I;16B"):
        raise FormatError(f"expected 16-bit single-channel PNG, got mode {img.mode}")
    raw = np.asarray(img, dtype=np.float64)
    return EdgeProbMap(raw / PROB16_SCALE)


def write_prob_png16(p: EdgeProbMap) -> bytes:
    raw = np.rint(p.probs * PROB16_SCALE).astype(np.uint16)
    buf = io.BytesIO()
    Image.fromarray(raw).save(buf, format="PNG")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# PFM (dense float depth)


def read_pfm(data: bytes) -> DepthMap:
    buf = io.BytesIO(data)

    def token():
        # whitespace-delimited header token
        out = b""
        while True:
            ch = buf.read(1)
            if not ch:
                raise FormatError("truncated PFM header")
            if ch.isspace():
                if out:
                    return out
                continue
            out += ch

    magic = token()
    if magic == b"PF":
        raise FormatError("color PFM ('PF') not supported, expected grayscale 'Pf'")
    if magic != b"Pf":
        raise FormatError(f"not a PFM stream (magic {magic!r})")
    try:
        width = int(token())
        height = int(token())
        scale = float(token())
    except ValueError as e:
        raise FormatError(f"bad PFM header: {e}") from None
    if width < 1 or height < 1:
        raise FormatError("non-positive PFM dimensions")
    if scale == 0:
        raise FormatError("PFM scale must be nonzero")
    dtype = "<f4" if scale < 0 else ">f4"
    payload = buf.read(width * height * 4)
    if len(payload) != width * height * 4:
        raise FormatError("truncated PFM payload")
    arr = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    arr = np.flipud(arr).astype(np.float64)  # PFM stores bottom-to-top
    valid = np.isfinite(arr) & (arr > 0)
    values = np.where(valid, arr, 0.0)
    return DepthMap(values, valid)


def write_pfm(d: DepthMap, invalid_value: float = -1.0) -> bytes:
    arr = np.where(d.valid, d.values, invalid_value).astype("<f4")
    header = f"Pf\n{d.width} {d.height}\n-1.0\n".encode("ascii")
    return header + np.flipud(arr).tobytes()


def write_pfm_array(a: np.ndarray) -> bytes:
    """Raw float field as PFM (used for gradient exports; no validity rule)."""
    a = np.asarray(a, dtype="<f4")
    header = f"Pf\n{a.shape[1]} {a.shape[0]}\n-1.0\n".encode("ascii")
    return header + np.flipud(a).tobytes()


def read_pfm_array(data: bytes) -> np.ndarray:
    """Raw float field from PFM without the depth validity convention."""
    buf = io.BytesIO(data)
    lines = [buf.readline() for _ in range(3)]
    if lines[0].strip() != b"Pf":
        raise FormatError("not a grayscale PFM stream")
    width, height = (int(t) for t in lines[1].split())
    scale = float(lines[2])
    dtype = "<f4" if scale < 0 else ">f4"
    payload = buf.read(width * height * 4)
    if len(payload) != width * height * 4:
        raise FormatError("truncated PFM payload")
    arr = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    return np.flipud(arr).astype(np.float64)


# ---------------------------------------------------------------------------
# 2-channel 16-bit PNG (panoptic: channel 0 segment_id, channel 1 class_id).
# Pillow has no 16-bit grey+alpha support, so this codec is hand-rolled.

_PNG_SIG = b"\x89PNG\r\n\x1a\n"


def _png_chunk(tag: bytes, payload: bytes) -> bytes:
    return (struct.pack(">I", len(payload)) + tag + payload +
            struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF))


def write_panoptic_png(segment_id: np.ndarray, class_id: np.ndarray) -> bytes:
    seg = np.asarray(segment_id)
    cls = np.asarray(class_id)
    if seg.shape != cls.shape or seg.ndim != 2:
        raise FormatError("segment_id/class_id must be matching 2-D arrays")
    if seg.min(initial=0) < 0 or seg.max(initial=0) > 0xFFFF \
            or cls.min(initial=0) < 0 or cls.max(initial=0) > 0xFFFF:
        raise FormatError("ids must fit in 16 bits")
    h, w = seg.shape
    interleaved = np.empty((h, w, 2), dtype=">u2")
    interleaved[:, :, 0] = seg
    interleaved[:, :, 1] = cls
    rows = interleaved.reshape(h, w * 2).tobytes()
    # filter byte 0 per scanline; color type 4 = greyscale + alpha
    raw = b"".join(b"\x00" + rows[i * w * 4:(i + 1) * w * 4] for i in range(h))
    ihdr = struct.pack(">IIBBBBB", w, h, 16, 4, 0, 0, 0)
    return (_PNG_SIG + _png_chunk(b"IHDR", ihdr) +
            _png_chunk(b"IDAT", zlib.compress(raw, 9)) +
            _png_chunk(b"IEND", b""))


def read_panoptic_png(data: bytes) -> tuple[np.ndarray, np.ndarray]:
    if data[:8] != _PNG_SIG:
        raise FormatError("not a PNG stream")
    pos = 8
    ihdr = None
    idat = b""
    while pos + 8 <= len(data):
        length, tag = struct.unpack(">I4s", data[pos:pos + 8])
        payload = data[pos + 8:pos + 8 + length]
        if tag == b"IHDR":
            ihdr = struct.unpack(">IIBBBBB", payload)
        elif tag == b"IDAT":
            idat += payload
        elif tag == b"IEND":
            break
        pos += 12 + length
    if ihdr is None:
        raise FormatError("missing IHDR")
    w, h, depth, color, _, _, interlace = ihdr
    if depth != 16 or color != 4 or interlace != 0:
        raise FormatError("expected non-interlaced 16-bit greyscale+alpha PNG")
    raw = zlib.decompress(idat)
    stride = w * 4
    out = np.empty((h, w, 2), dtype=np.uint16)
    prev = np.zeros(stride, dtype=np.uint8)
    for i in range(h):
        ftype = raw[i * (stride + 1)]
        line = np.frombuffer(raw, dtype=np.uint8,
                             count=stride, offset=i * (stride + 1) + 1).copy()
        if ftype == 2:  # Up
            line = (line + prev).astype(np.uint8)
        elif ftype != 0:
            raise FormatError(f"unsupported PNG filter {ftype}")
        prev = line
        row = line.view(">u2").reshape(w, 2)
        out[i] = row
    return out[:, :, 0].astype(np.int64), out[:, :, 1].astype(np.int64)
