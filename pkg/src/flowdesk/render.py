"""Deterministic raster rendering: heatmaps, profile plots, PNG encoding.

No plotting library: images are composed as uint8 RGB arrays and encoded with
a minimal PNG writer (zlib, no ancillary chunks, no timestamps), so identical
field data always produces byte-identical files. The colormap is a fixed
256-entry table shipped as a fixture.
"""
from __future__ import annotations

import json
import struct
import zlib
from importlib import resources

import numpy as np

_COLORMAP = None

BACKGROUND = (255, 255, 255)
MASK_COLOR = (230, 230, 230)


def colormap() -> np.ndarray:
    """The fixed 256 x 3 uint8 color table."""
    global _COLORMAP
    if _COLORMAP is None:
        text = resources.files("flowdesk.data").joinpath("colormap.json").read_text()
        _COLORMAP = np.asarray(json.loads(text)["rgb"], dtype=np.uint8)
    return _COLORMAP


def encode_png(rgb: np.ndarray) -> bytes:
    """Minimal 8-bit RGB PNG encoder (IHDR + IDAT + IEND only)."""
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("expected an (h, w, 3) uint8 array")
    h, w = rgb.shape[:2]
    raw = b"".join(b"\x00" + rgb[row].tobytes() for row in range(h))

    def chunk(tag: bytes, payload: bytes) -> bytes:
        body = tag + payload
        return struct.pack(">I", len(payload)) + body + struct.pack(
            ">I", zlib.crc32(body) & 0xFFFFFFFF
        )

    header = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    return (
        b"\x89PNG\r\n\x1a\n"
        + chunk(b"IHDR", header)
        + chunk(b"IDAT", zlib.compress(raw, 9))
        + chunk(b"IEND", b"")
    )


def colorize(values: np.ndarray, vmin=None, vmax=None) -> np.ndarray:
    """Map a 2-D float array (NaN = masked) through the color table."""
    values = np.asarray(values, dtype=float)
    finite = np.isfinite(values)
    if vmin is None:
        vmin = float(values[finite].min()) if finite.any() else 0.0
    if vmax is None:
        vmax = float(values[finite].max()) if finite.any() else 1.0
    span = vmax - vmin if vmax > vmin else 1.0
    idx = np.clip((values - vmin) / span * 255.0, 0, 255)
    idx = np.where(finite, idx, 0).astype(np.uint8)
    rgb = colormap()[idx]
    rgb[~finite] = MASK_COLOR
    return rgb


def _upsample(rgb: np.ndarray, scale: int) -> np.ndarray:
    return np.repeat(np.repeat(rgb, scale, axis=0), scale, axis=1)


def heatmap_png(grid: dict, scale: int = 4, vmin=None, vmax=None,
                overlay_polygon: np.ndarray | None = None) -> bytes:
    """Render an exported field grid (see synthflow.field_grid) to PNG bytes.

    Rows are flipped so increasing y points up. An optional polygon outline
    (in field coordinates) is drawn in black.
    """
    values = np.array(
        [[np.nan if v is None else v for v in row] for row in grid["values"]],
        dtype=float,
    )
    rgb = _upsample(colorize(values, vmin=vmin, vmax=vmax), scale)
    if overlay_polygon is not None:
        xmin, xmax, ymin, ymax = grid["bounds"]
        h, w = rgb.shape[:2]
        poly = np.asarray(overlay_polygon, dtype=float)
        px = (poly[:, 0] - xmin) / (xmax - xmin) * (w - 1)
        py = (poly[:, 1] - ymin) / (ymax - ymin) * (h - 1)
        pts = np.column_stack([px, py]).astype(int)
        for a, b in zip(pts, np.roll(pts, -1, axis=0)):
            _draw_line(rgb, a, b, (0, 0, 0))
    return encode_png(rgb[::-1])


def _draw_line(rgb: np.ndarray, a, b, color):
    """Integer Bresenham segment, clipped to the canvas."""
    h, w = rgb.shape[:2]
    x0, y0 = int(a[0]), int(a[1])
    x1, y1 = int(b[0]), int(b[1])
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    while True:
        if 0 <= x0 < w and 0 <= y0 < h:
            rgb[y0, x0] = color
        if x0 == x1 and y0 == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def polyline_png(curves: list, width: int = 560, height: int = 360,
                 pad: float = 0.06, colors=None, equal_aspect: bool = True) -> bytes:
    """Plot one or more (n, 2) polylines on a white canvas.

    Used for airfoil profiles and optimization shape snapshots; axes and
    ticks are intentionally omitted to keep output bytes stable.
    """
    default_colors = [(31, 119, 180), (214, 39, 40), (44, 160, 44),
                      (148, 103, 189), (255, 127, 14), (23, 190, 207)]
    colors = colors or default_colors
    allpts = np.vstack(curves)
    xmin, ymin = allpts.min(axis=0)
    xmax, ymax = allpts.max(axis=0)
    xspan = max(xmax - xmin, 1e-9)
    yspan = max(ymax - ymin, 1e-9)
    if equal_aspect:
        # expand the smaller span so x and y scales match the canvas ratio
        canvas_ratio = (width * (1 - 2 * pad)) / (height * (1 - 2 * pad))
        if xspan / yspan > canvas_ratio:
            extra = xspan / canvas_ratio - yspan
            ymin -= extra / 2
            yspan += extra
        else:
            extra = yspan * canvas_ratio - xspan
            xmin -= extra / 2
            xspan += extra
    rgb = np.full((height, width, 3), BACKGROUND, dtype=np.uint8)
    for k, curve in enumerate(curves):
        curve = np.asarray(curve, dtype=float)
        px = (pad + (curve[:, 0] - xmin) / xspan * (1 - 2 * pad)) * (width - 1)
        py = (pad + (curve[:, 1] - ymin) / yspan * (1 - 2 * pad)) * (height - 1)
        pts = np.column_stack([px, py]).astype(int)
        color = colors[k % len(colors)]
        for a, b in zip(pts[:-1], pts[1:]):
            _draw_line(rgb, a, b, color)
    return encode_png(rgb[::-1])


def scatter_trajectory_png(background: np.ndarray, bounds, points: np.ndarray,
                           best: np.ndarray, scale: int = 10) -> bytes:
    """Objective-landscape heatmap with the search trajectory drawn on top."""
    rgb = _upsample(colorize(background), scale)
    h, w = rgb.shape[:2]
    lo0, hi0 = bounds[0]
    lo1, hi1 = bounds[1]

    def to_px(pt):
        x = (pt[1] - lo1) / (hi1 - lo1) * (w - 1)  # dim 1 on the x axis
        y = (pt[0] - lo0) / (hi0 - lo0) * (h - 1)
        return np.array([x, y])

    pts = np.array([to_px(p) for p in points]).astype(int)
    for a, b in zip(pts[:-1], pts[1:]):
        _draw_line(rgb, a, b, (255, 255, 255))
    bx, by = to_px(best).astype(int)
    for dx in range(-3, 4):
        for dy in range(-3, 4):
            if dx * dx + dy * dy <= 9 and 0 <= by + dy < h and 0 <= bx + dx < w:
                rgb[by + dy, bx + dx] = (214, 39, 40)
    return encode_png(rgb[::-1])


def curve_png(series: list, width: int = 560, height: int = 300,
              log_y: bool = False) -> bytes:
    """Simple line chart for loss curves / centerline comparisons."""
    curves = []
    for xs, ys in series:
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if log_y:
            ys = np.log10(np.maximum(ys, 1e-16))
        curves.append(np.column_stack([xs, ys]))
    return polyline_png(curves, width=width, height=height, equal_aspect=False)
