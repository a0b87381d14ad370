"""Annotation rasterization and annotation-aware geometric transforms.

Images are plain numpy uint8 arrays: (H, W) grayscale or (H, W, 3) RGB,
row-major. Rendering is integer-grid, unantialiased, and deterministic so
outputs can be golden-tested pixel by pixel.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace
from pathlib import Path
from random import Random

import numpy as np
from PIL import Image

from genaug.errors import ValidationError
from genaug.manifest import (
    BBox,
    Keypoint,
    ShootAnnotation,
    validate_annotation,
)

Color = tuple[int, int, int]

# Ten maximally separated hues so the generator can tell node ordinals apart.
DEFAULT_NODE_COLORS: dict[int, Color] = {
    1: (255, 0, 0),
    2: (255, 153, 0),
    3: (204, 255, 0),
    4: (51, 255, 0),
    5: (0, 255, 102),
    6: (0, 255, 255),
    7: (0, 102, 255),
    8: (51, 0, 255),
    9: (204, 0, 255),
    10: (255, 0, 153),
}


@dataclass(frozen=True)
class PlotStyle:
    background: Color = (0, 0, 0)
    bbox_color: Color = (255, 255, 255)
    bbox_thickness: int = 2
    node_color_by_index: dict[int, Color] = field(
        default_factory=lambda: dict(DEFAULT_NODE_COLORS))
    node_radius: int = 4

    def validate(self) -> None:
        if self.bbox_thickness < 1:
            raise ValidationError("bbox thickness must be >= 1")
        if self.node_radius < 1:
            raise ValidationError("node radius must be >= 1")
        colors = list(self.node_color_by_index.values())
        if len(set(colors)) != len(colors):
            raise ValidationError("node colors must be pairwise distinct")


def load_plot_style(path: str | Path) -> PlotStyle:
    import json

    data = json.loads(Path(path).read_text(encoding="utf-8"))
    style = PlotStyle(
        background=tuple(data.get("background", (0, 0, 0))),
        bbox_color=tuple(data.get("bbox_color", (255, 255, 255))),
        bbox_thickness=int(data.get("bbox_thickness", 2)),
        node_color_by_index={int(k): tuple(v) for k, v in
                             data.get("node_color_by_index", {}).items()}
        or dict(DEFAULT_NODE_COLORS),
        node_radius=int(data.get("node_radius", 4)),
    )
    style.validate()
    return style


# ---------------------------------------------------------------------------
# PNG io


def read_png(path: str | Path) -> np.ndarray:
    with Image.open(path) as img:
        if img.mode not in ("L", "RGB"):
            img = img.convert("RGB")
        return np.asarray(img, dtype=np.uint8).copy()


def write_png(img: np.ndarray, path: str | Path) -> None:
    Image.fromarray(img).save(path, format="PNG")


def png_bytes(img: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(img).save(buf, format="PNG")
    return buf.getvalue()


def png_to_array(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as img:
        if img.mode not in ("L", "RGB"):
            img = img.convert("RGB")
        return np.asarray(img, dtype=np.uint8).copy()


# ---------------------------------------------------------------------------
# Drawing primitives


def _draw_rect_outline(img: np.ndarray, b: BBox, color: Color, thickness: int) -> None:
    """Unfilled rectangle: ``thickness`` nested 1-px rings drawn inward."""
    for t in range(thickness):
        x0, y0 = b.x + t, b.y + t
        x1, y1 = b.x + b.w - 1 - t, b.y + b.h - 1 - t
        if x0 > x1 or y0 > y1:
            break
        img[y0, x0:x1 + 1] = color
        img[y1, x0:x1 + 1] = color
        img[y0:y1 + 1, x0] = color
        img[y0:y1 + 1, x1] = color


def _draw_disc(img: np.ndarray, cx: int, cy: int, radius: int, color: Color) -> None:
    """Filled disc: pixel included iff Euclidean distance to center <= radius."""
    h, w = img.shape[:2]
    y0, y1 = max(0, cy - radius), min(h - 1, cy + radius)
    x0, x1 = max(0, cx - radius), min(w - 1, cx + radius)
    r2 = radius * radius
    for py in range(y0, y1 + 1):
        for px in range(x0, x1 + 1):
            if (px - cx) ** 2 + (py - cy) ** 2 <= r2:
                img[py, px] = color


def render_annotation_plot(anns: list[ShootAnnotation] | tuple[ShootAnnotation, ...],
                           width: int, height: int,
                           style: PlotStyle | None = None) -> np.ndarray:
    """Rasterize annotations on a plain background.

    Boxes are drawn first, then visible nodes on top, in annotation order.
    """
    style = style or PlotStyle()
    style.validate()
    for ann in anns:
        validate_annotation(ann, width, height)
    img = np.empty((height, width, 3), dtype=np.uint8)
    img[:, :] = style.background
    for ann in anns:
        _draw_rect_outline(img, ann.bbox, style.bbox_color, style.bbox_thickness)
    for ann in anns:
        for kp in ann.keypoints:
            if not kp.visible:
                continue
            color = style.node_color_by_index.get(kp.index)
            if color is None:
                raise ValidationError(f"no style color for node index {kp.index}")
            _draw_disc(img, kp.x, kp.y, style.node_radius, color)
    return img


def render_overlay(img: np.ndarray, anns: tuple[ShootAnnotation, ...],
                   style: PlotStyle | None = None) -> np.ndarray:
    """Draw annotations over an existing image (for review overlays)."""
    style = style or PlotStyle()
    out = img.copy()
    if out.ndim == 2:
        out = np.stack([out] * 3, axis=-1)
    for ann in anns:
        _draw_rect_outline(out, ann.bbox, style.bbox_color, style.bbox_thickness)
    for ann in anns:
        for kp in ann.keypoints:
            if kp.visible:
                color = style.node_color_by_index.get(kp.index, (255, 0, 0))
                _draw_disc(out, kp.x, kp.y, style.node_radius, color)
    return out


# ---------------------------------------------------------------------------
# Horizontal flip


def hflip_annotation(ann: ShootAnnotation, canvas_w: int) -> ShootAnnotation:
    b = ann.bbox
    flipped_box = BBox(x=canvas_w - b.x - b.w, y=b.y, w=b.w, h=b.h)
    flipped_kps = tuple(
        Keypoint(index=kp.index, x=canvas_w - 1 - kp.x, y=kp.y, visible=kp.visible)
        for kp in ann.keypoints)
    return replace(ann, bbox=flipped_box, keypoints=flipped_kps)


def hflip(img: np.ndarray | None,
          anns: list[ShootAnnotation] | tuple[ShootAnnotation, ...],
          canvas_w: int) -> tuple[np.ndarray | None, tuple[ShootAnnotation, ...]]:
    """Mirror image columns and annotation coordinates about the canvas center."""
    flipped_img = None
    if img is not None:
        if img.shape[1] != canvas_w:
            raise ValidationError(
                f"canvas width {canvas_w} does not match image width {img.shape[1]}")
        flipped_img = img[:, ::-1].copy()
    return flipped_img, tuple(hflip_annotation(a, canvas_w) for a in anns)


# ---------------------------------------------------------------------------
# Synthetic layout generation


@dataclass(frozen=True)
class LayoutParams:
    """Knobs for the synthetic annotation-layout generator.

    Shoots are near-vertical: evenly spaced columns with horizontal jitter,
    nodes running strictly top to bottom with sampled internode gaps.
    """

    canvas_w: int = 512
    canvas_h: int = 512
    min_shoots: int = 1
    max_shoots: int = 3
    min_nodes: int = 2
    max_nodes: int = 10
    min_gap: int = 20
    max_gap: int = 60
    x_jitter: int = 12
    bbox_pad: int = 10
    margin: int = 24

    def validate(self) -> None:
        if self.min_shoots < 1 or self.max_shoots < self.min_shoots:
            raise ValidationError("invalid shoot count range")
        if self.min_nodes < 1 or self.max_nodes < self.min_nodes or self.max_nodes > 10:
            raise ValidationError("invalid node count range")
        if self.min_gap < 1 or self.max_gap < self.min_gap:
            raise ValidationError("invalid internode gap range")
        slot = self.canvas_w // (self.max_shoots + 1)
        if slot <= 2 * (self.x_jitter + self.bbox_pad):
            raise ValidationError(
                f"{self.max_shoots} shoots cannot fit a {self.canvas_w}px canvas "
                "without overlapping")
        if self.margin + self.min_gap * (self.min_nodes - 1) + self.margin >= self.canvas_h:
            raise ValidationError("canvas too short for the node count and gaps")


def synth_layout(params: LayoutParams, seed: int) -> tuple[ShootAnnotation, ...]:
    """Generate a plausible annotation layout, deterministic in ``seed``."""
    params.validate()
    rng = Random(seed)
    n_shoots = rng.randint(params.min_shoots, params.max_shoots)
    slot_w = params.canvas_w // (n_shoots + 1)
    anns = []
    for s in range(n_shoots):
        center_x = slot_w * (s + 1) + rng.randint(-params.x_jitter, params.x_jitter)
        n_nodes = rng.randint(params.min_nodes, params.max_nodes)
        max_span = params.canvas_h - 2 * params.margin
        gaps = []
        for _ in range(n_nodes - 1):
            gaps.append(rng.randint(params.min_gap, params.max_gap))
        span = sum(gaps)
        if span > max_span:
            scale = max_span / span
            gaps = [max(1, int(g * scale)) for g in gaps]
            span = sum(gaps)
        top_y = rng.randint(params.margin, params.canvas_h - params.margin - span)
        ys = [top_y]
        for g in gaps:
            ys.append(ys[-1] + g)
        kps = []
        for i, y in enumerate(ys, start=1):
            x = center_x + rng.randint(-params.x_jitter // 2, params.x_jitter // 2)
            kps.append(Keypoint(index=i, x=x, y=y, visible=True))
        xs = [kp.x for kp in kps]
        x0 = max(0, min(xs) - params.bbox_pad)
        y0 = max(0, ys[0] - params.bbox_pad)
        x1 = min(params.canvas_w - 1, max(xs) + params.bbox_pad)
        y1 = min(params.canvas_h - 1, ys[-1] + params.bbox_pad)
        ann = ShootAnnotation(bbox=BBox(x0, y0, x1 - x0 + 1, y1 - y0 + 1),
                              keypoints=tuple(kps))
        validate_annotation(ann, params.canvas_w, params.canvas_h)
        anns.append(ann)
    return tuple(anns)
