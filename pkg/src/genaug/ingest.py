"""Ingestion: resize source images to the canonical 512x512 and build a
manifest, rescaling any provided annotations onto the new pixel grid."""

from __future__ import annotations

import json
from pathlib import Path

from PIL import Image

from genaug.errors import ValidationError
from genaug.manifest import (
    BBox,
    DatasetManifest,
    DomainTag,
    ImageRecord,
    Keypoint,
    ShootAnnotation,
    round_half_up,
    validate_manifest,
)

CANONICAL_SIZE = 512
_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


def _scale_annotation(ann: dict, sx: float, sy: float, size: int) -> ShootAnnotation:
    x, y, w, h = ann["bbox"]
    bx = min(size - 1, max(0, round_half_up(x * sx)))
    by = min(size - 1, max(0, round_half_up(y * sy)))
    bw = max(1, min(size - bx, round_half_up(w * sx)))
    bh = max(1, min(size - by, round_half_up(h * sy)))
    kps = []
    for k in ann.get("keypoints", []):
        idx, kx, ky, visible = k
        kps.append(Keypoint(index=int(idx),
                            x=min(size - 1, max(0, round_half_up(kx * sx))),
                            y=min(size - 1, max(0, round_half_up(ky * sy))),
                            visible=bool(visible)))
    return ShootAnnotation(bbox=BBox(bx, by, bw, bh), keypoints=tuple(kps))


def ingest_directory(images_dir: str | Path, out_dir: str | Path, domain: str,
                     prompt_key: str, split: str = "pool", provenance: str = "real",
                     annotations_path: str | Path | None = None) -> DatasetManifest:
    """Resize every image in a directory and return the resulting manifest."""
    images_dir = Path(images_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ann_map: dict = {}
    if annotations_path:
        ann_map = json.loads(Path(annotations_path).read_text(encoding="utf-8"))

    paths = sorted(p for p in images_dir.iterdir()
                   if p.suffix.lower() in _IMAGE_SUFFIXES)
    if not paths:
        raise ValidationError(f"no images found in {images_dir}")
    records = []
    for path in paths:
        with Image.open(path) as img:
            src_w, src_h = img.size
            resized = img.convert("RGB").resize((CANONICAL_SIZE, CANONICAL_SIZE),
                                                Image.BILINEAR)
        rec_id = path.stem
        out_path = out / f"{rec_id}.png"
        resized.save(out_path, format="PNG")
        sx = CANONICAL_SIZE / src_w
        sy = CANONICAL_SIZE / src_h
        anns = tuple(_scale_annotation(a, sx, sy, CANONICAL_SIZE)
                     for a in ann_map.get(path.name, []))
        records.append(ImageRecord(
            id=rec_id, path=str(out_path),
            width=CANONICAL_SIZE, height=CANONICAL_SIZE,
            domain=domain, split=split, provenance=provenance,
            annotations=anns,
        ))
    manifest = DatasetManifest(records=tuple(records),
                               domains=(DomainTag(name=domain, prompt_key=prompt_key),))
    validate_manifest(manifest)
    return manifest
