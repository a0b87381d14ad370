"""Adapter between the native manifest and COCO-style tables.

Exports the usual images/annotations/categories layout so external detector
trainers can consume our datasets. Keypoints are flattened to [x, y, v]
triples with v in {0, 2}: occluded (annotated but invisible) nodes are
dropped to v=0 on export, so an export/import round trip loses them.
"""

from __future__ import annotations

import json
from pathlib import Path

from genaug.errors import ManifestParseError, ValidationError
from genaug.manifest import (
    MAX_KEYPOINTS,
    BBox,
    DatasetManifest,
    DomainTag,
    ImageRecord,
    Keypoint,
    ShootAnnotation,
)

CATEGORY_ID = 1
KEYPOINT_NAMES = [f"node_{i}" for i in range(1, MAX_KEYPOINTS + 1)]


def manifest_to_coco(m: DatasetManifest) -> dict:
    images = []
    annotations = []
    ann_id = 1
    for rec in m.records:
        images.append({
            "id": rec.id,
            "file_name": rec.path,
            "width": rec.width,
            "height": rec.height,
        })
        for ann in rec.annotations:
            flat = []
            n_visible = 0
            by_index = {kp.index: kp for kp in ann.keypoints}
            for idx in range(1, MAX_KEYPOINTS + 1):
                kp = by_index.get(idx)
                if kp is not None and kp.visible:
                    flat.extend([kp.x, kp.y, 2])
                    n_visible += 1
                else:
                    flat.extend([0, 0, 0])
            annotations.append({
                "id": ann_id,
                "image_id": rec.id,
                "category_id": CATEGORY_ID,
                "bbox": [ann.bbox.x, ann.bbox.y, ann.bbox.w, ann.bbox.h],
                "area": ann.bbox.area(),
                "iscrowd": 0,
                "keypoints": flat,
                "num_keypoints": n_visible,
            })
            ann_id += 1
    return {
        "images": images,
        "annotations": annotations,
        "categories": [{
            "id": CATEGORY_ID,
            "name": "Shoot",
            "keypoints": KEYPOINT_NAMES,
            "skeleton": [[i, i + 1] for i in range(1, MAX_KEYPOINTS)],
        }],
    }


def coco_to_manifest(data: dict, domain: str = "unknown", split: str = "train",
                     provenance: str = "real",
                     domains: tuple[DomainTag, ...] | None = None) -> DatasetManifest:
    """Build a manifest from COCO tables; non-integral coordinates are rounded."""
    anns_by_image: dict = {}
    for ann in data.get("annotations", []):
        anns_by_image.setdefault(ann["image_id"], []).append(ann)
    records = []
    for img in data.get("images", []):
        recs = []
        for ann in anns_by_image.get(img["id"], []):
            x, y, w, h = (int(round(v)) for v in ann["bbox"])
            kps = []
            flat = ann.get("keypoints", [])
            for idx in range(len(flat) // 3):
                kx, ky, v = flat[3 * idx], flat[3 * idx + 1], flat[3 * idx + 2]
                if v == 0:
                    continue
                kps.append(Keypoint(index=idx + 1, x=int(round(kx)),
                                    y=int(round(ky)), visible=v == 2))
            recs.append(ShootAnnotation(bbox=BBox(x, y, w, h), keypoints=tuple(kps)))
        records.append(ImageRecord(
            id=str(img["id"]),
            path=str(img.get("file_name", "")),
            width=int(img["width"]),
            height=int(img["height"]),
            domain=domain,
            split=split,
            provenance=provenance,
            annotations=tuple(recs),
        ))
    if domains is None:
        domains = (DomainTag(name=domain, prompt_key=domain),)
    return DatasetManifest(records=tuple(records), domains=domains)


def export_coco(m: DatasetManifest, path: str | Path) -> None:
    Path(path).write_text(json.dumps(manifest_to_coco(m), indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def import_coco(path: str | Path, **kwargs) -> DatasetManifest:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ManifestParseError(f"cannot read COCO file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestParseError(f"{path} is not valid JSON: {exc}") from exc
    if "images" not in data:
        raise ValidationError(f"{path} lacks a COCO 'images' table")
    return coco_to_manifest(data, **kwargs)
