"""Dataset manifest: annotation data model, persistence, validation, splits.

The manifest is a single JSON document holding image records, their
annotations, and the domain table. Manifests are immutable values after
load; mutation means building a new manifest.

Coordinates are integer pixels. Keeping annotations on the integer grid
makes flips, rendering, and round-trips exact, which the geometry tests
rely on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from random import Random

from genaug.errors import ManifestParseError, ValidationError

SCHEMA_VERSION = 1

SPLITS = ("train", "val", "test", "pool")
PROVENANCES = ("real", "transferred", "generated")

CLASS_NAME = "Shoot"
MAX_KEYPOINTS = 10

# Vertical-order slack for visible keypoints, in pixels. 0 = strict
# top-to-bottom.
DEFAULT_ORDER_TOLERANCE = 0
# Visible keypoints may sit this far outside their bbox.
DEFAULT_BBOX_MARGIN = 5


@dataclass(frozen=True)
class DomainTag:
    """A visual domain (e.g. "night", "day") and its prompt-table key."""

    name: str
    prompt_key: str


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: top-left corner plus positive size, in pixels."""

    x: int
    y: int
    w: int
    h: int

    def area(self) -> int:
        return self.w * self.h


@dataclass(frozen=True)
class Keypoint:
    """One node: ordinal 1..10, pixel position, visibility flag."""

    index: int
    x: int
    y: int
    visible: bool = True


@dataclass(frozen=True)
class ShootAnnotation:
    """A single "Shoot" instance: bbox plus up to 10 ordered node keypoints."""

    bbox: BBox
    keypoints: tuple[Keypoint, ...] = ()
    class_name: str = CLASS_NAME


@dataclass(frozen=True)
class ImageRecord:
    id: str
    path: str
    width: int
    height: int
    domain: str
    split: str
    provenance: str
    annotations: tuple[ShootAnnotation, ...] = ()


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple[ImageRecord, ...] = ()
    domains: tuple[DomainTag, ...] = ()
    schema_version: int = SCHEMA_VERSION

    def record_by_id(self, record_id: str) -> ImageRecord:
        for rec in self.records:
            if rec.id == record_id:
                return rec
        raise KeyError(record_id)

    def filter(self, **criteria: str) -> tuple[ImageRecord, ...]:
        """Records whose attributes match every keyword (domain=, split=, ...)."""
        out = []
        for rec in self.records:
            if all(getattr(rec, k) == v for k, v in criteria.items()):
                out.append(rec)
        return tuple(out)


@dataclass(frozen=True)
class PromptConfig:
    """Common prompt text plus a per-domain suffix table."""

    common: str
    per_domain: dict[str, str] = field(default_factory=dict)


PROMPT_SEPARATOR = ", "


def compose_prompt(cfg: PromptConfig, domain: DomainTag) -> str:
    """Join the common prompt and the domain text with a single separator."""
    if domain.prompt_key not in cfg.per_domain:
        raise ValidationError(f"no prompt entry for domain {domain.name!r} "
                              f"(key {domain.prompt_key!r})")
    return cfg.common + PROMPT_SEPARATOR + cfg.per_domain[domain.prompt_key]


def load_prompt_config(path: str | Path) -> PromptConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestParseError(f"cannot read prompt config {path}: {exc}") from exc
    common = data.get("common", "")
    if not common:
        raise ValidationError("prompt config: 'common' must be non-empty")
    return PromptConfig(common=common, per_domain=dict(data.get("per_domain", {})))


# ---------------------------------------------------------------------------
# Validation


def validate_annotation(ann: ShootAnnotation, width: int, height: int,
                        record_id: str | None = None,
                        order_tolerance: int = DEFAULT_ORDER_TOLERANCE,
                        bbox_margin: int = DEFAULT_BBOX_MARGIN) -> None:
    """Check one annotation against the geometry invariants. Raises, never repairs."""
    b = ann.bbox
    if b.w <= 0 or b.h <= 0:
        raise ValidationError(f"bbox size must be positive, got {b.w}x{b.h}", record_id)
    if b.x < 0 or b.y < 0 or b.x + b.w > width or b.y + b.h > height:
        raise ValidationError(
            f"bbox ({b.x},{b.y},{b.w},{b.h}) exceeds {width}x{height} image", record_id)
    if ann.class_name != CLASS_NAME:
        raise ValidationError(f"unknown class {ann.class_name!r}", record_id)
    if len(ann.keypoints) > MAX_KEYPOINTS:
        raise ValidationError(f"{len(ann.keypoints)} keypoints exceed the "
                              f"{MAX_KEYPOINTS}-node limit", record_id)
    prev_index = 0
    prev_visible_y: int | None = None
    for kp in ann.keypoints:
        if not 1 <= kp.index <= MAX_KEYPOINTS:
            raise ValidationError(f"keypoint index {kp.index} outside 1..{MAX_KEYPOINTS}",
                                  record_id)
        if kp.index <= prev_index:
            raise ValidationError(
                f"keypoint indices must be strictly increasing "
                f"({kp.index} after {prev_index})", record_id)
        prev_index = kp.index
        if kp.visible:
            if not (b.x - bbox_margin <= kp.x <= b.x + b.w + bbox_margin
                    and b.y - bbox_margin <= kp.y <= b.y + b.h + bbox_margin):
                raise ValidationError(
                    f"visible node {kp.index} at ({kp.x},{kp.y}) lies outside its bbox "
                    f"(margin {bbox_margin})", record_id)
            if prev_visible_y is not None and kp.y < prev_visible_y - order_tolerance:
                raise ValidationError(
                    f"visible node {kp.index} breaks top-to-bottom order "
                    f"(y={kp.y} above previous y={prev_visible_y})", record_id)
            prev_visible_y = kp.y


def validate_manifest(m: DatasetManifest,
                      order_tolerance: int = DEFAULT_ORDER_TOLERANCE,
                      bbox_margin: int = DEFAULT_BBOX_MARGIN,
                      require_canonical_size: bool = True) -> None:
    """Check manifest-level invariants plus every record and annotation.

    ``require_canonical_size`` enforces the 512x512 post-ingestion size.
    """
    domain_names = [d.name for d in m.domains]
    if len(set(domain_names)) != len(domain_names):
        raise ValidationError("duplicate domain names in domain table")
    for d in m.domains:
        if not d.name or not d.prompt_key:
            raise ValidationError(f"domain entries must be non-empty, got {d}")
    seen_ids: set[str] = set()
    for rec in m.records:
        if rec.id in seen_ids:
            raise ValidationError("duplicate record id", rec.id)
        seen_ids.add(rec.id)
        if rec.domain not in domain_names:
            raise ValidationError(f"unknown domain {rec.domain!r}", rec.id)
        if rec.split not in SPLITS:
            raise ValidationError(f"unknown split {rec.split!r}", rec.id)
        if rec.provenance not in PROVENANCES:
            raise ValidationError(f"unknown provenance {rec.provenance!r}", rec.id)
        if require_canonical_size and (rec.width != 512 or rec.height != 512):
            raise ValidationError(
                f"expected 512x512 after ingestion, got {rec.width}x{rec.height}", rec.id)
        for ann in rec.annotations:
            validate_annotation(ann, rec.width, rec.height, rec.id,
                                order_tolerance, bbox_margin)


def validate_prompt_config(cfg: PromptConfig, m: DatasetManifest) -> None:
    """Every manifest domain must resolve to a prompt entry."""
    if not cfg.common:
        raise ValidationError("prompt config: 'common' must be non-empty")
    for d in m.domains:
        if d.prompt_key not in cfg.per_domain:
            raise ValidationError(f"prompt config has no entry for domain "
                                  f"{d.name!r} (key {d.prompt_key!r})")


# ---------------------------------------------------------------------------
# Persistence


def _annotation_to_json(ann: ShootAnnotation) -> dict:
    return {
        "bbox": [ann.bbox.x, ann.bbox.y, ann.bbox.w, ann.bbox.h],
        "keypoints": [[kp.index, kp.x, kp.y, kp.visible] for kp in ann.keypoints],
    }


def _annotation_from_json(data: dict, record_id: str) -> ShootAnnotation:
    try:
        x, y, w, h = data["bbox"]
        kps = tuple(Keypoint(index=int(k[0]), x=int(k[1]), y=int(k[2]), visible=bool(k[3]))
                    for k in data.get("keypoints", []))
        return ShootAnnotation(bbox=BBox(int(x), int(y), int(w), int(h)), keypoints=kps)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed annotation: {exc}", record_id) from exc


def record_to_json(rec: ImageRecord) -> dict:
    return {
        "id": rec.id,
        "path": rec.path,
        "width": rec.width,
        "height": rec.height,
        "domain": rec.domain,
        "split": rec.split,
        "provenance": rec.provenance,
        "annotations": [_annotation_to_json(a) for a in rec.annotations],
    }


def record_from_json(r: dict) -> ImageRecord:
    rec_id = str(r.get("id", "<missing id>"))
    try:
        return ImageRecord(
            id=rec_id,
            path=str(r["path"]),
            width=int(r["width"]),
            height=int(r["height"]),
            domain=str(r["domain"]),
            split=str(r["split"]),
            provenance=str(r["provenance"]),
            annotations=tuple(_annotation_from_json(a, rec_id)
                              for a in r.get("annotations", [])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed record: {exc}", rec_id) from exc


def manifest_to_json(m: DatasetManifest) -> dict:
    return {
        "schema_version": m.schema_version,
        "domains": [{"name": d.name, "prompt_key": d.prompt_key} for d in m.domains],
        "records": [record_to_json(rec) for rec in m.records],
    }


def manifest_from_json(data: dict) -> DatasetManifest:
    domains = tuple(DomainTag(name=d["name"], prompt_key=d["prompt_key"])
                    for d in data.get("domains", []))
    records = tuple(record_from_json(r) for r in data.get("records", []))
    return DatasetManifest(records=records, domains=domains,
                           schema_version=int(data.get("schema_version", SCHEMA_VERSION)))


def load_manifest(path: str | Path, validate: bool = True,
                  require_canonical_size: bool = True) -> DatasetManifest:
    """Load and validate a manifest JSON file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestParseError(f"cannot read manifest {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestParseError(f"manifest {path} is not valid JSON: {exc}") from exc
    m = manifest_from_json(data)
    if validate:
        validate_manifest(m, require_canonical_size=require_canonical_size)
    return m


def save_manifest(m: DatasetManifest, path: str | Path) -> None:
    payload = json.dumps(manifest_to_json(m), indent=2, sort_keys=True) + "\n"
    Path(path).write_text(payload, encoding="utf-8")


# ---------------------------------------------------------------------------
# Splitting


def round_half_up(value: float) -> int:
    import math

    return int(math.floor(value + 0.5))


def split_manifest(m: DatasetManifest, fraction: float, seed: int,
                   ) -> tuple[DatasetManifest, DatasetManifest]:
    """Deterministically partition annotated real records into two manifests.

    Only records with provenance "real" and at least one annotation take
    part. The first manifest receives round-half-up(fraction * N) records.
    """
    if not 0 < fraction < 1:
        raise ValidationError(f"split fraction must be in (0,1), got {fraction}")
    eligible = [r for r in m.records if r.provenance == "real" and r.annotations]
    if not eligible:
        raise ValidationError("no annotated real records to split")
    order = sorted(eligible, key=lambda r: r.id)
    Random(seed).shuffle(order)
    n_first = round_half_up(fraction * len(order))
    first = sorted(order[:n_first], key=lambda r: r.id)
    second = sorted(order[n_first:], key=lambda r: r.id)
    return (
        DatasetManifest(records=tuple(first), domains=m.domains,
                        schema_version=m.schema_version),
        DatasetManifest(records=tuple(second), domains=m.domains,
                        schema_version=m.schema_version),
    )


def with_split(m: DatasetManifest, split: str) -> DatasetManifest:
    """Copy of the manifest with every record's split label replaced."""
    if split not in SPLITS:
        raise ValidationError(f"unknown split {split!r}")
    return replace(m, records=tuple(replace(r, split=split) for r in m.records))
