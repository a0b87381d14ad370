"""Workflow orchestration: checkpoint selection, augmentation plans,
generation-service calls, stage-1 conditioning enumeration, PCA export,
and stage-2 validation passes.

The image generator is an HTTP boundary; a deterministic mock ships with
the package (genaug.genservice) so every workflow runs hermetically.
"""

from __future__ import annotations

import json
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from genaug import iqa
from genaug.errors import ServiceError, ValidationError
from genaug.manifest import (
    DatasetManifest,
    ImageRecord,
    ShootAnnotation,
    manifest_to_json,
)
from genaug.raster import png_bytes, png_to_array, write_png

# ---------------------------------------------------------------------------
# Checkpoint monitoring


@dataclass(frozen=True)
class CheckpointSeries:
    metric_name: str
    polarity: str  # "lower" or "higher" is better
    points: tuple[tuple[int, float], ...]

    def validate(self) -> None:
        if self.polarity not in ("lower", "higher"):
            raise ValidationError(f"polarity must be 'lower' or 'higher', "
                                  f"got {self.polarity!r}")
        prev = None
        for step, value in self.points:
            if prev is not None and step <= prev:
                raise ValidationError(
                    f"steps must be strictly increasing ({step} after {prev})")
            prev = step
            if not math.isfinite(value):
                raise ValidationError(f"non-finite value at step {step}")


def select_best_checkpoint(series: CheckpointSeries) -> int:
    """Step with the best metric value; ties resolve to the earliest step."""
    series.validate()
    if not series.points:
        raise ValidationError(f"empty series for {series.metric_name!r}")
    better = (lambda v, b: v < b) if series.polarity == "lower" else (lambda v, b: v > b)
    best_step, best_value = series.points[0]
    for step, value in series.points[1:]:
        if better(value, best_value):
            best_step, best_value = step, value
    return best_step


def load_series(path: str | Path) -> CheckpointSeries:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return CheckpointSeries(
        metric_name=data["metric_name"],
        polarity=data.get("polarity", "lower"),
        points=tuple((int(s), float(v)) for s, v in data["points"]),
    )


# ---------------------------------------------------------------------------
# Augmentation plans

GENERATED_LADDER = (50, 100, 250, 500, 1000)
PLAN_LABELS = ("a", "b", "c", "d", "e", "f", "g")


@dataclass(frozen=True)
class AugmentationPlan:
    """One training-dataset recipe: which sources and how many generated."""

    label: str
    normal_ids: tuple[str, ...]
    transferred_ids: tuple[str, ...]
    generated_count: int
    generation_seeds: tuple[int, ...]
    validation_source: str  # "normal" or "transferred"

    @property
    def target_total(self) -> int:
        return len(self.normal_ids) + len(self.transferred_ids) + self.generated_count


def build_plans(base: DatasetManifest, seed: int = 0) -> list[AugmentationPlan]:
    """The seven comparison plans:

    a) annotated training records only; b) style-transferred records only;
    c..g) plan b plus 50/100/250/500/1000 generated images. Plan a
    validates on the normal validation split, all others on the
    transferred one.
    """
    normal = sorted(r.id for r in base.records
                    if r.provenance == "real" and r.split == "train" and r.annotations)
    transferred = sorted(r.id for r in base.records
                         if r.provenance == "transferred" and r.split == "train")
    if not normal:
        raise ValidationError("base manifest has no annotated real train records")
    if not transferred:
        raise ValidationError("base manifest has no transferred train records")
    plans = [
        AugmentationPlan("a", tuple(normal), (), 0, (), "normal"),
        AugmentationPlan("b", (), tuple(transferred), 0, (), "transferred"),
    ]
    offset = 0
    for label, count in zip(PLAN_LABELS[2:], GENERATED_LADDER):
        seeds = tuple(seed + offset + i for i in range(count))
        offset += count
        plans.append(AugmentationPlan(label, (), tuple(transferred), count, seeds,
                                      "transferred"))
    return plans


def plan_to_json(plan: AugmentationPlan) -> dict:
    return {
        "label": plan.label,
        "normal_ids": list(plan.normal_ids),
        "transferred_ids": list(plan.transferred_ids),
        "generated_count": plan.generated_count,
        "generation_seeds": list(plan.generation_seeds),
        "validation_source": plan.validation_source,
        "target_total": plan.target_total,
    }


# ---------------------------------------------------------------------------
# Stage-1 conditioning enumeration


@dataclass(frozen=True)
class ConditioningPair:
    pair_id: str
    image_id: str
    preset: str
    flipped: bool


def enumerate_stage1_pairs(pool: DatasetManifest,
                           preset_names: tuple[str, ...] | None = None,
                           ) -> list[ConditioningPair]:
    """Every (pool image x edge preset x flip) conditioning pair.

    This is bookkeeping only; rendering the actual edge images is a
    separate, embarrassingly parallel materialization step.
    """
    if preset_names is None:
        from genaug.edge import default_presets

        preset_names = tuple(p.name for p in default_presets())
    pairs = []
    for rec in pool.records:
        for preset in preset_names:
            for flipped in (False, True):
                suffix = "f" if flipped else "o"
                pairs.append(ConditioningPair(
                    pair_id=f"{rec.id}__{preset}__{suffix}",
                    image_id=rec.id,
                    preset=preset,
                    flipped=flipped,
                ))
    return pairs


def write_stage1_pairs(pairs: list[ConditioningPair], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(json.dumps({
                "pair_id": p.pair_id, "image_id": p.image_id,
                "preset": p.preset, "flipped": p.flipped,
            }, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Generation client


@dataclass(frozen=True, eq=False)
class GenerationRequest:
    conditioning: np.ndarray
    prompt: str
    seed: int
    source_annotations: tuple[ShootAnnotation, ...] = ()
    source_id: str = ""
    checkpoint: str = ""

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValidationError("generation prompt must be non-empty")


@dataclass(frozen=True)
class GenerationOutcome:
    request_index: int
    record: ImageRecord | None
    error: str | None


class GenerationClient:
    """HTTP client for the generation service.

    POST {base_url}/generate, multipart: conditioning (PNG), prompt, seed
    (and optionally a checkpoint tag); response body is the generated PNG.
    Failures retry up to 3 attempts with exponential backoff, then fail the
    item without aborting the batch.
    """

    def __init__(self, base_url: str, timeout: float = 60.0, attempts: int = 3,
                 backoff: float = 0.2, parallelism: int = 4):
        import httpx

        self.base_url = base_url.rstrip("/")
        self.attempts = attempts
        self.backoff = backoff
        self.parallelism = parallelism
        self._client = httpx.Client(timeout=timeout)

    def generate_once(self, req: GenerationRequest) -> np.ndarray:
        import httpx

        files = {"conditioning": ("conditioning.png", png_bytes(req.conditioning),
                                  "image/png")}
        data = {"prompt": req.prompt, "seed": str(req.seed)}
        if req.checkpoint:
            data["checkpoint"] = req.checkpoint
        last_error: Exception | None = None
        for attempt in range(self.attempts):
            try:
                resp = self._client.post(f"{self.base_url}/generate",
                                         data=data, files=files)
                resp.raise_for_status()
                return png_to_array(resp.content)
            except (httpx.HTTPError, OSError) as exc:
                last_error = exc
                if attempt + 1 < self.attempts:
                    time.sleep(self.backoff * (2 ** attempt))
        raise ServiceError(f"generation failed after {self.attempts} attempts: "
                           f"{last_error}")


def generate_records(client: GenerationClient, requests: list[GenerationRequest],
                     out_dir: str | Path, domain: str, log_path: str | Path | None = None,
                     ) -> list[GenerationOutcome]:
    """Run a generation batch; each item failure is isolated.

    Output records preserve the request's annotations verbatim (the
    conditioning image already encodes the coordinates; nothing downstream
    may alter them). Requests and outcomes are logged as JSON lines for
    replay.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def run_one(indexed: tuple[int, GenerationRequest]) -> GenerationOutcome:
        idx, req = indexed
        try:
            img = client.generate_once(req)
        except ServiceError as exc:
            return GenerationOutcome(idx, None, str(exc))
        rec_id = f"gen-{req.source_id or 'anon'}-{req.seed}"
        path = out_dir / f"{rec_id}.png"
        write_png(img, path)
        record = ImageRecord(
            id=rec_id,
            path=str(path),
            width=img.shape[1],
            height=img.shape[0],
            domain=domain,
            split="train",
            provenance="generated",
            annotations=req.source_annotations,
        )
        return GenerationOutcome(idx, record, None)

    with ThreadPoolExecutor(max_workers=client.parallelism) as pool:
        outcomes = list(pool.map(run_one, enumerate(requests)))
    outcomes.sort(key=lambda o: o.request_index)

    if log_path is not None:
        with open(log_path, "a", encoding="utf-8") as fh:
            for req, outcome in zip(requests, outcomes):
                fh.write(json.dumps({
                    "source_id": req.source_id,
                    "prompt": req.prompt,
                    "seed": req.seed,
                    "checkpoint": req.checkpoint,
                    "record_id": outcome.record.id if outcome.record else None,
                    "error": outcome.error,
                }, sort_keys=True) + "\n")
    return outcomes


def outcomes_to_manifest(outcomes: list[GenerationOutcome],
                         base: DatasetManifest) -> DatasetManifest:
    records = tuple(o.record for o in outcomes if o.record is not None)
    return DatasetManifest(records=records, domains=base.domains,
                           schema_version=base.schema_version)


# ---------------------------------------------------------------------------
# PCA


@dataclass(frozen=True)
class PcaResult:
    ids: tuple[str, ...]
    coordinates: np.ndarray  # (n, k)
    explained_variance_ratio: tuple[float, ...]


def pca_project(features: iqa.FeatureSet, k: int = 2) -> PcaResult:
    """Project onto the top-k principal components.

    Sign convention: the first nonzero loading of each component is
    positive, so outputs are reproducible across eig implementations.
    """
    n, d = features.vectors.shape
    if n < 2:
        raise ValidationError(f"PCA needs at least 2 samples, got {n}")
    k = min(k, d)
    x = features.vectors - features.vectors.mean(axis=0)
    cov = (x.T @ x) / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    eigvecs = eigvecs[:, order]
    total = float(eigvals.sum())
    if total == 0.0:
        warnings.warn("PCA input has zero variance; coordinates are all zero",
                      stacklevel=2)
        ratios = tuple(0.0 for _ in range(k))
        return PcaResult(features.ids, np.zeros((n, k)), ratios)
    comps = eigvecs[:, :k].copy()
    for j in range(k):
        col = comps[:, j]
        nz = np.nonzero(col)[0]
        if nz.size and col[nz[0]] < 0:
            comps[:, j] = -col
    coords = x @ comps
    ratios = tuple(float(eigvals[j] / total) for j in range(k))
    return PcaResult(features.ids, coords, ratios)


def write_pca_csv(result: PcaResult, labels: dict[str, str], path: str | Path) -> None:
    """CSV export: id, pc1, pc2, dataset_label."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "pc1", "pc2", "dataset_label"])
        for i, image_id in enumerate(result.ids):
            pc1 = float(result.coordinates[i, 0])
            pc2 = float(result.coordinates[i, 1]) if result.coordinates.shape[1] > 1 else 0.0
            writer.writerow([image_id, repr(pc1), repr(pc2), labels.get(image_id, "")])


# ---------------------------------------------------------------------------
# Stage-2 validation pass


@dataclass(frozen=True)
class Stage2Validation:
    checkpoint: str
    metrics: dict[str, float]
    failures: int


def stage2_validation_pass(client: GenerationClient, checkpoint: str,
                           val: DatasetManifest, prompts: dict[str, str],
                           provider: iqa.EmbeddingProvider | None = None,
                           fr_metrics: tuple[str, ...] = ("ssim", "psnr"),
                           style=None) -> Stage2Validation:
    """Generate from each validation annotation plot and score the results.

    Produces whole-image FR metrics, bbox-cropped FR metrics, and FID/KID
    between the generated set and the validation originals. Failed
    generations are excluded from the aggregates but counted.
    """
    from genaug.raster import read_png, render_annotation_plot

    provider = provider or iqa.BuiltinDescriptor()
    refs: list[tuple[str, np.ndarray]] = []
    gens: list[tuple[str, np.ndarray]] = []
    whole: dict[str, list[float]] = {m: [] for m in fr_metrics}
    cropped: dict[str, list[float]] = {m: [] for m in fr_metrics}
    failures = 0
    for rec in val.records:
        if not rec.annotations:
            continue
        plot = render_annotation_plot(rec.annotations, rec.width, rec.height, style)
        prompt = prompts.get(rec.domain, "")
        req = GenerationRequest(conditioning=plot, prompt=prompt or rec.domain,
                                seed=0, source_annotations=rec.annotations,
                                source_id=rec.id, checkpoint=checkpoint)
        try:
            gen_img = client.generate_once(req)
        except ServiceError:
            failures += 1
            continue
        ref_img = read_png(rec.path)
        refs.append((rec.id, ref_img))
        gens.append((rec.id, gen_img))
        for m in fr_metrics:
            whole[m].append(iqa.FR_METRICS[m](ref_img, gen_img))
            cropped[m].append(iqa.cropped_fr_score(ref_img, gen_img,
                                                   rec.annotations, m).value)

    metrics: dict[str, float] = {}
    for m in fr_metrics:
        metrics[m] = _mean_or_inf(whole[m])
        metrics[f"cropped_{m}"] = _mean_or_inf(cropped[m])
    if len(refs) >= 2:
        ref_set = iqa.build_feature_set(refs, provider)
        gen_set = iqa.build_feature_set(gens, provider)
        d = provider.dim
        if len(refs) < d + 1:
            warnings.warn(
                f"FID/KID over {len(refs)} images in dimension {d} is a "
                "small-sample estimate", stacklevel=2)
        metrics["fid"] = iqa.fid(ref_set, gen_set)
        metrics["kid"] = iqa.kid(ref_set, gen_set)
    return Stage2Validation(checkpoint=checkpoint, metrics=metrics, failures=failures)


def _mean_or_inf(values: list[float]) -> float:
    if not values:
        return math.nan
    if any(math.isinf(v) for v in values):
        return math.inf
    return sum(values) / len(values)


def append_to_series(series_points: dict[str, list[tuple[int, float]]],
                     step: int, validation: Stage2Validation) -> None:
    """Fold one validation pass into per-metric series point lists."""
    for name, value in validation.metrics.items():
        series_points.setdefault(name, []).append((step, value))


# ---------------------------------------------------------------------------
# Run manifest


def write_run_manifest(path: str | Path, plan: AugmentationPlan | None,
                       manifest: DatasetManifest, endpoint: str,
                       provider_name: str, seed: int) -> None:
    payload = {
        "plan": plan_to_json(plan) if plan else None,
        "manifest": manifest_to_json(manifest),
        "service_endpoint": endpoint,
        "provider": provider_name,
        "seed": seed,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")
