"""Detection evaluation: IoU / keypoint-similarity matching and mAP.

Matching follows the usual greedy protocol: detections ranked by score
claim their best still-unclaimed ground truth at or above the similarity
threshold. AP is 101-point interpolated (precision envelope sampled at
recall 0.00..1.00 in steps of 0.01); mAP averages thresholds
0.50:0.05:0.95 and mAP50 is the 0.50 entry.

Plain Python arithmetic throughout: instances are small and the ranking /
envelope logic must be reproducible to the last bit.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from genaug.errors import ValidationError
from genaug.manifest import BBox, ShootAnnotation

DEFAULT_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))


@dataclass(frozen=True)
class Detection:
    image_id: str
    bbox: tuple[float, float, float, float]  # x, y, w, h
    score: float
    keypoints: tuple[tuple[float, float, int], ...] = ()  # (x, y, v), node i at slot i-1

    def __post_init__(self) -> None:
        if not math.isfinite(self.score):
            raise ValidationError(f"non-finite score for detection on {self.image_id}")
        if len(self.bbox) != 4:
            raise ValidationError("detection bbox must be [x, y, w, h]")
        if len(self.keypoints) > 10:
            raise ValidationError("more than 10 predicted keypoints")


@dataclass(frozen=True)
class OksParams:
    """Per-node falloff constants and the object-scale rule (sqrt bbox area)."""

    k_per_node: tuple[float, ...] = (0.1,) * 10

    def k_for(self, index: int) -> float:
        k = self.k_per_node[index - 1] if index - 1 < len(self.k_per_node) else 0.1
        if k <= 0:
            raise ValidationError(f"k for node {index} must be > 0")
        return k


@dataclass(frozen=True)
class PRCurve:
    precisions: tuple[float, ...]
    recalls: tuple[float, ...]
    ap: float


@dataclass(frozen=True)
class EvalReport:
    task: str
    thresholds: tuple[float, ...]
    ap_by_threshold: dict[float, float]
    mean_ap: float
    map50: float
    n_detections: int
    n_ground_truth: int
    curves: dict[float, PRCurve] = field(default_factory=dict)


def iou(a: BBox | tuple, b: BBox | tuple) -> float:
    """Intersection over union of two xywh boxes; 0 when disjoint."""
    ax, ay, aw, ah = (a.x, a.y, a.w, a.h) if isinstance(a, BBox) else a
    bx, by, bw, bh = (b.x, b.y, b.w, b.h) if isinstance(b, BBox) else b
    ix = max(0.0, min(ax + aw, bx + bw) - max(ax, bx))
    iy = max(0.0, min(ay + ah, by + bh) - max(ay, by))
    inter = ix * iy
    if inter == 0.0:
        return 0.0
    union = aw * ah + bw * bh - inter
    return inter / union


def oks(pred_keypoints: tuple[tuple[float, float, int], ...],
        gt: ShootAnnotation, params: OksParams | None = None) -> float:
    """Visibility-gated keypoint similarity in [0, 1].

    Each visible ground-truth node i contributes exp(-d_i^2 / (2 s^2 k_i^2))
    where d_i is the Euclidean error of the prediction for node i and
    s = sqrt(ground-truth bbox area). Missing predictions contribute 0 but
    still count in the denominator.
    """
    params = params or OksParams()
    visible = [kp for kp in gt.keypoints if kp.visible]
    if not visible:
        raise ValidationError("keypoint similarity is undefined without visible "
                              "ground-truth nodes")
    s2 = float(gt.bbox.area())
    if s2 <= 0:
        raise ValidationError("ground-truth bbox area must be positive")
    total = 0.0
    for kp in visible:
        slot = kp.index - 1
        if slot < len(pred_keypoints) and pred_keypoints[slot][2] > 0:
            px, py, _ = pred_keypoints[slot]
            d2 = (px - kp.x) ** 2 + (py - kp.y) ** 2
            k = params.k_for(kp.index)
            total += math.exp(-d2 / (2.0 * s2 * k * k))
        # else: missing prediction, contributes 0
    return total / len(visible)


def match(dets: list[Detection], gts: list[ShootAnnotation],
          similarity, threshold: float) -> tuple[list[bool], int]:
    """Greedy matching within one image.

    Detections are visited in rank order (score descending, input order on
    ties); each claims the unclaimed ground truth with the highest
    similarity >= threshold, ties going to the lowest ground-truth index.
    Returns per-detection TP flags (in the given detection order) and the
    number of unmatched ground truths.
    """
    ranked = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    claimed = [False] * len(gts)
    tp = [False] * len(dets)
    for di in ranked:
        best_gt = -1
        best_sim = -1.0
        for gi, gt in enumerate(gts):
            if claimed[gi]:
                continue
            sim = similarity(dets[di], gt)
            if sim >= threshold and sim > best_sim:
                best_gt = gi
                best_sim = sim
        if best_gt >= 0:
            claimed[best_gt] = True
            tp[di] = True
    return tp, claimed.count(False)


def average_precision(tp_flags: list[bool], n_gt: int) -> float:
    """101-point interpolated AP from ranked TP flags."""
    if n_gt < 1:
        raise ValidationError("average precision undefined with no ground truth")
    precisions = []
    recalls = []
    tp_cum = 0
    for i, flag in enumerate(tp_flags, start=1):
        if flag:
            tp_cum += 1
        precisions.append(tp_cum / i)
        recalls.append(tp_cum / n_gt)
    total = 0.0
    for step in range(101):
        r = step / 100.0
        best = 0.0
        for p, rec in zip(precisions, recalls):
            if rec >= r and p > best:
                best = p
        total += best
    return total / 101.0


def bbox_similarity(det: Detection, gt: ShootAnnotation) -> float:
    return iou(det.bbox, gt.bbox)


def make_keypoint_similarity(params: OksParams | None = None):
    p = params or OksParams()

    def sim(det: Detection, gt: ShootAnnotation) -> float:
        if not any(kp.visible for kp in gt.keypoints):
            return 0.0  # unscorable ground truth never matches
        return oks(det.keypoints, gt, p)

    return sim


def map_report(dets_by_image: dict[str, list[Detection]],
               gts_by_image: dict[str, list[ShootAnnotation]],
               task: str = "bbox",
               thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS,
               oks_params: OksParams | None = None,
               keep_curves: bool = False) -> EvalReport:
    """AP at each threshold, pooled across images by global ranking."""
    if task == "bbox":
        similarity = bbox_similarity
        countable = lambda gt: True
    elif task == "keypoint":
        similarity = make_keypoint_similarity(oks_params)
        countable = lambda gt: any(kp.visible for kp in gt.keypoints)
    else:
        raise ValidationError(f"unknown task {task!r} (use 'bbox' or 'keypoint')")

    n_gt = sum(1 for gts in gts_by_image.values() for gt in gts if countable(gt))
    if n_gt == 0:
        raise ValidationError("no scorable ground truth annotations")

    flat: dict[str, list[Detection]] = {}
    for image_id in sorted(dets_by_image):
        flat[image_id] = list(dets_by_image[image_id])

    ap_by_threshold: dict[float, float] = {}
    curves: dict[float, PRCurve] = {}
    n_detections = sum(len(v) for v in flat.values())
    for thr in thresholds:
        ranked_flags: list[tuple[float, str, int, bool]] = []
        for image_id, dets in flat.items():
            gts = gts_by_image.get(image_id, [])
            scorable = [gt for gt in gts if countable(gt)]
            tp, _ = match(dets, scorable, similarity, thr)
            for idx, det in enumerate(dets):
                ranked_flags.append((-det.score, det.image_id, idx, tp[idx]))
        ranked_flags.sort(key=lambda t: (t[0], t[1], t[2]))
        flags = [f for _, _, _, f in ranked_flags]
        ap = average_precision(flags, n_gt) if flags else 0.0
        ap_by_threshold[thr] = ap
        if keep_curves:
            tp_cum = 0
            ps, rs = [], []
            for i, f in enumerate(flags, start=1):
                tp_cum += 1 if f else 0
                ps.append(tp_cum / i)
                rs.append(tp_cum / n_gt)
            curves[thr] = PRCurve(tuple(ps), tuple(rs), ap)

    mean_ap = sum(ap_by_threshold.values()) / len(thresholds)
    return EvalReport(
        task=task,
        thresholds=tuple(thresholds),
        ap_by_threshold=ap_by_threshold,
        mean_ap=mean_ap,
        map50=ap_by_threshold.get(0.5, math.nan),
        n_detections=n_detections,
        n_ground_truth=n_gt,
        curves=curves,
    )


# ---------------------------------------------------------------------------
# IO


def load_detections_jsonl(path: str | Path) -> dict[str, list[Detection]]:
    """One JSON object per line:
    {"image_id", "bbox": [x,y,w,h], "score", "keypoints": [[x,y,v], ...]}."""
    out: dict[str, list[Detection]] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            det = Detection(
                image_id=str(obj["image_id"]),
                bbox=tuple(float(v) for v in obj["bbox"]),
                score=float(obj["score"]),
                keypoints=tuple((float(k[0]), float(k[1]), int(k[2]))
                                for k in obj.get("keypoints", [])),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{path}:{lineno}: bad detection line: {exc}") from exc
        out.setdefault(det.image_id, []).append(det)
    return out


def load_coco_results(path: str | Path) -> dict[str, list[Detection]]:
    """COCO results array: [{"image_id", "bbox", "score", "keypoints"?}, ...]."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    out: dict[str, list[Detection]] = {}
    for obj in data:
        kps = obj.get("keypoints", [])
        triples = tuple((float(kps[i]), float(kps[i + 1]), int(kps[i + 2]))
                        for i in range(0, len(kps), 3))
        det = Detection(image_id=str(obj["image_id"]),
                        bbox=tuple(float(v) for v in obj["bbox"]),
                        score=float(obj["score"]), keypoints=triples)
        out.setdefault(det.image_id, []).append(det)
    return out


def report_to_json(report: EvalReport) -> dict:
    return {
        "task": report.task,
        "thresholds": list(report.thresholds),
        "ap_by_threshold": {f"{t:.2f}": report.ap_by_threshold[t]
                            for t in report.thresholds},
        "mAP": report.mean_ap,
        "mAP50": report.map50,
        "n_detections": report.n_detections,
        "n_ground_truth": report.n_ground_truth,
    }


def write_report(report: EvalReport, json_path: str | Path,
                 csv_path: str | Path | None = None) -> None:
    Path(json_path).write_text(
        json.dumps(report_to_json(report), indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    if csv_path is not None:
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["threshold", "ap"])
            for t in report.thresholds:
                writer.writerow([f"{t:.2f}", repr(report.ap_by_threshold[t])])
            writer.writerow(["mAP", repr(report.mean_ap)])
            writer.writerow(["mAP50", repr(report.map50)])
