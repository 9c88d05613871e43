"""COCO-style average precision at a single IoU threshold, with size buckets.

Matching is greedy in descending score order; AP uses 101-point interpolated
precision (recall grid 0.00, 0.01, ..., 1.00, interpolated precision at r =
max precision at any recall >= r). Ground truths flagged ``ignore`` neither
create false negatives nor turn matched predictions into TPs or FPs.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import UndefinedMetricError, ValidationError
from .fusion import Detection
from .geometry import Box, area, iou

N_RECALL_POINTS = 101

RECALL_POINTS: tuple[float, ...] = tuple(float(i) / 100.0 for i in range(N_RECALL_POINTS))

SIZE_BUCKETS: dict[str, tuple[float, float]] = {
    "small": (0.0, 32.0**2),
    "medium": (32.0**2, 96.0**2),
    "large": (96.0**2, math.inf),
}


@dataclass(frozen=True)
class GroundTruth:
    """One annotated object; ``ignore`` marks crowd-style regions."""

    image_id: int
    box: Box
    category_id: int
    ignore: bool = False


class MatchLabel(enum.Enum):
    TP = "tp"
    FP = "fp"
    IGNORED = "ignored"


@dataclass(frozen=True)
class Counts:
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class EvalReport:
    """AP@iou_thr overall, interpolated PR data, size-bucket APs, and counts."""

    ap50: float
    recall_points: tuple[float, ...]
    precision_curve: tuple[float, ...]
    per_bucket: dict[str, float | None]
    counts: Counts


def _pred_order_key(det: Detection):
    b = det.box
    return (-det.score, det.source_view, b.x1, b.y1, b.x2, b.y2)


def _match_one_group(
    preds: Sequence[Detection],
    gts: Sequence[GroundTruth],
    iou_thr: float,
    area_range: tuple[float, float] | None = None,
) -> list[MatchLabel]:
    """Greedy matching for one (image, category) group.

    Returns labels aligned with the input prediction order. With an
    ``area_range``, ground truths outside the range count as ignore and
    unmatched predictions whose own area is outside the range are excluded
    from scoring (the COCO size-bucket convention).
    """
    gt_order = sorted(range(len(gts)), key=lambda i: gts[i].box.as_tuple())
    effective_ignore = []
    for i in gt_order:
        ig = gts[i].ignore
        if area_range is not None:
            lo, hi = area_range
            a = area(gts[i].box)
            ig = ig or not (lo <= a < hi)
        effective_ignore.append(ig)

    labels: list[MatchLabel | None] = [None] * len(preds)
    matched = [False] * len(gts)
    for pred_idx in sorted(range(len(preds)), key=lambda i: _pred_order_key(preds[i])):
        det = preds[pred_idx]
        best_real, best_real_iou = -1, 0.0
        best_ign_iou = 0.0
        for pos, gt_idx in enumerate(gt_order):
            if det.category_id != gts[gt_idx].category_id:
                continue
            candidate = iou(det.box, gts[gt_idx].box)
            if effective_ignore[pos]:
                best_ign_iou = max(best_ign_iou, candidate)
            elif not matched[gt_idx] and candidate > best_real_iou:
                best_real, best_real_iou = gt_idx, candidate
        if best_real >= 0 and best_real_iou >= iou_thr:
            matched[best_real] = True
            labels[pred_idx] = MatchLabel.TP
        elif best_ign_iou >= iou_thr:
            labels[pred_idx] = MatchLabel.IGNORED
        elif area_range is not None and not _in_range(area(det.box), area_range):
            labels[pred_idx] = MatchLabel.IGNORED
        else:
            labels[pred_idx] = MatchLabel.FP
    return labels  # type: ignore[return-value]


def _in_range(a: float, rng: tuple[float, float]) -> bool:
    lo, hi = rng
    return lo <= a < hi


def match_detections(
    preds: Sequence[Detection],
    gts: Sequence[GroundTruth],
    iou_thr: float,
) -> list[MatchLabel]:
    """TP/FP/IGNORED labels for one image and one category, aligned with preds."""
    if not (0.0 < iou_thr <= 1.0):
        raise ValidationError(f"iou_thr must be in (0, 1], got {iou_thr}")
    return _match_one_group(preds, gts, iou_thr)


@dataclass(frozen=True)
class ScoredLabel:
    """A labeled prediction carrying everything the dataset-level sort needs."""

    score: float
    label: MatchLabel
    image_id: int
    source_view: int
    box_key: tuple[float, float, float, float]


def _global_sort(records: Iterable[ScoredLabel]) -> list[ScoredLabel]:
    return sorted(
        records,
        key=lambda r: (-r.score, r.image_id, r.source_view, *r.box_key),
    )


def _pr_curve(records: Sequence[ScoredLabel], n_gt: int) -> np.ndarray:
    """Interpolated precision sampled at the 101 recall points."""
    scored = [r for r in _global_sort(records) if r.label is not MatchLabel.IGNORED]
    if not scored:
        return np.zeros(N_RECALL_POINTS)
    tp = np.cumsum([1 if r.label is MatchLabel.TP else 0 for r in scored])
    fp = np.cumsum([1 if r.label is MatchLabel.FP else 0 for r in scored])
    recall = tp / n_gt
    precision = tp / np.maximum(tp + fp, 1)
    # Monotone envelope from the right: max precision at any recall >= r.
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, np.asarray(RECALL_POINTS), side="left")
    curve = np.zeros(N_RECALL_POINTS)
    valid = idx < len(envelope)
    curve[valid] = envelope[idx[valid]]
    return curve


def average_precision(records: Sequence[ScoredLabel], n_gt: int) -> float:
    """101-point interpolated AP over dataset-wide scored labels."""
    if n_gt < 1:
        raise UndefinedMetricError("average precision undefined with zero ground truths")
    return float(_pr_curve(records, n_gt).mean())


def _group_key(image_id: int, category_id: int) -> tuple[int, int]:
    return (image_id, category_id)


def evaluate(
    preds: Sequence[tuple[int, Detection]],
    gts: Sequence[GroundTruth],
    iou_thr: float = 0.5,
) -> EvalReport:
    """Dataset-level evaluation: AP per category averaged over categories.

    ``preds`` pairs each detection with its image id. Size-bucket APs follow
    the COCO area convention (small < 32^2, medium < 96^2, large otherwise)
    and are absent (None) when a bucket contains no ground truth.
    """
    if not (0.0 < iou_thr <= 1.0):
        raise ValidationError(f"iou_thr must be in (0, 1], got {iou_thr}")
    if not gts:
        raise ValidationError("cannot evaluate against an empty ground-truth set")

    pred_groups: dict[tuple[int, int], list[Detection]] = {}
    for image_id, det in preds:
        pred_groups.setdefault(_group_key(image_id, det.category_id), []).append(det)
    gt_groups: dict[tuple[int, int], list[GroundTruth]] = {}
    for gt in gts:
        gt_groups.setdefault(_group_key(gt.image_id, gt.category_id), []).append(gt)

    categories = sorted({gt.category_id for gt in gts})
    image_ids = sorted(
        {gt.image_id for gt in gts} | {image_id for image_id, _ in preds}
    )

    def run(area_range: tuple[float, float] | None):
        """Per-category (AP, curve) over the whole dataset for one area range."""
        per_cat: dict[int, tuple[float, np.ndarray]] = {}
        total = Counts(0, 0, 0)
        tp_n = fp_n = gt_n = 0
        for category_id in categories:
            records: list[ScoredLabel] = []
            n_gt = 0
            for image_id in image_ids:
                key = _group_key(image_id, category_id)
                group_preds = pred_groups.get(key, [])
                group_gts = gt_groups.get(key, [])
                labels = _match_one_group(group_preds, group_gts, iou_thr, area_range)
                for det, label in zip(group_preds, labels):
                    records.append(
                        ScoredLabel(
                            score=det.score,
                            label=label,
                            image_id=image_id,
                            source_view=det.source_view,
                            box_key=det.box.as_tuple(),
                        )
                    )
                for gt in group_gts:
                    ig = gt.ignore
                    if area_range is not None:
                        ig = ig or not _in_range(area(gt.box), area_range)
                    if not ig:
                        n_gt += 1
            if n_gt == 0:
                continue
            curve = _pr_curve(records, n_gt)
            per_cat[category_id] = (float(curve.mean()), curve)
            tp_cat = sum(1 for r in records if r.label is MatchLabel.TP)
            fp_cat = sum(1 for r in records if r.label is MatchLabel.FP)
            tp_n += tp_cat
            fp_n += fp_cat
            gt_n += n_gt
        total = Counts(tp=tp_n, fp=fp_n, fn=gt_n - tp_n)
        return per_cat, total

    overall, counts = run(None)
    if not overall:
        raise UndefinedMetricError("no category has scorable (non-ignore) ground truth")
    ap50 = float(np.mean([ap for ap, _ in overall.values()]))
    mean_curve = np.mean(np.stack([curve for _, curve in overall.values()]), axis=0)

    per_bucket: dict[str, float | None] = {}
    for bucket, rng in SIZE_BUCKETS.items():
        bucket_cats, _ = run(rng)
        if bucket_cats:
            per_bucket[bucket] = float(np.mean([ap for ap, _ in bucket_cats.values()]))
        else:
            per_bucket[bucket] = None

    return EvalReport(
        ap50=ap50,
        recall_points=RECALL_POINTS,
        precision_curve=tuple(float(p) for p in mean_curve),
        per_bucket=per_bucket,
        counts=counts,
    )
