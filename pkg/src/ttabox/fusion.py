"""Merging detection lists over one image: weighted boxes fusion plus NMS baselines.

Weighted boxes fusion averages the boxes of a cluster instead of keeping a
single winner, which is what makes multi-view ensembles pay off: each member
contributes its coordinates weighted by its (view-weighted) confidence.
NMS and Gaussian soft-NMS are provided as baselines for comparison tables.

All three operations are deterministic: equal scores are broken by the total
order (source_view, x1, y1, x2, y2), so shuffling the input never changes
the output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

from .errors import ValidationError
from .geometry import Box, iou

ConfMode = Literal["none", "scale_by_views"]

CONF_MODES = ("none", "scale_by_views")


@dataclass(frozen=True)
class Detection:
    """One scored, class-labeled box; ``source_view`` is -1 when unknown."""

    box: Box
    score: float
    category_id: int
    source_view: int = -1

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise ValidationError(f"detection score must be in [0, 1], got {self.score}")


@dataclass(frozen=True)
class FusionConfig:
    """Tunable parameters of the fusion step.

    ``view_weights`` holds one positive weight per view; empty means all 1.0.
    ``conf_mode`` controls post-fusion confidence rescaling: ``scale_by_views``
    multiplies each fused score by min(cluster_size, n_views)/n_views, which
    penalizes boxes seen in only a few views.
    """

    iou_thr: float = 0.55
    skip_box_thr: float = 0.0
    view_weights: tuple[float, ...] = ()
    conf_mode: ConfMode = "scale_by_views"

    def __post_init__(self):
        object.__setattr__(self, "view_weights", tuple(float(w) for w in self.view_weights))
        if not (0.0 < self.iou_thr < 1.0):
            raise ValidationError(f"iou_thr must be in (0, 1), got {self.iou_thr}")
        if not (0.0 <= self.skip_box_thr <= 1.0):
            raise ValidationError(f"skip_box_thr must be in [0, 1], got {self.skip_box_thr}")
        if any(w <= 0 for w in self.view_weights):
            raise ValidationError(f"view weights must all be positive, got {self.view_weights}")
        if self.conf_mode not in CONF_MODES:
            raise ValidationError(f"conf_mode must be one of {CONF_MODES}, got {self.conf_mode!r}")


@dataclass(frozen=True)
class FusedDetection:
    """Output of wbf: a merged box plus how many members formed it."""

    box: Box
    score: float
    category_id: int
    cluster_size: int


def _view_weight(det: Detection, weights: tuple[float, ...]) -> float:
    if not weights or det.source_view < 0:
        return 1.0
    if det.source_view >= len(weights):
        raise ValidationError(
            f"detection source_view={det.source_view} out of range for "
            f"{len(weights)} view weights"
        )
    return weights[det.source_view]


def _scan_key(det: Detection, eff_score: float):
    b = det.box
    return (-eff_score, det.source_view, b.x1, b.y1, b.x2, b.y2)


@dataclass
class _Cluster:
    members: list[Detection] = field(default_factory=list)
    eff_scores: list[float] = field(default_factory=list)
    weights: list[float] = field(default_factory=list)
    fused_box: Box | None = None

    def add(self, det: Detection, eff_score: float, weight: float) -> None:
        self.members.append(det)
        self.eff_scores.append(eff_score)
        self.weights.append(weight)
        self.fused_box = self._average_box()

    def _average_box(self) -> Box:
        total = sum(self.eff_scores)
        if total > 0.0:
            ws = self.eff_scores
            norm = total
        else:
            # All-zero effective scores (possible with skip_box_thr=0):
            # fall back to the plain mean so the fused box stays defined.
            ws = [1.0] * len(self.members)
            norm = float(len(self.members))
        x1 = sum(w * d.box.x1 for w, d in zip(ws, self.members)) / norm
        y1 = sum(w * d.box.y1 for w, d in zip(ws, self.members)) / norm
        x2 = sum(w * d.box.x2 for w, d in zip(ws, self.members)) / norm
        y2 = sum(w * d.box.y2 for w, d in zip(ws, self.members)) / norm
        return Box(x1, y1, x2, y2)

    def fused_score(self) -> float:
        # Weighted mean of member scores: sum(w*s) / sum(w).
        return sum(self.eff_scores) / sum(self.weights)


def wbf(
    detections: Sequence[Detection],
    n_views: int,
    cfg: FusionConfig,
) -> list[FusedDetection]:
    """Weighted boxes fusion of detections over one image.

    Per category, independently:

    1. drop detections whose raw score is below ``cfg.skip_box_thr``;
    2. sort the rest by effective score (score x view weight) descending,
       ties broken by (source_view, x1, y1, x2, y2) ascending;
    3. scan in order, matching each detection against the current fused box
       of every existing cluster; join the highest-IoU cluster if that IoU
       exceeds ``cfg.iou_thr`` (ties go to the earliest cluster), otherwise
       open a new cluster;
    4. on every addition recompute the cluster's fused box as the
       effective-score-weighted average of member corners and its score as
       the view-weighted mean of member scores;
    5. with ``conf_mode="scale_by_views"`` rescale each fused score by
       min(cluster_size, n_views) / n_views.

    The result is globally sorted by final score descending with the same
    deterministic tie-break, so the whole operation is invariant under input
    permutation.
    """
    if n_views < 1:
        raise ValidationError(f"n_views must be >= 1, got {n_views}")
    if cfg.view_weights and len(cfg.view_weights) != n_views:
        raise ValidationError(
            f"view_weights has {len(cfg.view_weights)} entries but n_views={n_views}"
        )

    by_category: dict[int, list[Detection]] = {}
    for det in detections:
        by_category.setdefault(det.category_id, []).append(det)

    fused: list[FusedDetection] = []
    for category_id in sorted(by_category):
        kept = [d for d in by_category[category_id] if d.score >= cfg.skip_box_thr]
        entries = [(d, d.score * _view_weight(d, cfg.view_weights)) for d in kept]
        entries.sort(key=lambda e: _scan_key(e[0], e[1]))

        clusters: list[_Cluster] = []
        for det, eff in entries:
            best_i = -1
            best_iou = cfg.iou_thr
            for i, cluster in enumerate(clusters):
                candidate = iou(cluster.fused_box, det.box)
                if candidate > best_iou:
                    best_iou = candidate
                    best_i = i
            if best_i < 0:
                clusters.append(_Cluster())
                best_i = len(clusters) - 1
            clusters[best_i].add(det, eff, _view_weight(det, cfg.view_weights))

        for cluster in clusters:
            score = cluster.fused_score()
            if cfg.conf_mode == "scale_by_views":
                score *= min(len(cluster.members), n_views) / n_views
            fused.append(
                FusedDetection(
                    box=cluster.fused_box,
                    score=score,
                    category_id=category_id,
                    cluster_size=len(cluster.members),
                )
            )

    fused.sort(key=lambda f: (-f.score, f.category_id, *f.box.as_tuple()))
    return fused


def nms(detections: Sequence[Detection], iou_thr: float) -> list[Detection]:
    """Greedy non-maximum suppression, per category, in emission order.

    Repeatedly emits the highest-score remaining detection and suppresses
    every same-category detection overlapping it with IoU > ``iou_thr``.
    """
    if not (0.0 < iou_thr < 1.0):
        raise ValidationError(f"iou_thr must be in (0, 1), got {iou_thr}")
    ordered = sorted(detections, key=lambda d: _scan_key(d, d.score))
    kept: list[Detection] = []
    suppressed = [False] * len(ordered)
    for i, det in enumerate(ordered):
        if suppressed[i]:
            continue
        kept.append(det)
        for j in range(i + 1, len(ordered)):
            other = ordered[j]
            if suppressed[j] or other.category_id != det.category_id:
                continue
            if iou(det.box, other.box) > iou_thr:
                suppressed[j] = True
    return kept


def soft_nms(detections: Sequence[Detection], sigma: float, score_floor: float) -> list[Detection]:
    """Gaussian soft-NMS: decay overlapping scores instead of removing boxes.

    Iteratively emits the max-score remaining detection, multiplies every
    remaining same-category score by exp(-iou^2 / sigma), and drops rescored
    detections that fall below ``score_floor``. Emitted detections carry
    their current (possibly already decayed) score.
    """
    if sigma <= 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    if not (0.0 <= score_floor < 1.0):
        raise ValidationError(f"score_floor must be in [0, 1), got {score_floor}")

    remaining: list[tuple[Detection, float]] = [(d, d.score) for d in detections]
    emitted: list[Detection] = []
    while remaining:
        remaining.sort(key=lambda e: _scan_key(e[0], e[1]))
        det, current = remaining.pop(0)
        emitted.append(replace(det, score=current))
        survivors: list[tuple[Detection, float]] = []
        for other, s in remaining:
            if other.category_id == det.category_id:
                s = s * math.exp(-(iou(det.box, other.box) ** 2) / sigma)
                if s < score_floor:
                    continue
            survivors.append((other, s))
        remaining = survivors
    return emitted
