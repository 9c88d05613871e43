"""View planning, view<->original coordinate mapping, and the fused inference loop.

A *view* is one augmented inference configuration: a square target resolution
plus optional flips. Images are letterboxed into the view frame
(aspect-preserving resize, symmetric zero padding), the detector runs there,
and detections are mapped back into original-image coordinates before fusion.
The letterbox parameters are always recomputed from the image dims and the
target size, never trusted from the detector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

from .errors import DetectorError, ValidationError
from .fusion import Detection, FusedDetection, FusionConfig, wbf
from .geometry import Box, ImageDims, clamp_to_image, flip_h, flip_v

MIN_TARGET_SIZE = 32

DEFAULT_SIZES = (3200, 3360, 3520)


@dataclass(frozen=True)
class ViewSpec:
    """One augmented inference configuration: square resolution plus flips."""

    target_size: int
    hflip: bool = False
    vflip: bool = False

    def __post_init__(self):
        if self.target_size < MIN_TARGET_SIZE:
            raise ValidationError(
                f"target_size must be >= {MIN_TARGET_SIZE}, got {self.target_size}"
            )

    def label(self) -> str:
        suffix = ("_hflip" if self.hflip else "") + ("_vflip" if self.vflip else "")
        return f"{self.target_size}{suffix}"


@dataclass(frozen=True)
class ViewPlan:
    """Ordered, duplicate-free collection of views."""

    views: tuple[ViewSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "views", tuple(self.views))
        if not self.views:
            raise ValidationError("view plan must contain at least one view")
        seen = set()
        for v in self.views:
            if v in seen:
                raise ValidationError(f"duplicate view in plan: {v}")
            seen.add(v)

    def __len__(self) -> int:
        return len(self.views)

    def __iter__(self):
        return iter(self.views)


@dataclass(frozen=True)
class ImageRecord:
    """Dataset entry for one image; the pixels themselves are never loaded here."""

    image_id: int
    dims: ImageDims
    file_name: str = ""


class DetectorAdapter(Protocol):
    """Anything that produces per-view detections.

    ``detect`` must return detections in the coordinates of the
    ``target_size x target_size`` letterboxed view frame, with scores in
    [0, 1] and canonical boxes.
    """

    def detect(self, image: ImageRecord, view: ViewSpec) -> list[Detection]: ...


def make_view_plan(
    sizes: Sequence[int], hflip: bool = False, vflip: bool = False
) -> ViewPlan:
    """Build a plan from sizes, adding flipped variants after each unflipped view."""
    views: list[ViewSpec] = []
    for size in sizes:
        views.append(ViewSpec(size))
        if hflip:
            views.append(ViewSpec(size, hflip=True))
        if vflip:
            views.append(ViewSpec(size, vflip=True))
        if hflip and vflip:
            views.append(ViewSpec(size, hflip=True, vflip=True))
    return ViewPlan(tuple(views))


def default_view_plan() -> ViewPlan:
    """The stock 6-view plan: sizes 3200/3360/3520, each with and without hflip."""
    return make_view_plan(DEFAULT_SIZES, hflip=True)


@dataclass(frozen=True)
class LetterboxParams:
    """Aspect-preserving resize into a square frame with symmetric padding."""

    scale: float
    pad_x: float
    pad_y: float


def letterbox_params(dims: ImageDims, target_size: int) -> LetterboxParams:
    scale = min(target_size / dims.width, target_size / dims.height)
    pad_x = (target_size - dims.width * scale) / 2.0
    pad_y = (target_size - dims.height * scale) / 2.0
    return LetterboxParams(scale=scale, pad_x=pad_x, pad_y=pad_y)


def original_to_view(box: Box, view: ViewSpec, dims: ImageDims) -> Box:
    """Forward map: original-image coordinates into the letterboxed view frame."""
    p = letterbox_params(dims, view.target_size)
    mapped = Box(
        box.x1 * p.scale + p.pad_x,
        box.y1 * p.scale + p.pad_y,
        box.x2 * p.scale + p.pad_x,
        box.y2 * p.scale + p.pad_y,
    )
    frame = ImageDims(view.target_size, view.target_size)
    if view.hflip:
        mapped = flip_h(mapped, frame)
    if view.vflip:
        mapped = flip_v(mapped, frame)
    return mapped


def view_to_original(det: Detection, view: ViewSpec, dims: ImageDims) -> Detection | None:
    """Inverse map: undo flips, padding, and scale; clamp into the image.

    Returns None for detections lying entirely inside the letterbox padding,
    since they correspond to no original-image evidence.
    """
    p = letterbox_params(dims, view.target_size)
    frame = ImageDims(view.target_size, view.target_size)
    box = det.box
    if view.vflip:
        box = flip_v(box, frame)
    if view.hflip:
        box = flip_h(box, frame)
    x1 = (box.x1 - p.pad_x) / p.scale
    y1 = (box.y1 - p.pad_y) / p.scale
    x2 = (box.x2 - p.pad_x) / p.scale
    y2 = (box.y2 - p.pad_y) / p.scale
    if x2 <= 0 or x1 >= dims.width or y2 <= 0 or y1 >= dims.height:
        return None
    mapped = clamp_to_image(Box(x1, y1, x2, y2), dims)
    return Detection(
        box=mapped,
        score=det.score,
        category_id=det.category_id,
        source_view=det.source_view,
    )


@dataclass
class TtaStats:
    """Counters accumulated by run_tta; one instance can span many images."""

    views_run: int = 0
    detections_in: int = 0
    dropped_in_padding: int = 0
    failed_views: list[tuple[int, ViewSpec]] = field(default_factory=list)


def run_tta(
    image: ImageRecord,
    plan: ViewPlan,
    detector: DetectorAdapter,
    cfg: FusionConfig,
    *,
    lenient: bool = False,
    stats: TtaStats | None = None,
) -> list[FusedDetection]:
    """Run every view of the plan through the detector and fuse the results.

    Per view: call the detector, map detections back into the original frame
    (tagging their source view), then merge everything with wbf using
    n_views = number of views that ran. A detector failure aborts the image
    unless ``lenient`` is set, in which case the failed view is skipped and
    the remaining views are fused with correspondingly reduced n_views.
    """
    per_view: list[tuple[int, list[Detection]]] = []
    failed: list[int] = []
    for idx, view in enumerate(plan):
        try:
            raw = detector.detect(image, view)
        except Exception as exc:
            if lenient:
                failed.append(idx)
                if stats is not None:
                    stats.failed_views.append((image.image_id, view))
                continue
            raise DetectorError(
                f"detector failed on image {image.image_id}, view {view.label()}: {exc}",
                image_id=image.image_id,
                view=view,
            ) from exc
        per_view.append((idx, raw))

    if not per_view:
        if failed:
            raise DetectorError(
                f"detector failed on every view of image {image.image_id}",
                image_id=image.image_id,
                view=plan.views[failed[0]],
            )
        return []

    # Successful views are re-indexed 0..k-1 so view weights stay aligned
    # when lenient mode dropped some of the plan.
    index_map = {plan_idx: new_idx for new_idx, (plan_idx, _) in enumerate(per_view)}
    weights = cfg.view_weights
    if weights and failed:
        weights = tuple(weights[i] for i, _ in per_view)
        cfg = FusionConfig(
            iou_thr=cfg.iou_thr,
            skip_box_thr=cfg.skip_box_thr,
            view_weights=weights,
            conf_mode=cfg.conf_mode,
        )

    mapped: list[Detection] = []
    for plan_idx, raw in per_view:
        if stats is not None:
            stats.views_run += 1
            stats.detections_in += len(raw)
        for det in raw:
            back = view_to_original(det, plan.views[plan_idx], image.dims)
            if back is None:
                if stats is not None:
                    stats.dropped_in_padding += 1
                continue
            mapped.append(
                Detection(
                    box=back.box,
                    score=back.score,
                    category_id=back.category_id,
                    source_view=index_map[plan_idx],
                )
            )

    return wbf(mapped, n_views=len(per_view), cfg=cfg)
