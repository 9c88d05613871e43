"""Axis-aligned box arithmetic and the transforms induced by resizing and flipping.

All boxes live in absolute pixel coordinates with a top-left origin
(x grows right, y grows down) and are canonical: x1 <= x2, y1 <= y2.
Coordinates are real-valued; fused boxes routinely carry sub-pixel values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ValidationError


@dataclass(frozen=True)
class Box:
    """Canonical axis-aligned rectangle [x1, y1, x2, y2].

    Constructors reject non-canonical corners instead of swapping them:
    a swapped pair almost always means an upstream transform bug.
    """

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        for name in ("x1", "y1", "x2", "y2"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValidationError(f"box coordinate {name}={v!r} is not a finite number")
        if self.x2 < self.x1:
            raise ValidationError(f"box not canonical: x2={self.x2} < x1={self.x1}")
        if self.y2 < self.y1:
            raise ValidationError(f"box not canonical: y2={self.y2} < y1={self.y1}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)


@dataclass(frozen=True)
class ImageDims:
    """Image size in whole pixels."""

    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValidationError(f"image dims must be >= 1, got {self.width}x{self.height}")


def area(b: Box) -> float:
    """Area of a canonical box; zero for degenerate (line or point) boxes."""
    return (b.x2 - b.x1) * (b.y2 - b.y1)


def iou(a: Box, b: Box) -> float:
    """Intersection over union in [0, 1].

    Defined as 0 when the union has zero area (two degenerate boxes), so the
    function is total.
    """
    ix1 = max(a.x1, b.x1)
    iy1 = max(a.y1, b.y1)
    ix2 = min(a.x2, b.x2)
    iy2 = min(a.y2, b.y2)
    iw = ix2 - ix1
    ih = iy2 - iy1
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = area(a) + area(b) - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def flip_h(b: Box, dims: ImageDims) -> Box:
    """Mirror a box across the vertical axis of an image of the given width."""
    return Box(dims.width - b.x2, b.y1, dims.width - b.x1, b.y2)


def flip_v(b: Box, dims: ImageDims) -> Box:
    """Mirror a box across the horizontal axis of an image of the given height."""
    return Box(b.x1, dims.height - b.y2, b.x2, dims.height - b.y1)


def scale(b: Box, sx: float, sy: float) -> Box:
    """Scale a box about the origin by positive per-axis factors."""
    if sx <= 0 or sy <= 0:
        raise ValidationError(f"scale factors must be positive, got sx={sx}, sy={sy}")
    return Box(b.x1 * sx, b.y1 * sy, b.x2 * sx, b.y2 * sy)


def clamp_to_image(b: Box, dims: ImageDims) -> Box:
    """Clip a box into [0, width] x [0, height].

    A box entirely outside the image collapses to a zero-area box on the
    nearest border.
    """
    w = float(dims.width)
    h = float(dims.height)
    return Box(
        min(max(b.x1, 0.0), w),
        min(max(b.y1, 0.0), h),
        min(max(b.x2, 0.0), w),
        min(max(b.y2, 0.0), h),
    )
