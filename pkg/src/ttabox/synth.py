"""Synthetic desk-scale benchmark: scene generation and a resolution-aware noisy detector.

The detector's error statistics depend on the view resolution: miss rate and
coordinate jitter both shrink as target_size grows. Those scaling laws are
what make the benchmark honest; any accuracy gain from higher resolution or
from fusing views has to emerge from the noise model, nothing is hard-coded.

Randomness is keyed by ``SeedSequence([seed, image_id, salt, ...])`` so every
(image, view) pair is an independent, reproducible stream regardless of
execution order. Cross-view correlation is a Gaussian copula: per-object
latents are split into a shared component (drawn per image) and a
view-specific component, mixed as sqrt(rho)*shared + sqrt(1-rho)*independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import GenerationError, ValidationError
from .evaluation import GroundTruth
from .fusion import Detection
from .geometry import Box, ImageDims, clamp_to_image, iou
from .tta import ImageRecord, ViewSpec, original_to_view

# Salts separating the the per-purpose random streams.
_SALT_SCENE = 0
_SALT_SHARED = 1
_SALT_VIEW = 2

_PLACEMENT_RETRIES = 200

SYNTH_CATEGORY_ID = 1


@dataclass(frozen=True)
class ScoreModel:
    """Beta parameters for confidence draws: true hits high, clutter low."""

    tp_alpha: float = 7.0
    tp_beta: float = 2.0
    fp_alpha: float = 2.0
    fp_beta: float = 5.0

    def __post_init__(self):
        if min(self.tp_alpha, self.tp_beta, self.fp_alpha, self.fp_beta) <= 0:
            raise ValidationError("score model Beta parameters must be positive")


@dataclass(frozen=True)
class NoiseModel:
    """Resolution-dependent detector error statistics.

    miss_rate(view)  = miss_rate_base * (ref_size / target_size) ** exponent,
                       clamped into [0, 1]
    jitter_px(view)  = jitter_px_at_ref * ref_size / target_size
                       (standard deviation per box corner coordinate, in
                       original-image pixels)

    ``view_noise_correlation`` in [0, 1] couples per-object miss/jitter/score
    draws across views: 1 makes every view see identical luck, 0 makes views
    fully independent.
    """

    miss_rate_base: float = 0.3
    miss_rate_resolution_exponent: float = 1.2
    ref_size: int = 3200
    jitter_px_at_ref: float = 2.0
    fp_rate: float = 1.0
    fp_size_px: tuple[float, float] = (8.0, 40.0)
    score_model: ScoreModel = field(default_factory=ScoreModel)
    view_noise_correlation: float = 0.5

    def __post_init__(self):
        if not (0.0 <= self.miss_rate_base <= 1.0):
            raise ValidationError(f"miss_rate_base must be in [0, 1], got {self.miss_rate_base}")
        if self.jitter_px_at_ref < 0:
            raise ValidationError(f"jitter must be >= 0, got {self.jitter_px_at_ref}")
        if self.fp_rate < 0:
            raise ValidationError(f"fp_rate must be >= 0, got {self.fp_rate}")
        if not (0.0 <= self.view_noise_correlation <= 1.0):
            raise ValidationError(
                f"view_noise_correlation must be in [0, 1], got {self.view_noise_correlation}"
            )
        if self.ref_size < 1:
            raise ValidationError(f"ref_size must be >= 1, got {self.ref_size}")
        lo, hi = self.fp_size_px
        if lo <= 0 or hi < lo:
            raise ValidationError(f"bad fp_size_px range: {self.fp_size_px}")

    def miss_rate(self, target_size: int) -> float:
        raw = self.miss_rate_base * (self.ref_size / target_size) ** self.miss_rate_resolution_exponent
        return min(max(raw, 0.0), 1.0)

    def jitter_px(self, target_size: int) -> float:
        return self.jitter_px_at_ref * self.ref_size / target_size


@dataclass(frozen=True)
class SynthConfig:
    """Scene generator settings; a fixed seed reproduces everything bit for bit."""

    n_images: int = 200
    image_size: ImageDims = field(default_factory=lambda: ImageDims(1600, 1200))
    objects_per_image: tuple[int, int] = (1, 8)
    object_size_px: tuple[float, float] = (8.0, 40.0)
    rng_seed: int = 42
    detector_noise: NoiseModel = field(default_factory=NoiseModel)
    # Same-image objects are rejected while any pair overlaps more than this,
    # keeping per-object evaluation well-posed.
    max_overlap_iou: float = 0.3

    def __post_init__(self):
        if self.n_images < 1:
            raise ValidationError(f"n_images must be >= 1, got {self.n_images}")
        lo, hi = self.objects_per_image
        if lo < 0 or hi < lo:
            raise ValidationError(f"bad objects_per_image range: {self.objects_per_image}")
        slo, shi = self.object_size_px
        if slo <= 0 or shi < slo:
            raise ValidationError(f"bad object_size_px range: {self.object_size_px}")


def _image_rng(seed: int, image_id: int, salt: int, *extra: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, image_id, salt, *extra]))


def _view_key(view: ViewSpec) -> tuple[int, int, int]:
    return (view.target_size, int(view.hflip), int(view.vflip))


def _draw_size(rng: np.random.Generator, lo: float, hi: float) -> float:
    # u^2 biases the draw toward the small end of the range.
    return lo + (hi - lo) * rng.random() ** 2


def generate_dataset(cfg: SynthConfig) -> tuple[list[ImageRecord], list[GroundTruth]]:
    """Deterministically generate image records and ground-truth boxes."""
    images: list[ImageRecord] = []
    gts: list[GroundTruth] = []
    dims = cfg.image_size
    for i in range(cfg.n_images):
        image_id = i + 1
        rng = _image_rng(cfg.rng_seed, image_id, _SALT_SCENE)
        images.append(
            ImageRecord(
                image_id=image_id,
                dims=dims,
                file_name=f"synthetic_{image_id:06d}.png",
            )
        )
        lo, hi = cfg.objects_per_image
        n_objects = int(rng.integers(lo, hi + 1))
        placed: list[Box] = []
        for _ in range(n_objects):
            box = None
            for _attempt in range(_PLACEMENT_RETRIES):
                size = _draw_size(rng, *cfg.object_size_px)
                aspect = math.exp(rng.uniform(-math.log(1.5), math.log(1.5)))
                w = size * math.sqrt(aspect)
                h = size / math.sqrt(aspect)
                if w > dims.width or h > dims.height:
                    continue
                x1 = rng.uniform(0.0, dims.width - w)
                y1 = rng.uniform(0.0, dims.height - h)
                candidate = Box(x1, y1, x1 + w, y1 + h)
                if all(iou(candidate, other) <= cfg.max_overlap_iou for other in placed):
                    box = candidate
                    break
            if box is None:
                raise GenerationError(
                    f"could not place {n_objects} objects of size "
                    f"{cfg.object_size_px} in a {dims.width}x{dims.height} image "
                    f"after {_PLACEMENT_RETRIES} attempts (image {image_id})"
                )
            placed.append(box)
            gts.append(
                GroundTruth(
                    image_id=image_id,
                    box=box,
                    category_id=SYNTH_CATEGORY_ID,
                    ignore=False,
                )
            )
    return images, gts


def _beta_from_normal(z: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    """Map standard-normal latents through the Beta quantile (Gaussian copula)."""
    u = stats.norm.cdf(z)
    return stats.beta.ppf(u, alpha, beta)


def synthetic_detector(
    gts: list[GroundTruth],
    dims: ImageDims,
    view: ViewSpec,
    noise: NoiseModel,
    seed: int,
    image_id: int,
) -> list[Detection]:
    """Noisy detections for one image and one view, in view coordinates.

    Per ground truth: drop it with the view's miss rate, otherwise jitter its
    corners in the original frame, map into view coordinates, and attach a
    high-ish confidence. Poisson(fp_rate) spurious low-confidence boxes are
    added uniformly over the image. Deterministic given (seed, image_id, view).
    """
    rho = noise.view_noise_correlation
    shared = _image_rng(seed, image_id, _SALT_SHARED)
    per_view = _image_rng(seed, image_id, _SALT_VIEW, *_view_key(view))

    n = len(gts)
    z_miss_shared = shared.standard_normal(n)
    z_jitter_shared = shared.standard_normal((n, 4))
    z_score_shared = shared.standard_normal(n)
    z_miss_view = per_view.standard_normal(n)
    z_jitter_view = per_view.standard_normal((n, 4))
    z_score_view = per_view.standard_normal(n)

    a = math.sqrt(rho)
    b = math.sqrt(1.0 - rho)
    z_miss = a * z_miss_shared + b * z_miss_view
    z_jitter = a * z_jitter_shared + b * z_jitter_view
    z_score = a * z_score_shared + b * z_score_view

    m = noise.miss_rate(view.target_size)
    if m <= 0.0:
        missed = np.zeros(n, dtype=bool)
    elif m >= 1.0:
        missed = np.ones(n, dtype=bool)
    else:
        missed = z_miss < stats.norm.ppf(m)

    sigma = noise.jitter_px(view.target_size)
    sm = noise.score_model
    tp_scores = _beta_from_normal(z_score, sm.tp_alpha, sm.tp_beta)

    detections: list[Detection] = []
    for i, gt in enumerate(gts):
        if missed[i]:
            continue
        gx1, gy1, gx2, gy2 = gt.box.as_tuple()
        j = sigma * z_jitter[i]
        x1, y1 = gx1 + j[0], gy1 + j[1]
        x2, y2 = gx2 + j[2], gy2 + j[3]
        jittered = Box(min(x1, x2), min(y1, y2), max(x1, x2), max(y1, y2))
        clipped = clamp_to_image(jittered, dims)
        if (clipped.x2 - clipped.x1) <= 0 or (clipped.y2 - clipped.y1) <= 0:
            continue
        detections.append(
            Detection(
                box=original_to_view(clipped, view, dims),
                score=float(tp_scores[i]),
                category_id=gt.category_id,
            )
        )

    n_fp = int(per_view.poisson(noise.fp_rate))
    for _ in range(n_fp):
        size = _draw_size(per_view, *noise.fp_size_px)
        w = min(size, dims.width)
        h = min(size, dims.height)
        x1 = per_view.uniform(0.0, dims.width - w)
        y1 = per_view.uniform(0.0, dims.height - h)
        fp_box = Box(x1, y1, x1 + w, y1 + h)
        score = float(per_view.beta(sm.fp_alpha, sm.fp_beta))
        detections.append(
            Detection(
                box=original_to_view(fp_box, view, dims),
                score=score,
                category_id=SYNTH_CATEGORY_ID,
            )
        )
    return detections


class SyntheticDetector:
    """DetectorAdapter producing synthetic_detector output for a generated dataset."""

    def __init__(self, gts: list[GroundTruth], noise: NoiseModel, seed: int):
        self._by_image: dict[int, list[GroundTruth]] = {}
        for gt in gts:
            self._by_image.setdefault(gt.image_id, []).append(gt)
        self._noise = noise
        self._seed = seed

    def detect(self, image: ImageRecord, view: ViewSpec) -> list[Detection]:
        return synthetic_detector(
            self._by_image.get(image.image_id, []),
            image.dims,
            view,
            self._noise,
            self._seed,
            image.image_id,
        )
