"""Orchestration shared by the CLI: file-level fusion, evaluation, and the
synthetic strategy benchmark.

Images are independent work units; per-image stages run in a thread pool of
configurable size and results are reduced in image-id order, so output files
are byte-identical whatever the thread count.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence, TypeVar

from .coco_io import (
    Category,
    Dataset,
    DetectionRecords,
    load_detections,
    save_dataset,
    save_detections,
    write_json,
)
from .errors import ValidationError
from .evaluation import EvalReport, evaluate
from .fusion import Detection, FusedDetection, FusionConfig, wbf
from .geometry import ImageDims
from .report import (
    StrategyResult,
    plot_pr_curves,
    plot_strategy_ap,
    write_eval_report,
    write_strategy_csv,
)
from .synth import SYNTH_CATEGORY_ID, SynthConfig, SyntheticDetector, generate_dataset
from .tta import ViewPlan, ViewSpec, make_view_plan, view_to_original

T = TypeVar("T")
U = TypeVar("U")


def parallel_map(fn: Callable[[T], U], items: Sequence[T], threads: int) -> list[U]:
    """Order-preserving map over independent items; deterministic by design."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


@dataclass
class FuseStats:
    boxes_in: int = 0
    boxes_out: int = 0
    dropped_in_padding: int = 0


def fuse_detection_files(
    dataset: Dataset,
    inputs: Sequence[DetectionRecords],
    cfg: FusionConfig,
    threads: int = 1,
) -> tuple[list[tuple[int, Detection]], FuseStats]:
    """Merge one detection file per view/source into a single original-frame set.

    Each input is one source: view-frame inputs are mapped into original
    coordinates first (detections entirely inside the letterbox padding are
    dropped and counted), then wbf runs per image with n_views = number of
    inputs. Unknown image ids are a hard error listing the offenders.
    """
    dims_by_id = dataset.dims_by_id()
    stats = FuseStats()

    unknown: set[int] = set()
    for records in inputs:
        for image_id, _ in records.items:
            if image_id not in dims_by_id:
                unknown.add(image_id)
    if unknown:
        raise ValidationError(
            "detections reference unknown image ids: "
            + ", ".join(str(i) for i in sorted(unknown))
        )

    per_image: dict[int, list[Detection]] = {}
    for source_idx, records in enumerate(inputs):
        if records.frame == "view" and records.view is None:
            raise ValidationError(f"input {source_idx}: frame='view' but no view header")
        for image_id, det in records.items:
            stats.boxes_in += 1
            det = replace(det, source_view=source_idx)
            if records.frame == "view":
                mapped = view_to_original(det, records.view, dims_by_id[image_id])
                if mapped is None:
                    stats.dropped_in_padding += 1
                    continue
                det = mapped
            per_image.setdefault(image_id, []).append(det)

    image_ids = sorted(per_image)
    n_views = len(inputs)

    def fuse_one(image_id: int) -> list[tuple[int, Detection]]:
        fused = wbf(per_image[image_id], n_views=n_views, cfg=cfg)
        return [
            (image_id, Detection(box=f.box, score=f.score, category_id=f.category_id))
            for f in fused
        ]

    merged: list[tuple[int, Detection]] = []
    for chunk in parallel_map(fuse_one, image_ids, threads):
        merged.extend(chunk)
    stats.boxes_out = len(merged)
    return merged, stats


# ---------------------------------------------------------------------------
# Synthetic strategy benchmark
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Strategy:
    """A named view plan plus the flip switch used by the comparison table."""

    name: str
    sizes: tuple[int, ...]
    hflip: bool = False

    def plan(self) -> ViewPlan:
        return make_view_plan(self.sizes, hflip=self.hflip)


BUILTIN_STRATEGIES: dict[str, Strategy] = {
    s.name: s
    for s in (
        Strategy("single-1280", (1280,)),
        Strategy("single-2560", (2560,)),
        Strategy("single-3200", (3200,)),
        Strategy("multiscale", (3200, 3360, 3520)),
        Strategy("multiscale+flip", (3200, 3360, 3520), hflip=True),
    )
}

DEFAULT_STRATEGY_NAMES = tuple(BUILTIN_STRATEGIES)


def resolve_strategies(
    names: Sequence[str], extra: dict[str, Strategy] | None = None
) -> list[Strategy]:
    table = dict(BUILTIN_STRATEGIES)
    if extra:
        table.update(extra)
    missing = [n for n in names if n not in table]
    if missing:
        raise ValidationError(
            f"unknown strategies: {', '.join(missing)}; known: {', '.join(sorted(table))}"
        )
    return [table[n] for n in names]


def _view_file_name(view: ViewSpec) -> str:
    return f"view_{view.label()}.jsonl"


@dataclass
class BenchOutput:
    rows: list[StrategyResult]
    out_dir: Path


def run_synth_bench(
    synth_cfg: SynthConfig,
    fusion_cfg: FusionConfig,
    strategies: Sequence[Strategy],
    out_dir: str | Path,
    iou_thr: float = 0.5,
    threads: int = 1,
    log: Callable[[str], None] = lambda s: None,
) -> BenchOutput:
    """Generate a dataset, run every strategy end to end, and persist all stages.

    Per strategy: synthesize per-view detection files, read them back, fuse
    (in both confidence modes), evaluate, and record the row. All intermediate
    files live under ``out_dir`` for audit. Everything written is independent
    of thread count and wall clock.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    images, gts = generate_dataset(synth_cfg)
    dataset = Dataset(
        images=images,
        annotations=gts,
        categories=[Category(id=SYNTH_CATEGORY_ID, name="object")],
    )
    dataset_path = out_dir / "dataset.json"
    save_dataset(dataset, dataset_path)
    log(f"dataset: {len(images)} images, {len(gts)} objects -> {dataset_path}")

    detector = SyntheticDetector(gts, synth_cfg.detector_noise, synth_cfg.rng_seed)

    rows: list[StrategyResult] = []
    curves: list[tuple[str, EvalReport]] = []
    for strategy in strategies:
        t0 = time.perf_counter()
        sdir = out_dir / "strategies" / strategy.name
        plan = strategy.plan()

        view_files: list[Path] = []
        for view in plan:
            def detect_one(image):
                return [
                    (image.image_id, det) for det in detector.detect(image, view)
                ]

            items: list[tuple[int, Detection]] = []
            for chunk in parallel_map(detect_one, images, threads):
                items.extend(chunk)
            path = sdir / "views" / _view_file_name(view)
            save_detections(DetectionRecords(items=items, frame="view", view=view), path)
            view_files.append(path)

        inputs = [load_detections(p) for p in view_files]
        report_by_mode: dict[str, EvalReport] = {}
        for mode, suffix in (("scale_by_views", ""), ("none", "_conf_none")):
            cfg = replace(fusion_cfg, conf_mode=mode)
            merged, _stats = fuse_detection_files(dataset, inputs, cfg, threads=threads)
            save_detections(
                DetectionRecords(items=merged, frame="original"),
                sdir / f"fused{suffix}.jsonl",
            )
            report = evaluate(merged, gts, iou_thr=iou_thr)
            write_eval_report(report, iou_thr, sdir / f"report{suffix}.json")
            report_by_mode[mode] = report

        main = report_by_mode["scale_by_views"]
        elapsed = time.perf_counter() - t0
        rows.append(
            StrategyResult(
                name=strategy.name,
                n_views=len(plan),
                ap50=main.ap50,
                ap50_conf_none=report_by_mode["none"].ap50,
                ap_small=main.per_bucket.get("small"),
                tp=main.counts.tp,
                fp=main.counts.fp,
                fn=main.counts.fn,
                runtime_s=elapsed,
            )
        )
        curves.append((strategy.name, main))
        log(f"strategy {strategy.name}: AP@{iou_thr:.2f} = {main.ap50:.4f} ({elapsed:.2f}s)")

    write_strategy_csv(rows, out_dir / "results.csv")
    plot_strategy_ap(rows, out_dir / "ap_by_strategy.png")
    plot_pr_curves(curves, out_dir / "pr_curves.png", iou_thr=iou_thr)

    # Echoed for reproducibility; deliberately excludes output paths, thread
    # count, and timing so the file is identical across equivalent runs.
    write_json(
        {
            "schema_version": 1,
            "type": "effective_config",
            "synth": {
                "n_images": synth_cfg.n_images,
                "image_size": [synth_cfg.image_size.width, synth_cfg.image_size.height],
                "objects_per_image": list(synth_cfg.objects_per_image),
                "object_size_px": list(synth_cfg.object_size_px),
                "rng_seed": synth_cfg.rng_seed,
                "max_overlap_iou": synth_cfg.max_overlap_iou,
                "noise": {
                    "miss_rate_base": synth_cfg.detector_noise.miss_rate_base,
                    "miss_rate_resolution_exponent": synth_cfg.detector_noise.miss_rate_resolution_exponent,
                    "ref_size": synth_cfg.detector_noise.ref_size,
                    "jitter_px_at_ref": synth_cfg.detector_noise.jitter_px_at_ref,
                    "fp_rate": synth_cfg.detector_noise.fp_rate,
                    "view_noise_correlation": synth_cfg.detector_noise.view_noise_correlation,
                },
            },
            "fusion": {
                "iou_thr": fusion_cfg.iou_thr,
                "skip_box_thr": fusion_cfg.skip_box_thr,
                "view_weights": list(fusion_cfg.view_weights),
                "conf_mode": fusion_cfg.conf_mode,
            },
            "eval_iou_thr": iou_thr,
            "strategies": [
                {"name": s.name, "sizes": list(s.sizes), "hflip": s.hflip}
                for s in strategies
            ],
        },
        out_dir / "effective_config.json",
    )
    return BenchOutput(rows=rows, out_dir=out_dir)
