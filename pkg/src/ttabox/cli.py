"""Command-line interface: ``plan``, ``fuse``, ``eval``, and ``synth-bench``.

Exit codes: 0 success, 1 validation/usage error, 2 I/O error, 3 detector
adapter failure. The default worker count comes from the TTABOX_THREADS
environment variable (1 when unset); --threads overrides it. Thread count
never changes output file contents, only runtime.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .coco_io import (
    DetectionRecords,
    load_dataset,
    load_detections,
    load_plan,
    save_detections,
    save_plan,
    plan_to_doc,
    write_json,
)
from .errors import (
    DetectorError,
    FileFormatError,
    GenerationError,
    UndefinedMetricError,
    ValidationError,
)
from .evaluation import evaluate
from .fusion import CONF_MODES, FusionConfig
from .geometry import ImageDims
from .pipeline import (
    DEFAULT_STRATEGY_NAMES,
    Strategy,
    fuse_detection_files,
    resolve_strategies,
    run_synth_bench,
)
from .report import format_eval_table, format_strategy_table, plot_pr_curves, write_eval_report
from .synth import NoiseModel, ScoreModel, SynthConfig
from .tta import make_view_plan

THREADS_ENV = "TTABOX_THREADS"


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 on usage errors, matching the validation exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _str_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ttabox", description=__doc__)
    parser.add_argument("--version", action="version", version=f"ttabox {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_plan = sub.add_parser("plan", help="emit a validated view-plan document")
    p_plan.add_argument("--sizes", type=_int_list, default=[3200, 3360, 3520],
                        help="comma-separated square resolutions (default 3200,3360,3520)")
    p_plan.add_argument("--flip", action=argparse.BooleanOptionalAction, default=True,
                        help="include horizontally flipped views (default on)")
    p_plan.add_argument("--vflip", action=argparse.BooleanOptionalAction, default=False,
                        help="include vertically flipped views (default off)")
    p_plan.add_argument("-o", "--out", type=Path, default=None,
                        help="output path (default: print to stdout)")

    p_fuse = sub.add_parser("fuse", help="merge per-view detection files into one set")
    p_fuse.add_argument("inputs", nargs="*", type=Path,
                        help="detection files, one per view/source")
    p_fuse.add_argument("-d", "--dataset", type=Path, required=True,
                        help="COCO-style dataset file (for image dims)")
    p_fuse.add_argument("-o", "--out", type=Path, required=True,
                        help="merged detection file to write")
    p_fuse.add_argument("--iou-thr", type=float, default=0.55,
                        help="cluster-matching IoU threshold (default 0.55)")
    p_fuse.add_argument("--skip-box-thr", type=float, default=0.0,
                        help="pre-fusion score floor (default 0)")
    p_fuse.add_argument("--conf-mode", choices=CONF_MODES, default="scale_by_views",
                        help="post-fusion confidence rescaling (default scale_by_views)")
    p_fuse.add_argument("--weights", type=_float_list, default=[],
                        help="comma-separated per-input weights (default all 1)")
    p_fuse.add_argument("--threads", type=int, default=None,
                        help=f"worker threads (default ${THREADS_ENV} or 1)")

    p_eval = sub.add_parser("eval", help="AP@IoU evaluation of a detection file")
    p_eval.add_argument("detections", type=Path, help="original-frame detection file")
    p_eval.add_argument("-d", "--dataset", type=Path, required=True,
                        help="COCO-style dataset file with ground truth")
    p_eval.add_argument("--iou-thr", type=float, default=0.5,
                        help="matching IoU threshold (default 0.5)")
    p_eval.add_argument("--out-dir", type=Path, default=None,
                        help="write report.json and pr_curve.png here")

    p_bench = sub.add_parser(
        "synth-bench",
        help="run the synthetic strategy comparison (generate, detect, fuse, eval)",
    )
    p_bench.add_argument("-o", "--out", type=Path, required=True,
                         help="output directory for all artifacts")
    p_bench.add_argument("--config", type=Path, default=None,
                         help="JSON config file (flags override it)")
    p_bench.add_argument("--seed", type=int, default=None, help="RNG seed (default 42)")
    p_bench.add_argument("--images", type=int, default=None,
                         help="number of synthetic images (default 200)")
    p_bench.add_argument("--image-width", type=int, default=None, help="default 1600")
    p_bench.add_argument("--image-height", type=int, default=None, help="default 1200")
    p_bench.add_argument("--objects", type=_int_list, default=None, metavar="LO,HI",
                         help="objects per image range (default 1,8)")
    p_bench.add_argument("--object-size", type=_float_list, default=None, metavar="LO,HI",
                         help="object side-length range in px (default 8,40)")
    p_bench.add_argument("--strategies", type=_str_list, default=None,
                         help="comma-separated strategy names (default: all built-ins)")
    p_bench.add_argument("--iou-thr", type=float, default=None,
                         help="evaluation IoU threshold (default 0.5)")
    p_bench.add_argument("--fusion-iou-thr", type=float, default=None,
                         help="wbf cluster threshold (default 0.55)")
    p_bench.add_argument("--skip-box-thr", type=float, default=None,
                         help="wbf score floor (default 0)")
    p_bench.add_argument("--miss-rate-base", type=float, default=None,
                         help="miss probability at the reference resolution")
    p_bench.add_argument("--miss-exponent", type=float, default=None,
                         help="resolution exponent of the miss rate")
    p_bench.add_argument("--jitter-px", type=float, default=None,
                         help="corner jitter stddev at the reference resolution")
    p_bench.add_argument("--fp-rate", type=float, default=None,
                         help="expected false positives per image per view")
    p_bench.add_argument("--view-correlation", type=float, default=None,
                         help="cross-view noise correlation in [0,1]")
    p_bench.add_argument("--ref-size", type=int, default=None,
                         help="reference resolution of the noise model")
    p_bench.add_argument("--threads", type=int, default=None,
                         help=f"worker threads (default ${THREADS_ENV} or 1)")
    return parser


def _threads(value: int | None) -> int:
    return max(1, value) if value is not None else _default_threads()


def cmd_plan(args) -> int:
    plan = make_view_plan(args.sizes, hflip=args.flip, vflip=args.vflip)
    if args.out is None:
        print(json.dumps(plan_to_doc(plan), indent=1, sort_keys=True))
    else:
        save_plan(plan, args.out)
        print(f"wrote {len(plan)} views to {args.out}")
    return 0


def cmd_fuse(args) -> int:
    if not args.inputs:
        raise ValidationError("fuse needs at least one input detection file")
    dataset = load_dataset(args.dataset)
    inputs = [load_detections(p) for p in args.inputs]
    cfg = FusionConfig(
        iou_thr=args.iou_thr,
        skip_box_thr=args.skip_box_thr,
        view_weights=tuple(args.weights),
        conf_mode=args.conf_mode,
    )
    if cfg.view_weights and len(cfg.view_weights) != len(inputs):
        raise ValidationError(
            f"--weights has {len(cfg.view_weights)} entries for {len(inputs)} inputs"
        )
    merged, stats = fuse_detection_files(dataset, inputs, cfg, threads=_threads(args.threads))
    save_detections(DetectionRecords(items=merged, frame="original"), args.out)
    print(
        f"fused {stats.boxes_in} boxes from {len(inputs)} inputs into "
        f"{stats.boxes_out} ({stats.dropped_in_padding} dropped in padding)"
    )
    print(f"wrote {args.out}")
    return 0


def cmd_eval(args) -> int:
    records = load_detections(args.detections)
    if records.frame != "original":
        raise ValidationError(
            f"{args.detections} holds view-frame detections; run `ttabox fuse` first"
        )
    dataset = load_dataset(args.dataset)
    report = evaluate(records.items, dataset.annotations, iou_thr=args.iou_thr)
    print(format_eval_table(report, args.iou_thr))
    if args.out_dir is not None:
        out = Path(args.out_dir)
        write_eval_report(report, args.iou_thr, out / "report.json")
        plot_pr_curves([("detections", report)], out / "pr_curve.png", iou_thr=args.iou_thr)
        print(f"wrote {out / 'report.json'} and {out / 'pr_curve.png'}")
    return 0


def _load_config_file(path: Path | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FileFormatError(f"{path}: config must be a JSON object")
    return doc


def _pick(cli_value, cfg: dict[str, Any], key: str, default):
    """CLI flag > config file > built-in default."""
    if cli_value is not None:
        return cli_value
    if key in cfg:
        return cfg[key]
    return default


def cmd_synth_bench(args) -> int:
    cfg_doc = _load_config_file(args.config)
    noise_doc = cfg_doc.get("noise", {})
    noise = NoiseModel(
        miss_rate_base=_pick(args.miss_rate_base, noise_doc, "miss_rate_base", 0.3),
        miss_rate_resolution_exponent=_pick(
            args.miss_exponent, noise_doc, "miss_rate_resolution_exponent", 1.2
        ),
        ref_size=int(_pick(args.ref_size, noise_doc, "ref_size", 3200)),
        jitter_px_at_ref=_pick(args.jitter_px, noise_doc, "jitter_px_at_ref", 2.0),
        fp_rate=_pick(args.fp_rate, noise_doc, "fp_rate", 1.0),
        view_noise_correlation=_pick(
            args.view_correlation, noise_doc, "view_noise_correlation", 0.5
        ),
        score_model=ScoreModel(),
    )
    objects = _pick(args.objects, cfg_doc, "objects_per_image", [1, 8])
    sizes = _pick(args.object_size, cfg_doc, "object_size_px", [8.0, 40.0])
    if len(objects) != 2 or len(sizes) != 2:
        raise ValidationError("--objects and --object-size expect LO,HI pairs")
    synth_cfg = SynthConfig(
        n_images=int(_pick(args.images, cfg_doc, "n_images", 200)),
        image_size=ImageDims(
            int(_pick(args.image_width, cfg_doc, "image_width", 1600)),
            int(_pick(args.image_height, cfg_doc, "image_height", 1200)),
        ),
        objects_per_image=(int(objects[0]), int(objects[1])),
        object_size_px=(float(sizes[0]), float(sizes[1])),
        rng_seed=int(_pick(args.seed, cfg_doc, "seed", 42)),
        detector_noise=noise,
    )
    fusion_cfg = FusionConfig(
        iou_thr=_pick(args.fusion_iou_thr, cfg_doc, "fusion_iou_thr", 0.55),
        skip_box_thr=_pick(args.skip_box_thr, cfg_doc, "skip_box_thr", 0.0),
    )

    extra: dict[str, Strategy] = {}
    for name, spec in cfg_doc.get("strategies", {}).items():
        extra[name] = Strategy(
            name=name,
            sizes=tuple(int(s) for s in spec["sizes"]),
            hflip=bool(spec.get("hflip", False)),
        )
    names = _pick(args.strategies, cfg_doc, "strategy_names", list(DEFAULT_STRATEGY_NAMES))
    strategies = resolve_strategies(names, extra)

    result = run_synth_bench(
        synth_cfg,
        fusion_cfg,
        strategies,
        args.out,
        iou_thr=_pick(args.iou_thr, cfg_doc, "iou_thr", 0.5),
        threads=_threads(args.threads),
        log=print,
    )
    print()
    print(format_strategy_table(result.rows))
    print(f"\nartifacts in {result.out_dir}")
    return 0


_COMMANDS = {
    "plan": cmd_plan,
    "fuse": cmd_fuse,
    "eval": cmd_eval,
    "synth-bench": cmd_synth_bench,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (ValidationError, UndefinedMetricError, GenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileFormatError as exc:
        print(f"file error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except DetectorError as exc:
        print(f"detector error: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
