"""On-disk formats: COCO-style dataset documents, detection files, and plan files.

Dataset files are single COCO-style JSON documents (images / annotations /
categories, bbox as [x, y, width, height]). Detection files are line-delimited
JSON: an optional header object carrying a schema version, the coordinate
frame ("original" or "view"), and, for view-frame files, the view itself;
then one detection record per line. Bare COCO results arrays are also
accepted on read and treated as original-frame detections.

The [x, y, w, h] file convention is converted to the internal corner
convention at this boundary only: x2 = x + w exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import FileFormatError, ValidationError
from .evaluation import GroundTruth
from .fusion import Detection
from .geometry import Box, ImageDims, area
from .tta import ImageRecord, ViewPlan, ViewSpec

SCHEMA_VERSION = 1

Frame = str  # "original" | "view"

FRAMES = ("original", "view")


@dataclass(frozen=True)
class Category:
    id: int
    name: str


@dataclass
class Dataset:
    """In-memory form of a COCO-style annotation document."""

    images: list[ImageRecord]
    annotations: list[GroundTruth]
    categories: list[Category]

    def dims_by_id(self) -> dict[int, ImageDims]:
        return {im.image_id: im.dims for im in self.images}

    def gts_by_image(self) -> dict[int, list[GroundTruth]]:
        out: dict[int, list[GroundTruth]] = {im.image_id: [] for im in self.images}
        for gt in self.annotations:
            out[gt.image_id].append(gt)
        return out


@dataclass
class DetectionRecords:
    """Contents of one detection file: frame, optional view, (image_id, det) pairs."""

    items: list[tuple[int, Detection]]
    frame: Frame = "original"
    view: ViewSpec | None = None


def _read_json(path: Path) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: not valid JSON: {exc}") from exc


def write_json(doc: Any, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _bbox_to_box(bbox: list[float], where: str) -> Box:
    if not isinstance(bbox, (list, tuple)) or len(bbox) != 4:
        raise FileFormatError(f"{where}: bbox must be [x, y, w, h], got {bbox!r}")
    x, y, w, h = (float(v) for v in bbox)
    if w < 0 or h < 0:
        raise ValidationError(f"{where}: bbox width/height must be >= 0, got {bbox!r}")
    return Box(x, y, x + w, y + h)


def _box_to_bbox(box: Box) -> list[float]:
    return [box.x1, box.y1, box.x2 - box.x1, box.y2 - box.y1]


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    doc = {
        "images": [
            {
                "id": im.image_id,
                "width": im.dims.width,
                "height": im.dims.height,
                "file_name": im.file_name,
            }
            for im in dataset.images
        ],
        "annotations": [
            {
                "id": i + 1,
                "image_id": gt.image_id,
                "bbox": _box_to_bbox(gt.box),
                "category_id": gt.category_id,
                "iscrowd": 1 if gt.ignore else 0,
                "area": area(gt.box),
            }
            for i, gt in enumerate(dataset.annotations)
        ],
        "categories": [{"id": c.id, "name": c.name} for c in dataset.categories],
    }
    write_json(doc, Path(path))


def load_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    doc = _read_json(path)
    if not isinstance(doc, dict):
        raise FileFormatError(f"{path}: dataset document must be a JSON object")
    for key in ("images", "annotations", "categories"):
        if key not in doc:
            raise FileFormatError(f"{path}: missing top-level '{key}' list")

    images: list[ImageRecord] = []
    image_ids: set[int] = set()
    for rec in doc["images"]:
        try:
            image = ImageRecord(
                image_id=int(rec["id"]),
                dims=ImageDims(int(rec["width"]), int(rec["height"])),
                file_name=str(rec.get("file_name", "")),
            )
        except KeyError as exc:
            raise FileFormatError(f"{path}: image record missing {exc}") from exc
        if image.image_id in image_ids:
            raise ValidationError(f"{path}: duplicate image id {image.image_id}")
        image_ids.add(image.image_id)
        images.append(image)

    categories = []
    category_ids: set[int] = set()
    for rec in doc["categories"]:
        try:
            cat = Category(id=int(rec["id"]), name=str(rec["name"]))
        except KeyError as exc:
            raise FileFormatError(f"{path}: category record missing {exc}") from exc
        if cat.id in category_ids:
            raise ValidationError(f"{path}: duplicate category id {cat.id}")
        category_ids.add(cat.id)
        categories.append(cat)

    annotations: list[GroundTruth] = []
    for rec in doc["annotations"]:
        try:
            image_id = int(rec["image_id"])
            category_id = int(rec["category_id"])
            box = _bbox_to_box(rec["bbox"], f"{path} annotation {rec.get('id')}")
        except KeyError as exc:
            raise FileFormatError(f"{path}: annotation record missing {exc}") from exc
        if image_id not in image_ids:
            raise ValidationError(f"{path}: annotation references unknown image_id {image_id}")
        if category_id not in category_ids:
            raise ValidationError(
                f"{path}: annotation references unknown category_id {category_id}"
            )
        annotations.append(
            GroundTruth(
                image_id=image_id,
                box=box,
                category_id=category_id,
                ignore=bool(rec.get("iscrowd", 0)),
            )
        )
    return Dataset(images=images, annotations=annotations, categories=categories)


def _view_to_dict(view: ViewSpec) -> dict[str, Any]:
    return {"target_size": view.target_size, "hflip": view.hflip, "vflip": view.vflip}


def _view_from_dict(rec: dict[str, Any], where: str) -> ViewSpec:
    try:
        return ViewSpec(
            target_size=int(rec["target_size"]),
            hflip=bool(rec.get("hflip", False)),
            vflip=bool(rec.get("vflip", False)),
        )
    except KeyError as exc:
        raise FileFormatError(f"{where}: view record missing {exc}") from exc


def save_detections(records: DetectionRecords, path: str | Path) -> None:
    """Write a detection file as JSON lines with a leading header object."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "type": "detections",
        "frame": records.frame,
    }
    if records.view is not None:
        header["view"] = _view_to_dict(records.view)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for image_id, det in records.items:
            line = {
                "image_id": image_id,
                "category_id": det.category_id,
                "bbox": _box_to_bbox(det.box),
                "score": det.score,
            }
            fh.write(json.dumps(line, sort_keys=True) + "\n")


def _detection_from_record(rec: dict[str, Any], where: str) -> tuple[int, Detection]:
    try:
        image_id = int(rec["image_id"])
        category_id = int(rec["category_id"])
        box = _bbox_to_box(rec["bbox"], where)
        score = float(rec["score"])
    except KeyError as exc:
        raise FileFormatError(f"{where}: detection record missing {exc}") from exc
    if not (0.0 <= score <= 1.0):
        raise ValidationError(f"{where}: score must be in [0, 1], got {score}")
    return image_id, Detection(box=box, score=score, category_id=category_id)


def load_detections(path: str | Path) -> DetectionRecords:
    """Read a detection file: JSON lines with optional header, or a bare COCO array."""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("["):
        doc = _parse_json(text, path)
        items = [
            _detection_from_record(rec, f"{path} entry {i}") for i, rec in enumerate(doc)
        ]
        return DetectionRecords(items=items, frame="original", view=None)

    frame: Frame = "original"
    view: ViewSpec | None = None
    items: list[tuple[int, Detection]] = []
    saw_header = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        where = f"{path}:{lineno}"
        rec = _parse_json(line, where)
        if not isinstance(rec, dict):
            raise FileFormatError(f"{where}: expected a JSON object per line")
        if lineno == 1 and ("schema_version" in rec or "frame" in rec):
            saw_header = True
            if "frame" not in rec:
                raise FileFormatError(f"{where}: header must declare 'frame'")
            frame = rec["frame"]
            if frame not in FRAMES:
                raise FileFormatError(f"{where}: frame must be one of {FRAMES}, got {frame!r}")
            if "view" in rec:
                view = _view_from_dict(rec["view"], where)
            if frame == "view" and view is None:
                raise FileFormatError(
                    f"{where}: frame='view' requires a 'view' header entry"
                )
            continue
        items.append(_detection_from_record(rec, where))
    if not saw_header and not items and text.strip():
        raise FileFormatError(f"{path}: no parsable detection records")
    return DetectionRecords(items=items, frame=frame, view=view)


def _parse_json(text: str, where) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{where}: not valid JSON: {exc}") from exc


def save_plan(plan: ViewPlan, path: str | Path) -> None:
    write_json(plan_to_doc(plan), Path(path))


def plan_to_doc(plan: ViewPlan) -> dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "type": "view_plan",
        "views": [_view_to_dict(v) for v in plan],
    }


def load_plan(path: str | Path) -> ViewPlan:
    path = Path(path)
    doc = _read_json(path)
    if not isinstance(doc, dict) or "views" not in doc:
        raise FileFormatError(f"{path}: plan document must contain a 'views' list")
    views = [_view_from_dict(rec, f"{path} view {i}") for i, rec in enumerate(doc["views"])]
    return ViewPlan(tuple(views))
