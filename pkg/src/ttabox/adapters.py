"""Detector adapters: pre-computed detection files and external subprocesses.

The subprocess protocol is JSON lines over stdin/stdout. One request object
per line:

    {"image_id": 7, "image": "frames/000007.png",
     "target_size": 3200, "hflip": false, "vflip": false}

and one response object per line, in the same order:

    {"detections": [[x1, y1, x2, y2, score, category_id], ...]}

Coordinates are view-frame (the letterboxed target_size x target_size image).
A response may echo "image_id"; when present it is checked against the
request. Nonzero exit status, malformed lines, or a request/response count
mismatch raise DetectorError.
"""

from __future__ import annotations

import json
import subprocess
from pathlib import Path
from typing import Sequence

from .coco_io import load_detections
from .errors import DetectorError, ValidationError
from .fusion import Detection
from .geometry import Box
from .tta import ImageRecord, ViewSpec


class FileDetectorAdapter:
    """Serves detections from per-view files written in view coordinates.

    Every input file must carry a frame='view' header; its view becomes the
    lookup key. Asking for a view no file covers is a DetectorError; an image
    absent from a file simply has no detections in that view.
    """

    def __init__(self, paths: Sequence[str | Path]):
        self._by_view: dict[ViewSpec, dict[int, list[Detection]]] = {}
        for path in paths:
            records = load_detections(path)
            if records.frame != "view" or records.view is None:
                raise ValidationError(
                    f"{path}: file-backed detector needs frame='view' files with a view header"
                )
            if records.view in self._by_view:
                raise ValidationError(f"{path}: duplicate view {records.view}")
            per_image: dict[int, list[Detection]] = {}
            for image_id, det in records.items:
                per_image.setdefault(image_id, []).append(det)
            self._by_view[records.view] = per_image

    @property
    def views(self) -> list[ViewSpec]:
        return list(self._by_view)

    def detect(self, image: ImageRecord, view: ViewSpec) -> list[Detection]:
        if view not in self._by_view:
            raise DetectorError(
                f"no detection file for view {view.label()}",
                image_id=image.image_id,
                view=view,
            )
        return list(self._by_view[view].get(image.image_id, []))


class SubprocessDetectorAdapter:
    """Runs an external command per batch of requests (one per detect call)."""

    def __init__(self, command: Sequence[str], timeout: float | None = None):
        if not command:
            raise ValidationError("subprocess detector needs a non-empty command")
        self._command = list(command)
        self._timeout = timeout

    def detect(self, image: ImageRecord, view: ViewSpec) -> list[Detection]:
        return self.detect_batch([image], view)[0]

    def detect_batch(
        self, images: Sequence[ImageRecord], view: ViewSpec
    ) -> list[list[Detection]]:
        requests = [
            {
                "image_id": im.image_id,
                "image": im.file_name,
                "target_size": view.target_size,
                "hflip": view.hflip,
                "vflip": view.vflip,
            }
            for im in images
        ]
        payload = "".join(json.dumps(r) + "\n" for r in requests)
        try:
            proc = subprocess.run(
                self._command,
                input=payload,
                capture_output=True,
                text=True,
                timeout=self._timeout,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise DetectorError(f"detector command failed to run: {exc}", view=view) from exc
        if proc.returncode != 0:
            raise DetectorError(
                f"detector command exited with {proc.returncode}: {proc.stderr.strip()}",
                view=view,
            )
        lines = [line for line in proc.stdout.splitlines() if line.strip()]
        if len(lines) != len(requests):
            raise DetectorError(
                f"detector returned {len(lines)} responses for {len(requests)} requests",
                view=view,
            )
        out: list[list[Detection]] = []
        for request, line in zip(requests, lines):
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DetectorError(
                    f"detector response is not valid JSON: {exc}",
                    image_id=request["image_id"],
                    view=view,
                ) from exc
            if not isinstance(rec, dict) or "detections" not in rec:
                raise DetectorError(
                    "detector response must be an object with a 'detections' list",
                    image_id=request["image_id"],
                    view=view,
                )
            if "image_id" in rec and int(rec["image_id"]) != request["image_id"]:
                raise DetectorError(
                    f"detector response image_id {rec['image_id']} does not match "
                    f"request {request['image_id']}",
                    view=view,
                )
            dets = []
            for entry in rec["detections"]:
                try:
                    x1, y1, x2, y2, score, category_id = entry
                    dets.append(
                        Detection(
                            box=Box(float(x1), float(y1), float(x2), float(y2)),
                            score=float(score),
                            category_id=int(category_id),
                        )
                    )
                except (TypeError, ValueError, ValidationError) as exc:
                    raise DetectorError(
                        f"bad detection entry {entry!r}: {exc}",
                        image_id=request["image_id"],
                        view=view,
                    ) from exc
            out.append(dets)
        return out
