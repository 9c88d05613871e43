"""Independent brute-force references used as oracles by the test suite.

These deliberately re-derive everything from scratch with explicit lists and
numpy, sharing no code with the package internals, so they can vouch for the
production implementations.
"""

from __future__ import annotations

import numpy as np


def iou_xyxy(a, b) -> float:
    ix1 = max(a[0], b[0])
    iy1 = max(a[1], b[1])
    ix2 = min(a[2], b[2])
    iy2 = min(a[3], b[3])
    if ix2 <= ix1 or iy2 <= iy1:
        return 0.0
    inter = (ix2 - ix1) * (iy2 - iy1)
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    union = area_a + area_b - inter
    return inter / union if union > 0 else 0.0


def reference_wbf(boxes, scores, categories, views, n_views, iou_thr=0.55,
                  skip_thr=0.0, weights=None, scale_by_views=True):
    """Naive re-run of the fusion scan with explicit python lists.

    boxes: list of [x1,y1,x2,y2]; views: source view per box (-1 unknown).
    Returns a list of dicts {box, score, category, members} where members are
    input indices, sorted like the production output.
    """
    def weight_of(view):
        if weights is None or view < 0:
            return 1.0
        return weights[view]

    results = []
    for cat in sorted(set(categories)):
        idxs = [i for i in range(len(boxes))
                if categories[i] == cat and scores[i] >= skip_thr]
        idxs.sort(key=lambda i: (-scores[i] * weight_of(views[i]), views[i],
                                 boxes[i][0], boxes[i][1], boxes[i][2], boxes[i][3]))
        cluster_members: list[list[int]] = []
        cluster_boxes: list[list[float]] = []

        def refresh(ci):
            ms = cluster_members[ci]
            eff = np.array([scores[i] * weight_of(views[i]) for i in ms])
            pts = np.array([boxes[i] for i in ms], dtype=float)
            if eff.sum() > 0:
                cluster_boxes[ci] = list(np.average(pts, axis=0, weights=eff))
            else:
                cluster_boxes[ci] = list(pts.mean(axis=0))

        for i in idxs:
            best, best_iou = -1, iou_thr
            for ci, cb in enumerate(cluster_boxes):
                v = iou_xyxy(cb, boxes[i])
                if v > best_iou:
                    best, best_iou = ci, v
            if best == -1:
                cluster_members.append([i])
                cluster_boxes.append(list(boxes[i]))
                refresh(len(cluster_members) - 1)
            else:
                cluster_members[best].append(i)
                refresh(best)

        for ms, cb in zip(cluster_members, cluster_boxes):
            ws = np.array([weight_of(views[i]) for i in ms])
            ss = np.array([scores[i] for i in ms])
            fused_score = float((ws * ss).sum() / ws.sum())
            if scale_by_views:
                fused_score *= min(len(ms), n_views) / n_views
            results.append({
                "box": [float(v) for v in cb],
                "score": fused_score,
                "category": cat,
                "members": sorted(ms),
            })
    results.sort(key=lambda r: (-r["score"], r["category"], *r["box"]))
    return results


def exact_average_precision(scored_labels, n_gt) -> float:
    """Exact area under the interpolated PR curve.

    scored_labels: list of (score, is_tp) with ignored entries already removed;
    the integral of max-precision-at-recall>=r over r in [0, 1].
    """
    if n_gt < 1:
        raise ValueError("n_gt must be >= 1")
    if not scored_labels:
        return 0.0
    ordered = sorted(scored_labels, key=lambda t: -t[0])
    tp = fp = 0
    points = []  # (recall, precision) after each detection
    for _score, is_tp in ordered:
        if is_tp:
            tp += 1
        else:
            fp += 1
        points.append((tp / n_gt, tp / (tp + fp)))
    # Envelope: best precision at any recall >= r.
    best_after = [0.0] * (len(points) + 1)
    for i in range(len(points) - 1, -1, -1):
        best_after[i] = max(points[i][1], best_after[i + 1])
    ap = 0.0
    prev_recall = 0.0
    for i, (recall, _p) in enumerate(points):
        if recall > prev_recall:
            ap += (recall - prev_recall) * best_after[i]
            prev_recall = recall
    return ap


def interp101_average_precision(scored_labels, n_gt) -> float:
    """Second opinion on the 101-point rule, computed pointwise."""
    ordered = sorted(scored_labels, key=lambda t: -t[0])
    tp = fp = 0
    points = []
    for _score, is_tp in ordered:
        if is_tp:
            tp += 1
        else:
            fp += 1
        points.append((tp / n_gt, tp / (tp + fp)))
    total = 0.0
    for k in range(101):
        r = k / 100
        candidates = [p for rec, p in points if rec >= r]
        total += max(candidates) if candidates else 0.0
    return total / 101
