"""Denoising and instance-segmentation scores."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

AP_ALPHAS = (0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8)


def rmse(est, truth) -> float:
    est, truth = np.asarray(est, dtype=float), np.asarray(truth, dtype=float)
    if est.shape != truth.shape:
        raise ValueError(f"shape mismatch {est.shape} vs {truth.shape}")
    return float(np.sqrt(np.mean((est - truth) ** 2)))


def iou(g, p) -> float:
    """Intersection over union of two boolean masks; 1.0 when both are empty."""
    g, p = np.asarray(g, dtype=bool), np.asarray(p, dtype=bool)
    union = np.count_nonzero(g | p)
    if union == 0:
        return 1.0
    return np.count_nonzero(g & p) / union


def iou_matrix(gt, pred) -> np.ndarray:
    """IoU for every (gt label, pred label) pair via a joint histogram."""
    gt, pred = np.asarray(gt), np.asarray(pred)
    if gt.shape != pred.shape:
        raise ValueError(f"shape mismatch {gt.shape} vs {pred.shape}")
    G, P = int(gt.max(initial=0)), int(pred.max(initial=0))
    joint = np.bincount(gt.ravel().astype(np.int64) * (P + 1) + pred.ravel(),
                        minlength=(G + 1) * (P + 1)).reshape(G + 1, P + 1)
    inter = joint[1:, 1:].astype(float)
    g_area = joint[1:, :].sum(axis=1)
    p_area = joint[:, 1:].sum(axis=0)
    union = g_area[:, None] + p_area[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(union > 0, inter / union, 0.0)
    return out


@dataclass
class MatchResult:
    alpha: float
    pairs: list[tuple[int, int, float]]
    unmatched_gt: list[int]
    unmatched_pred: list[int]
    n_gt: int
    n_pred: int
    flags: list = field(default_factory=list)

    @property
    def tp(self) -> int:
        return len(self.pairs)

    @property
    def fp(self) -> int:
        return len(self.unmatched_pred)

    @property
    def fn(self) -> int:
        return len(self.unmatched_gt)


def _present(labels) -> list[int]:
    return [int(v) for v in np.unique(labels) if v > 0]


def match_masks(gt, pred, alpha: float, ious: np.ndarray | None = None) -> MatchResult:
    """Greedy one-to-one matching in descending IoU; pairs below ``alpha`` are dropped.

    Ties in IoU go to the lexicographically smaller (gt, pred) label pair.
    """
    if ious is None:
        ious = iou_matrix(gt, pred)
    gts, preds = _present(gt), _present(pred)
    cand = [(-ious[g - 1, p - 1], g, p) for g in gts for p in preds if ious[g - 1, p - 1] > 0]
    cand.sort()
    used_g, used_p, pairs = set(), set(), []
    for neg, g, p in cand:
        if g in used_g or p in used_p:
            continue
        used_g.add(g)
        used_p.add(p)
        if -neg >= alpha:
            pairs.append((g, p, -neg))
    matched_g = {g for g, _, _ in pairs}
    matched_p = {p for _, p, _ in pairs}
    return MatchResult(alpha, pairs, [g for g in gts if g not in matched_g],
                       [p for p in preds if p not in matched_p], len(gts), len(preds))


def average_precision(match: MatchResult) -> float:
    """TP / (TP + FP + FN); 1.0 (flagged) when there are no objects at all."""
    denom = match.tp + match.fp + match.fn
    if denom == 0:
        match.flags.append("no_objects")
        return 1.0
    return match.tp / denom


def ap_curve(gt, pred, alphas=AP_ALPHAS) -> list[tuple[float, float]]:
    ious = iou_matrix(gt, pred)
    return [(float(a), average_precision(match_masks(gt, pred, a, ious))) for a in alphas]


def write_ap_csv(path, rows) -> None:
    """``rows``: iterable of (image, MatchResult)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["image", "alpha", "TP", "FP", "FN", "AP"])
        for image, m in rows:
            w.writerow([image, repr(float(m.alpha)), m.tp, m.fp, m.fn, repr(average_precision(m))])
