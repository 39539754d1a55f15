"""Centroid alignment statistics and threshold-based classification metrics."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from .exceptions import EmptyGroup, Undefined

GROUPS = ("IA", "II", "OA", "OI")
COMBINED_SCORE_NOTE = ("combined_score = (1 - alignment_ratio) + (separation_ratio - 1), floored at 0; "
                       "reconstructed formula that reproduces the published encoder scores")


@dataclass
class CentroidSet:
    centroids: dict[str, np.ndarray]
    counts: dict[str, int]

    def distance(self, a: str, b: str) -> float:
        return float(np.linalg.norm(self.centroids[a] - self.centroids[b]))

    def distance_matrix(self) -> np.ndarray:
        return np.array([[self.distance(a, b) for b in GROUPS] for a in GROUPS])


def centroids(embeddings, domains, active) -> CentroidSet:
    """Mean embedding of each (domain x activity) group; centroids are not renormalised."""
    emb = np.asarray(embeddings, dtype=np.float64)
    domains = np.asarray(domains)
    active = np.asarray(active, dtype=bool)
    inorganic = domains == "inorganic"
    masks = {"IA": inorganic & active, "II": inorganic & ~active,
             "OA": ~inorganic & active, "OI": ~inorganic & ~active}
    empty = [g for g in GROUPS if not masks[g].any()]
    if empty:
        raise EmptyGroup(f"no members in group(s) {', '.join(empty)}")
    return CentroidSet({g: emb[masks[g]].mean(axis=0) for g in GROUPS},
                       {g: int(masks[g].sum()) for g in GROUPS})


def alignment_ratio(c: CentroidSet) -> float:
    return 0.5 * (c.distance("IA", "OA") / c.distance("IA", "OI")
                  + c.distance("II", "OI") / c.distance("II", "OA"))


def separation_ratio(c: CentroidSet) -> float:
    different = 0.5 * (c.distance("IA", "OI") + c.distance("II", "OA"))
    same = 0.5 * (c.distance("IA", "OA") + c.distance("II", "OI"))
    return different / same


def active_alignment_ratio(c: CentroidSet) -> float:
    return c.distance("IA", "OA") / c.distance("IA", "OI")


def combined_score(alignment: float, separation: float) -> float:
    return max(0.0, (1.0 - alignment) + (separation - 1.0))


@dataclass
class AlignmentReport:
    counts: dict[str, int]
    distances: np.ndarray
    alignment_ratio: float
    separation_ratio: float
    combined_score: float
    active_alignment_ratio: float

    @classmethod
    def from_centroids(cls, c: CentroidSet) -> "AlignmentReport":
        a, s = alignment_ratio(c), separation_ratio(c)
        return cls(dict(c.counts), c.distance_matrix(), a, s, combined_score(a, s),
                   active_alignment_ratio(c))

    def to_dict(self) -> dict:
        return {
            "counts": self.counts,
            "groups": list(GROUPS),
            "distance_matrix": [[round(float(x), 12) for x in row] for row in self.distances],
            "alignment_ratio": round(self.alignment_ratio, 12),
            "separation_ratio": round(self.separation_ratio, 12),
            "combined_score": round(self.combined_score, 12),
            "active_alignment_ratio": round(self.active_alignment_ratio, 12),
            "active_closer_percent": round(100.0 * (1.0 - self.active_alignment_ratio), 9),
            "combined_score_note": COMBINED_SCORE_NOTE,
        }

    def to_text(self) -> str:
        lines = ["Cross-modal alignment", ""]
        lines.append("(A) alignment ratio   {:.3f}   (lower is better, <1 aligned)".format(self.alignment_ratio))
        lines.append("(B) separation ratio  {:.3f}   (higher is better, >1 separated)".format(self.separation_ratio))
        lines.append("(C) centroid distances")
        lines.append("       " + "".join(f"{g:>8}" for g in GROUPS))
        for g, row in zip(GROUPS, self.distances):
            lines.append(f"    {g:<3}" + "".join(f"{x:8.3f}" for x in row))
        lines.append("(D) combined score    {:.3f}".format(self.combined_score))
        lines.append("")
        lines.append("active alignment ratio d(IA,OA)/d(IA,OI) = {:.3f} ({:.1f}% closer)".format(
            self.active_alignment_ratio, 100 * (1 - self.active_alignment_ratio)))
        lines.append("group sizes: " + ", ".join(f"{g}={self.counts[g]}" for g in GROUPS))
        return "\n".join(lines) + "\n"


def auc_roc(scores, labels) -> float:
    """Probability a random positive outscores a random negative (ties count 1/2)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise Undefined("AUC needs both classes")
    ranks = rankdata(scores)  # average ranks for ties
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass
class ClassificationReport:
    auc: float | None
    f1: float
    accuracy: float
    precision: float
    recall: float
    threshold: float

    def to_dict(self) -> dict:
        return asdict(self)


def classification_metrics(scores, labels, threshold: float) -> ClassificationReport:
    """Predict active iff ``score >= threshold``; AUC is None when undefined."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    pred = scores >= threshold
    tp = int(np.sum(pred & labels))
    fp = int(np.sum(pred & ~labels))
    fn = int(np.sum(~pred & labels))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    accuracy = float(np.mean(pred == labels)) if len(labels) else 0.0
    try:
        auc = auc_roc(scores, labels)
    except Undefined:
        auc = None
    return ClassificationReport(auc, f1, accuracy, precision, recall, float(threshold))


def _f1(pred, labels) -> float:
    tp = np.sum(pred & labels)
    denom = 2 * tp + np.sum(pred & ~labels) + np.sum(~pred & labels)
    return float(2 * tp / denom) if denom else 0.0


def best_f1_threshold(scores, labels) -> float:
    """Threshold maximising F1 on validation scores.

    Candidates are -inf, the midpoints between adjacent distinct scores and
    +inf; ties go to the smallest threshold.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    distinct = np.unique(scores)
    candidates = [-math.inf, *((distinct[:-1] + distinct[1:]) / 2.0), math.inf]
    best_t, best = candidates[0], -1.0
    for t in candidates:
        f = _f1(scores >= t, labels)
        if f > best:
            best_t, best = t, f
    return float(best_t)
