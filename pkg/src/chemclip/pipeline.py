"""Glue between modules: split selection, alignment and classifier evaluation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classifier import ActivityClassifier, ClassifierConfig
from .data import INORGANIC, ORGANIC, ActivityRecord, DatasetSplit, compound_split, subsample_compounds
from .metrics import AlignmentReport, ClassificationReport, centroids
from .model import EmbeddingTable

DOMAINS = (INORGANIC, ORGANIC)


@dataclass
class Partition:
    """Records per split; the organic training side is already subsampled."""

    train: list[ActivityRecord]
    val: list[ActivityRecord]
    test: list[ActivityRecord]


def partition(records, split: DatasetSplit, inactive_ratio: float = 5) -> Partition:
    train = split.select(records, "train")
    org = [r for r in train if r.domain == ORGANIC]
    keep = subsample_compounds([r.compound_id for r in org], [r.active for r in org],
                               inactive_ratio, split.seed)
    train = [r for r in train if r.domain == INORGANIC or r.compound_id in keep]
    return Partition(train, split.select(records, "val"), split.select(records, "test"))


def make_partition(records, seed: int, inactive_ratio: float = 5) -> tuple[DatasetSplit, Partition]:
    split = compound_split(records, seed)
    return split, partition(records, split, inactive_ratio)


def table_split_masks(table: EmbeddingTable, split: DatasetSplit, train_keep: set[str] | None = None):
    """Boolean masks (train, val, test) over table rows."""
    which = np.array([split.assignment.get(c, "") for c in table.compound_id])
    train = which == "train"
    if train_keep is not None:
        train &= np.array([d == INORGANIC or c in train_keep
                           for c, d in zip(table.compound_id, table.domain)])
    return train, which == "val", which == "test"


def organic_train_keep(table: EmbeddingTable, split: DatasetSplit, inactive_ratio: float = 5) -> set[str]:
    rows = [k for k, (c, d) in enumerate(zip(table.compound_id, table.domain))
            if d == ORGANIC and split.assignment.get(c) == "train"]
    return subsample_compounds([table.compound_id[k] for k in rows],
                               [table.active[k] for k in rows], inactive_ratio, split.seed)


def alignment_report(table: EmbeddingTable) -> AlignmentReport:
    return AlignmentReport.from_centroids(centroids(table.embeddings, table.domain, table.active))


def fit_domain_classifiers(table: EmbeddingTable, masks, config: ClassifierConfig) -> dict:
    """One classifier per domain on frozen embeddings; returns ``{domain: classifier}``."""
    train, val, _ = masks
    dom = np.array(table.domain)
    out = {}
    for d in DOMAINS:
        tr, va = train & (dom == d), val & (dom == d)
        clf = ActivityClassifier(**config.to_dict())
        clf.fit(table.embeddings[tr], table.active[tr],
                table.embeddings[va] if va.any() else None,
                table.active[va] if va.any() else None)
        out[d] = clf
    return out


def evaluate_domain_classifiers(classifiers: dict, table: EmbeddingTable, mask) -> dict[str, ClassificationReport]:
    dom = np.array(table.domain)
    return {d: clf.evaluate(table.embeddings[mask & (dom == d)], table.active[mask & (dom == d)])
            for d, clf in classifiers.items()}


def classification_table(reports: dict[str, ClassificationReport]) -> str:
    """Plain-text table: per-domain AUC/F1/Acc plus precision and recall."""
    fmt = lambda x: "   n/a" if x is None else f"{x:6.3f}"
    head = f"{'Domain':<10} {'AUC':>6} {'F1':>6} {'Acc':>6} {'Prec':>6} {'Rec':>6} {'Thresh':>7}"
    lines = ["Downstream classification (frozen embeddings, test split)", "", head, "-" * len(head)]
    for d, r in reports.items():
        lines.append(f"{d:<10} {fmt(r.auc)} {fmt(r.f1)} {fmt(r.accuracy)} {fmt(r.precision)} "
                     f"{fmt(r.recall)} {r.threshold:7.4f}")
    aucs = [r.auc for r in reports.values() if r.auc is not None]
    if aucs:
        lines.append(f"{'Avg. AUC':<10} {np.mean(aucs):6.3f}")
    return "\n".join(lines) + "\n"
