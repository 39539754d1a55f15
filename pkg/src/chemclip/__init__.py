"""Contrastive dual-encoder embeddings linking organic and inorganic anticancer compounds."""

from .classifier import ActivityClassifier, ClassifierConfig
from .data import ActivityRecord, DatasetSplit, compound_split, ingest
from .exceptions import ChemClipError
from .fingerprint import MorganFingerprinter, featurize_inorganic, featurize_organic, morgan_fingerprint
from .metrics import AlignmentReport, auc_roc, centroids, classification_metrics, combined_score
from .model import ChemClip, ChemClipModel, EmbeddingTable, TrainConfig, load_checkpoint, save_checkpoint, train
from .projection import PCAProjection, TSNEProjection, pca_2d, render_scatter_svg, tsne_2d
from .smiles import MolGraph, parse_smiles, to_smiles
from .synth import SynthConfig, generate

__version__ = "0.1.0"

__all__ = [
    "ActivityClassifier", "ActivityRecord", "AlignmentReport", "ChemClip", "ChemClipError",
    "ChemClipModel", "ClassifierConfig", "DatasetSplit", "EmbeddingTable", "MolGraph",
    "MorganFingerprinter", "PCAProjection", "SynthConfig", "TSNEProjection", "TrainConfig",
    "auc_roc", "centroids", "classification_metrics", "combined_score", "compound_split",
    "featurize_inorganic", "featurize_organic", "generate", "ingest", "load_checkpoint",
    "morgan_fingerprint", "parse_smiles", "pca_2d", "render_scatter_svg", "save_checkpoint",
    "to_smiles", "train", "tsne_2d",
]
