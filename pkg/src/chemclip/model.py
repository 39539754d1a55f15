"""Dual-encoder model, contrastive + triplet objective and the training loop."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import struct
from collections import defaultdict
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .data import INORGANIC, ORGANIC, ActivityRecord
from .exceptions import ConfigError, EmptyCellLine, EmptyGroup, FormatError, MalformedRow, MissingInput, UnsupportedVersion
from .fingerprint import INORGANIC_DIM, N_BITS, featurize_inorganic, featurize_organic
from .nn import (
    AdamW,
    Mlp,
    clip_grad_norm,
    init_mlp,
    l2_normalize_rows,
    l2_normalize_rows_backward,
    mlp_backward,
    mlp_forward,
)
from .rng import SplitMix64

log = logging.getLogger(__name__)

MAGIC = b"CCLP"
VERSION = 1
SELECTION_CRITERIA = ("val_combined_score", "val_info_nce", "last")


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 128
    lr: float = 1e-3
    weight_decay: float = 0.01
    betas: tuple = (0.9, 0.999)
    clip_norm: float = 1.0
    dropout: float = 0.1
    temperature: float = 0.07
    triplet_margin: float = 0.2
    hidden_dim: int = 512
    embed_dim: int = 256
    pair_prefer_activity: bool = True
    select_by: str = "val_combined_score"
    seed: int = 0

    def __post_init__(self):
        self.betas = tuple(float(b) for b in self.betas)
        if self.select_by not in SELECTION_CRITERIA:
            raise ConfigError(f"select_by must be one of {', '.join(SELECTION_CRITERIA)}")
        positive = ("epochs", "batch_size", "lr", "clip_norm", "temperature",
                    "hidden_dim", "embed_dim")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.weight_decay < 0 or self.triplet_margin < 0:
            raise ConfigError("weight_decay and triplet_margin must be non-negative")

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown train option(s): {', '.join(sorted(unknown))}")
        return cls(**doc)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d


@dataclass
class ChemClipModel:
    inorganic_head: Mlp
    organic_head: Mlp
    temperature: float = 0.07

    @property
    def embed_dim(self) -> int:
        return self.organic_head.dims[-1]

    @classmethod
    def initialize(cls, config: TrainConfig, inorganic_dim: int = INORGANIC_DIM,
                   organic_dim: int = N_BITS) -> "ChemClipModel":
        rng = SplitMix64(config.seed)
        ino = init_mlp((inorganic_dim, config.hidden_dim, config.embed_dim), rng.next_u64(), config.dropout)
        org = init_mlp((organic_dim, config.hidden_dim, config.embed_dim), rng.next_u64(), config.dropout)
        return cls(ino, org, config.temperature)

    def parameters(self) -> list[np.ndarray]:
        return self.inorganic_head.parameters() + self.organic_head.parameters()

    def named_parameters(self) -> list[tuple[str, np.ndarray]]:
        return (self.inorganic_head.named_parameters("inorganic_head.")
                + self.organic_head.named_parameters("organic_head."))

    def copy(self) -> "ChemClipModel":
        def dup(m: Mlp) -> Mlp:
            return Mlp([w.copy() for w in m.weights], [b.copy() for b in m.biases], m.dropout)
        return ChemClipModel(dup(self.inorganic_head), dup(self.organic_head), self.temperature)

    def encode(self, features: np.ndarray, domain: str) -> np.ndarray:
        """Unit-norm embeddings with dropout off."""
        head = self.inorganic_head if domain == INORGANIC else self.organic_head
        out, _ = mlp_forward(head, features, training=False)
        return l2_normalize_rows(out)[0]


# ---------------------------------------------------------------- features

class Featurizer:
    """Memoised record -> feature-vector lookup."""

    def __init__(self):
        self._cache: dict[tuple, np.ndarray] = {}

    def key(self, r: ActivityRecord) -> tuple:
        return (r.domain, r.smiles, r.metal, r.oxidation_state)

    def __call__(self, r: ActivityRecord) -> np.ndarray:
        k = self.key(r)
        vec = self._cache.get(k)
        if vec is None:
            if r.domain == INORGANIC:
                vec = featurize_inorganic(r.smiles, r.metal, r.oxidation_state)
            else:
                vec = featurize_organic(r.smiles)
            self._cache[k] = vec
        return vec

    def matrix(self, records: Sequence[ActivityRecord]) -> tuple[np.ndarray, np.ndarray]:
        """Unique feature rows plus a record -> row index array."""
        index: dict[tuple, int] = {}
        rows = np.empty(len(records), dtype=np.int64)
        vecs = []
        for k, r in enumerate(records):
            key = self.key(r)
            if key not in index:
                index[key] = len(vecs)
                vecs.append(self(r))
            rows[k] = index[key]
        width = INORGANIC_DIM if records and records[0].domain == INORGANIC else N_BITS
        mat = np.vstack(vecs) if vecs else np.zeros((0, width))
        return mat, rows


@dataclass
class _Side:
    records: list[ActivityRecord]
    features: np.ndarray
    rows: np.ndarray
    active: np.ndarray
    cell_lines: np.ndarray

    @classmethod
    def build(cls, records, featurizer: Featurizer) -> "_Side":
        feats, rows = featurizer.matrix(records)
        return cls(list(records), feats, rows,
                   np.array([r.active for r in records], dtype=bool),
                   np.array([r.cell_line for r in records], dtype=object))

    def x(self, idx: np.ndarray) -> np.ndarray:
        return self.features[self.rows[idx]]


class PairingCorpus:
    """Featurised training corpus with organic records indexed by cell line."""

    def __init__(self, records: Sequence[ActivityRecord], featurizer: Featurizer | None = None):
        featurizer = featurizer or Featurizer()
        self.inorganic = _Side.build([r for r in records if r.domain == INORGANIC], featurizer)
        self.organic = _Side.build([r for r in records if r.domain == ORGANIC], featurizer)
        by_line: dict[str, list[int]] = defaultdict(list)
        for k, r in enumerate(self.organic.records):
            by_line[r.cell_line].append(k)
        self.by_line = {line: np.array(v) for line, v in by_line.items()}
        self.by_line_label = {
            (line, flag): idx[self.organic.active[idx] == flag]
            for line, idx in self.by_line.items() for flag in (True, False)
        }


@dataclass
class PairBatch:
    inorganic_idx: np.ndarray
    organic_idx: np.ndarray
    inorganic_features: np.ndarray
    organic_features: np.ndarray
    cell_lines: np.ndarray
    inorganic_active: np.ndarray
    organic_active: np.ndarray

    def __len__(self) -> int:
        return len(self.inorganic_idx)


def sample_pair_batch(corpus: PairingCorpus, inorganic_idx: np.ndarray, rng: SplitMix64,
                      prefer_activity: bool = True) -> PairBatch:
    """Pair each inorganic record with one organic record from its cell line.

    With ``prefer_activity`` the partner is drawn among same-label organics
    when any exist, otherwise among all organics of the cell line.  Inorganic
    records whose cell line has no organic record are skipped.
    """
    keep, partners = [], []
    for i in inorganic_idx:
        line = corpus.inorganic.cell_lines[i]
        pool = corpus.by_line.get(line)
        if pool is None or len(pool) == 0:
            log.warning("%s", EmptyCellLine(f"no organic partner in cell line {line!r}; record skipped"))
            continue
        if prefer_activity:
            same = corpus.by_line_label[(line, bool(corpus.inorganic.active[i]))]
            if len(same):
                pool = same
        keep.append(i)
        partners.append(pool[rng.integer(len(pool))])
    ino = np.array(keep, dtype=np.int64)
    org = np.array(partners, dtype=np.int64)
    return PairBatch(ino, org, corpus.inorganic.x(ino), corpus.organic.x(org),
                     corpus.inorganic.cell_lines[ino], corpus.inorganic.active[ino],
                     corpus.organic.active[org])


def epoch_batches(n: int, batch_size: int, rng: SplitMix64):
    """Shuffled index batches covering ``range(n)`` once, without replacement."""
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


# ---------------------------------------------------------------- losses

def info_nce_loss(zi: np.ndarray, zo: np.ndarray, temperature: float):
    """Symmetric InfoNCE with diagonal targets.

    Returns:
        ``(loss, grad_zi, grad_zo)``
    """
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    b = zi.shape[0]
    s = zi @ zo.T / temperature
    row_max = s.max(axis=1, keepdims=True)
    e_row = np.exp(s - row_max)
    lse_row = np.log(e_row.sum(axis=1)) + row_max[:, 0]
    col_max = s.max(axis=0, keepdims=True)
    e_col = np.exp(s - col_max)
    lse_col = np.log(e_col.sum(axis=0)) + col_max[0]
    diag = np.diag(s)
    loss = 0.5 * (np.mean(lse_row - diag) + np.mean(lse_col - diag))
    p_row = e_row / e_row.sum(axis=1, keepdims=True)
    p_col = e_col / e_col.sum(axis=0, keepdims=True)
    eye = np.eye(b)
    ds = 0.5 * ((p_row - eye) + (p_col - eye)) / b
    return float(loss), ds @ zo / temperature, ds.T @ zi / temperature


@dataclass
class TripletSet:
    """Row indices into a :class:`PairBatch` (anchors: inorganic rows; others: organic rows)."""

    anchors: np.ndarray
    positives: np.ndarray
    negatives: np.ndarray
    margin: float = 0.2

    def __len__(self) -> int:
        return len(self.anchors)


def mine_hard_triplets(batch: PairBatch, rng: SplitMix64, margin: float = 0.2) -> TripletSet:
    """One (active inorganic, active organic, inactive organic) triplet per eligible anchor.

    Positives and negatives come from the batch's organic rows that share the
    anchor's cell line.
    """
    anchors, pos, neg = [], [], []
    for a in range(len(batch)):
        if not batch.inorganic_active[a]:
            continue
        same = np.flatnonzero(batch.cell_lines == batch.cell_lines[a])
        act = same[batch.organic_active[same]]
        ina = same[~batch.organic_active[same]]
        if len(act) == 0 or len(ina) == 0:
            continue
        anchors.append(a)
        pos.append(act[rng.integer(len(act))])
        neg.append(ina[rng.integer(len(ina))])
    as_idx = lambda v: np.array(v, dtype=np.int64)
    return TripletSet(as_idx(anchors), as_idx(pos), as_idx(neg), margin)


def triplet_loss(a: np.ndarray, p: np.ndarray, n: np.ndarray, margin: float = 0.2):
    """Mean hinge ``max(0, a.n - a.p + margin)`` on unit vectors.

    Returns ``(loss, grad_a, grad_p, grad_n)``; an empty set gives zeros.
    """
    t = a.shape[0]
    if t == 0:
        return 0.0, np.zeros_like(a), np.zeros_like(p), np.zeros_like(n)
    hinge = np.sum(a * n, axis=1) - np.sum(a * p, axis=1) + margin
    on = (hinge > 0).astype(np.float64)[:, None] / t
    loss = float(np.sum(np.maximum(hinge, 0.0)) / t)
    return loss, on * (n - p), -on * a, on * a


@dataclass
class LossParts:
    total: float
    info_nce: float
    triplet: float
    n_triplets: int


def total_loss(model: ChemClipModel, batch: PairBatch, triplets: TripletSet,
               training: bool = False, rng: SplitMix64 | None = None):
    """InfoNCE + triplet loss and the gradient for every model parameter.

    Returns:
        ``(LossParts, grads)`` with grads ordered like :meth:`ChemClipModel.parameters`.
    """
    out_i, cache_i = mlp_forward(model.inorganic_head, batch.inorganic_features, training, rng)
    out_o, cache_o = mlp_forward(model.organic_head, batch.organic_features, training, rng)
    zi, ni = l2_normalize_rows(out_i)
    zo, no = l2_normalize_rows(out_o)
    l_nce, gzi, gzo = info_nce_loss(zi, zo, model.temperature)
    l_tri, ga, gp, gn = triplet_loss(zi[triplets.anchors], zo[triplets.positives],
                                     zo[triplets.negatives], triplets.margin)
    if len(triplets):
        np.add.at(gzi, triplets.anchors, ga)
        np.add.at(gzo, triplets.positives, gp)
        np.add.at(gzo, triplets.negatives, gn)
    grads_i, _ = mlp_backward(model.inorganic_head, cache_i, l2_normalize_rows_backward(zi, ni, gzi))
    grads_o, _ = mlp_backward(model.organic_head, cache_o, l2_normalize_rows_backward(zo, no, gzo))
    parts = LossParts(l_nce + l_tri, l_nce, l_tri, len(triplets))
    return parts, grads_i + grads_o


# ---------------------------------------------------------------- training

@dataclass
class History:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)  # validation InfoNCE
    val_combined_score: list[float] = field(default_factory=list)
    best_epoch: int = -1

    def to_dict(self) -> dict:
        return asdict(self)


def validation_loss(model: ChemClipModel, corpus: PairingCorpus, config: TrainConfig) -> float:
    """Mean InfoNCE over fixed validation pairs (same pairing every epoch)."""
    n = len(corpus.inorganic.records)
    if n == 0 or not corpus.by_line:
        return float("nan")
    rng = SplitMix64(config.seed ^ 0x5EED5EED)
    losses, weights = [], []
    for start in range(0, n, config.batch_size):
        batch = sample_pair_batch(corpus, np.arange(start, min(n, start + config.batch_size)),
                                  rng, config.pair_prefer_activity)
        if len(batch) == 0:
            continue
        zi = model.encode(batch.inorganic_features, INORGANIC)
        zo = model.encode(batch.organic_features, ORGANIC)
        losses.append(info_nce_loss(zi, zo, model.temperature)[0])
        weights.append(len(batch))
    return float(np.average(losses, weights=weights)) if losses else float("nan")


def validation_combined_score(model: ChemClipModel, records: Sequence[ActivityRecord],
                              featurizer: Featurizer) -> float:
    """Centroid combined score of the validation embeddings (NaN if a group is empty)."""
    from .metrics import AlignmentReport, centroids

    emb = embed(model, records, featurizer)
    try:
        c = centroids(emb, [r.domain for r in records], [r.active for r in records])
    except EmptyGroup:
        return float("nan")
    return AlignmentReport.from_centroids(c).combined_score


def _selection_score(config: TrainConfig, history: History) -> float:
    """Lower is better."""
    if config.select_by == "last":
        return -float(len(history.train_loss))
    if config.select_by == "val_combined_score" and not math.isnan(history.val_combined_score[-1]):
        return -history.val_combined_score[-1]
    if not math.isnan(history.val_loss[-1]):
        return history.val_loss[-1]
    return history.train_loss[-1]


def train(config: TrainConfig, train_records: Sequence[ActivityRecord],
          val_records: Sequence[ActivityRecord] = (), checkpoint_dir=None,
          featurizer: Featurizer | None = None, on_epoch_end=None):
    """Fit both projection heads.

    Returns ``(best_model, history)``.  The best epoch is chosen by
    ``config.select_by``: the validation combined alignment score (default;
    validation InfoNCE is the fallback when a validation group is empty),
    the validation InfoNCE loss, or simply the last epoch.  Without
    validation records the training loss decides.  When ``checkpoint_dir``
    is given the latest epoch is written to ``last.cclp`` after every epoch
    and the best epoch to ``best.cclp``.  ``on_epoch_end(epoch, model, history)``
    is called after every epoch if given.
    """
    featurizer = featurizer or Featurizer()
    corpus = PairingCorpus(train_records, featurizer)
    val = PairingCorpus(val_records, featurizer) if val_records else None
    if not len(corpus.inorganic.records) or not len(corpus.organic.records):
        raise MissingInput("training needs both inorganic and organic records")
    model = ChemClipModel.initialize(config, corpus.inorganic.features.shape[1],
                                     corpus.organic.features.shape[1])
    opt = AdamW(model.parameters(), lr=config.lr, betas=config.betas,
                weight_decay=config.weight_decay)
    root = SplitMix64(config.seed)
    root.next_u64(), root.next_u64()  # consumed by head initialisation
    shuffle_rng, pair_rng, mine_rng, drop_rng = (root.spawn() for _ in range(4))
    history = History()
    best, best_score = model.copy(), math.inf
    ckpt = Path(checkpoint_dir) if checkpoint_dir else None
    if ckpt:
        ckpt.mkdir(parents=True, exist_ok=True)
    for epoch in range(config.epochs):
        losses, sizes = [], []
        for idx in epoch_batches(len(corpus.inorganic.records), config.batch_size, shuffle_rng):
            batch = sample_pair_batch(corpus, idx, pair_rng, config.pair_prefer_activity)
            if len(batch) == 0:
                continue
            triplets = mine_hard_triplets(batch, mine_rng, config.triplet_margin)
            parts, grads = total_loss(model, batch, triplets, training=True, rng=drop_rng)
            opt.step(clip_grad_norm(grads, config.clip_norm))
            losses.append(parts.total)
            sizes.append(len(batch))
        history.train_loss.append(float(np.average(losses, weights=sizes)))
        history.val_loss.append(validation_loss(model, val, config) if val else float("nan"))
        history.val_combined_score.append(
            validation_combined_score(model, val_records, featurizer)
            if val and config.select_by == "val_combined_score" else float("nan"))
        score = _selection_score(config, history)
        improved = score < best_score
        if improved:
            best, best_score, history.best_epoch = model.copy(), score, epoch
        log.info("epoch %d/%d train %.4f val %.4f%s", epoch + 1, config.epochs,
                 history.train_loss[-1], history.val_loss[-1], " *" if improved else "")
        if ckpt:
            meta = {"epoch": epoch, "best": improved}
            save_checkpoint(ckpt / "last.cclp", model, config, meta)
            if improved:
                save_checkpoint(ckpt / "best.cclp", model, config, {"epoch": epoch, "best": True})
        if on_epoch_end is not None:
            on_epoch_end(epoch, model, history)
    return best, history


def embed(model: ChemClipModel, records: Sequence[ActivityRecord],
          featurizer: Featurizer | None = None) -> np.ndarray:
    """256-d unit-norm embedding per record (rows follow ``records``)."""
    featurizer = featurizer or Featurizer()
    out = np.zeros((len(records), model.embed_dim))
    for domain in (INORGANIC, ORGANIC):
        pick = [k for k, r in enumerate(records) if r.domain == domain]
        if not pick:
            continue
        feats, rows = featurizer.matrix([records[k] for k in pick])
        out[pick] = model.encode(feats, domain)[rows]
    return out


# ---------------------------------------------------------------- checkpoints

def write_container(path, tensors: Sequence[tuple[str, np.ndarray]], trailer: dict) -> None:
    """Binary tensor container.

    Layout: ``CCLP``, u32 version, then per tensor u32 name length, UTF-8
    name, u32 rows, u32 cols, rows*cols little-endian f64; a zero name length
    ends the tensor list and is followed by u32 length + UTF-8 JSON trailer.
    """
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    for name, arr in tensors:
        arr = np.asarray(arr, dtype="<f8")
        mat = arr.reshape(1, -1) if arr.ndim == 1 else arr
        raw = name.encode("utf-8")
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<II", *mat.shape))
        buf.write(np.ascontiguousarray(mat).tobytes())
    buf.write(struct.pack("<I", 0))
    doc = json.dumps(trailer, sort_keys=True).encode("utf-8")
    buf.write(struct.pack("<I", len(doc)))
    buf.write(doc)
    Path(path).write_bytes(buf.getvalue())


def read_container(path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    if not path.exists():
        raise MissingInput(f"{path} does not exist")
    data = path.read_bytes()
    if data[:4] != MAGIC:
        raise FormatError(f"{path}: not a checkpoint (bad magic)")
    if len(data) < 8:
        raise FormatError(f"{path}: truncated header")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != VERSION:
        raise UnsupportedVersion(f"{path}: checkpoint version {version} (supported: {VERSION})")
    pos = 8
    tensors: dict[str, np.ndarray] = {}
    try:
        while True:
            (n,) = struct.unpack_from("<I", data, pos)
            pos += 4
            if n == 0:
                break
            name = data[pos:pos + n].decode("utf-8")
            pos += n
            rows, cols = struct.unpack_from("<II", data, pos)
            pos += 8
            size = rows * cols * 8
            if pos + size > len(data):
                raise FormatError(f"{path}: truncated tensor {name!r}")
            tensors[name] = np.frombuffer(data, dtype="<f8", count=rows * cols,
                                          offset=pos).reshape(rows, cols).astype(np.float64)
            pos += size
        (n,) = struct.unpack_from("<I", data, pos)
        trailer = json.loads(data[pos + 4:pos + 4 + n].decode("utf-8"))
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: corrupt checkpoint ({exc})") from None
    return tensors, trailer


def _mlp_from(tensors: dict, prefix: str, dropout: float) -> Mlp:
    weights, biases = [], []
    k = 0
    while f"{prefix}{k}.weight" in tensors:
        weights.append(tensors[f"{prefix}{k}.weight"].copy())
        biases.append(tensors[f"{prefix}{k}.bias"].reshape(-1).copy())
        k += 1
    if not weights:
        raise FormatError(f"checkpoint has no tensors for {prefix!r}")
    return Mlp(weights, biases, dropout)


def save_checkpoint(path, model: ChemClipModel, config: TrainConfig, meta: dict | None = None):
    trailer = {"kind": "chemclip", "config": config.to_dict(), "meta": meta or {}}
    write_container(path, model.named_parameters(), trailer)


def load_checkpoint(path) -> tuple[ChemClipModel, TrainConfig, dict]:
    tensors, trailer = read_container(path)
    if trailer.get("kind") != "chemclip":
        raise FormatError(f"{path}: not a ChemCLIP checkpoint")
    config = TrainConfig.from_dict(trailer["config"])
    model = ChemClipModel(_mlp_from(tensors, "inorganic_head.", config.dropout),
                          _mlp_from(tensors, "organic_head.", config.dropout),
                          config.temperature)
    return model, config, trailer.get("meta", {})


# ---------------------------------------------------------------- embedding tables

EMBED_META = ("record_id", "compound_id", "cell_line", "domain", "active")


@dataclass
class EmbeddingTable:
    record_id: list[str]
    compound_id: list[str]
    cell_line: list[str]
    domain: list[str]
    active: np.ndarray
    embeddings: np.ndarray

    def __len__(self) -> int:
        return len(self.record_id)

    @property
    def width(self) -> int:
        return self.embeddings.shape[1]

    @classmethod
    def from_records(cls, records: Sequence[ActivityRecord], embeddings: np.ndarray) -> "EmbeddingTable":
        return cls([r.record_id for r in records], [r.compound_id for r in records],
                   [r.cell_line for r in records], [r.domain for r in records],
                   np.array([r.active for r in records], dtype=bool), np.asarray(embeddings))

    def subset(self, mask) -> "EmbeddingTable":
        idx = np.flatnonzero(mask)
        pick = lambda xs: [xs[i] for i in idx]
        return EmbeddingTable(pick(self.record_id), pick(self.compound_id), pick(self.cell_line),
                              pick(self.domain), self.active[idx], self.embeddings[idx])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([*EMBED_META, *(f"e{k}" for k in range(self.width))])
            for k in range(len(self)):
                w.writerow([self.record_id[k], self.compound_id[k], self.cell_line[k],
                            self.domain[k], int(self.active[k]),
                            *(repr(float(x)) for x in self.embeddings[k])])


def import_external_embeddings(path, norm_tol: float = 1e-6) -> EmbeddingTable:
    """Read an embeddings CSV of any width; rows are renormalised to unit length."""
    path = Path(path)
    if not path.exists():
        raise MissingInput(f"{path} does not exist")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header[:5]) != EMBED_META or len(header) < 6:
            raise MalformedRow(f"header must start with {','.join(EMBED_META)},e0,...", 1)
        width = len(header) - 5
        meta: list[list[str]] = [[] for _ in EMBED_META]
        vecs, active = [], []
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise MalformedRow(f"expected {len(header)} fields, got {len(row)}", line)
            for k in range(4):
                meta[k].append(row[k])
            if row[3] not in (ORGANIC, INORGANIC):
                raise MalformedRow(f"domain {row[3]!r}", line)
            if row[4] not in ("0", "1"):
                raise MalformedRow(f"active must be 0 or 1, got {row[4]!r}", line)
            active.append(row[4] == "1")
            try:
                vecs.append([float(x) for x in row[5:]])
            except ValueError as exc:
                raise MalformedRow(f"non-numeric embedding value ({exc})", line) from None
    emb = np.array(vecs, dtype=np.float64).reshape(-1, width)
    if not np.all(np.isfinite(emb)):
        raise MalformedRow("non-finite embedding value", 0)
    norms = np.linalg.norm(emb, axis=1)
    if np.any(np.abs(norms - 1.0) > norm_tol):
        log.warning("%s: %d row(s) not unit-norm; renormalising", path,
                    int(np.sum(np.abs(norms - 1.0) > norm_tol)))
        emb = l2_normalize_rows(emb)[0]
    return EmbeddingTable(meta[0], meta[1], meta[2], meta[3], np.array(active, dtype=bool), emb)


# ---------------------------------------------------------------- estimator

class ChemClip(TransformerMixin, BaseEstimator):
    """Estimator wrapper: ``fit`` on activity records, ``transform`` to embeddings.

    Parameters mirror :class:`TrainConfig`.
    """

    def __init__(self, epochs=100, batch_size=128, lr=1e-3, weight_decay=0.01, betas=(0.9, 0.999),
                 clip_norm=1.0, dropout=0.1, temperature=0.07, triplet_margin=0.2, hidden_dim=512,
                 embed_dim=256, pair_prefer_activity=True, select_by="val_combined_score", seed=0):
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.weight_decay = weight_decay
        self.betas = betas
        self.clip_norm = clip_norm
        self.dropout = dropout
        self.temperature = temperature
        self.triplet_margin = triplet_margin
        self.hidden_dim = hidden_dim
        self.embed_dim = embed_dim
        self.pair_prefer_activity = pair_prefer_activity
        self.select_by = select_by
        self.seed = seed

    @property
    def config(self) -> TrainConfig:
        return TrainConfig(**self.get_params())

    def fit(self, X: Sequence[ActivityRecord], y=None, validation: Sequence[ActivityRecord] = (),
            checkpoint_dir=None):
        self._featurizer = Featurizer()
        self.model_, self.history_ = train(self.config, X, validation, checkpoint_dir, self._featurizer)
        return self

    def transform(self, X: Sequence[ActivityRecord]) -> np.ndarray:
        check_is_fitted(self, "model_")
        return embed(self.model_, X, getattr(self, "_featurizer", None))

    @classmethod
    def from_checkpoint(cls, path) -> "ChemClip":
        model, config, _ = load_checkpoint(path)
        est = cls(**config.to_dict())
        est.betas = tuple(est.betas)
        est.model_ = model
        est.history_ = None
        return est
