"""Command-line front end.

Every subcommand works inside a run directory (``--out``, default ``run``)
and writes machine-readable outputs there; log messages go to stderr.
Exit codes: 0 success, 1 usage error, 2 data error.
"""
from __future__ import annotations

import argparse
import copy
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import data as dataio
from .classifier import ActivityClassifier, ClassifierConfig
from .exceptions import ChemClipError, ConfigError, MissingInput
from .fingerprint import morgan_fingerprint
from .model import (
    ChemClip,
    EmbeddingTable,
    Featurizer,
    TrainConfig,
    embed,
    import_external_embeddings,
    load_checkpoint,
    train,
)
from .pipeline import (
    DOMAINS,
    alignment_report,
    classification_table,
    evaluate_domain_classifiers,
    fit_domain_classifiers,
    organic_train_keep,
    partition,
    table_split_masks,
)
from .projection import pca_2d, render_scatter_svg, tsne_2d, write_coordinates
from .smiles import parse_smiles
from .synth import SynthConfig, write_corpus

log = logging.getLogger("chemclip")

SUBCOMMANDS = ("ingest", "split", "train", "embed", "import-embeddings", "eval-align",
               "train-clf", "eval-clf", "project", "synth", "fp")

DEFAULT_CONFIG = {
    "data": {"organic": "data/organic.csv", "inorganic": "data/inorganic.csv",
             "cell_map": "data/cell_map.csv", "inactive_ratio": 5},
    "train": TrainConfig().to_dict(),
    "classifier": ClassifierConfig().to_dict(),
    "output": {"directory": "run"},
}

RECORDS = "records.jsonl"
SPLIT = "split.json"
RESOLVED = "resolved_config.json"
EMBEDDINGS = "embeddings.csv"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- config

def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {path + key!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {path + key!r} must be an object")
            out[key] = _merge(base[key], value, f"{path}{key}.")
        else:
            out[key] = value
    return out


def resolve_config(args) -> dict:
    """Defaults <- run-dir snapshot <- --config file <- command-line overrides."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    out_dir = getattr(args, "out", None)
    snapshot = Path(out_dir) / RESOLVED if out_dir else None
    if snapshot and snapshot.exists() and not getattr(args, "config", None):
        cfg = _merge(cfg, json.loads(snapshot.read_text()))
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise MissingInput(f"config file {path} does not exist")
        try:
            cfg = _merge(cfg, json.loads(path.read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if out_dir:
        cfg["output"]["directory"] = str(out_dir)
    data_dir = getattr(args, "data_dir", None)
    if data_dir:
        for key in ("organic", "inorganic", "cell_map"):
            cfg["data"][key] = str(Path(data_dir) / f"{key}.csv")
    for key in ("organic", "inorganic", "cell_map"):
        if getattr(args, key, None):
            cfg["data"][key] = getattr(args, key)
    for key in ("epochs", "batch_size", "seed"):
        if getattr(args, key, None) is not None:
            cfg["train"][key] = getattr(args, key)
    if getattr(args, "seed", None) is not None:
        cfg["classifier"]["seed"] = args.seed
    # validate sections
    TrainConfig.from_dict(cfg["train"])
    ClassifierConfig.from_dict(cfg["classifier"])
    return cfg


def _run_dir(cfg: dict) -> Path:
    path = Path(cfg["output"]["directory"])
    path.mkdir(parents=True, exist_ok=True)
    (path / RESOLVED).write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
    return path


def _clean(obj):
    if isinstance(obj, float):
        return None if math.isnan(obj) or math.isinf(obj) else obj
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n")


def _need(path: Path, hint: str) -> Path:
    if not path.exists():
        raise MissingInput(f"{path} not found ({hint})")
    return path


def _load_split(run: Path, records, seed: int) -> dataio.DatasetSplit:
    path = run / SPLIT
    if path.exists():
        return dataio.DatasetSplit.from_json(path.read_text())
    split = dataio.compound_split(records, seed)
    path.write_text(split.to_json() + "\n")
    return split


# ---------------------------------------------------------------- subcommands

def cmd_synth(args) -> None:
    cfg = SynthConfig(n_organic=args.n_organic, n_inorganic=args.n_inorganic,
                      n_cell_lines=args.n_cell_lines, signal_strength=args.signal,
                      label_noise=args.noise, seed=args.seed)
    paths = write_corpus(cfg, args.out)
    log.info("wrote %s", ", ".join(str(p) for p in paths.values()))


def cmd_ingest(args) -> None:
    cfg = resolve_config(args)
    run = _run_dir(cfg)
    d = cfg["data"]
    report = dataio.IngestReport()
    organic, inorganic, report = dataio.ingest(d["organic"], d["inorganic"], d["cell_map"], report)
    dataio.write_records(organic + inorganic, run / RECORDS)
    _write_json(run / "ingest_report.json", report.to_dict())
    log.info("kept %d organic and %d inorganic records", len(organic), len(inorganic))


def cmd_split(args) -> None:
    cfg = resolve_config(args)
    run = _run_dir(cfg)
    records = dataio.read_records(_need(run / RECORDS, "run `ingest` first"))
    split = dataio.compound_split(records, cfg["train"]["seed"])
    (run / SPLIT).write_text(split.to_json() + "\n")
    counts = {s: sum(v == s for v in split.assignment.values()) for s in dataio.SPLITS}
    log.info("split %s", counts)


def cmd_train(args) -> None:
    cfg = resolve_config(args)
    run = _run_dir(cfg)
    records = dataio.read_records(_need(run / RECORDS, "run `ingest` first"))
    tcfg = TrainConfig.from_dict(cfg["train"])
    split = _load_split(run, records, tcfg.seed)
    parts = partition(records, split, cfg["data"]["inactive_ratio"])
    log.info("training on %d records (%d validation)", len(parts.train), len(parts.val))
    _, history = train(tcfg, parts.train, parts.val, checkpoint_dir=run / "checkpoints")
    _write_json(run / "history.json", history.to_dict())


def _checkpoint(run: Path, args) -> Path:
    path = Path(args.checkpoint) if getattr(args, "checkpoint", None) else run / "checkpoints" / "best.cclp"
    return _need(path, "run `train` first")


def cmd_embed(args) -> None:
    cfg = resolve_config(args)
    run = _run_dir(cfg)
    records = dataio.read_records(_need(run / RECORDS, "run `ingest` first"))
    model, _, _ = load_checkpoint(_checkpoint(run, args))
    table = EmbeddingTable.from_records(records, embed(model, records))
    table.write_csv(run / EMBEDDINGS)
    log.info("wrote %d embeddings", len(table))


def cmd_import(args) -> None:
    cfg = resolve_config(args)
    run = _run_dir(cfg)
    table = import_external_embeddings(args.input)
    table.write_csv(run / EMBEDDINGS)
    _write_json(run / "import_report.json", {"source": str(args.input), "rows": len(table),
                                             "width": table.width})
    log.info("imported %d embeddings of width %d", len(table), table.width)


def _table_subset(run: Path, table: EmbeddingTable, which: str):
    if which == "all":
        return table, "all"
    split_path = run / SPLIT
    if not split_path.exists():
        if which == "test":
            raise MissingInput(f"{split_path} not found (run `split` or `train` first)")
        return table, "all"
    split = dataio.DatasetSplit.from_json(split_path.read_text())
    mask = np.array([split.assignment.get(c) == "test" for c in table.compound_id])
    return table.subset(mask), "test"


def cmd_eval_align(args) -> None:
    cfg = resolve_config(args)
    run = _run_dir(cfg)
    table = import_external_embeddings(_need(Path(args.embeddings) if args.embeddings else run / EMBEDDINGS,
                                             "run `embed` or `import-embeddings` first"))
    subset, used = _table_subset(run, table, args.split)
    report = alignment_report(subset)
    doc = report.to_dict()
    doc["subset"] = used
    _write_json(run / "align.json", doc)
    (run / "align.txt").write_text(report.to_text() + f"embeddings: {used} records\n")
    sys.stderr.write(report.to_text())


def _classifier_inputs(run: Path, args, cfg):
    table = import_external_embeddings(_need(Path(args.embeddings) if args.embeddings else run / EMBEDDINGS,
                                             "run `embed` or `import-embeddings` first"))
    split = dataio.DatasetSplit.from_json(_need(run / SPLIT, "run `split` or `train` first").read_text())
    keep = organic_train_keep(table, split, cfg["data"]["inactive_ratio"])
    return table, table_split_masks(table, split, keep)


def cmd_train_clf(args) -> None:
    cfg = resolve_config(args)
    run = _run_dir(cfg)
    table, masks = _classifier_inputs(run, args, cfg)
    classifiers = fit_domain_classifiers(table, masks, ClassifierConfig.from_dict(cfg["classifier"]))
    out = run / "classifiers"
    out.mkdir(exist_ok=True)
    for domain, clf in classifiers.items():
        clf.save(out / f"{domain}.cclp")
        log.info("%s classifier: threshold %.4f, pos_weight %.3f", domain, clf.threshold_, clf.pos_weight_)


def cmd_eval_clf(args) -> None:
    cfg = resolve_config(args)
    run = _run_dir(cfg)
    table, masks = _classifier_inputs(run, args, cfg)
    classifiers = {d: ActivityClassifier.load(_need(run / "classifiers" / f"{d}.cclp", "run `train-clf` first"))
                   for d in DOMAINS}
    reports = evaluate_domain_classifiers(classifiers, table, masks[2])
    doc = {d: r.to_dict() for d, r in reports.items()}
    doc["metadata"] = {"architecture": "embedding -> 128 -> 64 -> 1 (three weight layers)",
                       "organic_training_set": "inactive-subsampled training split",
                       "threshold": "F1-optimal on validation split"}
    _write_json(run / "clf.json", doc)
    text = classification_table(reports)
    (run / "clf.txt").write_text(text)
    sys.stderr.write(text)


def cmd_project(args) -> None:
    run = Path(args.run)
    table = import_external_embeddings(_need(Path(args.embeddings) if args.embeddings else run / EMBEDDINGS,
                                             "run `embed` or `import-embeddings` first"))
    subset, _ = _table_subset(run, table, args.split)
    if args.max_points and len(subset) > args.max_points:
        from .rng import SplitMix64
        idx = np.sort(SplitMix64(args.seed).permutation(len(subset))[:args.max_points])
        mask = np.zeros(len(subset), dtype=bool)
        mask[idx] = True
        subset = subset.subset(mask)
    if args.method == "pca":
        proj = pca_2d(subset.embeddings)
    else:
        proj = tsne_2d(subset.embeddings, args.perplexity, args.iterations, args.seed)
    render_scatter_svg(proj, subset.domain, subset.active, args.out,
                       title=f"ChemCLIP embeddings ({args.method})")
    if args.coords:
        write_coordinates(args.coords, subset.record_id, proj.coordinates, subset.domain, subset.active)
    log.info("wrote %s (%d points)", args.out, len(subset))


def cmd_fp(args) -> None:
    fp = morgan_fingerprint(parse_smiles(args.smiles))
    lines = [str(fp.n_distinct), *(str(b) for b in fp.on_bits)]
    sys.stdout.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="chemclip", description="Contrastive organic/inorganic compound embeddings.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", metavar="{" + ",".join(SUBCOMMANDS) + "}",
                           parser_class=_Parser)

    def run_cmd(name, help_, func, data=False, train_opts=False, embeddings=False):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="RunConfig JSON")
        sp.add_argument("--out", default="run", help="run directory (default: run)")
        sp.add_argument("--seed", type=int)
        if data:
            sp.add_argument("--data-dir", help="directory holding organic.csv, inorganic.csv, cell_map.csv")
            sp.add_argument("--organic")
            sp.add_argument("--inorganic")
            sp.add_argument("--cell-map", dest="cell_map")
        if train_opts:
            sp.add_argument("--epochs", type=int)
            sp.add_argument("--batch-size", dest="batch_size", type=int)
        if embeddings:
            sp.add_argument("--embeddings", help="embeddings CSV (default: <run>/embeddings.csv)")
        sp.set_defaults(func=func)
        return sp

    run_cmd("ingest", "load, clean and label both corpora", cmd_ingest, data=True)
    run_cmd("split", "compound-level 70/15/15 split", cmd_split)
    run_cmd("train", "train the dual encoder", cmd_train, train_opts=True)
    sp = run_cmd("embed", "export embeddings for all records", cmd_embed)
    sp.add_argument("--checkpoint", help="checkpoint (default: <run>/checkpoints/best.cclp)")
    sp = run_cmd("import-embeddings", "import externally computed embeddings", cmd_import)
    sp.add_argument("--input", required=True)
    sp = run_cmd("eval-align", "centroid alignment metrics", cmd_eval_align, embeddings=True)
    sp.add_argument("--split", choices=("test", "all", "auto"), default="auto")
    run_cmd("train-clf", "train frozen-embedding activity classifiers", cmd_train_clf, embeddings=True)
    run_cmd("eval-clf", "evaluate the activity classifiers on the test split", cmd_eval_clf,
            embeddings=True)

    sp = sub.add_parser("project", help="2-D projection plot of embeddings")
    sp.add_argument("--method", choices=("tsne", "pca"), default="tsne")
    sp.add_argument("--out", required=True, help="SVG output path")
    sp.add_argument("--coords", help="coordinate CSV output path")
    sp.add_argument("--run", default="run", help="run directory (default: run)")
    sp.add_argument("--embeddings")
    sp.add_argument("--split", choices=("test", "all", "auto"), default="auto")
    sp.add_argument("--perplexity", type=float, default=30.0)
    sp.add_argument("--iterations", type=int, default=1000)
    sp.add_argument("--max-points", type=int, default=0, help="random subsample size (0: all)")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_project)

    sp = sub.add_parser("synth", help="generate a synthetic corpus")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n-organic", type=int, default=2000)
    sp.add_argument("--n-inorganic", type=int, default=400)
    sp.add_argument("--n-cell-lines", type=int, default=10)
    sp.add_argument("--signal", type=float, default=0.9)
    sp.add_argument("--noise", type=float, default=0.05)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("fp", help="print a molecule's fingerprint (debug)")
    sp.add_argument("--smiles", required=True)
    sp.set_defaults(func=cmd_fp)
    return p


def _thread_limit():
    value = os.environ.get("CHEMCLIP_THREADS")
    if not value:
        return None
    try:
        n = int(value)
    except ValueError:
        raise UsageError(f"CHEMCLIP_THREADS must be an integer, got {value!r}") from None
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=max(1, n))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if not getattr(args, "command", None):
        parser.print_help(sys.stderr)
        return 1
    try:
        limiter = _thread_limit()
        try:
            args.func(args)
        finally:
            if limiter is not None:
                limiter.restore_original_limits()
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except (ChemClipError, FileNotFoundError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
