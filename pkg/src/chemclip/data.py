"""Corpus ingestion: CSV loading, cell-line standardisation, metal transfer,
compound-level splitting and inactive subsampling."""
from __future__ import annotations

import csv
import json
import logging
import re
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .elements import METALS
from .exceptions import MalformedRow, MissingColumn, MissingInput, UnknownMetal
from .rng import SplitMix64
from .smiles import metal_atoms, parse_smiles, remove_atoms, to_smiles
from .exceptions import SmilesError

log = logging.getLogger(__name__)

ORGANIC, INORGANIC = "organic", "inorganic"
GI_THRESHOLD = 50.0
IC50_THRESHOLD_UM = 10.0
ORGANIC_COLUMNS = ("compound_id", "smiles", "cell_line", "gi_mean")
INORGANIC_COLUMNS = ("compound_id", "ligand_smiles", "metal", "oxidation_state", "cell_line", "ic50_um")
SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class ActivityRecord:
    """One compound x cell-line measurement."""

    record_id: str
    compound_id: str
    domain: str
    smiles: str
    cell_line: str
    raw_value: float
    active: bool
    metal: str | None = None
    oxidation_state: int | None = None

    def __post_init__(self):
        if self.domain not in (ORGANIC, INORGANIC):
            raise ValueError(f"unknown domain {self.domain!r}")
        if (self.domain == INORGANIC) != (self.metal is not None):
            raise ValueError("metal is required for inorganic records and forbidden otherwise")


@dataclass
class IngestReport:
    """Kept/dropped counts per rule, serialised as the ``ingest`` JSON report."""

    counts: dict = field(default_factory=lambda: defaultdict(int))
    notes: list = field(default_factory=list)

    def add(self, key: str, n: int = 1):
        self.counts[key] += n

    def to_dict(self) -> dict:
        return {"counts": dict(sorted(self.counts.items())), "notes": list(self.notes)}


def is_active_organic(gi_mean: float) -> bool:
    return gi_mean < GI_THRESHOLD


def is_active_inorganic(ic50_um: float) -> bool:
    return ic50_um < IC50_THRESHOLD_UM


def _rows(path, required: Sequence[str]):
    path = Path(path)
    if not path.exists():
        raise MissingInput(f"{path} does not exist")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise MissingColumn(f"{path}: missing column(s) {', '.join(missing)}")
        for row in reader:
            if None in row or any(row[c] is None for c in required):
                raise MalformedRow("wrong number of fields", reader.line_num)
            yield reader.line_num, {k: v.strip() for k, v in row.items()}


def _number(value: str, line: int, column: str, kind=float):
    try:
        x = kind(value)
    except ValueError:
        raise MalformedRow(f"{column}={value!r} is not a number", line) from None
    if kind is float and x != x:
        raise MalformedRow(f"{column} is NaN", line)
    return x


def _parses(smiles: str) -> bool:
    try:
        parse_smiles(smiles)
    except SmilesError:
        return False
    return True


def load_organic_csv(path, report: IngestReport | None = None) -> list[ActivityRecord]:
    """Read the organic screen; ``active`` iff mean growth inhibition < 50.

    Rows whose SMILES does not parse are dropped and counted in ``report``.
    """
    report = report if report is not None else IngestReport()
    out = []
    for line, row in _rows(path, ORGANIC_COLUMNS):
        gi = _number(row["gi_mean"], line, "gi_mean")
        if not _parses(row["smiles"]):
            report.add("organic.dropped.invalid_smiles")
            continue
        out.append(ActivityRecord(
            record_id=f"org-{line}", compound_id=row["compound_id"], domain=ORGANIC,
            smiles=row["smiles"], cell_line=row["cell_line"], raw_value=gi,
            active=is_active_organic(gi)))
    report.add("organic.loaded", len(out))
    log.info("loaded %d organic records from %s", len(out), path)
    return out


def load_inorganic_csv(path, report: IngestReport | None = None) -> list[ActivityRecord]:
    """Read the metal-complex corpus; ``active`` iff IC50 < 10 uM."""
    report = report if report is not None else IngestReport()
    out = []
    for line, row in _rows(path, INORGANIC_COLUMNS):
        ic50 = _number(row["ic50_um"], line, "ic50_um")
        ox = _number(row["oxidation_state"] or "0", line, "oxidation_state", int)
        if row["metal"] not in METALS:
            raise UnknownMetal(f"line {line}: {row['metal']!r} is not one of {', '.join(METALS)}")
        if not _parses(row["ligand_smiles"]):
            report.add("inorganic.dropped.invalid_smiles")
            continue
        out.append(ActivityRecord(
            record_id=f"ino-{line}", compound_id=row["compound_id"], domain=INORGANIC,
            smiles=row["ligand_smiles"], cell_line=row["cell_line"], raw_value=ic50,
            active=is_active_inorganic(ic50), metal=row["metal"], oxidation_state=ox))
    report.add("inorganic.loaded", len(out))
    log.info("loaded %d inorganic records from %s", len(out), path)
    return out


_STRIP = re.compile(r"[\s\-()]")


def normalize_cell_line(name: str) -> str:
    return _STRIP.sub("", name).upper()


class CellLineMap:
    """Source cell-line names -> standard NCI60 names, matched after normalisation."""

    def __init__(self, entries: Iterable[tuple[str, str]] = ()):
        self.entries = list(entries)
        self._lookup = {}
        for _, target in self.entries:
            self._lookup[normalize_cell_line(target)] = target
        for source, target in self.entries:
            self._lookup[normalize_cell_line(source)] = target

    @property
    def vocabulary(self) -> set[str]:
        return {t for _, t in self.entries}

    def lookup(self, name: str) -> str | None:
        return self._lookup.get(normalize_cell_line(name))

    @classmethod
    def from_csv(cls, path) -> "CellLineMap":
        return cls((row["source_name"], row["nci60_name"])
                   for _, row in _rows(path, ("source_name", "nci60_name")))


def standardize_cell_lines(records: Sequence[ActivityRecord], cell_map: CellLineMap):
    """Rename cell lines to NCI60 names; unmapped records are dropped.

    Returns:
        ``(records, dropped_count)``
    """
    kept = []
    for r in records:
        target = cell_map.lookup(r.cell_line)
        if target is None:
            continue
        kept.append(r if target == r.cell_line else replace(r, cell_line=target))
    return kept, len(records) - len(kept)


def filter_shared_cell_lines(organic, inorganic):
    shared = {r.cell_line for r in organic} & {r.cell_line for r in inorganic}
    if not shared:
        log.warning("organic and inorganic corpora share no cell lines")
    org = [r for r in organic if r.cell_line in shared]
    ino = [r for r in inorganic if r.cell_line in shared]
    return org, ino, shared


def transfer_metal_records(organic: Sequence[ActivityRecord]):
    """Move metal-containing organic records into the inorganic corpus.

    The first metal atom (in SMILES order) supplies the metal and, through its
    formal charge, the oxidation state; all metal atoms are deleted to give the
    ligand SMILES.
    """
    kept, moved = [], []
    for r in organic:
        graph = parse_smiles(r.smiles)
        metals = metal_atoms(graph)
        if not metals:
            kept.append(r)
            continue
        elements = {graph.atoms[i].element for i in metals}
        first = graph.atoms[metals[0]]
        if len(elements) > 1:
            log.warning("%s carries several metals (%s); using %s", r.compound_id,
                        ", ".join(sorted(elements)), first.element)
        ligand = to_smiles(remove_atoms(graph, metals))
        moved.append(replace(r, domain=INORGANIC, smiles=ligand, metal=first.element,
                             oxidation_state=first.formal_charge))
    return kept, moved


@dataclass
class DatasetSplit:
    assignment: dict[str, str]
    seed: int

    def of(self, record: ActivityRecord) -> str:
        return self.assignment[record.compound_id]

    def select(self, records, split: str) -> list[ActivityRecord]:
        return [r for r in records if self.assignment.get(r.compound_id) == split]

    def to_json(self) -> str:
        return json.dumps({"seed": self.seed, "assignment": dict(sorted(self.assignment.items()))},
                          indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DatasetSplit":
        doc = json.loads(text)
        return cls(assignment=dict(doc["assignment"]), seed=int(doc["seed"]))


def compound_split(records: Sequence[ActivityRecord], seed: int,
                   fractions=(0.70, 0.15, 0.15)) -> DatasetSplit:
    """Assign every unique compound (and so all its records) to one split.

    Cut points are floored cumulative fractions, ``floor(n*train)`` and
    ``floor(n*(train+val))``, so every split size is within one compound of
    its exact share (10 compounds -> 7/1/2).
    """
    compounds = sorted({r.compound_id for r in records})
    order = SplitMix64(seed).permutation(len(compounds))
    n = len(compounds)
    eps = 1e-9  # 0.7 + 0.15 is 0.8499999... in binary
    n_train = int(n * fractions[0] + eps)
    n_val = int(n * (fractions[0] + fractions[1]) + eps) - n_train
    assignment = {}
    for rank, idx in enumerate(order):
        split = "train" if rank < n_train else "val" if rank < n_train + n_val else "test"
        assignment[compounds[idx]] = split
    return DatasetSplit(assignment, seed)


def subsample_compounds(compound_ids, actives, ratio: float = 5, seed: int = 0) -> set[str]:
    """Compound ids kept by inactive subsampling (see :func:`subsample_inactives`)."""
    by_compound: dict[str, bool] = {}
    for cid, act in zip(compound_ids, actives):
        by_compound[cid] = by_compound.get(cid, False) or bool(act)
    actives_ = sorted(c for c, a in by_compound.items() if a)
    inactives = sorted(c for c, a in by_compound.items() if not a)
    cap = int(ratio * len(actives_))
    if len(inactives) > cap:
        order = SplitMix64(seed).permutation(len(inactives))
        inactives = [inactives[i] for i in sorted(order[:cap])]
    return set(actives_) | set(inactives)


def subsample_inactives(records: Sequence[ActivityRecord], ratio: float = 5, seed: int = 0):
    """Keep all active compounds and at most ``ratio`` inactive compounds per active one.

    A compound counts as active if any of its records is active.  Sampling
    is by unique compound, without replacement; every record of a sampled
    compound is kept.
    """
    keep = subsample_compounds([r.compound_id for r in records], [r.active for r in records],
                               ratio, seed)
    return [r for r in records if r.compound_id in keep]


def write_records(records: Iterable[ActivityRecord], path):
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(asdict(r), sort_keys=True) + "\n")


def read_records(path) -> list[ActivityRecord]:
    path = Path(path)
    if not path.exists():
        raise MissingInput(f"{path} does not exist (run `ingest` first)")
    with open(path, encoding="utf-8") as fh:
        return [ActivityRecord(**json.loads(line)) for line in fh if line.strip()]


def ingest(organic_csv, inorganic_csv, cell_map_csv, report: IngestReport | None = None):
    """Run the full ingestion pipeline.

    Order: load both corpora, move metal-containing organics to the inorganic
    side, standardise cell lines, keep only shared cell lines.
    """
    report = report if report is not None else IngestReport()
    organic = load_organic_csv(organic_csv, report)
    inorganic = load_inorganic_csv(inorganic_csv, report)
    organic, moved = transfer_metal_records(organic)
    report.add("organic.transferred_to_inorganic", len(moved))
    inorganic = inorganic + moved
    cell_map = CellLineMap.from_csv(cell_map_csv)
    organic, dropped = standardize_cell_lines(organic, cell_map)
    report.add("organic.dropped.unmapped_cell_line", dropped)
    inorganic, dropped = standardize_cell_lines(inorganic, cell_map)
    report.add("inorganic.dropped.unmapped_cell_line", dropped)
    n_org_lines = len({r.cell_line for r in organic})
    organic_f, inorganic_f, shared = filter_shared_cell_lines(organic, inorganic)
    report.add("organic.dropped.unshared_cell_line", len(organic) - len(organic_f))
    report.add("inorganic.dropped.unshared_cell_line", len(inorganic) - len(inorganic_f))
    report.counts["shared_cell_lines"] = len(shared)
    if n_org_lines != len(shared):
        report.notes.append(f"organic corpus covers {n_org_lines} cell lines; "
                            f"{len(shared)} are shared with the inorganic corpus")
    for name, recs in ((ORGANIC, organic_f), (INORGANIC, inorganic_f)):
        report.counts[f"{name}.kept"] = len(recs)
        report.counts[f"{name}.unique_compounds"] = len({r.compound_id for r in recs})
        report.counts[f"{name}.active_records"] = sum(r.active for r in recs)
    return organic_f, inorganic_f, report
