"""Seeded synthetic corpora with a planted fragment -> activity rule.

Cell lines are split into two families.  Each compound belongs to one
family, is screened only on that family's cell lines, and carries the
family's pharmacophore (nitro for family 0, carboxylic acid for family 1)
with probability 1/2.  Per record, ``P(active | fragment) = (1 + s) / 2``
and ``P(active | no fragment) = (1 - s) / 2``; label noise then flips the
label by moving the readout across the activity threshold.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

from .elements import METALS
from .exceptions import ConfigError
from .rng import SplitMix64

PHARMACOPHORES = ("N(=O)=O", "C(=O)O")

# chain pieces; the next piece bonds to the last atom outside any branch
_PIECES = ("C", "CC", "C(C)", "C(C)C", "C(F)", "C(Cl)", "CO", "CN", "CCC", "C(=C)",
           "c1ccccc1", "c1ccc(cc1)", "c1ccncc1", "C1CCCCC1", "C1CCC(CC1)", "OC", "SC", "CS")

NCI60_NAMES = (
    "MCF7", "MDA-MB-231", "A549", "HCT-116", "HT29", "SF-268", "OVCAR-3", "PC-3", "K-562",
    "UACC-62", "HOP-62", "NCI-H460", "SK-MEL-5", "786-0", "DU-145", "T-47D", "IGROV1",
    "COLO 205", "SW-620", "HL-60(TB)", "MOLT-4", "RPMI-8226", "SF-295", "U251", "ACHN",
    "CAKI-1", "OVCAR-8", "SK-OV-3", "MALME-3M", "M14", "LOX IMVI", "HCC-2998", "KM12",
    "HS 578T", "BT-549", "NCI-H226", "NCI-H23", "EKVX", "A498", "UO-31", "SNB-75",
    "SF-539", "SNB-19", "OVCAR-4", "OVCAR-5", "NCI/ADR-RES", "SK-MEL-2", "SK-MEL-28",
    "UACC-257", "MDA-MB-435", "CCRF-CEM", "SR", "TK-10", "RXF 393", "SN12C", "CAKI-1",
    "HCT-15", "NCI-H322M", "NCI-H522", "A549/ATCC",
)

# prevalence in the reference metal-complex corpus; the remaining metals share the rest
_MAJOR_METALS = {"Ru": 0.5205, "Ti": 0.1757, "Ir": 0.0989}
OXIDATION = {"Au": (1, 3), "Co": (2, 3), "Cu": (1, 2), "Ir": (3,), "Os": (2, 3),
             "Pt": (2, 4), "Re": (1,), "Rh": (3,), "Ru": (2, 3), "Ti": (4,)}


def metal_weights() -> dict[str, float]:
    rest = (1.0 - sum(_MAJOR_METALS.values())) / (len(METALS) - len(_MAJOR_METALS))
    return {m: _MAJOR_METALS.get(m, rest) for m in METALS}


@dataclass
class SynthConfig:
    n_organic: int = 2000
    n_inorganic: int = 400
    n_cell_lines: int = 10
    signal_strength: float = 0.9
    label_noise: float = 0.05
    seed: int = 0
    min_lines_per_compound: int = 3
    max_lines_per_compound: int = 5

    def __post_init__(self):
        if min(self.n_organic, self.n_inorganic, self.n_cell_lines) < 4:
            raise ConfigError("compound and cell-line counts must be at least 4")
        if not (0 <= self.signal_strength <= 1 and 0 <= self.label_noise <= 1):
            raise ConfigError("signal_strength and label_noise must lie in [0, 1]")
        if self.n_cell_lines > len(set(NCI60_NAMES)):
            raise ConfigError(f"at most {len(set(NCI60_NAMES))} cell lines available")
        if not 1 <= self.min_lines_per_compound <= self.max_lines_per_compound:
            raise ConfigError("need 1 <= min_lines_per_compound <= max_lines_per_compound")


def random_smiles(rng: SplitMix64, pharmacophore: str | None) -> str:
    pieces = [rng.choice(_PIECES) for _ in range(2 + rng.integer(4))]
    if pharmacophore is not None:
        pos = rng.integer(len(pieces) + 1)
        if pos == len(pieces):
            pieces.append(pharmacophore)
        else:
            pieces.insert(pos, f"C({pharmacophore})")
    return "".join(pieces)


def _variant_name(name: str, k: int) -> str:
    """Database-style spelling of an NCI60 name (resolved through the cell-line map)."""
    style = k % 3
    if style == 0:
        return name.lower()
    if style == 1:
        return name.replace("-", " ").replace("(", "").replace(")", "").title()
    return name.replace("-", "").replace(" ", "")


def _cell_lines(n: int) -> list[str]:
    seen, out = set(), []
    for name in NCI60_NAMES:
        if name not in seen:
            seen.add(name)
            out.append(name)
        if len(out) == n:
            break
    return out


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def generate(config: SynthConfig) -> tuple[str, str, str]:
    """Return ``(organic_csv, inorganic_csv, cell_map_csv)`` as text."""
    rng = SplitMix64(config.seed)
    lines = _cell_lines(config.n_cell_lines)
    families = [[c for j, c in enumerate(lines) if j % 2 == f] for f in (0, 1)]
    variants = {c: _variant_name(c, j) for j, c in enumerate(lines)}
    s, noise = config.signal_strength, config.label_noise
    weights = metal_weights()
    metals = list(weights)
    cumulative = []
    acc = 0.0
    for m in metals:
        acc += weights[m]
        cumulative.append(acc)

    def label(has_fragment: bool) -> bool:
        p = (1 + s) / 2 if has_fragment else (1 - s) / 2
        active = rng.random() < p
        if rng.random() < noise:
            active = not active
        return active

    def screen(family: int):
        pool = families[family]
        k = min(len(pool), config.min_lines_per_compound
                + rng.integer(config.max_lines_per_compound - config.min_lines_per_compound + 1))
        order = rng.permutation(len(pool))[:k]
        return [pool[i] for i in sorted(order)]

    organic_rows = []
    for c in range(config.n_organic):
        family = rng.integer(2)
        has = rng.random() < 0.5
        smi = random_smiles(rng, PHARMACOPHORES[family] if has else None)
        for line in screen(family):
            active = label(has)
            gi = rng.uniform(0.0, 45.0) if active else rng.uniform(55.0, 120.0)
            organic_rows.append((f"ORG{c:06d}", smi, line, f"{gi:.3f}"))

    inorganic_rows = []
    for c in range(config.n_inorganic):
        family = rng.integer(2)
        has = rng.random() < 0.5
        smi = random_smiles(rng, PHARMACOPHORES[family] if has else None)
        u = rng.random()
        metal = next((m for m, cum in zip(metals, cumulative) if u < cum), metals[-1])
        ox = rng.choice(OXIDATION[metal])
        for line in screen(family):
            active = label(has)
            ic50 = 10 ** rng.uniform(-1.0, 0.9) if active else 10 ** rng.uniform(1.05, 2.0)
            inorganic_rows.append((f"INO{c:06d}", smi, metal, ox, variants[line], f"{ic50:.4f}"))

    cell_map = [(variants[c], c) for c in lines]
    return (_csv_text(("compound_id", "smiles", "cell_line", "gi_mean"), organic_rows),
            _csv_text(("compound_id", "ligand_smiles", "metal", "oxidation_state", "cell_line",
                       "ic50_um"), inorganic_rows),
            _csv_text(("source_name", "nci60_name"), cell_map))


def write_corpus(config: SynthConfig, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, text in zip(("organic", "inorganic", "cell_map"), generate(config)):
        paths[name] = out / f"{name}.csv"
        paths[name].write_text(text, encoding="utf-8")
    return paths
