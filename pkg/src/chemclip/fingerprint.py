"""Morgan (ECFP-style) fingerprints and metal descriptors.

Atom identifiers are 64-bit FNV-1a hashes of little-endian integer tuples,
so fingerprints are identical on every platform.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .elements import ATOMIC_NUMBER, GROUP_NUMBER, METALS
from .exceptions import UnknownMetal
from .smiles import AROMATIC, DOUBLE, SINGLE, TRIPLE, MolGraph, parse_smiles, total_hydrogens

N_BITS = 2048
RADIUS = 2
METAL_DIM = len(METALS) + 3
INORGANIC_DIM = N_BITS + METAL_DIM

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK = (1 << 64) - 1
_BOND_CODE = {SINGLE: 1, DOUBLE: 2, TRIPLE: 3, AROMATIC: 4}


def fnv1a64(values: Sequence[int]) -> int:
    """FNV-1a over each value packed as an unsigned little-endian 64-bit word.

    Negative integers are taken modulo 2**64 (two's complement).
    """
    h = _FNV_OFFSET
    for byte in struct.pack(f"<{len(values)}Q", *(v & _MASK for v in values)):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK
    return h


@dataclass(frozen=True)
class Fingerprint:
    bits: np.ndarray  # bool, length n_bits
    n_distinct: int
    identifiers: tuple[int, ...] = ()

    @property
    def on_bits(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.bits)]


def _heavy(graph: MolGraph) -> list[int]:
    return [i for i, a in enumerate(graph.atoms) if a.element != "H"]


def morgan_fingerprint(graph: MolGraph, radius: int = RADIUS, nbits: int = N_BITS) -> Fingerprint:
    """Fold circular atom environments up to ``radius`` bonds into ``nbits`` bits.

    Radius-0 identifiers are all kept (deduplicated by value).  From radius 1
    on, an environment is discarded when its bond set equals one seen in an
    earlier round, or when its identifier value was already emitted.  Within
    a round, environments are considered in ascending identifier order, which
    makes the result independent of atom ordering.
    """
    atoms = graph.atoms
    heavy = _heavy(graph)
    heavy_set = set(heavy)
    nbrs = {i: [(j, o) for j, o in graph.neighbors(i) if j in heavy_set] for i in heavy}
    bond_id = {}
    for k, b in enumerate(graph.bonds):
        bond_id[frozenset((b.begin, b.end))] = k

    ids = {}
    for i in heavy:
        a = atoms[i]
        ids[i] = fnv1a64((ATOMIC_NUMBER[a.element], len(nbrs[i]), total_hydrogens(graph, i),
                          a.formal_charge, int(a.aromatic), int(a.in_ring)))
    emitted: list[int] = []
    seen_ids: set[int] = set()
    for i in sorted(heavy, key=lambda i: ids[i]):
        if ids[i] not in seen_ids:
            seen_ids.add(ids[i])
            emitted.append(ids[i])

    seen_envs: set[frozenset] = {frozenset()}
    env = {i: frozenset() for i in heavy}
    for r in range(1, radius + 1):
        new_ids = {}
        new_env = {}
        for i in heavy:
            pairs = sorted((_BOND_CODE[o], ids[j]) for j, o in nbrs[i])
            flat = [r, ids[i]]
            for code, nid in pairs:
                flat.extend((code, nid))
            new_ids[i] = fnv1a64(flat)
            edges = set(env[i])
            for j, _ in nbrs[i]:
                edges |= env[j]
                edges.add(bond_id[frozenset((i, j))])
            new_env[i] = frozenset(edges)
        round_envs: set[frozenset] = set()
        for i in sorted(heavy, key=lambda i: new_ids[i]):
            e = new_env[i]
            if e in seen_envs or e in round_envs or new_ids[i] in seen_ids:
                continue
            round_envs.add(e)
            seen_ids.add(new_ids[i])
            emitted.append(new_ids[i])
        seen_envs |= round_envs
        ids, env = new_ids, new_env

    bits = np.zeros(nbits, dtype=bool)
    for ident in emitted:
        bits[ident % nbits] = True
    return Fingerprint(bits=bits, n_distinct=len(emitted), identifiers=tuple(emitted))


@dataclass(frozen=True)
class MetalFeatures:
    one_hot: tuple[float, ...]
    oxidation_state: float
    atomic_number_scaled: float
    valence_electrons_scaled: float

    def to_array(self) -> np.ndarray:
        return np.array([*self.one_hot, self.oxidation_state, self.atomic_number_scaled,
                         self.valence_electrons_scaled], dtype=np.float64)


def metal_feature_vector(metal: str, oxidation_state: int) -> MetalFeatures:
    if metal not in METALS:
        raise UnknownMetal(f"{metal!r} is not one of {', '.join(METALS)}")
    one_hot = tuple(1.0 if m == metal else 0.0 for m in METALS)
    return MetalFeatures(one_hot, float(oxidation_state), ATOMIC_NUMBER[metal] / 100.0,
                         GROUP_NUMBER[metal] / 10.0)


def featurize_organic(smiles: str) -> np.ndarray:
    return morgan_fingerprint(parse_smiles(smiles)).bits.astype(np.float64)


def featurize_inorganic(ligand_smiles: str, metal: str, oxidation_state: int) -> np.ndarray:
    metal_part = metal_feature_vector(metal, oxidation_state).to_array()
    return np.concatenate([featurize_organic(ligand_smiles), metal_part])


class MorganFingerprinter(TransformerMixin, BaseEstimator):
    """Stateless transformer: SMILES strings -> binary fingerprint matrix."""

    def __init__(self, radius: int = RADIUS, n_bits: int = N_BITS):
        self.radius = radius
        self.n_bits = n_bits

    def fit(self, X, y=None):
        self.n_features_out_ = self.n_bits
        return self

    def transform(self, X) -> np.ndarray:
        out = np.zeros((len(X), self.n_bits), dtype=np.float64)
        for k, smi in enumerate(X):
            out[k] = morgan_fingerprint(parse_smiles(smi), self.radius, self.n_bits).bits
        return out

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.requires_fit = False
        tags.input_tags.string = True
        return tags
