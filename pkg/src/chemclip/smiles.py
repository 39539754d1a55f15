"""SMILES parsing into a plain molecular graph.

Supported: organic-subset and aromatic atoms, bracket atoms (isotope, charge,
hydrogen count, atom class), branches, ring closures including ``%nn``, dot
disconnection and the bond symbols ``- = # :``.  Stereo markers (``/ \\ @``)
are accepted and dropped.  Aromaticity is taken verbatim from the input; no
kekulization or perception is attempted.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .elements import (
    AROMATIC_BRACKET,
    AROMATIC_ORGANIC,
    ATOMIC_NUMBER,
    DEFAULT_VALENCE,
    METALS,
)
from .exceptions import (
    DanglingBondSymbol,
    SmilesError,
    UnbalancedParenthesis,
    UnclosedRingBond,
    UnknownElement,
)

SINGLE, DOUBLE, TRIPLE, AROMATIC = "single", "double", "triple", "aromatic"
BOND_ORDER_VALUE = {SINGLE: 1.0, DOUBLE: 2.0, TRIPLE: 3.0, AROMATIC: 1.5}
_BOND_SYMBOLS = {"-": SINGLE, "=": DOUBLE, "#": TRIPLE, ":": AROMATIC}


@dataclass(frozen=True)
class Atom:
    element: str
    formal_charge: int = 0
    isotope: int | None = None
    aromatic: bool = False
    explicit_h: int | None = None  # set only for bracket atoms
    in_ring: bool = False

    @property
    def atomic_number(self) -> int:
        return ATOMIC_NUMBER[self.element]

    @property
    def bracket(self) -> bool:
        return self.explicit_h is not None


@dataclass(frozen=True)
class Bond:
    begin: int
    end: int
    order: str = SINGLE

    @property
    def endpoints(self) -> tuple[int, int]:
        return (self.begin, self.end)


@dataclass(frozen=True)
class MolGraph:
    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...]
    source: str = ""
    _adjacency: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        adj: list[list[tuple[int, str]]] = [[] for _ in self.atoms]
        for b in self.bonds:
            adj[b.begin].append((b.end, b.order))
            adj[b.end].append((b.begin, b.order))
        object.__setattr__(self, "_adjacency", tuple(tuple(a) for a in adj))

    def __len__(self) -> int:
        return len(self.atoms)

    def neighbors(self, index: int) -> tuple[tuple[int, str], ...]:
        """``(neighbor index, bond order)`` pairs for one atom."""
        return self._adjacency[index]


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.data = text.encode("utf-8")
        self.pos = 0
        self.atoms: list[Atom] = []
        self.bonds: dict[frozenset, Bond] = {}
        self.bond_list: list[Bond] = []
        self.rings: dict[int, tuple[int, str | None, int]] = {}

    def error(self, cls, message: str, offset: int | None = None):
        return cls(message, self.pos if offset is None else offset, self.text)

    def peek(self, k: int = 0) -> str:
        i = self.pos + k
        return chr(self.data[i]) if i < len(self.data) else ""

    def parse(self) -> MolGraph:
        prev: int | None = None
        pending: str | None = None
        pending_at = 0
        branches: list[tuple[int, int]] = []  # (atom index, offset of '(')
        while self.pos < len(self.data):
            ch = self.peek()
            if ch == "(":
                if prev is None or pending is not None:
                    raise self.error(UnbalancedParenthesis, "branch without a preceding atom")
                branches.append((prev, self.pos))
                self.pos += 1
            elif ch == ")":
                if not branches:
                    raise self.error(UnbalancedParenthesis, "unmatched ')'")
                if pending is not None:
                    raise self.error(DanglingBondSymbol, "bond symbol not followed by an atom", pending_at)
                if self.peek(-1) == "(":
                    raise self.error(UnbalancedParenthesis, "empty branch")
                prev = branches.pop()[0]
                self.pos += 1
            elif ch in _BOND_SYMBOLS or ch in "/\\":
                if pending is not None or prev is None:
                    raise self.error(DanglingBondSymbol, "bond symbol not between two atoms")
                pending = _BOND_SYMBOLS.get(ch, SINGLE)
                pending_at = self.pos
                self.pos += 1
            elif ch == ".":
                if pending is not None:
                    raise self.error(DanglingBondSymbol, "bond symbol not followed by an atom", pending_at)
                if prev is None:
                    raise self.error(SmilesError, "'.' without a preceding atom")
                prev = None
                self.pos += 1
            elif ch.isdigit() or ch == "%":
                if prev is None:
                    raise self.error(SmilesError, "ring-closure digit without a preceding atom")
                self.ring_closure(prev, pending)
                pending = None
            else:
                idx = self.atom()
                if prev is not None:
                    self.add_bond(prev, idx, pending, pending_at)
                pending = None
                prev = idx
        if pending is not None:
            raise self.error(DanglingBondSymbol, "bond symbol not followed by an atom", pending_at)
        if branches:
            raise self.error(UnbalancedParenthesis, "unclosed '('", branches[-1][1])
        if self.rings:
            digit, (_, _, at) = min(self.rings.items(), key=lambda kv: kv[1][2])
            raise self.error(UnclosedRingBond, f"ring bond {digit} never closed", at)
        if not self.atoms:
            raise self.error(SmilesError, "no atoms")
        atoms = _mark_rings(self.atoms, self.bond_list)
        return MolGraph(tuple(atoms), tuple(self.bond_list), self.text)

    def ring_closure(self, atom: int, bond: str | None):
        start = self.pos
        if self.peek() == "%":
            digits = self.peek(1) + self.peek(2)
            if len(digits) != 2 or not digits.isdigit():
                raise self.error(SmilesError, "'%' must be followed by two digits")
            number = int(digits)
            self.pos += 3
        else:
            number = int(self.peek())
            self.pos += 1
        if number in self.rings:
            other, other_bond, _ = self.rings.pop(number)
            if bond is not None and other_bond is not None and bond != other_bond:
                raise self.error(SmilesError, "conflicting ring-closure bond symbols", start)
            self.add_bond(other, atom, bond if bond is not None else other_bond, start)
        else:
            self.rings[number] = (atom, bond, start)

    def add_bond(self, a: int, b: int, order: str | None, offset: int):
        if a == b:
            raise self.error(SmilesError, "ring closure onto the same atom", offset)
        key = frozenset((a, b))
        if key in self.bonds:
            raise self.error(SmilesError, "duplicate bond between the same atoms", offset)
        if order is None:
            both_aromatic = self.atoms[a].aromatic and self.atoms[b].aromatic
            order = AROMATIC if both_aromatic else SINGLE
        bond = Bond(a, b, order)
        self.bonds[key] = bond
        self.bond_list.append(bond)

    def atom(self) -> int:
        ch = self.peek()
        if ch == "[":
            atom = self.bracket_atom()
        elif ch in ("*",):
            raise self.error(UnknownElement, "wildcard atom '*' is not supported")
        else:
            two = ch + self.peek(1)
            if two in ("Cl", "Br"):
                atom = Atom(two)
                self.pos += 2
            elif ch in ("B", "C", "N", "O", "P", "S", "F", "I"):
                atom = Atom(ch)
                self.pos += 1
            elif ch in AROMATIC_ORGANIC:
                atom = Atom(AROMATIC_ORGANIC[ch], aromatic=True)
                self.pos += 1
            else:
                raise self.error(UnknownElement, f"unexpected character {ch!r}")
        self.atoms.append(atom)
        return len(self.atoms) - 1

    def bracket_atom(self) -> Atom:
        open_at = self.pos
        self.pos += 1
        isotope = self.number()
        ch, nxt = self.peek(), self.peek(1)
        aromatic = False
        if ch.islower():
            sym = ch + nxt if (ch + nxt) in AROMATIC_BRACKET else ch
            if sym not in AROMATIC_BRACKET:
                raise self.error(UnknownElement, f"unknown aromatic symbol {sym!r}")
            element, aromatic = AROMATIC_BRACKET[sym], True
            self.pos += len(sym)
        elif ch.isupper():
            if nxt.islower() and (ch + nxt) in ATOMIC_NUMBER:
                element = ch + nxt
            elif ch in ATOMIC_NUMBER:
                element = ch
            else:
                raise self.error(UnknownElement, f"unknown element {ch + nxt!r}")
            self.pos += len(element)
        else:
            raise self.error(UnknownElement, "bracket atom without element symbol")
        while self.peek() == "@":  # chirality, discarded
            self.pos += 1
        for tag in ("TH", "AL", "SP", "TB", "OH"):
            if self.data.startswith(tag.encode(), self.pos) and self.peek(2).isdigit():
                self.pos += 2
                self.number()
        h = 0
        if self.peek() == "H":
            self.pos += 1
            h = self.number()
            h = 1 if h is None else h
        charge = 0
        if self.peek() in "+-":
            sign = 1 if self.peek() == "+" else -1
            self.pos += 1
            n = self.number()
            if n is None:
                n = 1
                while self.peek() == ("+" if sign > 0 else "-"):
                    n += 1
                    self.pos += 1
            charge = sign * n
        if self.peek() == ":":
            self.pos += 1
            if self.number() is None:
                raise self.error(SmilesError, "atom class requires digits")
        if self.peek() != "]":
            if not self.peek():
                raise self.error(SmilesError, "unterminated bracket atom", open_at)
            raise self.error(SmilesError, f"unexpected {self.peek()!r} in bracket atom")
        self.pos += 1
        if isotope == 0:
            isotope = None
        return Atom(element, formal_charge=charge, isotope=isotope,
                    aromatic=aromatic, explicit_h=h)

    def number(self) -> int | None:
        start = self.pos
        while self.peek().isdigit():
            self.pos += 1
        return int(self.data[start:self.pos]) if self.pos > start else None


def _bridges(n: int, bonds: Sequence[Bond]) -> set[int]:
    """Indices of bridge bonds (iterative Tarjan low-link)."""
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for k, b in enumerate(bonds):
        adj[b.begin].append((b.end, k))
        adj[b.end].append((b.begin, k))
    disc = [-1] * n
    low = [0] * n
    bridges: set[int] = set()
    t = 0
    for root in range(n):
        if disc[root] >= 0:
            continue
        disc[root] = low[root] = t
        t += 1
        stack = [(root, -1, iter(adj[root]))]
        while stack:
            u, via, it = stack[-1]
            for v, k in it:
                if k == via:
                    continue
                if disc[v] < 0:
                    disc[v] = low[v] = t
                    t += 1
                    stack.append((v, k, iter(adj[v])))
                    break
                low[u] = min(low[u], disc[v])
            else:
                stack.pop()
                if stack:
                    p = stack[-1][0]
                    low[p] = min(low[p], low[u])
                    if low[u] > disc[p]:
                        bridges.add(via)
    return bridges


def _mark_rings(atoms: Sequence[Atom], bonds: Sequence[Bond]) -> list[Atom]:
    bridges = _bridges(len(atoms), bonds)
    ring = [False] * len(atoms)
    for k, b in enumerate(bonds):
        if k not in bridges:
            ring[b.begin] = ring[b.end] = True
    return [replace(a, in_ring=r) for a, r in zip(atoms, ring)]


def parse_smiles(text: str) -> MolGraph:
    """Parse ``text`` into a :class:`MolGraph`.

    Raises:
        SmilesError: or one of its subclasses (``UnbalancedParenthesis``,
            ``UnclosedRingBond``, ``UnknownElement``, ``DanglingBondSymbol``);
            every error carries the byte ``offset`` of the offending symbol.
    """
    if not isinstance(text, str) or not text.strip():
        raise SmilesError("empty SMILES", 0, text if isinstance(text, str) else "")
    return _Parser(text).parse()


def implicit_hydrogens(graph: MolGraph, atom_index: int) -> int:
    atom = graph.atoms[atom_index]
    if atom.bracket:
        return atom.explicit_h
    valence = DEFAULT_VALENCE.get(atom.element)
    if valence is None:
        return 0
    used = int(sum(BOND_ORDER_VALUE[o] for _, o in graph.neighbors(atom_index)))
    return max(0, valence - used)


def total_hydrogens(graph: MolGraph, atom_index: int) -> int:
    """Implicit/bracket hydrogens plus explicit ``[H]`` neighbours."""
    explicit = sum(1 for j, _ in graph.neighbors(atom_index) if graph.atoms[j].element == "H")
    return implicit_hydrogens(graph, atom_index) + explicit


def contains_metal(graph: MolGraph, metal_set: Iterable[str] = METALS) -> bool:
    metals = set(metal_set)
    return any(a.element in metals for a in graph.atoms)


def metal_atoms(graph: MolGraph, metal_set: Iterable[str] = METALS) -> list[int]:
    metals = set(metal_set)
    return [i for i, a in enumerate(graph.atoms) if a.element in metals]


def remove_atoms(graph: MolGraph, drop: Iterable[int]) -> MolGraph:
    """Copy of ``graph`` without the given atoms (and their bonds).

    Ring flags are recomputed on the remaining graph.
    """
    drop = set(drop)
    keep = [i for i in range(len(graph.atoms)) if i not in drop]
    remap = {old: new for new, old in enumerate(keep)}
    bonds = [Bond(remap[b.begin], remap[b.end], b.order) for b in graph.bonds
             if b.begin in remap and b.end in remap]
    atoms = _mark_rings([graph.atoms[i] for i in keep], bonds)
    return MolGraph(tuple(atoms), tuple(bonds), "")


def _atom_token(atom: Atom) -> str:
    sym = atom.element.lower() if atom.aromatic else atom.element
    if not atom.bracket:
        return sym
    parts = ["[", str(atom.isotope) if atom.isotope else "", sym]
    if atom.explicit_h:
        parts.append("H" if atom.explicit_h == 1 else f"H{atom.explicit_h}")
    if atom.formal_charge:
        sign = "+" if atom.formal_charge > 0 else "-"
        mag = abs(atom.formal_charge)
        parts.append(sign if mag == 1 else f"{sign}{mag}")
    parts.append("]")
    return "".join(parts)


def _bond_token(graph: MolGraph, a: int, b: int, order: str) -> str:
    both_aromatic = graph.atoms[a].aromatic and graph.atoms[b].aromatic
    if order == SINGLE:
        return "-" if both_aromatic else ""
    if order == AROMATIC:
        return "" if both_aromatic else ":"
    return "=" if order == DOUBLE else "#"


def to_smiles(graph: MolGraph) -> str:
    """Write a (non-canonical) SMILES string that parses back to ``graph``.

    Atoms are visited depth-first in index order, so a graph parsed from a
    simple SMILES usually comes back spelled the same way.
    """
    n = len(graph.atoms)
    if n == 0:
        return ""
    seen = [False] * n
    children: list[list[int]] = [[] for _ in range(n)]
    openings: list[list[int]] = [[] for _ in range(n)]  # ring partners opened here
    closings: list[list[int]] = [[] for _ in range(n)]
    roots = []
    for root in range(n):
        if seen[root]:
            continue
        roots.append(root)
        seen[root] = True
        on_path = {root}
        stack = [(root, -1, iter(sorted(j for j, _ in graph.neighbors(root))))]
        while stack:
            u, parent, it = stack[-1]
            for v in it:
                if v == parent:
                    continue
                if not seen[v]:
                    seen[v] = True
                    children[u].append(v)
                    on_path.add(v)
                    stack.append((v, u, iter(sorted(j for j, _ in graph.neighbors(v)))))
                    break
                if v in on_path and u not in openings[v]:
                    openings[v].append(u)
                    closings[u].append(v)
            else:
                stack.pop()
                on_path.discard(u)
    order_of = {frozenset((b.begin, b.end)): b.order for b in graph.bonds}
    free: list[int] = []
    next_digit = [1]
    assigned: dict[frozenset, int] = {}

    def digit_token(d: int) -> str:
        return str(d) if d < 10 else f"%{d:02d}"

    def emit(u: int, out: list[str]):
        out.append(_atom_token(graph.atoms[u]))
        for v in openings[u]:
            if free:
                d = min(free)
                free.remove(d)
            else:
                d = next_digit[0]
                next_digit[0] += 1
            key = frozenset((u, v))
            assigned[key] = d
            out.append(_bond_token(graph, u, v, order_of[key]) + digit_token(d))
        for v in closings[u]:
            key = frozenset((u, v))
            d = assigned.pop(key)
            free.append(d)
            out.append(_bond_token(graph, u, v, order_of[key]) + digit_token(d))

    parts: list[str] = []
    for root in roots:
        out: list[str] = []
        stack: list[tuple] = [("atom", root, -1)]
        while stack:
            item = stack.pop()
            if item[0] == "text":
                out.append(item[1])
                continue
            _, u, parent = item
            if parent >= 0:
                out.append(_bond_token(graph, parent, u, order_of[frozenset((parent, u))]))
            emit(u, out)
            kids = children[u]
            if not kids:
                continue
            stack.append(("atom", kids[-1], u))
            for v in reversed(kids[:-1]):
                stack.extend([("text", ")"), ("atom", v, u), ("text", "(")])
        parts.append("".join(out))
    return ".".join(parts)
