import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chemclip.exceptions import (
    DanglingBondSymbol, SmilesError, UnbalancedParenthesis, UnclosedRingBond, UnknownElement,
)
from chemclip.smiles import (
    AROMATIC, DOUBLE, SINGLE, TRIPLE, contains_metal, implicit_hydrogens, metal_atoms,
    parse_smiles, remove_atoms, to_smiles, total_hydrogens,
)


def hydrogens(g, fn=implicit_hydrogens):
    return [fn(g, i) for i in range(len(g.atoms))]


def test_benzene():
    g = parse_smiles("c1ccccc1")
    assert len(g.atoms) == 6 and len(g.bonds) == 6
    assert all(a.aromatic and a.in_ring for a in g.atoms)
    assert all(b.order == AROMATIC for b in g.bonds)
    assert hydrogens(g) == [1] * 6


def test_ethanol_hydrogens():
    g = parse_smiles("CCO")
    assert [a.element for a in g.atoms] == ["C", "C", "O"]
    assert hydrogens(g) == [3, 2, 1]
    assert not any(a.in_ring for a in g.atoms)


def test_bond_orders():
    assert parse_smiles("C=C").bonds[0].order == DOUBLE
    assert parse_smiles("C#N").bonds[0].order == TRIPLE
    assert parse_smiles("C-C").bonds[0].order == SINGLE
    assert parse_smiles("c:c").bonds[0].order == AROMATIC


def test_bracket_atom_fields():
    g = parse_smiles("[13CH3+]")
    a = g.atoms[0]
    assert (a.element, a.isotope, a.explicit_h, a.formal_charge) == ("C", 13, 3, 1)
    assert hydrogens(g, total_hydrogens) == [3]
    assert parse_smiles("[Pt+2]").atoms[0].formal_charge == 2
    assert parse_smiles("[O--]").atoms[0].formal_charge == -2
    assert hydrogens(parse_smiles("[Fe]")) == [0]


def test_ring_closure_percent_and_dots():
    g = parse_smiles("C%12CCC%12.O")
    assert len(g.atoms) == 5 and len(g.bonds) == 4
    assert [a.in_ring for a in g.atoms] == [True, True, True, True, False]


def test_stereo_discarded():
    a, b = parse_smiles("N[C@@H](C)C(=O)O"), parse_smiles("N[C@H](C)C(=O)O")
    assert a.atoms == b.atoms and a.bonds == b.bonds
    assert len(parse_smiles("F/C=C/F").bonds) == 3


def test_ring_membership_bridge_rule():
    # biphenyl: inter-ring bond is a bridge but both ends are still ring atoms
    g = parse_smiles("c1ccccc1-c2ccccc2")
    assert all(a.in_ring for a in g.atoms)
    g = parse_smiles("C1CC1CC")
    assert [a.in_ring for a in g.atoms] == [True, True, True, False, False]


@pytest.mark.parametrize("text,exc,offset", [
    ("C(", UnbalancedParenthesis, 1),
    ("C)", UnbalancedParenthesis, 1),
    ("C1CC", UnclosedRingBond, 1),
    ("C[Xx]", UnknownElement, 2),
    ("CQ", UnknownElement, 1),
    ("CC=", DanglingBondSymbol, 2),
])
def test_errors_report_offset(text, exc, offset):
    with pytest.raises(exc) as info:
        parse_smiles(text)
    assert info.value.offset == offset
    assert isinstance(info.value, SmilesError)


def test_empty_is_error():
    with pytest.raises(SmilesError):
        parse_smiles("")


def test_metals_and_removal():
    g = parse_smiles("[Pt+2].NCCN")
    assert contains_metal(g) and metal_atoms(g) == [0]
    ligand = remove_atoms(g, [0])
    assert to_smiles(ligand) == "NCCN"
    assert not contains_metal(parse_smiles("CCO"))


ROUNDTRIP = ["CCO", "c1ccccc1", "CC(=O)O", "C1CC1C#N", "[NH4+]", "O=C(O)c1ccncc1", "CC.O",
             "C1CCC2CCCCC2C1", "[13CH3]Cl"]


@pytest.mark.parametrize("smiles", ROUNDTRIP)
def test_writer_roundtrip(smiles):
    g = parse_smiles(smiles)
    h = parse_smiles(to_smiles(g))
    assert sorted(a.element for a in g.atoms) == sorted(a.element for a in h.atoms)
    assert sorted(b.order for b in g.bonds) == sorted(b.order for b in h.bonds)
    assert sum(hydrogens(g, total_hydrogens)) == sum(hydrogens(h, total_hydrogens))


# random well-formed chains with branches and rings
_atom = st.sampled_from(["C", "N", "O", "c", "S", "Cl", "[NH+]", "[O-]"])


@st.composite
def _chain(draw):
    n = draw(st.integers(1, 12))
    parts = [draw(st.sampled_from(["C", "N", "O"]))]
    for _ in range(n):
        kind = draw(st.integers(0, 2))
        atom = draw(st.sampled_from(["C", "N", "O", "S", "Cl", "[NH+]"]))
        parts.append(f"({atom})" if kind == 0 else atom)
    if draw(st.booleans()) and n >= 3:
        parts.insert(1, "1")
        parts.append("C1")
    return "".join(parts)


@settings(max_examples=200, deadline=None)
@given(_chain())
def test_property_rings_match_cycle_rank(smiles):
    g = parse_smiles(smiles)
    cycles = len(g.bonds) - len(g.atoms) + 1
    assert (cycles > 0) == any(a.in_ring for a in g.atoms)
    assert all(h >= 0 for h in hydrogens(g))


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet="CNOc1()=#[]+-%.23", max_size=15))
def test_property_parser_never_crashes(text):
    try:
        parse_smiles(text)
    except SmilesError:
        pass
