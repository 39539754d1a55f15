import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chemclip.exceptions import UnknownMetal
from chemclip.fingerprint import (
    INORGANIC_DIM, METAL_DIM, N_BITS, MorganFingerprinter, featurize_inorganic, featurize_organic,
    fnv1a64, metal_feature_vector, morgan_fingerprint,
)
from chemclip.elements import METALS
from chemclip.smiles import parse_smiles


def test_fnv1a_reference():
    # FNV-1a 64 of the empty input is the offset basis
    assert fnv1a64(()) == 0xCBF29CE484222325
    assert fnv1a64((1, 2)) != fnv1a64((2, 1))


@pytest.mark.parametrize("smiles,n", [("C", 1), ("CCO", 6), ("c1ccccc1", 3)])
def test_distinct_identifier_traces(smiles, n):
    assert morgan_fingerprint(parse_smiles(smiles)).n_distinct == n


def test_shape_and_dtype():
    fp = morgan_fingerprint(parse_smiles("CCO"))
    assert fp.bits.shape == (N_BITS,) and fp.bits.dtype == bool
    assert len(fp.on_bits) <= fp.n_distinct


def test_radius_monotone_coverage():
    g = parse_smiles("CC(=O)Nc1ccc(O)cc1")
    on = [set(morgan_fingerprint(g, radius=r).on_bits) for r in range(4)]
    for lo, hi in zip(on, on[1:]):
        assert lo <= hi


def test_atom_order_invariance():
    a = morgan_fingerprint(parse_smiles("OC(=O)c1ccccc1N"))
    b = morgan_fingerprint(parse_smiles("Nc1ccccc1C(O)=O"))
    assert np.array_equal(a.bits, b.bits)


def test_metal_features():
    v = metal_feature_vector("Pt", 2).to_array()
    assert v.shape == (METAL_DIM,)
    onehot = v[:len(METALS)]
    assert onehot.sum() == 1 and onehot[METALS.index("Pt")] == 1
    assert v[10] == 2 and v[11] == pytest.approx(0.78) and v[12] == pytest.approx(1.0)
    with pytest.raises(UnknownMetal):
        metal_feature_vector("Fe", 2)


def test_featurize_dims():
    assert featurize_organic("CCO").shape == (N_BITS,)
    x = featurize_inorganic("NCCN", "Ru", 3)
    assert x.shape == (INORGANIC_DIM,)
    assert np.array_equal(x[:N_BITS], featurize_organic("NCCN"))


def test_transformer():
    fp = MorganFingerprinter()
    X = fp.fit_transform(["CCO", "c1ccccc1"])
    assert X.shape == (2, N_BITS)
    assert fp.get_params()["n_bits"] == N_BITS


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from(["C", "N", "O", "CC", "C(=O)", "N(C)"]), min_size=1, max_size=8))
def test_property_fragment_concatenation_is_deterministic(frags):
    s = "".join(frags)
    assert np.array_equal(morgan_fingerprint(parse_smiles(s)).bits,
                          morgan_fingerprint(parse_smiles(s)).bits)
