import json
from collections import Counter

import pytest

from chemclip import data as d
from chemclip.exceptions import MalformedRow, MissingColumn, MissingInput, UnknownMetal


def write(path, text):
    path.write_text(text)
    return path


def rec(cid, active, domain=d.ORGANIC, line="MCF7", k=0):
    extra = {"metal": "Pt", "oxidation_state": 2} if domain == d.INORGANIC else {}
    return d.ActivityRecord(f"{cid}-{k}", cid, domain, "CC", line, 1.0, active, **extra)


@pytest.mark.parametrize("gi,active", [(49.999, True), (50.0, False), (-10.0, True), (120.0, False)])
def test_organic_threshold(gi, active):
    assert d.is_active_organic(gi) is active


@pytest.mark.parametrize("ic50,active", [(9.99, True), (10.0, False), (0.01, True)])
def test_inorganic_threshold(ic50, active):
    assert d.is_active_inorganic(ic50) is active


def test_load_organic(tmp_path):
    p = write(tmp_path / "o.csv", "compound_id,smiles,cell_line,gi_mean\nA,CCO,MCF7,20\nB,C(,MCF7,80\n")
    report = d.IngestReport()
    recs = d.load_organic_csv(p, report)
    assert [(r.compound_id, r.active) for r in recs] == [("A", True)]
    assert report.counts["organic.dropped.invalid_smiles"] == 1


def test_load_errors(tmp_path):
    with pytest.raises(MissingInput):
        d.load_organic_csv(tmp_path / "missing.csv")
    with pytest.raises(MissingColumn):
        d.load_organic_csv(write(tmp_path / "a.csv", "compound_id,smiles\nA,C\n"))
    with pytest.raises(MalformedRow) as info:
        d.load_organic_csv(write(tmp_path / "b.csv", "compound_id,smiles,cell_line,gi_mean\nA,C,X,abc\n"))
    assert info.value.line == 2
    with pytest.raises(UnknownMetal):
        d.load_inorganic_csv(write(
            tmp_path / "c.csv",
            "compound_id,ligand_smiles,metal,oxidation_state,cell_line,ic50_um\nA,NCCN,Fe,2,X,1\n"))


def test_inorganic_loader(tmp_path):
    p = write(tmp_path / "i.csv",
              "compound_id,ligand_smiles,metal,oxidation_state,cell_line,ic50_um\nA,NCCN,Ru,3,HeLa,4.5\n")
    (r,) = d.load_inorganic_csv(p)
    assert (r.metal, r.oxidation_state, r.active, r.domain) == ("Ru", 3, True, d.INORGANIC)


def test_cell_line_map_normalisation_and_idempotence():
    m = d.CellLineMap([("MCF-7", "MCF7"), ("HCT 116", "HCT-116")])
    assert m.lookup("mcf 7") == "MCF7"
    assert m.lookup("HCT-116") == "HCT-116"
    assert m.lookup("unknown") is None
    recs = [rec("a", True, line="MCF-7"), rec("b", False, line="nowhere")]
    once, dropped = d.standardize_cell_lines(recs, m)
    twice, dropped2 = d.standardize_cell_lines(once, m)
    assert dropped == 1 and dropped2 == 0 and once == twice
    assert once[0].cell_line == "MCF7"


def test_transfer_metal_records():
    r = d.ActivityRecord("r", "c", d.ORGANIC, "[Pt+2].NCCN", "MCF7", 30.0, True)
    kept, moved = d.transfer_metal_records([r, rec("x", False)])
    assert len(kept) == 1 and len(moved) == 1
    m = moved[0]
    assert (m.metal, m.oxidation_state, m.smiles, m.domain) == ("Pt", 2, "NCCN", d.INORGANIC)


def test_shared_cell_lines():
    org = [rec("a", True, line="A"), rec("b", True, line="B")]
    ino = [rec("c", True, d.INORGANIC, line="B")]
    o, i, shared = d.filter_shared_cell_lines(org, ino)
    assert shared == {"B"} and [r.compound_id for r in o] == ["b"] and len(i) == 1


def test_split_examples():
    recs = [rec(f"c{k}", k % 2 == 0, k=j) for k in range(10) for j in range(4)]
    split = d.compound_split(recs, 3)
    assert Counter(split.assignment.values()) == {"train": 7, "val": 1, "test": 2}
    assert d.compound_split(recs, 3).assignment == split.assignment
    for cid in {r.compound_id for r in recs}:
        assert len({split.of(r) for r in recs if r.compound_id == cid}) == 1
    assert d.DatasetSplit.from_json(split.to_json()) == split


def test_split_fraction_bounds():
    for n in range(1, 120):
        recs = [rec(f"c{k}", True) for k in range(n)]
        counts = Counter(d.compound_split(recs, n).assignment.values())
        for name, f in zip(d.SPLITS, (0.7, 0.15, 0.15)):
            assert abs(counts.get(name, 0) - f * n) <= 1


def test_subsample_inactives():
    recs = [rec(f"a{k}", True) for k in range(10)] + [rec(f"i{k}", False) for k in range(100)]
    out = d.subsample_inactives(recs, 5, seed=1)
    c = Counter(r.active for r in out)
    assert c[True] == 10 and c[False] == 50
    assert d.subsample_inactives(recs, 5, seed=1) == out
    # compound counts as active if any of its records is active
    mixed = [rec("m", True, k=0), rec("m", False, k=1)]
    assert len(d.subsample_inactives(mixed, 0, seed=0)) == 2


def test_records_roundtrip(tmp_path):
    recs = [rec("a", True), rec("b", False, d.INORGANIC)]
    d.write_records(recs, tmp_path / "r.jsonl")
    assert d.read_records(tmp_path / "r.jsonl") == recs
    with pytest.raises(MissingInput, match="ingest"):
        d.read_records(tmp_path / "none.jsonl")


def test_record_validation():
    with pytest.raises(ValueError):
        d.ActivityRecord("r", "c", "mineral", "C", "X", 1.0, True)
    with pytest.raises(ValueError):
        d.ActivityRecord("r", "c", d.INORGANIC, "C", "X", 1.0, True)


def test_ingest_pipeline(tmp_path):
    from chemclip.synth import SynthConfig, write_corpus
    paths = write_corpus(SynthConfig(n_organic=100, n_inorganic=30, seed=2), tmp_path)
    report = d.IngestReport()
    org, ino, report = d.ingest(paths["organic"], paths["inorganic"], paths["cell_map"], report)
    assert org and ino
    assert {r.cell_line for r in org} == {r.cell_line for r in ino}
    json.dumps(report.to_dict())
