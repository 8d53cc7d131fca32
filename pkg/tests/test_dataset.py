import random
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_author, make_paper, random_papers
from fairselect.dataset import (
    Dataset,
    SyntheticSpec,
    encode,
    feature_columns,
    generate_synthetic,
    load_csv,
    normalize,
    preprocess,
    realized_marginals,
    stratified_split,
    write_csv,
)
from fairselect.metrics import paper_utility
from fairselect.schema import ValidationError

PAPERS = """paper_id,title,conference,label
P1,"Sensing, with commas",SIGCHI,1
P2,Second,dis,0
P3,Third,IUI,1
"""
AUTHORS = """paper_id,author_id,gender,race,country_class,career_stage,h_index
P1,a1,female,Hispanic,developed,Professor,20
P1,a2,male,white,developed,GradStudent,2
P2,a3,male,Asian,underdeveloped,PostDoc,7
P3,a4,female,Black,developed,Lecturer,5
P3,a5,male,White,developed,AssociateProfessor,12
"""


def write(tmp_path, papers=PAPERS, authors=AUTHORS):
    (tmp_path / "papers.csv").write_text(papers, encoding="utf-8")
    (tmp_path / "authors.csv").write_text(authors, encoding="utf-8")
    return tmp_path / "papers.csv", tmp_path / "authors.csv"


def test_load_csv_round_trip(tmp_path):
    ds = load_csv(*write(tmp_path))
    assert len(ds) == 3
    assert sum(len(p.authors) for p in ds.papers) == 5
    p1 = ds.papers[0]
    assert p1.title == "Sensing, with commas"
    assert p1.authors[1].race == "White"  # canonical case
    assert ds.papers[1].conference == "DIS"

    out = tmp_path / "copy"
    again = load_csv(*write_csv(ds, out))
    assert again.papers == ds.papers


def test_unknown_race_names_row_and_column(tmp_path):
    bad = AUTHORS.replace("P3,a4,female,Black", "P3,a4,female,Martian")
    with pytest.raises(ValidationError, match=r"line 5, column race.*Martian"):
        load_csv(*write(tmp_path, authors=bad))


def test_paper_without_authors(tmp_path):
    papers = PAPERS + "P7,Orphan,SIGCHI,0\n"
    with pytest.raises(ValidationError, match="paper without authors: P7"):
        load_csv(*write(tmp_path, papers=papers))


@pytest.mark.parametrize(
    "papers, authors, message",
    [
        (PAPERS + "P1,dup,SIGCHI,1\n", AUTHORS, "duplicate paper_id"),
        (PAPERS.replace("IUI,1", "IUI,2"), AUTHORS, "line 4, column label"),
        (PAPERS.replace("Third,IUI,1", "Third,IUI"), AUTHORS, "line 4: expected 4 fields"),
        (PAPERS, AUTHORS.replace(",12", ",-1"), "column h_index"),
    ],
)
def test_malformed_inputs(tmp_path, papers, authors, message):
    with pytest.raises(ValidationError, match=message):
        load_csv(*write(tmp_path, papers, authors))


def test_missing_file(tmp_path):
    with pytest.raises(ValidationError, match="missing file"):
        load_csv(tmp_path / "nope.csv", tmp_path / "nope2.csv")


def test_paper_h_index_is_recomputable():
    ds = Dataset.build(random_papers(random.Random(3), 12))
    for p in ds.papers:
        assert p.paper_h_index == pytest.approx(paper_utility(p, ds.career_weights), abs=0)


def test_constant_h_index_normalizes_to_zero():
    papers = [make_paper(f"P{i}", [make_author(i, h=10)]) for i in range(4)]
    with pytest.warns(RuntimeWarning, match="constant"):
        fm = preprocess(Dataset.build(papers))
    assert np.all(fm.X[:, fm.columns.index("paper_h_index")] == 0.0)


def test_single_hispanic_developed_paper_masks():
    ds = Dataset.build([make_paper("P1", [make_author(1, race="Hispanic", country="developed")])])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fm = preprocess(ds)
    assert fm.race_mask.tolist() == [True]
    assert fm.country_mask.tolist() == [False]


def test_h_index_min_max():
    # one professor per paper, so paper_h_index = w_prof * h and scaling cancels w_prof
    papers = [make_paper(f"P{i}", [make_author(i, h=h)]) for i, h in enumerate((5, 10, 15))]
    fm = preprocess(Dataset.build(papers))
    assert fm.X[:, fm.columns.index("paper_h_index")].tolist() == [0.0, 0.5, 1.0]


def test_protected_attributes_are_never_columns():
    ds = Dataset.build(random_papers(random.Random(1), 10))
    fm = preprocess(ds, {"race", "country"})
    assert not any(c.startswith(("race", "country")) for c in fm.columns)
    only_race = preprocess(ds, {"race"})
    assert not any(c.startswith("race") for c in only_race.columns)
    assert "country_underdeveloped_share" in only_race.columns


def test_normalization_params_reproduce_matrix():
    ds = generate_synthetic(seed=4)
    fm = preprocess(ds)
    cols, raw = encode(ds)
    assert cols == fm.columns == feature_columns()
    assert np.array_equal(normalize(cols, raw, fm.normalization_params), fm.X)
    assert fm.X.min() >= 0.0 and fm.X.max() <= 1.0


def test_any_author_protected_rule():
    p = make_paper("P1", [make_author(1), make_author(2, race="Black"), make_author(3, country="underdeveloped")])
    with pytest.warns(RuntimeWarning):
        fm = preprocess(Dataset.build([p]))
    assert fm.race_mask[0] and fm.country_mask[0]


def _fm(n, seed=0):
    ds = Dataset.build(random_papers(random.Random(seed), n))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return preprocess(ds)


def test_split_partition_and_sizes():
    fm = _fm(100)
    tr, va = stratified_split(fm, 0.8, seed=7)
    assert abs(len(tr) - 80) <= 1 and len(tr) + len(va) == 100
    assert set(tr.paper_ids).isdisjoint(va.paper_ids)
    assert set(tr.paper_ids) | set(va.paper_ids) == set(fm.paper_ids)


def test_split_is_deterministic():
    fm = _fm(60)
    a = stratified_split(fm, 0.8, seed=3)
    b = stratified_split(fm, 0.8, seed=3)
    assert a[0].paper_ids == b[0].paper_ids and a[1].paper_ids == b[1].paper_ids


def test_split_label_balance_ten_rows():
    # 5 positives, 5 negatives, no protected authors: two strata of 5, each
    # gets 5 * 0.8 = 4 train rows -> train 4/4, validation 1/1.
    papers = [make_paper(f"P{i}", [make_author(i, h=i)], label=int(i < 5)) for i in range(10)]
    fm = preprocess(Dataset.build(papers))
    tr, va = stratified_split(fm, 0.8, seed=0)
    assert abs(int(tr.labels.sum()) - 4) <= 1 and abs(int((1 - tr.labels).sum()) - 4) <= 1
    assert abs(int(va.labels.sum()) - 1) <= 1


@pytest.mark.parametrize("ratio", [0.0, 1.0, -0.2, 1.5])
def test_split_rejects_bad_ratio(ratio):
    with pytest.raises(ValidationError):
        stratified_split(_fm(10), ratio, 0)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(5, 60), ratio=st.floats(0.05, 0.95), seed=st.integers(0, 1000))
def test_split_is_partition_property(n, ratio, seed):
    fm = _fm(n, seed)
    tr, va = stratified_split(fm, ratio, seed)
    assert sorted(tr.paper_ids + va.paper_ids) == sorted(fm.paper_ids)
    assert abs(len(tr) - ratio * n) <= 1 or len(tr) in (1, n - 1)


def test_synthetic_is_deterministic(tmp_path):
    a = write_csv(generate_synthetic(seed=9), tmp_path / "a")
    b = write_csv(generate_synthetic(seed=9), tmp_path / "b")
    for x, y in zip(a, b):
        assert x.read_bytes() == y.read_bytes()


def test_synthetic_shape_and_accept_count():
    ds = generate_synthetic(seed=0)
    assert len(ds) == 530
    assert sum(p.label for p in ds.papers) == 351
    assert {p.conference for p in ds.papers} == {"SIGCHI", "DIS", "IUI"}


def test_synthetic_sigchi_race_marginal_with_234_papers():
    spec = SyntheticSpec(counts={"SIGCHI": 234, "DIS": 181, "IUI": 115})
    share = realized_marginals(generate_synthetic(spec, seed=2))["SIGCHI"]["race_pct"]
    assert 3.84 <= share <= 9.84


def _acceptance_gap(ds, attr):
    prot = [p.label for p in ds.papers if p.protected(attr)]
    rest = [p.label for p in ds.papers if not p.protected(attr)]
    return np.mean(rest) - np.mean(prot)


@pytest.mark.parametrize("attr", ["race", "country"])
def test_no_bias_gives_similar_acceptance(attr):
    gaps = [_acceptance_gap(generate_synthetic(SyntheticSpec(bias_strength=0.0), seed=s), attr) for s in range(5)]
    assert abs(np.mean(gaps)) < 0.05


@pytest.mark.parametrize("attr", ["race", "country"])
def test_bias_depresses_protected_acceptance(attr):
    for s in range(5):
        assert _acceptance_gap(generate_synthetic(SyntheticSpec(bias_strength=2.0), seed=s), attr) > 0


@pytest.mark.parametrize(
    "kw",
    [
        {"race_pct": {"SIGCHI": 120.0, "DIS": 10.0, "IUI": 10.0}},
        {"counts": {"SIGCHI": 1, "DIS": 1, "IUI": 1}},
        {"bias_strength": -1.0},
    ],
)
def test_synthetic_rejects_invalid_spec(kw):
    with pytest.raises(ValidationError):
        generate_synthetic(SyntheticSpec(**kw), seed=0)
