import json
import random

import numpy as np
import pytest

from conftest import make_author, make_paper
from fairselect.dataset import generate_synthetic, preprocess
from fairselect.neural_net import forward, init_model
from fairselect.selector import SelectionResult, audit_parity, score_all, select_top


def random_scores(rng, n, levels=None):
    if levels:
        return {f"P{i:04d}": rng.choice(levels) for i in range(n)}
    return {f"P{i:04d}": rng.random() for i in range(n)}


def check_contract(scores, n, result):
    assert len(result.selected) == n
    chosen = set(result.selected)
    worst = min(scores[p] for p in chosen)
    assert all(scores[p] <= worst for p in scores if p not in chosen)
    # among papers tied at the threshold, the lexicographically smallest ids win
    tied = sorted(p for p in scores if scores[p] == result.threshold_score)
    inside = [p for p in tied if p in chosen]
    assert inside == tied[:len(inside)]


def test_tie_example():
    scores = {"A": 0.9, "B": 0.7, "C": 0.7, "D": 0.2}
    r = select_top(scores, 2)
    assert r.selected == ["A", "B"]
    assert r.tie_breaks == [["B", "C"]]
    assert r.threshold_score == 0.7


def test_no_tie_recorded_without_boundary_tie():
    r = select_top({"A": 0.9, "B": 0.7, "C": 0.7, "D": 0.2}, 3)
    assert r.selected == ["A", "B", "C"] and r.tie_breaks == []


def test_select_all_and_errors():
    scores = {"A": 0.1, "B": 0.2}
    assert set(select_top(scores, 2).selected) == {"A", "B"}
    with pytest.raises(ValueError):
        select_top(scores, 3)
    with pytest.raises(ValueError):
        select_top(scores, 0)


def test_canonical_pool_selects_351():
    rng = random.Random(0)
    scores = random_scores(rng, 530)
    r = select_top(scores, 351)
    check_contract(scores, 351, r)


@pytest.mark.parametrize("seed", range(20))
def test_contract_on_random_maps(seed):
    rng = random.Random(seed)
    n = rng.randint(1, 60)
    scores = random_scores(rng, n, levels=[0.1, 0.5, 0.9] if seed % 2 else None)
    k = rng.randint(1, n)
    check_contract(scores, k, select_top(scores, k))


@pytest.mark.parametrize("transform", [np.exp, lambda x: x ** 3, lambda x: 5 * x - 2, np.arctan, np.log1p])
def test_monotone_transform_invariance(transform):
    rng = random.Random(3)
    scores = random_scores(rng, 80, levels=[0.05 * i for i in range(10)])
    a = select_top(scores, 30)
    b = select_top({k: float(transform(v)) for k, v in scores.items()}, 30)
    assert a.selected == b.selected


def test_batch_and_single_row_scores_agree():
    fm = preprocess(generate_synthetic(seed=1))
    model = init_model(fm.n_features, 16, 8, seed=0)
    forward(model, fm.X[:64], "train")
    model.mode = "eval"
    scores = score_all(model, fm)
    for i in range(0, len(fm), 37):
        single, _ = forward(model, fm.X[i:i + 1], "eval")
        assert abs(single[0] - scores[fm.paper_ids[i]]) <= 1e-12


def test_score_all_rejects_schema_mismatch():
    fm = preprocess(generate_synthetic(seed=1))
    with pytest.raises(ValueError, match="columns"):
        score_all(init_model(fm.n_features + 1, 4, 4, seed=0), fm)


def test_audit_parity_is_report_only(tmp_path):
    papers = [make_paper(f"P{i}", [make_author(i, race="Black" if i < 3 else "White",
                                               country="underdeveloped" if i % 2 else "developed")])
              for i in range(8)]
    scores = {p.paper_id: 1.0 - 0.1 * i for i, p in enumerate(papers)}
    r = select_top(scores, 4)
    before = list(r.selected)
    audit = audit_parity(r, papers)
    assert r.selected == before
    assert audit["race"] == pytest.approx(3 / 3 - 1 / 5)
    r.save(tmp_path / "s.json")
    back = SelectionResult.from_dict(json.loads((tmp_path / "s.json").read_text()))
    assert back.selected == r.selected and back.scores == r.scores and back.parity_audit == r.parity_audit
