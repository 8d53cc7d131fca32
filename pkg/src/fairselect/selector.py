"""Score every candidate and pick the top ``n_accept`` by acceptance probability."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .dataset import FeatureMatrix
from .metrics import statistical_parity_difference
from .neural_net import ModelParams, forward
from .schema import PROTECTED_ATTRS, PaperRecord


@dataclass
class SelectionResult:
    scores: dict[str, float]
    ranking: list[str]
    selected: list[str]
    threshold_score: float
    tie_breaks: list[list[str]] = field(default_factory=list)
    parity_audit: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        chosen = set(self.selected)
        return {
            "n_selected": len(self.selected),
            "threshold_score": self.threshold_score,
            "tie_breaks": self.tie_breaks,
            "parity_audit": self.parity_audit,
            "ranking": [
                {"rank": r + 1, "paper_id": pid, "score": self.scores[pid], "selected": pid in chosen}
                for r, pid in enumerate(self.ranking)
            ],
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionResult":
        rows = d["ranking"]
        return cls(
            scores={r["paper_id"]: r["score"] for r in rows},
            ranking=[r["paper_id"] for r in rows],
            selected=[r["paper_id"] for r in rows if r["selected"]],
            threshold_score=d["threshold_score"],
            tie_breaks=[list(g) for g in d["tie_breaks"]],
            parity_audit=dict(d.get("parity_audit", {})),
        )


def score_all(model: ModelParams, fm: FeatureMatrix) -> dict[str, float]:
    if fm.n_features != model.layer_dims[0]:
        raise ValueError(f"feature matrix has {fm.n_features} columns, model expects {model.layer_dims[0]}")
    probs, _ = forward(model, fm.X, "eval")
    return {pid: float(p) for pid, p in zip(fm.paper_ids, probs)}


def select_top(scores: Mapping[str, float], n_accept: int) -> SelectionResult:
    """Top ``n_accept`` by score; ties at the cut go to the smaller paper_id."""
    if n_accept < 1:
        raise ValueError("n_accept must be positive")
    if n_accept > len(scores):
        raise ValueError(f"cannot select {n_accept} papers from {len(scores)} candidates")
    ranking = sorted(scores, key=lambda pid: (-scores[pid], pid))
    selected = ranking[:n_accept]
    threshold = scores[selected[-1]]
    tied = [pid for pid in ranking if scores[pid] == threshold]
    tie_breaks = []
    if n_accept < len(ranking) and scores[ranking[n_accept]] == threshold:
        tie_breaks.append(tied)
    return SelectionResult(dict(scores), ranking, selected, threshold, tie_breaks)


def audit_parity(result: SelectionResult, papers: Sequence[PaperRecord]) -> dict[str, float]:
    """Post-hoc statistical parity of the slate; never alters the selection."""
    chosen = set(result.selected)
    picked = [p for p in papers if p.paper_id in chosen]
    audit = {}
    for attr in PROTECTED_ATTRS:
        try:
            audit[attr] = statistical_parity_difference(picked, papers, attr)
        except ValueError:
            audit[attr] = float("nan")
    result.parity_audit = audit
    return audit
