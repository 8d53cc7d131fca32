"""Diversity, utility and parity metrics for a selected slate vs. a baseline slate.

All gains are percentages. Protected membership of a paper follows the
any-author rule in :mod:`fairselect.schema`; author-level fractions count an
author once per paper they appear on.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .schema import CAREER_STAGES, CONFERENCES, PROTECTED_ATTRS, PaperRecord


class UndefinedGainError(ValueError):
    """Relative gain against a zero baseline quantity."""


@dataclass(frozen=True)
class CareerWeights:
    weights: Mapping[str, float]
    source: str = "explicit"

    def __post_init__(self):
        missing = [s for s in CAREER_STAGES if s not in self.weights]
        if missing:
            raise ValueError(f"career weights missing stages: {missing}")
        bad = {s: w for s, w in self.weights.items() if not w > 0}
        if bad:
            raise ValueError(f"career weights must be positive: {bad}")
        if self.source not in ("dataset_distribution", "explicit"):
            raise ValueError(f"unknown career weight source {self.source!r}")

    def __getitem__(self, stage: str) -> float:
        return self.weights[stage]

    @classmethod
    def uniform(cls) -> "CareerWeights":
        return cls({s: 1.0 for s in CAREER_STAGES}, "explicit")

    @classmethod
    def from_papers(cls, papers: Iterable[PaperRecord]) -> "CareerWeights":
        """Weight of a stage = its share of all author slots in ``papers``.

        Stages that never occur get the smallest observed share so every
        weight stays strictly positive.
        """
        counts = Counter(a.career_stage for p in papers for a in p.authors)
        total = sum(counts.values())
        if total == 0:
            return cls.uniform()
        shares = {s: counts[s] / total for s in CAREER_STAGES}
        floor = min(v for v in shares.values() if v > 0)
        return cls({s: (v if v > 0 else floor) for s, v in shares.items()}, "dataset_distribution")


def paper_utility(paper: PaperRecord, weights: CareerWeights) -> float:
    return sum(weights[a.career_stage] * a.h_index for a in paper.authors) / len(paper.authors)


def protected_share(papers: Sequence[PaperRecord], attr: str) -> float:
    if not papers:
        raise ValueError("empty selection")
    return sum(p.protected(attr) for p in papers) / len(papers)


def author_protected_share(papers: Sequence[PaperRecord], attr: str) -> float:
    flags = [a.protected(attr) for p in papers for a in p.authors]
    if not flags:
        raise ValueError("empty selection")
    return sum(flags) / len(flags)


def _relative_gain(selected: float, baseline: float, what: str) -> float:
    if baseline == 0:
        raise UndefinedGainError(f"undefined relative gain: baseline {what} is 0")
    return 100.0 * (selected - baseline) / baseline


def macro_gain(selected: Sequence[PaperRecord], baseline: Sequence[PaperRecord], attr: str) -> float:
    """Relative change (%) of the paper-level protected share."""
    return _relative_gain(
        protected_share(selected, attr), protected_share(baseline, attr), f"{attr} paper share"
    )


def micro_gain(selected: Sequence[PaperRecord], baseline: Sequence[PaperRecord], attr: str) -> float:
    """Relative change (%) of the author-level protected share."""
    return _relative_gain(
        author_protected_share(selected, attr),
        author_protected_share(baseline, attr),
        f"{attr} author share",
    )


def diversity_gain(macro_gains: Sequence[float]) -> float:
    if len(macro_gains) == 0:
        raise ValueError("diversity_gain needs at least one macro gain")
    if any(math.isnan(g) for g in macro_gains):
        return math.nan
    return sum(min(100.0, g) for g in macro_gains) / len(macro_gains)


def utility(selection: Sequence[PaperRecord], weights: CareerWeights) -> float:
    if not selection:
        raise ValueError("empty selection")
    return sum(paper_utility(p, weights) for p in selection) / len(selection)


def utility_gain(selected: Sequence[PaperRecord], baseline: Sequence[PaperRecord], weights: CareerWeights) -> float:
    return _relative_gain(utility(selected, weights), utility(baseline, weights), "utility")


def harmonic(x: float, y: float) -> float:
    s = x + y
    if s == 0:
        raise ZeroDivisionError("harmonic mean with zero denominator")
    return 2.0 * x * y / s


def f_measure(d_g: float, ug: float) -> float:
    """``2 * D_G * (100 - UG) / (D_G + (100 - UG))``, evaluated literally."""
    return harmonic(d_g, 100.0 - ug)


def conference_distribution(selected: Sequence[PaperRecord]) -> dict[str, float]:
    if not selected:
        raise ValueError("empty selection")
    counts = Counter(p.conference for p in selected)
    return {c: 100.0 * counts[c] / len(selected) for c in CONFERENCES}


def statistical_parity_difference(
    selected: Iterable[PaperRecord], all_papers: Sequence[PaperRecord], attr: str
) -> float:
    """Selection rate of the protected group minus that of the rest."""
    chosen = {p.paper_id for p in selected}
    prot = [p for p in all_papers if p.protected(attr)]
    rest = [p for p in all_papers if not p.protected(attr)]
    if not prot or not rest:
        raise ValueError(f"{attr}: a group is empty in the candidate pool")
    rate_p = sum(p.paper_id in chosen for p in prot) / len(prot)
    rate_n = sum(p.paper_id in chosen for p in rest) / len(rest)
    return rate_p - rate_n


def _gain_or_nan(fn, *args) -> float:
    try:
        return fn(*args)
    except UndefinedGainError:
        return math.nan


def evaluate_selection(
    selected: Sequence[PaperRecord],
    baseline: Sequence[PaperRecord],
    weights: CareerWeights,
    attrs: Sequence[str] = PROTECTED_ATTRS,
) -> dict:
    """One run's metrics as a flat dict (undefined gains become NaN)."""
    out: dict = {}
    for attr in PROTECTED_ATTRS:
        out[f"{attr}_macro_gain"] = _gain_or_nan(macro_gain, selected, baseline, attr)
        out[f"{attr}_micro_gain"] = _gain_or_nan(micro_gain, selected, baseline, attr)
    out["diversity_gain"] = diversity_gain([out[f"{a}_macro_gain"] for a in attrs])
    out["utility_gain"] = _gain_or_nan(utility_gain, selected, baseline, weights)
    out["f_measure"] = f_measure(out["diversity_gain"], out["utility_gain"])
    return out


RUN_FIELDS = (
    "race_macro_gain",
    "race_micro_gain",
    "country_macro_gain",
    "country_micro_gain",
    "diversity_gain",
    "utility_gain",
    "f_measure",
)


@dataclass
class GainReport:
    """Gains of a selection against a named baseline, over one or more runs."""

    baseline: str
    attrs: tuple[str, ...]
    n_selected: int
    runs: list[dict] = field(default_factory=list)
    conference_distribution: dict[str, float] = field(default_factory=dict)

    def mean(self, key: str) -> float:
        return float(np.mean([r[key] for r in self.runs]))

    def std(self, key: str) -> float:
        vals = [r[key] for r in self.runs]
        return float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0

    def summary(self) -> dict:
        out = {}
        for key in RUN_FIELDS:
            out[key] = self.mean(key)
            out[key.replace("_gain", "") + "_std" if key.endswith("_gain") else key + "_std"] = self.std(key)
        return out

    def to_dict(self) -> dict:
        return {
            "baseline": self.baseline,
            "attrs": list(self.attrs),
            "n_selected": self.n_selected,
            "n_runs": len(self.runs),
            "summary": self.summary(),
            "conference_distribution": self.conference_distribution,
            "runs": self.runs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GainReport":
        return cls(
            baseline=d["baseline"],
            attrs=tuple(d["attrs"]),
            n_selected=d["n_selected"],
            runs=[dict(r) for r in d["runs"]],
            conference_distribution=dict(d["conference_distribution"]),
        )


def build_report(
    selections: Sequence[Sequence[PaperRecord]],
    baselines: Sequence[Sequence[PaperRecord]],
    weights: CareerWeights,
    attrs: Sequence[str],
    baseline_name: str,
) -> GainReport:
    """Pair run i of the fair selections with run i of the baseline."""
    if len(selections) != len(baselines) or not selections:
        raise ValueError("need one baseline selection per run")
    runs = [evaluate_selection(s, b, weights, attrs) for s, b in zip(selections, baselines)]
    dists = [conference_distribution(s) for s in selections]
    conf = {c: float(np.mean([d[c] for d in dists])) for c in CONFERENCES}
    return GainReport(baseline_name, tuple(attrs), len(selections[0]), runs, conf)
