"""Candidate-paper datasets: CSV I/O, feature encoding, splitting, synthesis."""
from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .metrics import CareerWeights, paper_utility
from .schema import (
    CAREER_STAGES,
    CONFERENCES,
    COUNTRY_CLASSES,
    GENDERS,
    PROTECTED_ATTRS,
    RACES,
    AuthorRecord,
    PaperRecord,
    ValidationError,
    canonical,
)

log = logging.getLogger(__name__)

PAPER_COLUMNS = ("paper_id", "title", "conference", "label")
AUTHOR_COLUMNS = ("paper_id", "author_id", "gender", "race", "country_class", "career_stage", "h_index")


@dataclass(frozen=True)
class Dataset:
    papers: tuple[PaperRecord, ...]
    provenance: str = "csv"
    seed: int | None = None
    career_weights: CareerWeights = field(default=None, compare=False)

    @classmethod
    def build(cls, papers: Iterable[PaperRecord], provenance: str = "csv", seed: int | None = None) -> "Dataset":
        """Validate ``papers`` and fill in each paper's aggregate h-index."""
        papers = list(papers)
        seen = set()
        for p in papers:
            if p.paper_id in seen:
                raise ValidationError(f"duplicate paper_id: {p.paper_id}")
            seen.add(p.paper_id)
        if provenance not in ("csv", "synthetic"):
            raise ValidationError(f"unknown provenance {provenance!r}")
        weights = CareerWeights.from_papers(papers)
        papers = tuple(replace(p, paper_h_index=paper_utility(p, weights)) for p in papers)
        return cls(papers, provenance, seed, weights)

    def __len__(self) -> int:
        return len(self.papers)

    def by_id(self) -> dict[str, PaperRecord]:
        return {p.paper_id: p for p in self.papers}


# --------------------------------------------------------------------------- CSV


def _read_rows(path: Path, expected: tuple[str, ...]):
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"missing file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        if tuple(h.strip() for h in header) != expected:
            raise ValidationError(f"{path}: header must be {','.join(expected)}, got {','.join(header)}")
        for row in reader:
            if not row:
                continue
            if len(row) != len(expected):
                raise ValidationError(
                    f"{path}: line {reader.line_num}: expected {len(expected)} fields, got {len(row)}"
                )
            yield reader.line_num, dict(zip(expected, row))


def _field(path, line, column, fn):
    try:
        return fn()
    except (ValidationError, ValueError) as exc:
        raise ValidationError(f"{path}: line {line}, column {column}: {exc}") from None


def load_csv(papers_path, authors_path) -> Dataset:
    papers_path, authors_path = Path(papers_path), Path(authors_path)
    authors: dict[str, list[AuthorRecord]] = {}
    for line, row in _read_rows(authors_path, AUTHOR_COLUMNS):
        f = lambda col, fn: _field(authors_path, line, col, fn)  # noqa: E731

        def h_index():
            v = int(row["h_index"])
            if v < 0:
                raise ValueError(f"h_index must be >= 0, got {v}")
            return v

        rec = AuthorRecord(
            author_id=row["author_id"],
            gender=f("gender", lambda: canonical(row["gender"], GENDERS, "gender")),
            race=f("race", lambda: canonical(row["race"], RACES, "race")),
            country_class=f("country_class", lambda: canonical(row["country_class"], COUNTRY_CLASSES, "country_class")),
            career_stage=f("career_stage", lambda: canonical(row["career_stage"], CAREER_STAGES, "career_stage")),
            h_index=f("h_index", h_index),
        )
        authors.setdefault(row["paper_id"], []).append(rec)

    papers = []
    seen: set[str] = set()
    for line, row in _read_rows(papers_path, PAPER_COLUMNS):
        pid = row["paper_id"]
        if pid in seen:
            raise ValidationError(f"{papers_path}: line {line}: duplicate paper_id: {pid}")
        seen.add(pid)

        def label():
            if row["label"].strip() not in ("0", "1"):
                raise ValueError(f"label must be 0 or 1, got {row['label']!r}")
            return int(row["label"])

        conf = _field(papers_path, line, "conference", lambda: canonical(row["conference"], CONFERENCES, "conference"))
        lab = _field(papers_path, line, "label", label)
        if pid not in authors:
            raise ValidationError(f"paper without authors: {pid}")
        papers.append(PaperRecord(pid, row["title"], tuple(authors[pid]), conf, lab))

    orphans = sorted(set(authors) - seen)
    if orphans:
        raise ValidationError(f"{authors_path}: author rows reference unknown papers: {', '.join(orphans[:5])}")
    return Dataset.build(papers, "csv")


def write_csv(dataset: Dataset, out_dir) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    papers_path, authors_path = out_dir / "papers.csv", out_dir / "authors.csv"
    with papers_path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PAPER_COLUMNS)
        for p in dataset.papers:
            w.writerow([p.paper_id, p.title, p.conference, p.label])
    with authors_path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AUTHOR_COLUMNS)
        for p in dataset.papers:
            for a in p.authors:
                w.writerow([p.paper_id, a.author_id, a.gender, a.race, a.country_class, a.career_stage, a.h_index])
    return papers_path, authors_path


# --------------------------------------------------------------------- features


@dataclass(frozen=True)
class FeatureMatrix:
    """Normalized design matrix plus labels and protected-group masks.

    Race and country never appear as columns when protected; they are only
    carried as ``race_mask`` / ``country_mask``.
    """

    paper_ids: tuple[str, ...]
    columns: tuple[str, ...]
    X: np.ndarray
    labels: np.ndarray
    race_mask: np.ndarray
    country_mask: np.ndarray
    normalization_params: Mapping[str, tuple[float, float]]

    def __post_init__(self):
        n = len(self.paper_ids)
        if self.X.shape != (n, len(self.columns)):
            raise ValueError(f"X has shape {self.X.shape}, expected {(n, len(self.columns))}")
        for name in ("labels", "race_mask", "country_mask"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length differs from row count {n}")
        for arr in (self.X, self.labels, self.race_mask, self.country_mask):
            arr.flags.writeable = False

    def __len__(self) -> int:
        return len(self.paper_ids)

    @property
    def n_features(self) -> int:
        return len(self.columns)

    def subset(self, rows: Sequence[int]) -> "FeatureMatrix":
        rows = np.asarray(rows, dtype=np.intp)
        return FeatureMatrix(
            tuple(self.paper_ids[i] for i in rows),
            self.columns,
            self.X[rows].copy(),
            self.labels[rows].copy(),
            self.race_mask[rows].copy(),
            self.country_mask[rows].copy(),
            self.normalization_params,
        )


def feature_columns(protected_attrs: Iterable[str] = PROTECTED_ATTRS) -> tuple[str, ...]:
    protected = set(protected_attrs)
    cols = ["gender_female_share"]
    cols += [f"stage_{s}_share" for s in CAREER_STAGES]
    if "race" not in protected:
        cols += [f"race_{r}_share" for r in RACES]
    if "country" not in protected:
        cols += ["country_underdeveloped_share"]
    cols += [f"conf_{c}" for c in CONFERENCES]
    cols.append("paper_h_index")
    return tuple(cols)


def encode(dataset: Dataset, protected_attrs: Iterable[str] = PROTECTED_ATTRS) -> tuple[tuple[str, ...], np.ndarray]:
    """Raw (un-normalized) feature matrix for ``dataset``."""
    protected = set(protected_attrs)
    unknown = protected - set(PROTECTED_ATTRS)
    if unknown:
        raise ValidationError(f"unknown protected attributes: {sorted(unknown)}")
    cols = feature_columns(protected)
    X = np.zeros((len(dataset), len(cols)), dtype=np.float64)
    index = {c: j for j, c in enumerate(cols)}
    for i, p in enumerate(dataset.papers):
        k = len(p.authors)
        row = X[i]
        row[index["gender_female_share"]] = sum(a.gender == "female" for a in p.authors) / k
        for a in p.authors:
            row[index[f"stage_{a.career_stage}_share"]] += 1.0 / k
            if "race" not in protected:
                row[index[f"race_{a.race}_share"]] += 1.0 / k
            if "country" not in protected:
                row[index["country_underdeveloped_share"]] += (a.country_class == "underdeveloped") / k
        row[index[f"conf_{p.conference}"]] = 1.0
        row[index["paper_h_index"]] = p.paper_h_index
    return cols, X


def fit_normalization(columns: Sequence[str], X: np.ndarray) -> dict[str, tuple[float, float]]:
    return {c: (float(X[:, j].min()), float(X[:, j].max())) for j, c in enumerate(columns)}


def normalize(columns: Sequence[str], X: np.ndarray, params: Mapping[str, tuple[float, float]]) -> np.ndarray:
    """Min-max scale each column; a constant column maps to 0.0."""
    out = np.empty_like(X, dtype=np.float64)
    for j, c in enumerate(columns):
        lo, hi = params[c]
        out[:, j] = 0.0 if hi == lo else (X[:, j] - lo) / (hi - lo)
    return out


def preprocess(dataset: Dataset, protected_attrs: Iterable[str] = PROTECTED_ATTRS) -> FeatureMatrix:
    if len(dataset) == 0:
        raise ValidationError("cannot preprocess an empty dataset")
    cols, raw = encode(dataset, protected_attrs)
    params = fit_normalization(cols, raw)
    lo, hi = params["paper_h_index"]
    if lo == hi:
        warnings.warn("paper_h_index is constant; normalized to 0.0", RuntimeWarning, stacklevel=2)
    X = normalize(cols, raw, params)
    return FeatureMatrix(
        paper_ids=tuple(p.paper_id for p in dataset.papers),
        columns=cols,
        X=X,
        labels=np.array([p.label for p in dataset.papers], dtype=np.float64),
        race_mask=np.array([p.race_protected for p in dataset.papers], dtype=bool),
        country_mask=np.array([p.country_protected for p in dataset.papers], dtype=bool),
        normalization_params=params,
    )


def _apportion(sizes: Sequence[int], ratio: float, total: int) -> list[int]:
    """Largest-remainder allocation of ``total`` train rows across strata."""
    quotas = [ratio * s for s in sizes]
    alloc = [int(np.floor(q)) for q in quotas]
    order = sorted(range(len(sizes)), key=lambda i: (-(quotas[i] - alloc[i]), i))
    short = total - sum(alloc)
    for i in order:
        if short <= 0:
            break
        if alloc[i] < sizes[i]:
            alloc[i] += 1
            short -= 1
    return alloc


def stratified_split(fm: FeatureMatrix, ratio: float = 0.8, seed: int = 0) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Partition rows into train/validation, stratified on label x race x country.

    Joint cells with fewer than two rows are pooled into label-only strata.
    """
    if not 0.0 < ratio < 1.0:
        raise ValidationError(f"split ratio must lie in (0, 1), got {ratio}")
    n = len(fm)
    if n < 5:
        raise ValidationError(f"need at least 5 rows to split, got {n}")

    cells: dict[tuple, list[int]] = {}
    for i in range(n):
        key = (int(fm.labels[i]), bool(fm.race_mask[i]), bool(fm.country_mask[i]))
        cells.setdefault(key, []).append(i)
    strata: dict[tuple, list[int]] = {}
    for key, rows in cells.items():
        if len(rows) >= 2:
            strata[("joint",) + key] = rows
        else:
            strata.setdefault(("label", key[0]), []).extend(rows)

    keys = sorted(strata)
    n_train = min(max(int(round(ratio * n)), 1), n - 1)
    alloc = _apportion([len(strata[k]) for k in keys], ratio, n_train)

    rng = np.random.default_rng(seed)
    train, val = [], []
    for key, k in zip(keys, alloc):
        rows = np.array(sorted(strata[key]))
        rng.shuffle(rows)
        train.extend(rows[:k].tolist())
        val.extend(rows[k:].tolist())
    return fm.subset(sorted(train)), fm.subset(sorted(val))


# -------------------------------------------------------------------- synthesis

CONFERENCE_MARGINALS = {
    # conference: (female %, race-protected %, country-protected %)
    "SIGCHI": (41.88, 6.84, 21.94),
    "DIS": (65.79, 35.09, 24.56),
    "IUI": (43.75, 51.56, 39.06),
}
DEFAULT_COUNTS = {"SIGCHI": 351, "DIS": 115, "IUI": 64}
DEFAULT_STAGE_PROBS = {
    "Professor": 0.15,
    "AssociateProfessor": 0.15,
    "Lecturer": 0.10,
    "PostDoc": 0.15,
    "GradStudent": 0.45,
}
# mean h-index per career stage; h ~ round(Gamma(shape, mean / shape))
DEFAULT_H_MEANS = {
    "Professor": 30.0,
    "AssociateProfessor": 18.0,
    "Lecturer": 10.0,
    "PostDoc": 8.0,
    "GradStudent": 3.0,
}


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the synthetic candidate pool.

    Marginals are percentages per conference: ``female_pct`` is the share of
    female author slots; ``race_pct`` / ``country_pct`` are the shares of papers
    that are protected under the any-author rule.

    Labels: exactly ``n_accepted`` papers are accepted, those with the largest
    ``quality_slope * z(h) + conference_effect - bias_strength * (race + country)``
    after adding standard logistic noise, where ``z(h)`` is the min-max
    normalized paper h-index centred at 0.5.
    """

    n_papers: int = 530
    counts: Mapping[str, int] = field(default_factory=lambda: dict(DEFAULT_COUNTS))
    female_pct: Mapping[str, float] = field(default_factory=lambda: {c: v[0] for c, v in CONFERENCE_MARGINALS.items()})
    race_pct: Mapping[str, float] = field(default_factory=lambda: {c: v[1] for c, v in CONFERENCE_MARGINALS.items()})
    country_pct: Mapping[str, float] = field(default_factory=lambda: {c: v[2] for c, v in CONFERENCE_MARGINALS.items()})
    n_accepted: int = 351
    bias_strength: float = 2.0
    quality_slope: float = 4.0
    conference_effect: Mapping[str, float] = field(default_factory=lambda: {c: 0.0 for c in CONFERENCES})
    authors_per_paper: tuple[int, int] = (1, 5)
    stage_probs: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_STAGE_PROBS))
    h_means: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_H_MEANS))
    h_shape: float = 4.0

    def validate(self) -> None:
        if self.n_papers <= 0:
            raise ValidationError("n_papers must be positive")
        if set(self.counts) != set(CONFERENCES):
            raise ValidationError(f"counts must cover exactly {CONFERENCES}")
        if any(v < 0 for v in self.counts.values()):
            raise ValidationError("per-conference counts must be non-negative")
        if sum(self.counts.values()) != self.n_papers:
            raise ValidationError(
                f"per-conference counts sum to {sum(self.counts.values())}, expected n_papers={self.n_papers}"
            )
        for name in ("female_pct", "race_pct", "country_pct"):
            table = getattr(self, name)
            if set(table) != set(CONFERENCES):
                raise ValidationError(f"{name} must cover exactly {CONFERENCES}")
            for conf, v in table.items():
                if not 0.0 <= v <= 100.0:
                    raise ValidationError(f"infeasible marginal {name}[{conf}] = {v}: must lie in [0, 100]")
        if not 0 <= self.n_accepted <= self.n_papers:
            raise ValidationError("n_accepted must lie in [0, n_papers]")
        if self.bias_strength < 0:
            raise ValidationError("bias_strength must be >= 0")
        lo, hi = self.authors_per_paper
        if not 1 <= lo <= hi:
            raise ValidationError("authors_per_paper must satisfy 1 <= min <= max")
        if set(self.stage_probs) != set(CAREER_STAGES) or any(v < 0 for v in self.stage_probs.values()):
            raise ValidationError("stage_probs must give a non-negative weight to every career stage")
        if sum(self.stage_probs.values()) <= 0:
            raise ValidationError("stage_probs must not be all zero")
        if set(self.h_means) != set(CAREER_STAGES) or any(v <= 0 for v in self.h_means.values()):
            raise ValidationError("h_means must give a positive mean to every career stage")
        if self.h_shape <= 0:
            raise ValidationError("h_shape must be positive")


def _choose_flags(rng: np.random.Generator, n: int, pct: float) -> np.ndarray:
    flags = np.zeros(n, dtype=bool)
    k = int(round(pct / 100.0 * n))
    flags[rng.permutation(n)[:k]] = True
    return flags


def _protected_slots(rng: np.random.Generator, n_authors: int, protected: bool) -> np.ndarray:
    """Author slots carrying the protected value; at least one if ``protected``."""
    slots = np.zeros(n_authors, dtype=bool)
    if protected:
        k = int(rng.integers(1, n_authors + 1))
        slots[rng.permutation(n_authors)[:k]] = True
    return slots


def generate_synthetic(spec: SyntheticSpec | None = None, seed: int = 0) -> Dataset:
    """Draw a candidate pool whose per-conference marginals match ``spec``.

    Protected papers and female author slots are assigned by exact quota
    within each conference, so realized marginals differ from the targets only
    by rounding.
    """
    spec = spec or SyntheticSpec()
    spec.validate()
    rng = np.random.default_rng(seed)
    stages = list(CAREER_STAGES)
    stage_p = np.array([spec.stage_probs[s] for s in stages], dtype=np.float64)
    stage_p /= stage_p.sum()
    lo, hi = spec.authors_per_paper

    drafts = []  # (conference, [author dicts], race_flag, country_flag)
    for conf in CONFERENCES:
        n = spec.counts[conf]
        if n == 0:
            continue
        race_flags = _choose_flags(rng, n, spec.race_pct[conf])
        country_flags = _choose_flags(rng, n, spec.country_pct[conf])
        sizes = rng.integers(lo, hi + 1, size=n)
        female = _choose_flags(rng, int(sizes.sum()), spec.female_pct[conf])
        slot = 0
        for i in range(n):
            k = int(sizes[i])
            race_slots = _protected_slots(rng, k, bool(race_flags[i]))
            country_slots = _protected_slots(rng, k, bool(country_flags[i]))
            authors = []
            for j in range(k):
                stage = stages[int(rng.choice(len(stages), p=stage_p))]
                mean = spec.h_means[stage]
                h = int(round(rng.gamma(spec.h_shape, mean / spec.h_shape)))
                race = RACES[2 + int(rng.integers(2))] if race_slots[j] else RACES[int(rng.integers(2))]
                authors.append(
                    dict(
                        gender="female" if female[slot] else "male",
                        race=race,
                        country_class="underdeveloped" if country_slots[j] else "developed",
                        career_stage=stage,
                        h_index=h,
                    )
                )
                slot += 1
            drafts.append((conf, authors, bool(race_flags[i]), bool(country_flags[i])))

    papers = []
    n_auth = 0
    for idx, (conf, authors, _, _) in enumerate(drafts):
        pid = f"P{idx + 1:04d}"
        recs = []
        for a in authors:
            n_auth += 1
            recs.append(AuthorRecord(author_id=f"A{n_auth:05d}", **a))
        papers.append(PaperRecord(pid, f"Synthetic paper {idx + 1}", tuple(recs), conf, 0))
    provisional = Dataset.build(papers, "synthetic", seed)

    h = np.array([p.paper_h_index for p in provisional.papers])
    span = h.max() - h.min()
    z = (h - h.min()) / span - 0.5 if span > 0 else np.zeros_like(h)
    prot = np.array([d[2] for d in drafts], dtype=np.float64) + np.array([d[3] for d in drafts], dtype=np.float64)
    conf_eff = np.array([spec.conference_effect.get(d[0], 0.0) for d in drafts])
    logits = spec.quality_slope * z + conf_eff - spec.bias_strength * prot
    noisy = logits + rng.logistic(size=len(drafts))
    order = sorted(range(len(drafts)), key=lambda i: (-noisy[i], i))
    accepted = set(order[: spec.n_accepted])
    papers = [replace(p, label=int(i in accepted)) for i, p in enumerate(papers)]
    return Dataset.build(papers, "synthetic", seed)


def realized_marginals(dataset: Dataset) -> dict[str, dict[str, float]]:
    """Per-conference percentages: female author slots, race/country protected papers."""
    out = {}
    for conf in CONFERENCES:
        ps = [p for p in dataset.papers if p.conference == conf]
        if not ps:
            continue
        slots = [a for p in ps for a in p.authors]
        out[conf] = {
            "female_pct": 100.0 * sum(a.gender == "female" for a in slots) / len(slots),
            "race_pct": 100.0 * sum(p.race_protected for p in ps) / len(ps),
            "country_pct": 100.0 * sum(p.country_protected for p in ps) / len(ps),
        }
    return out
