"""Record types, enum vocabularies and paper-level protected-group rules."""
from __future__ import annotations

from dataclasses import dataclass, field

GENDERS = ("male", "female")
RACES = ("White", "Asian", "Hispanic", "Black")
COUNTRY_CLASSES = ("developed", "underdeveloped")
CAREER_STAGES = ("Professor", "AssociateProfessor", "Lecturer", "PostDoc", "GradStudent")
CONFERENCES = ("IUI", "DIS", "SIGCHI")

PROTECTED_RACES = frozenset({"Hispanic", "Black"})
PROTECTED_COUNTRIES = frozenset({"underdeveloped"})
PROTECTED_ATTRS = ("race", "country")


class ValidationError(ValueError):
    """Input data or configuration violates a documented constraint."""


def canonical(value: str, vocabulary: tuple[str, ...], what: str) -> str:
    """Map a case-insensitive enum code onto its canonical spelling."""
    lookup = {v.lower(): v for v in vocabulary}
    try:
        return lookup[str(value).strip().lower()]
    except KeyError:
        raise ValidationError(
            f"unknown {what} code {value!r}; expected one of {', '.join(vocabulary)}"
        ) from None


@dataclass(frozen=True)
class AuthorRecord:
    author_id: str
    gender: str
    race: str
    country_class: str
    career_stage: str
    h_index: int

    def __post_init__(self):
        if self.gender not in GENDERS:
            raise ValidationError(f"unknown gender code {self.gender!r}")
        if self.race not in RACES:
            raise ValidationError(f"unknown race code {self.race!r}")
        if self.country_class not in COUNTRY_CLASSES:
            raise ValidationError(f"unknown country_class code {self.country_class!r}")
        if self.career_stage not in CAREER_STAGES:
            raise ValidationError(f"unknown career_stage code {self.career_stage!r}")
        if int(self.h_index) != self.h_index or self.h_index < 0:
            raise ValidationError(f"h_index must be a non-negative integer, got {self.h_index!r}")

    @property
    def race_protected(self) -> bool:
        return self.race in PROTECTED_RACES

    @property
    def country_protected(self) -> bool:
        return self.country_class in PROTECTED_COUNTRIES

    def protected(self, attr: str) -> bool:
        if attr == "race":
            return self.race_protected
        if attr == "country":
            return self.country_protected
        raise ValueError(f"unknown protected attribute {attr!r}")


@dataclass(frozen=True)
class PaperRecord:
    """One candidate paper.

    ``paper_h_index`` is derived, not read from disk: it is the mean over the
    authors of ``weight(career_stage) * h_index`` under the dataset's career
    weights (see :func:`fairselect.metrics.paper_utility`).
    """

    paper_id: str
    title: str
    authors: tuple[AuthorRecord, ...]
    conference: str
    label: int
    paper_h_index: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if not self.authors:
            raise ValidationError(f"paper without authors: {self.paper_id}")
        if self.label not in (0, 1):
            raise ValidationError(f"label must be 0 or 1 for paper {self.paper_id}")
        if self.conference not in CONFERENCES:
            raise ValidationError(f"unknown conference code {self.conference!r}")

    def protected(self, attr: str) -> bool:
        """Any-author rule: the paper is protected if any author is."""
        return any(a.protected(attr) for a in self.authors)

    @property
    def race_protected(self) -> bool:
        return self.protected("race")

    @property
    def country_protected(self) -> bool:
        return self.protected("country")
