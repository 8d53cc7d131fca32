import random

import numpy as np
import pytest

from fairselect.schema import CAREER_STAGES, CONFERENCES, GENDERS, RACES, AuthorRecord, PaperRecord

_AC_RESULTS = []


def make_author(i, race="White", country="developed", stage="Professor", h=10, gender="male"):
    return AuthorRecord(f"A{i}", gender, race, country, stage, h)


def make_paper(pid, authors, conference="SIGCHI", label=1):
    return PaperRecord(pid, f"title {pid}", tuple(authors), conference, label)


def random_papers(rng: random.Random, n: int):
    papers = []
    k = 0
    for i in range(n):
        authors = []
        for _ in range(rng.randint(1, 4)):
            k += 1
            authors.append(AuthorRecord(
                f"A{k}", rng.choice(GENDERS), rng.choice(RACES),
                rng.choice(("developed", "underdeveloped")), rng.choice(CAREER_STAGES), rng.randint(0, 40),
            ))
        papers.append(PaperRecord(f"P{i:02d}", f"t{i}", tuple(authors), rng.choice(CONFERENCES), rng.randint(0, 1)))
    return papers


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid and "::test_ac" in report.nodeid:
        _AC_RESULTS.append((report.nodeid.split("::")[-1], report.outcome))
    elif report.when == "setup" and report.outcome != "passed" and "::test_ac" in report.nodeid:
        _AC_RESULTS.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _AC_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _AC_RESULTS:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")


def gain_fixture(rng: random.Random, max_papers: int = 10):
    """A baseline and a selection (≤ ``max_papers`` each) with both protected groups present."""
    while True:
        base = random_papers(rng, rng.randint(2, max_papers))
        sel = random_papers(rng, rng.randint(2, max_papers))
        if all(any(p.protected(a) for p in base) for a in ("race", "country")):
            return sel, base
