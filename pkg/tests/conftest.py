import numpy as np
import pytest

from emsj.points import Relation


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_relation(metric, n, rng, tag="R", dim=None):
    """Small random relation of the point kind ``metric`` needs."""
    if metric == "hamming":
        dim = dim or 40
        from emsj.generate import random_words
        return Relation.from_words(tag, random_words(n, dim, rng), dim)
    if metric in ("l1", "l2"):
        return Relation.from_dense(tag, rng.integers(-3, 4, size=(n, dim or 5)).astype(float))
    if metric == "angular":
        return Relation.from_dense(tag, rng.standard_normal((n, dim or 4)) + 0.1)
    universe = dim or 12
    sets = [np.sort(rng.choice(universe, size=rng.integers(1, 6), replace=False)) for _ in range(n)]
    return Relation.from_sets(tag, sets)


def radius_for(metric):
    return {"hamming": 16, "l1": 6.0, "l2": 4.0, "angular": 0.3, "jaccard": 0.5}[metric]


# criterion number -> (title, passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def record(number, title, passed, detail=""):
    ACCEPTANCE[number] = (title, bool(passed), detail)
    line = f"[criterion {number:>2}] {'PASS' if passed else 'FAIL'}  {title}  {detail}"
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"[criterion {number:>2}] {'PASS' if passed else 'FAIL'}  {title}  {detail}")
