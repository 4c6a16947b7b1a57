import numpy as np
import pytest


def rel_fro(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), np.finfo(float).tiny)


def max_abs(a, b):
    return float(np.abs(np.asarray(a) - np.asarray(b)).max())


def instance(seed, l, k, q, c=3):
    """Well-conditioned full-column-rank base, new rows and labels."""
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1, 1, size=(l, k))
    Ax = rng.uniform(-1, 1, size=(q, k))
    Y = rng.uniform(-1, 1, size=(l, c))
    Ya = rng.uniform(-1, 1, size=(q, c))
    return A, Ax, Y, Ya


def rank_deficient_instance(seed, l, k, rank, q):
    """Base of the given rank plus q <= k - rank generic new rows.

    The new rows add directions outside the base row space, so C has full
    column rank.
    """
    assert q <= k - rank
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1, 1, size=(l, rank)) @ rng.uniform(-1, 1, size=(rank, k))
    Ax = rng.uniform(-1, 1, size=(q, k))
    return A, Ax


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
