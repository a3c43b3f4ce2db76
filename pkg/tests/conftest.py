"""
Pytest configuration and shared fixtures for morphoprot tests.

Usage:
    # Run all tests
    pytest tests/ -v

    # Skip the random-grid property sweeps
    pytest tests/ -v -m "not slow"

    # Run specific test
    pytest tests/test_morphology.py::TestSkeleton::test_lossless_square -v
"""
from collections import deque
from pathlib import Path

import numpy as np
import pytest

from morphoprot.grid import BinaryGrid, StructuringElement
from morphoprot.ingest import parse_pdb

FIXTURES = Path(__file__).parent / "fixtures"


def pytest_configure(config):
    """Configure pytest."""
    config.addinivalue_line("markers", "slow: mark test as slow running")


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def helix_path() -> Path:
    return FIXTURES / "helix.pdb"


@pytest.fixture(scope="session")
def strand_path() -> Path:
    return FIXTURES / "strand.pdb"


@pytest.fixture(scope="session")
def helix(helix_path):
    return parse_pdb(helix_path.read_text())


@pytest.fixture(scope="session")
def strand(strand_path):
    return parse_pdb(strand_path.read_text())


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


@pytest.fixture(autouse=True)
def _isolated_env(monkeypatch, tmp_path):
    """Keep tests away from the user's cache and environment."""
    for name in (
        "MORPHOPROT_CACHE",
        "MORPHOPROT_FETCH_URL",
        "MORPHOPROT_FETCH_TIMEOUT",
        "MORPHOPROT_THREADS",
        "MORPHOPROT_LOG_LEVEL",
        "MORPHOPROT_CONFIG",
    ):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.setenv("MORPHOPROT_CACHE", str(tmp_path / "cache"))


def grid_from_rows(rows: list[str]) -> BinaryGrid:
    """'#' is foreground, anything else background; rows top to bottom."""
    return BinaryGrid(np.array([[c == "#" for c in row] for row in rows], dtype=bool))


def flood_fill_count(marker: BinaryGrid, mask: BinaryGrid, se: StructuringElement) -> tuple[BinaryGrid, int]:
    """Independent oracle for geodesic dilation: BFS by rings.

    Returns the reconstruction and the iteration count that geodesic
    dilation reports (number of rings plus the final stable step).
    """
    h, w = mask.shape
    m = mask.bits
    seen = np.zeros((h, w), dtype=bool)
    frontier = deque()
    for r, c in zip(*np.nonzero(marker.bits & m)):
        seen[r, c] = True
        frontier.append((int(r), int(c)))
    rings = 0
    while frontier:
        nxt = deque()
        for r, c in frontier:
            for dx, dy in se:
                rr, cc = r + dy, c + dx
                if 0 <= rr < h and 0 <= cc < w and m[rr, cc] and not seen[rr, cc]:
                    seen[rr, cc] = True
                    nxt.append((rr, cc))
        if nxt:
            rings += 1
        frontier = nxt
    return BinaryGrid(seen), rings + 1
