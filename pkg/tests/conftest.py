import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spectracube.core import DEFAULT_GRID, HyperCube  # noqa: E402

_ACCEPTANCE = []


def pytest_addoption(parser):
    parser.addoption("--dataset", default=None,
                     help="root of a camera-array video dataset; enables the report-only dataset run")


@pytest.fixture
def dataset_root(request):
    root = request.config.getoption("--dataset")
    if not root:
        pytest.skip("no --dataset given")
    return Path(root)


@pytest.fixture
def report():
    """Record one acceptance line: ``report(n, title, ok, detail)``."""

    def _report(n, title, ok, detail=""):
        _ACCEPTANCE.append((n, title, bool(ok), detail))

    return _report


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, title, ok, detail in sorted(_ACCEPTANCE, key=lambda r: str(r[0])):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {title} | {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_cube(rng, h=4, w=5, grid=DEFAULT_GRID, levels=True):
    s = rng.integers(0, 256, (len(grid), h, w)) / 255.0 if levels else rng.random((len(grid), h, w))
    return HyperCube(s, grid)
