from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pcatmeasure import phantom as ph  # noqa: E402
from pcatmeasure.volume_io import BinaryMask, VoxelGrid  # noqa: E402


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE: list[str] = []


def record_criterion(number: int, ok: bool, text: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {text}"
    ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def straight():
    spec = ph.straight_tube()
    return (spec, *ph.render(spec))


@pytest.fixture(scope="session")
def yshape():
    spec = ph.y_phantom()
    return (spec, *ph.render(spec))


@pytest.fixture(scope="session")
def coronary():
    spec = ph.coronary_phantom()
    return (spec, *ph.render(spec))


def make_mask(data, spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)) -> BinaryMask:
    return BinaryMask(np.asarray(data, dtype=bool), spacing, origin)


def make_grid(data, spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)) -> VoxelGrid:
    return VoxelGrid(np.asarray(data), spacing, origin)
