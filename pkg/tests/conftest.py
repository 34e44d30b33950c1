import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from movex.frames import Frame  # noqa: E402


def shifted_pair(rng, width, height, sx, sy, index=0):
    """Two crops of one random texture; content moves by (sx, sy) from the first to the second."""
    pad = max(abs(sx), abs(sy)) + 1
    big = rng.integers(0, 256, (height + 2 * pad, width + 2 * pad), dtype=np.uint8)
    prev = big[pad:pad + height, pad:pad + width]
    cur = big[pad - sy:pad - sy + height, pad - sx:pad - sx + width]
    return Frame(index, prev.copy()), Frame(index + 1, cur.copy())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_report():
    """Record one pass/fail line per criterion; lines are echoed and repeated in the summary."""
    def report(n: int, ok: bool, detail: str) -> str:
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return line
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
