from __future__ import annotations

import contextlib
import time
from pathlib import Path

import numpy as np
import pytest

from sedna.crypto import KeyPair

ACCEPTANCE_LOG = Path(__file__).resolve().parent.parent / "acceptance_log.txt"
_results: dict[int, tuple[bool, str, float]] = {}


class _Record:
    def __init__(self):
        self.detail = ""


@pytest.fixture
def acceptance():
    """``with acceptance(n) as rec:`` marks criterion n pass/fail; rec.detail is logged."""

    @contextlib.contextmanager
    def run(number: int):
        rec = _Record()
        t0 = time.perf_counter()
        try:
            yield rec
        except BaseException as exc:
            msg = rec.detail or f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
            _results[number] = (False, msg, time.perf_counter() - t0)
            raise
        _results[number] = (True, rec.detail, time.perf_counter() - t0)

    return run


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    lines = []
    for number in sorted(_results):
        ok, detail, secs = _results[number]
        lines.append(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'} ({secs:.1f}s) {detail}")
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
    ACCEPTANCE_LOG.write_text("\n".join(lines) + "\n")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def keypair():
    return KeyPair.from_seed(bytes(range(32)))
