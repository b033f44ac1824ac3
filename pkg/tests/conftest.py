import struct

import numpy as np
import pytest

from evgap.evio import EventStream


def reference_encode(events, width=346, height=260):
    """Plain-struct EVT1 encoder used as an oracle for the numpy codec."""
    out = [struct.pack("<4sHHQ", b"EVT1", width, height, len(events))]
    for t, x, y, p in events:
        out.append(struct.pack("<QHHB", t, x, y, p))
    return b"".join(out)


def random_events(rng, n, width=346, height=260, t_max=1_000_000):
    t = np.sort(rng.integers(0, t_max, n))
    x = rng.integers(0, width, n)
    y = rng.integers(0, height, n)
    p = rng.integers(0, 2, n)
    return [(int(a), int(b), int(c), int(d)) for a, b, c, d in zip(t, x, y, p)]


def random_stream(rng, n, width=346, height=260, t_max=1_000_000, t0=0):
    t = np.sort(rng.integers(t0, t0 + t_max, n))
    return EventStream(width, height, t, rng.integers(0, width, n), rng.integers(0, height, n),
                       rng.integers(0, 2, n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[key])
