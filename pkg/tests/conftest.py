import numpy as np
import pytest
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def opinion_arrays(max_n=8, max_d=3, low=-2.0, high=2.0):
    """Hypothesis strategy for ``(n, d)`` opinion arrays."""
    elems = st.floats(low, high, allow_nan=False, allow_infinity=False, width=64)
    shapes = st.tuples(st.integers(1, max_n), st.integers(1, max_d))
    return shapes.flatmap(lambda s: arrays(np.float64, s, elements=elems))


def alpha_arrays(n):
    elems = st.one_of(st.just(0.0), st.just(1.0), st.floats(0.0, 1.0, allow_nan=False))
    return arrays(np.float64, (n,), elements=elems)


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion, from the ``criterion`` user property."""
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when != "call":
                continue
            props = dict(rep.user_properties)
            if "criterion" in props:
                lines.append((props["criterion"], outcome.upper()[:4], props.get("detail", "")))
    if lines:
        terminalreporter.section("acceptance criteria")
        for name, verdict, detail in sorted(lines, key=lambda l: int(l[0].split()[0][1:])):
            terminalreporter.write_line(f"{verdict:4}  {name}  {detail}")
