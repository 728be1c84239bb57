import math

import numpy as np
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)
exponents = st.sampled_from([0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 7.0, math.inf])


@st.composite
def vectors(draw, min_size=1, max_size=12, elements=finite):
    return np.array(draw(st.lists(elements, min_size=min_size, max_size=max_size)))


@st.composite
def semiaxes(draw, min_size=1, max_size=10):
    vals = draw(st.lists(st.floats(min_value=1e-3, max_value=1e3), min_size=min_size, max_size=max_size))
    return np.sort(np.array(vals))[::-1]


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
