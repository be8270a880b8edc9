import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("thorough", max_examples=500, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

from kkscheme.flux_model import affine_model, constant_model, quadratic_model, saturating_model  # noqa: E402

MODELS = {
    "constant": lambda: constant_model(1.5),
    "affine": lambda: affine_model(),
    "quadratic": lambda: quadratic_model(),
    "saturating": lambda: saturating_model(),
}


@pytest.fixture(params=sorted(MODELS))
def model(request):
    return MODELS[request.param]()


positive = st.floats(min_value=0.05, max_value=3.0, allow_nan=False)


@st.composite
def positive_states(draw, min_cells=2, max_cells=12):
    n = draw(st.integers(min_cells, max_cells))
    u = draw(st.lists(positive, min_size=n, max_size=n))
    v = draw(st.lists(positive, min_size=n, max_size=n))
    return np.array(u), np.array(v)


model_names = st.sampled_from(sorted(MODELS))


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(acceptance.RESULTS):
        terminalreporter.write_line(acceptance.RESULTS[n])
