import hypothesis
import numpy as np
import pytest

from lskr.estimators import Domain, Sample
from lskr.kernels import KernelSpec

hypothesis.settings.register_profile("ci", max_examples=50, deadline=None)
hypothesis.settings.load_profile("ci")

# One line per acceptance criterion, echoed after the test summary so
# the pass/fail record is visible even with captured output.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def spec():
    return KernelSpec()


def random_sample(rng, n=200, d=1, label=Domain.TARGET, y_fn=None):
    """Sorted-u sample with uniform covariates and optional response rule."""
    u = np.sort(rng.uniform(0.0, 1.0, n))
    x = rng.uniform(0.0, 1.0, (n, d))
    if y_fn is None:
        y = rng.normal(0.0, 1.0, n)
    else:
        y = y_fn(u, x)
    return Sample(u=u, x=x, y=y, domain_label=label)
