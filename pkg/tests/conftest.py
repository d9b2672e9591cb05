import numpy as np
import pytest

from blindcomm import PlantedPartitionParams, build_planted_partition, lowpass_power_filter, paper_alpha


@pytest.fixture
def paper_setup():
    """n=100 planted partition at gamma=0.5 with the (I - alpha L)^5 filter."""
    params = PlantedPartitionParams.from_gamma(100, 0.5)
    return params, build_planted_partition(params), lowpass_power_filter(paper_alpha(100, 0.5), 5)


def random_symmetric(rng, n):
    A = rng.standard_normal((n, n))
    return (A + A.T) / 2


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
