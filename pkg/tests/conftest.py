import math
import warnings

import numpy as np
import pytest
from scipy.integrate import IntegrationWarning, quad
from scipy.optimize import brentq

from graphheat import build_graph


def random_connected_graph(rng, n, max_weight=2.0, extra_edge_prob=0.15, prefix="v"):
    """Random spanning tree plus extra edges; weights uniform in (0, max_weight]."""
    names = [f"{prefix}{i:03d}" for i in range(n)]
    pairs = set()
    for i in range(1, n):
        j = int(rng.integers(0, i))
        pairs.add((j, i))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < extra_edge_prob:
                pairs.add((i, j))
    return build_graph(
        (names[i], names[j], max_weight - rng.uniform(0.0, max_weight)) for i, j in sorted(pairs)
    )


def k2_delta(t):
    """Half-gap at time t of the log-diffusion on K2 started from (1, e²).

    With m = (1 + e²)/2 and u = (m - δ, m + δ) the system reduces to
    δ' = -log((m + δ)/(m - δ)), which is inverted here by quadrature.
    """
    m, d0 = (1 + math.exp(2.0)) / 2, (math.exp(2.0) - 1) / 2

    def elapsed(d):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrationWarning)
            return quad(lambda s: 1.0 / math.log((m + s) / (m - s)), d, d0, limit=200)[0]

    return brentq(lambda d: elapsed(d) - t, 1e-12, d0 - 1e-12, xtol=1e-14)


@pytest.fixture
def k2():
    return build_graph([("a", "b", 1.0)])


@pytest.fixture
def p3():
    return build_graph([("a", "b", 1.0), ("b", "c", 1.0)])


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


@pytest.fixture(scope="session")
def corpus():
    """100 random connected graphs with 5-50 vertices and weights in (0, 2]."""
    rng = np.random.default_rng(7)
    graphs = []
    for k in range(100):
        n = int(rng.integers(5, 51))
        graphs.append(random_connected_graph(rng, n, extra_edge_prob=min(0.3, 3.0 / n)))
    return graphs


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
