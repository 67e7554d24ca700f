import numpy as np
import pytest

from relplan.plan import RequirementSet
from relplan.vdg import InfluenceMatrix, ValueDependencyGraph

# Overall influences of the four-requirement worked example.
TABLE2_POS = np.array([[0.0, 0.6, 0.8, 0.8],
                       [0.2, 0.0, 0.2, 0.3],
                       [0.7, 0.6, 0.0, 0.8],
                       [0.2, 0.2, 0.2, 0.0]])
TABLE2_NEG = np.array([[0.0, 0.1, 0.1, 0.1],
                       [0.0, 0.0, 0.0, 0.0],
                       [0.1, 0.1, 0.0, 0.1],
                       [0.0, 0.0, 0.0, 0.0]])
# the printed differences, so that 0.7 is the float 0.7 and not 0.8 - 0.1
TABLE2 = np.array([[0.0, 0.5, 0.7, 0.7],
                   [0.2, 0.0, 0.2, 0.3],
                   [0.6, 0.5, 0.0, 0.7],
                   [0.2, 0.2, 0.2, 0.0]])

EXAMPLE1_EDGES = [(0, 1, "+", 0.4), (1, 3, "+", 0.3), (0, 2, "+", 0.8), (2, 3, "+", 0.8),
                  (0, 3, "-", 0.1)]


@pytest.fixture
def table2():
    return InfluenceMatrix(TABLE2_POS.copy(), TABLE2_NEG.copy(), TABLE2.copy())


@pytest.fixture
def example1():
    return ValueDependencyGraph.from_edges(4, EXAMPLE1_EDGES)


@pytest.fixture
def example3_reqs():
    # r4 costs more than what is left once r1..r3 are bought
    return RequirementSet(np.array([5.0, 5.0, 5.0, 20.0]), np.array([20.0, 10.0, 50.0, 17.0]))


def random_graph_edges(rng, n, density, neg_frac=0.3):
    edges = []
    for i in range(n):
        for j in range(n):
            if i != j and rng.random() < density:
                q = "-" if rng.random() < neg_frac else "+"
                edges.append((i, j, q, float(rng.integers(1, 11)) / 10))
    return edges


# acceptance criteria report ---------------------------------------------------

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
