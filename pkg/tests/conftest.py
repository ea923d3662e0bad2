import numpy as np
import pytest

from latprofit.acceptance import FIXTURES
from latprofit.graph import Graph, TriggeringModel
from latprofit.oracle import read_instance


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def ic_fixture():
    return read_instance(FIXTURES / "oracle_ic")


@pytest.fixture(scope="session")
def lt_fixture():
    return read_instance(FIXTURES / "oracle_lt")


def path_graph(n: int) -> Graph:
    return Graph.from_arcs(n, list(range(n - 1)), list(range(1, n)))


def single_arc(p: float) -> TriggeringModel:
    return TriggeringModel.ic(Graph.from_arcs(2, [0], [1]), [p])
