import numpy as np
import pytest

from percoface.connectivity import Config
from percoface.lattice import build_box


@pytest.fixture(scope="session")
def box21():
    """The smallest box: d=2, L=1, edges b=0, l=1, t=2, r=3."""
    return build_box(2, 1)


@pytest.fixture(scope="session")
def box23():
    return build_box(2, 3)


@pytest.fixture(scope="session")
def box24():
    return build_box(2, 4)


class ScriptedRng:
    """Drives step() with a fixed list of (edge, coin) draws."""

    algorithm = "scripted"
    seed = -1

    def __init__(self, moves):
        self.moves = list(moves)
        self.i = 0
        self.n_draws = 0
        self._pending = None

    def draw_edge(self, n_edges):
        edge, coin = self.moves[self.i]
        self.i += 1
        self._pending = coin
        self.n_draws += 1
        return edge

    def draw_coin(self, p):
        self.n_draws += 1
        return self._pending


@pytest.fixture
def scripted_rng():
    return ScriptedRng


def make_config(lattice, open_edges):
    bits = np.zeros(lattice.n_edges, dtype=bool)
    bits[list(open_edges)] = True
    return Config(lattice, bits)
