from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NotNeighbors
from .network import Network


@dataclass
class State:
    values: np.ndarray
    n: int
    tick: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.int64)
        if self.n < 3:
            raise ValueError(f"Alphabet size must be >= 3, got {self.n}")
        if self.values.size and (self.values.min() < 0 or self.values.max() >= self.n):
            raise ValueError(f"State values must lie in [0, {self.n})")

    @classmethod
    def zeros(cls, n_nodes: int, n: int) -> 'State':
        return cls(np.zeros(n_nodes, dtype=np.int64), n, 0)

    def copy(self) -> 'State':
        return State(self.values.copy(), self.n, self.tick)

    def is_zero(self) -> bool:
        return not self.values.any()


def forced_delta(a, b, n: int):
    """
    Representative of b - a mod n in {-1, 0, 1}; entries outside that range
    come back as 2 (the pair is discontinuous).
    """
    d = np.mod(np.asarray(b) - np.asarray(a), n)
    out = np.where(d == 0, 0, np.where(d == 1, 1, np.where(d == n - 1, -1, 2)))
    return out


def step(network: Network, state: State, link_mask: Optional[np.ndarray] = None) -> State:
    """
    One synchronous GHM update.

    Args:
        network (Network): Communication graph.
        state (State): Current configuration.
        link_mask (np.ndarray): Optional per-edge liveness for this tick.

    Returns:
        State: The configuration at tick + 1.
    """
    u = state.values
    n = state.n
    excited = u[network.arc_src] == 1
    if link_mask is not None:
        link_mask = np.asarray(link_mask, dtype=bool)
        if link_mask.shape != (network.n_edges,):
            raise ValueError("link_mask must cover every edge")
        excited &= link_mask[network.arc_edge]
    has_one = np.zeros(len(u), dtype=bool)
    has_one[network.arc_dst[excited]] = True

    nxt = np.where(u != 0, (u + 1) % n, np.where(has_one, 1, 0))
    return State(nxt, n, state.tick + 1)


def is_continuous(network: Network, state: State, node_subset=None):
    """
    Check that every neighbor pair differs by at most one step cyclically.

    Returns:
        tuple: (bool, first violating edge or None).
    """
    edges = network.edges
    if node_subset is not None:
        mask = np.zeros(network.n_nodes, dtype=bool)
        mask[np.asarray(list(node_subset), dtype=int)] = True
        edges = edges[mask[edges[:, 0]] & mask[edges[:, 1]]]
    if len(edges) == 0:
        return True, None
    delta = forced_delta(state.values[edges[:, 0]], state.values[edges[:, 1]], state.n)
    bad = np.flatnonzero(delta == 2)
    if len(bad):
        i, j = edges[bad[0]]
        return False, (int(i), int(j))
    return True, None


def is_subordinate(network: Network, state: State, x: int, y: int) -> bool:
    """True iff y is one step ahead of its neighbor x."""
    if not network.are_neighbors(x, y):
        raise NotNeighbors(f"Nodes {x} and {y} are not neighbors")
    return bool(state.values[y] == (state.values[x] + 1) % state.n)


def wavefront(state: State) -> np.ndarray:
    """Awake nodes: those in state 0."""
    return np.flatnonzero(state.values == 0)


def awake_fraction(state: State) -> float:
    return float((state.values == 0).mean()) if state.values.size else 0.0


ENERGY_LABELS = {0: 'awake', 1: 'waking', 2: 'broadcasting'}


def relabel_energy(values: np.ndarray) -> list:
    """Report-level names for the wake/broadcast reading of states 0, 1 and 2."""
    return [ENERGY_LABELS.get(int(v), 'sleeping') for v in values]
