from abc import ABC, abstractmethod
from typing import Optional

import numpy as np

from .domain import HallwayDomain
from .errors import PreconditionError
from .ghm import State
from .network import Network
from .simulator import make_rng
from .topology import H1Basis, add_states


class InitialCondition(ABC):
    """
    Abstract base class for initial-state generators.
    """
    def __init__(self, name: str):
        self.name = name

    @abstractmethod
    def generate(self, network: Network, domain: Optional[HallwayDomain] = None,
                 basis: Optional[H1Basis] = None) -> State:
        """
        Build the state at tick 0.

        Args:
            network (Network): Graph the state lives on.
            domain (HallwayDomain): Domain, for geometric constructions.
            basis (H1Basis): Homology basis, for class-programmed states.

        Returns:
            State: One value per node.
        """
        pass


class AllZero(InitialCondition):
    def __init__(self, n: int):
        super().__init__(f"All Zero (n={n})")
        self.n = n

    def generate(self, network, domain=None, basis=None) -> State:
        return State.zeros(network.n_nodes, self.n)


class UniformRandom(InitialCondition):
    def __init__(self, n: int, seed: int = 0):
        super().__init__(f"Uniform Random (n={n}, seed={seed})")
        self.n = n
        self.seed = seed

    def generate(self, network, domain=None, basis=None) -> State:
        rng = make_rng(self.seed, 1)
        return State(rng.integers(0, self.n, network.n_nodes), self.n)


class FromCSV(InitialCondition):
    def __init__(self, path: str, n: int):
        super().__init__(f"From CSV ({path})")
        self.path = path
        self.n = n

    def generate(self, network, domain=None, basis=None) -> State:
        from .data_loader import DataLoader

        state = DataLoader().load_state(self.path, self.n, network.n_nodes)
        if state is None:
            raise PreconditionError(f"Initial state file {self.path} could not be loaded")
        return state


class SmoothField(InitialCondition):
    """
    floor(f) mod n for a slowly varying field f: a random plane plus an
    optional winding of `winding` full alphabet turns around `center`.
    Continuous whenever the field changes by less than 1 across any link.
    """
    def __init__(self, n: int, seed: int = 0, slope: float = 1.0, winding: int = 0, center=None):
        super().__init__(f"Smooth Field (n={n}, winding={winding})")
        self.n = n
        self.seed = seed
        self.slope = slope
        self.winding = winding
        self.center = center

    def generate(self, network, domain=None, basis=None) -> State:
        rng = make_rng(self.seed, 2)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        grad = self.slope * rng.uniform(0.0, 1.0) * np.array([np.cos(angle), np.sin(angle)])
        field = network.positions @ grad + rng.uniform(0.0, self.n)
        if self.winding:
            center = np.asarray(self.center if self.center is not None else network.positions.mean(axis=0))
            rel = network.positions - center
            theta = np.mod(np.arctan2(rel[:, 1], rel[:, 0]), 2.0 * np.pi)
            field = field + self.winding * self.n * theta / (2.0 * np.pi)
        return State(np.mod(np.floor(field).astype(np.int64), self.n), self.n)


class SeedLoop(InitialCondition):
    """Values 0, 1, ..., n-1 repeated along a closed walk of node ids."""
    def __init__(self, loop: list, n: int):
        super().__init__(f"Seed Loop ({len(loop)} nodes)")
        if len(loop) % n:
            raise ValueError(f"A seed loop length must be a multiple of n={n}, got {len(loop)}")
        self.loop = list(loop)
        self.n = n

    def generate(self, network, domain=None, basis=None) -> State:
        values = np.zeros(network.n_nodes, dtype=np.int64)
        values[self.loop] = np.arange(len(self.loop)) % self.n
        return State(values, self.n)


class WavePattern(InitialCondition):
    def __init__(self, specs: list):
        super().__init__(f"Wave Pattern ({len(specs)} waves)")
        if not specs:
            raise ValueError("A wave pattern needs at least one wave")
        self.specs = specs

    def generate(self, network, domain=None, basis=None) -> State:
        from .waves import single_wave

        if domain is None:
            raise PreconditionError("Wave patterns need the domain")
        total = State.zeros(network.n_nodes, self.specs[0].n)
        for spec in self.specs:
            total = add_states(total, single_wave(network, domain, spec), network, basis)
        return total


class ProgrammedClass(InitialCondition):
    def __init__(self, target: list, n: int):
        super().__init__(f"Programmed Class {list(target)}")
        self.target = list(target)
        self.n = n

    def generate(self, network, domain=None, basis=None) -> State:
        from .topology import homology_basis
        from .waves import realize_class

        if domain is None:
            raise PreconditionError("Class programming needs the domain")
        basis = basis or homology_basis(network)
        return realize_class(network, domain, basis, self.target, self.n)
