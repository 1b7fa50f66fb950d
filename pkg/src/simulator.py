import hashlib
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from .config import log
from .ghm import State, awake_fraction, step
from .network import Network


def make_rng(seed: int, *stream) -> np.random.Generator:
    """Counter-based generator for an independent stream identified by `stream`."""
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(seq))


def state_hash(values: np.ndarray) -> str:
    return hashlib.sha1(np.ascontiguousarray(values, dtype=np.int64).tobytes()).hexdigest()


@dataclass
class LinkFailure:
    p_s: float
    seed: int = 0
    mode: str = 'per_tick'  # 'per_tick' or 'per_lifetime'
    stream: tuple = ()

    def __post_init__(self):
        if not 0.0 < self.p_s <= 1.0:
            raise ValueError(f"p_s must lie in (0, 1], got {self.p_s}")
        if self.mode not in ('per_tick', 'per_lifetime'):
            raise ValueError(f"Unknown link failure mode '{self.mode}'")


def link_masks(link_failure: Optional[LinkFailure], n_edges: int):
    """Endless per-tick edge liveness masks; None while links never fail."""
    if link_failure is None:
        while True:
            yield None
    rng = make_rng(link_failure.seed, *link_failure.stream)
    if link_failure.mode == 'per_lifetime':
        mask = rng.random(n_edges) < link_failure.p_s
        while True:
            yield mask
    while True:
        yield rng.random(n_edges) < link_failure.p_s


@dataclass
class TickEvent:
    tick: int
    fired: np.ndarray
    stalled: np.ndarray


@dataclass
class RunTrace:
    initial: State
    final: State = None
    events: list = field(default_factory=list)
    awake: list = field(default_factory=list)
    hashes: list = field(default_factory=list)
    snapshots: deque = field(default_factory=deque)

    @property
    def ticks(self) -> int:
        return self.final.tick - self.initial.tick if self.final is not None else 0

    def snapshot_ticks(self) -> list:
        return [t for t, _ in self.snapshots]

    def history(self):
        """
        Retained snapshots stacked in time order.

        Returns:
            tuple: (ticks array, values matrix of shape (len, n_nodes)).
        """
        ticks = np.array([t for t, _ in self.snapshots], dtype=int)
        values = np.vstack([v for _, v in self.snapshots]) if self.snapshots else np.zeros((0, 0), dtype=np.int64)
        return ticks, values

    def state_at(self, tick: int) -> Optional[State]:
        for t, v in self.snapshots:
            if t == tick:
                return State(v.copy(), self.initial.n, t)
        return None


class Simulator:
    def __init__(self, network: Network, initial: State, ticks: int,
                 link_failure: Optional[LinkFailure] = None, keep_snapshots: Optional[int] = None):
        """
        Initialize the Simulator.

        Args:
            network (Network): Communication graph.
            initial (State): Configuration at the first tick.
            ticks (int): Number of updates to apply.
            link_failure (LinkFailure): Optional lossy-link model.
            keep_snapshots (int): Ring buffer size for full snapshots (None keeps all).
        """
        if ticks < 0:
            raise ValueError("ticks must be >= 0")
        if len(initial.values) != network.n_nodes:
            raise ValueError("State size does not match the network")
        self.network = network
        self.initial = initial
        self.ticks = ticks
        self.link_failure = link_failure
        self.keep_snapshots = keep_snapshots
        self.trace = None
        self.results = {}

    def run(self) -> RunTrace:
        """
        Iterate the update rule and record per-tick events.
        """
        state = self.initial.copy()
        trace = RunTrace(initial=self.initial.copy(), snapshots=deque(maxlen=self.keep_snapshots))
        trace.snapshots.append((state.tick, state.values.copy()))
        trace.awake.append(awake_fraction(state))
        trace.hashes.append(state_hash(state.values))
        masks = link_masks(self.link_failure, self.network.n_edges)

        for _ in range(self.ticks):
            nxt = step(self.network, state, next(masks))
            zeros = state.values == 0
            trace.events.append(TickEvent(
                tick=state.tick,
                fired=np.flatnonzero(zeros & (nxt.values == 1)),
                stalled=np.flatnonzero(zeros & (nxt.values == 0)),
            ))
            state = nxt
            trace.snapshots.append((state.tick, state.values.copy()))
            trace.awake.append(awake_fraction(state))
            trace.hashes.append(state_hash(state.values))

        trace.final = state
        self.trace = trace

        # Summary metrics
        tail = trace.awake[len(trace.awake) // 2:]
        self.results = {
            'Ticks': self.ticks,
            'Nodes': self.network.n_nodes,
            'Final Awake Fraction': round(trace.awake[-1], 4),
            'Mean Awake Fraction (second half)': round(float(np.mean(tail)), 4),
            'Fired Total': int(sum(len(e.fired) for e in trace.events)),
            'Died Out': bool(state.is_zero()),
        }
        log(f"Simulated {self.ticks} ticks on {self.network.n_nodes} nodes", 'debug')
        return trace

    def get_results(self) -> dict:
        """
        Get the summary of the run.

        Returns:
            dict: Dictionary containing the calculated metrics.
        """
        return self.results

    def get_awake_series(self) -> pd.Series:
        """
        Get the awake fraction of the run.

        Returns:
            pd.Series: Fraction of nodes in state 0, indexed by tick.
        """
        start = self.initial.tick
        return pd.Series(self.trace.awake, index=pd.RangeIndex(start, start + len(self.trace.awake), name='tick'),
                         name='awake_fraction')


def run(network: Network, initial: State, ticks: int, link_failure: Optional[LinkFailure] = None,
        keep_snapshots: Optional[int] = None) -> RunTrace:
    return Simulator(network, initial, ticks, link_failure, keep_snapshots).run()
