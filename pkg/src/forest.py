from dataclasses import dataclass

import networkx as nx
import numpy as np
import pandas as pd

from .errors import InsufficientTrace, NotConverged
from .network import Network
from .periodicity_detector import _last_change_rows
from .simulator import RunTrace
from .topology import seed_nodes


@dataclass
class Forest:
    parent: np.ndarray       # -1 for roots
    parent_tick: np.ndarray  # tick the node became subordinate, -1 for roots
    roots: np.ndarray
    depth: np.ndarray

    def depth_level(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.depth == k)

    def to_networkx(self) -> nx.DiGraph:
        """Directed parent -> child edges."""
        g = nx.DiGraph()
        g.add_nodes_from(range(len(self.parent)))
        for child, p in enumerate(self.parent.tolist()):
            if p >= 0:
                g.add_edge(p, child, tick=int(self.parent_tick[child]))
        return g

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'parent': self.parent,
            'parent_tick': self.parent_tick,
            'depth': self.depth,
        }, index=pd.RangeIndex(len(self.parent), name='node_id'))


def subordination_forest(network: Network, trace: RunTrace) -> Forest:
    """
    Spanning forest recording how periodicity spread from the seeds.

    Every non-root attaches at the first tick from which it advances by one
    each tick, to the smallest-id neighbor already in the forest that sits one
    step ahead of it.

    Args:
        network (Network): Graph the trace was run on.
        trace (RunTrace): Run with every snapshot kept from its first tick.

    Returns:
        Forest: Parents, attachment ticks, roots and depths.
    """
    ticks, history = trace.history()
    n = trace.initial.n
    if len(ticks) == 0 or ticks[0] != trace.initial.tick or np.any(np.diff(ticks) != 1):
        raise InsufficientTrace("The forest needs every snapshot from the initial tick on")
    last = len(ticks) - 1
    if last < n:
        raise InsufficientTrace(f"Need at least n={n} ticks, trace has {last}")

    advancing = history[1:] == (history[:-1] + 1) % n
    onset = _last_change_rows(advancing)
    late = np.flatnonzero(onset > last - n)
    if len(late):
        raise NotConverged(f"{len(late)} nodes are not n-periodic by tick {ticks[-1]} (first: {late[0]})")

    size = network.n_nodes
    roots = np.union1d(seed_nodes(trace.initial, network), seed_nodes(trace.final, network)).astype(int)
    joined = np.full(size, np.iinfo(np.int64).max, dtype=np.int64)
    joined[roots] = -1
    parent = np.full(size, -1, dtype=int)
    parent_tick = np.full(size, -1, dtype=int)
    depth = np.full(size, -1, dtype=int)
    depth[roots] = 0

    pending = sorted(set(range(size)) - set(roots.tolist()), key=lambda x: (onset[x], x))
    for row in range(last + 1):
        if not pending:
            break
        u = history[row]
        attach = []
        for x in pending:
            if onset[x] > row:
                break
            ahead = (u[x] + 1) % n
            for y in network.neighbors(x):
                if joined[y] < row and u[y] == ahead:
                    attach.append((x, y))
                    break
        for x, y in attach:
            parent[x] = y
            parent_tick[x] = ticks[row]
            joined[x] = row
            depth[x] = depth[y] + 1
        if attach:
            done = {x for x, _ in attach}
            pending = [x for x in pending if x not in done]

    if pending:
        raise NotConverged(f"{len(pending)} periodic nodes never attach to a seed (first: {pending[0]})")
    return Forest(parent, parent_tick, roots, depth)


def depth_level(forest: Forest, k: int) -> np.ndarray:
    return forest.depth_level(k)
