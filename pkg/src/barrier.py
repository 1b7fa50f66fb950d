from typing import Optional

import networkx as nx
import numpy as np
from scipy.spatial import cKDTree

from .domain import HallwayDomain
from .errors import BadCorridor
from .ghm import State, wavefront
from .network import Network


def corridor_walls(rect) -> tuple:
    """Axis the corridor runs along and the coordinates of its two long walls."""
    xmin, ymin, xmax, ymax = rect
    if xmax - xmin >= ymax - ymin:
        return 0, (ymin, ymax)
    return 1, (xmin, xmax)


def is_barrier(network: Network, node_set, domain: HallwayDomain, corridor,
               centers: Optional[np.ndarray] = None) -> bool:
    """
    True iff the eps-disks of node_set inside the corridor chain together from
    one long wall to the other.

    Args:
        network (Network): Supplies eps and positions.
        node_set: Node ids to test.
        domain (HallwayDomain): Domain the corridor belongs to.
        corridor: One of the domain's rectangles.
        centers (np.ndarray): Optional disk centers per node id (clones use their original's disk).
    """
    if domain.rect_index(corridor) is None:
        raise BadCorridor(f"Rectangle {tuple(corridor)} is not part of the domain")
    ids = np.asarray(sorted(set(int(v) for v in node_set)), dtype=int)
    if len(ids) == 0:
        return False
    xmin, ymin, xmax, ymax = (float(v) for v in corridor)
    pos = (network.positions if centers is None else np.asarray(centers, dtype=float))[ids]
    inside = (pos[:, 0] >= xmin) & (pos[:, 0] <= xmax) & (pos[:, 1] >= ymin) & (pos[:, 1] <= ymax)
    pos = pos[inside]
    if len(pos) == 0:
        return False

    eps = network.eps
    axis, (lo, hi) = corridor_walls(corridor)
    across = pos[:, 1 - axis]
    g = nx.Graph()
    g.add_nodes_from(['low_wall', 'high_wall'])
    g.add_nodes_from(range(len(pos)))
    g.add_edges_from(cKDTree(pos).query_pairs(2.0 * eps))
    g.add_edges_from(('low_wall', k) for k in np.flatnonzero(across - lo <= eps).tolist())
    g.add_edges_from(('high_wall', k) for k in np.flatnonzero(hi - across <= eps).tolist())
    return nx.has_path(g, 'low_wall', 'high_wall')


def wavefront_band(network: Network, state: State) -> np.ndarray:
    """Awake nodes together with their one-hop neighbors."""
    front = wavefront(state)
    mask = np.zeros(network.n_nodes, dtype=bool)
    mask[front] = True
    e = network.edges
    touch = mask[e[:, 0]] | mask[e[:, 1]]
    mask[e[touch].ravel()] = True
    return np.flatnonzero(mask)


def barrier_report(network: Network, node_set, domain: HallwayDomain,
                   centers: Optional[np.ndarray] = None) -> dict:
    """Barrier check for every corridor rectangle, keyed by rectangle index."""
    return {k: is_barrier(network, node_set, domain, rect, centers) for k, rect in enumerate(domain.rects)}
