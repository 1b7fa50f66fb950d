from dataclasses import dataclass
from typing import Optional

import numpy as np
import sympy
from scipy import sparse
from scipy.sparse.csgraph import connected_components, shortest_path

from .barrier import is_barrier
from .config import log
from .domain import HallwayDomain
from .errors import (BasisMismatch, ConsistencyError, ContinuityRepairFailed,
                     InsufficientCorridorLength, SparseBand)
from .ghm import State, is_continuous
from .network import Network
from .topology import CohomClass, H1Basis, add_states, cohomology_class, successor_arcs


@dataclass
class WaveSpec:
    corridor_edge: int
    anchor: float      # arc position of the wave front along the skeleton edge
    direction: int     # +1 travels toward increasing arc length, -1 toward decreasing
    n: int
    hop: Optional[float] = None  # density check length, default r/2

    def __post_init__(self):
        if self.direction not in (1, -1):
            raise ValueError(f"direction must be +1 or -1, got {self.direction}")
        if self.n < 3:
            raise ValueError(f"Alphabet size must be >= 3, got {self.n}")


def band_length(n: int, r: float) -> float:
    """Arc length one wave occupies: n hops behind the front plus the front slab."""
    return (n + 1) * r


def _repair(network: Network, values: np.ndarray, n: int, support: np.ndarray) -> np.ndarray:
    values = values.copy()
    for _ in range(len(support) + 1):
        ok, edge = is_continuous(network, State(values, n))
        if ok:
            return values
        i, j = edge
        values[i if values[i] > values[j] else j] = 0
    raise ContinuityRepairFailed(f"Wave stays discontinuous at edge {edge}")


def single_wave(network: Network, domain: HallwayDomain, spec: WaveSpec) -> State:
    """
    One travelling pulse in the corridor of a skeleton edge.

    Values are BFS hop counts from the front slab: the node k hops behind the
    front gets k for 1 <= k <= n-1 and everything else stays 0.

    Args:
        network (Network): Communication graph.
        domain (HallwayDomain): Domain whose skeleton edge hosts the wave.
        spec (WaveSpec): Corridor, front position, direction and alphabet.

    Returns:
        State: Continuous state supported on the band behind the front.
    """
    n, r = spec.n, network.r
    edge = domain.skeleton.edges[spec.corridor_edge]
    rect = domain.rects[edge.rect_index]
    lo, hi = edge.free_span
    behind = n * r
    if spec.direction > 0:
        need_lo, need_hi = spec.anchor - behind - r, spec.anchor + r
    else:
        need_lo, need_hi = spec.anchor - r, spec.anchor + behind + r
    if need_lo < lo - 1e-9 or need_hi > hi + 1e-9:
        raise InsufficientCorridorLength(spec.corridor_edge, band_length(n, r) + r, hi - lo)

    pos = network.positions
    in_rect = np.flatnonzero((pos[:, 0] >= rect[0]) & (pos[:, 0] <= rect[2])
                             & (pos[:, 1] >= rect[1]) & (pos[:, 1] <= rect[3]))
    d = spec.direction * (edge.arc_of(pos[in_rect]) - spec.anchor)
    band = (d >= -behind) & (d <= r)
    nodes = in_rect[band]
    d = d[band]

    hop = spec.hop or r / 2.0
    bins = np.floor((d + behind) / hop).astype(int)
    occupied = np.zeros(int(np.ceil((behind + r) / hop)), dtype=bool)
    occupied[np.clip(bins, 0, len(occupied) - 1)] = True
    if not occupied.all():
        gap = int(np.argmin(occupied))
        raise SparseBand(f"No node within a {hop:g}-long stretch of the band on skeleton edge "
                         f"{spec.corridor_edge} ({gap * hop - behind:+.3f} behind the front)")

    # Hop distance from the front slab inside the band
    local = {int(v): k for k, v in enumerate(nodes)}
    rows, cols = [], []
    for v in nodes.tolist():
        for w in network.neighbors(v):
            if w in local:
                rows.append(local[v])
                cols.append(local[w])
    graph = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(nodes), len(nodes)))
    sources = np.flatnonzero(d >= 0)
    hops = shortest_path(graph, unweighted=True, indices=sources, directed=False)
    k = hops.min(axis=0) if len(sources) else np.full(len(nodes), np.inf)

    values = np.zeros(network.n_nodes, dtype=np.int64)
    ramp = np.isfinite(k) & (k >= 1) & (k <= n - 1)
    values[nodes[ramp]] = k[ramp].astype(np.int64)
    if not np.any(values):
        raise SparseBand(f"Band on skeleton edge {spec.corridor_edge} has no node behind the front")

    values = _repair(network, values, n, nodes)
    support = np.flatnonzero(values)
    # Awake nodes of the front slab must cut the corridor
    front = nodes[(d >= 0) & (values[nodes] == 0)]
    if not is_barrier(network, front, domain, rect):
        raise SparseBand(f"Wave front on skeleton edge {spec.corridor_edge} does not span the corridor")
    log(f"Wave on skeleton edge {spec.corridor_edge}: {len(support)} nodes, front at {spec.anchor:.3f}", 'debug')
    return State(values, n, 0)


def sever_defect_links(network: Network, state: State, scope: str = 'seeds') -> Network:
    """
    Remove 0-1 links so local defects stop firing.

    Args:
        network (Network): Communication graph.
        state (State): Configuration whose 0-1 links are cut.
        scope (str): 'seeds' cuts only 0-1 links on seed loops; 'all' cuts every 0-1 link.

    Returns:
        Network: Copy without the severed edges.
    """
    if scope not in ('seeds', 'all'):
        raise ValueError(f"Unknown severing scope '{scope}'")
    u = state.values
    e = network.edges
    a, b = u[e[:, 0]], u[e[:, 1]]
    zero_one = ((a == 0) & (b == 1)) | ((a == 1) & (b == 0))
    if scope == 'seeds' and zero_one.any():
        src, dst = successor_arcs(state, network)
        size = network.n_nodes
        graph = sparse.csr_matrix((np.ones(len(src), dtype=np.int8), (src, dst)), shape=(size, size))
        _, labels = connected_components(graph, directed=True, connection='strong')
        big = np.bincount(labels)[labels] > 1
        same = labels[e[:, 0]] == labels[e[:, 1]]
        zero_one &= same & big[e[:, 0]]
    log(f"Severing {int(zero_one.sum())} links ({scope})", 'debug')
    if not zero_one.any():
        return network
    return network.without_edges(zero_one)


def wave_slots(domain: HallwayDomain, corridor_edge: int, n: int, r: float, count: int, direction: int) -> list:
    """
    Fronts of `count` non-adjacent waves packed into the free span of a skeleton edge.
    """
    lo, hi = domain.skeleton.edges[corridor_edge].free_span
    pitch = band_length(n, r)
    required = count * pitch + 2 * r
    if required > hi - lo + 1e-9:
        raise InsufficientCorridorLength(corridor_edge, required, hi - lo)
    fronts = []
    for k in range(count):
        start = lo + r + k * pitch
        fronts.append(start + n * r if direction > 0 else start + r)
    return fronts


def realize_class(network: Network, domain: HallwayDomain, basis: H1Basis, target, n: int) -> State:
    """
    Build a continuous state whose class is exactly `target`.

    Waves go in the corridors of the skeleton's non-tree edges. The class of
    one unit wave per corridor gives a square integer matrix K; the wave counts
    solve K w = target.
    """
    target = CohomClass(target.coeffs if isinstance(target, CohomClass) else target)
    g = domain.betti
    if basis.rank != g or len(target.coeffs) != g:
        raise BasisMismatch(f"Basis has rank {basis.rank}, domain has {g} loops, target has {len(target.coeffs)} entries")
    if not target.coeffs.any():
        return State.zeros(network.n_nodes, n)

    corridors = domain.skeleton.non_tree_edges
    unit = []
    for eid in corridors:
        front = wave_slots(domain, eid, n, network.r, 1, 1)[0]
        unit.append(cohomology_class(single_wave(network, domain, WaveSpec(eid, front, 1, n)), basis).coeffs)
    K = sympy.Matrix(np.column_stack(unit).tolist())
    det = int(K.det())
    if abs(det) != 1:
        raise BasisMismatch(f"Unit waves give a class matrix with determinant {det}")
    counts = [int(v) for v in K.inv() * sympy.Matrix(target.to_list())]

    total = State.zeros(network.n_nodes, n)
    for eid, w in zip(corridors, counts):
        if w == 0:
            continue
        sign = 1 if w > 0 else -1
        for front in wave_slots(domain, eid, n, network.r, abs(w), sign):
            total = add_states(total, single_wave(network, domain, WaveSpec(eid, front, sign, n)), network)

    got = cohomology_class(total, basis)
    if not got == target:
        raise ConsistencyError(f"Realized class {got.to_list()} differs from target {target.to_list()}")
    log(f"Realized class {target.to_list()} with wave counts {counts}", 'debug')
    return total

