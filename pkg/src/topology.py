import heapq
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

import networkx as nx
import numpy as np
import sympy
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from sympy.matrices.normalforms import smith_normal_decomp
from sympy.polys.domains import ZZ

from .errors import (ConsistencyError, DiscontinuousOnCycle, DiscontinuousState, DisconnectedNetwork,
                     NonIntegralDegree, NotACycle, OverlappingSupports, TorsionDetected)
from .ghm import State, forced_delta, is_continuous
from .network import Network


class Chain1:
    """Integer 1-chain on oriented edges; keys are canonical (i, j) with i < j."""

    def __init__(self, terms: Optional[dict] = None):
        self.terms = {}
        for (a, b), c in (terms or {}).items():
            self.add_edge(a, b, c)

    def add_edge(self, a: int, b: int, c: int = 1):
        if a == b:
            raise ValueError("A 1-chain cannot contain a self-loop")
        if a > b:
            a, b, c = b, a, -c
        key = (int(a), int(b))
        v = self.terms.get(key, 0) + int(c)
        if v:
            self.terms[key] = v
        else:
            self.terms.pop(key, None)
        return self

    @classmethod
    def from_path(cls, nodes: list, closed: bool = True) -> 'Chain1':
        chain = cls()
        seq = list(nodes) + ([nodes[0]] if closed and len(nodes) > 1 else [])
        for a, b in zip(seq[:-1], seq[1:]):
            chain.add_edge(a, b, 1)
        return chain

    def boundary(self) -> dict:
        out = defaultdict(int)
        for (i, j), c in self.terms.items():
            out[j] += c
            out[i] -= c
        return {k: v for k, v in out.items() if v}

    def is_cycle(self) -> bool:
        return not self.boundary()

    def is_loop(self) -> bool:
        if not self.terms or any(abs(c) != 1 for c in self.terms.values()):
            return False
        succ = {}
        for (i, j), c in self.terms.items():
            a, b = (i, j) if c > 0 else (j, i)
            if a in succ:
                return False
            succ[a] = b
        if sorted(succ) != sorted(succ.values()):
            return False
        start = next(iter(succ))
        x, steps = succ[start], 1
        while x != start:
            x, steps = succ[x], steps + 1
        return steps == len(succ)

    def edges(self) -> list:
        return sorted(self.terms)

    def to_list(self) -> list:
        return [[i, j, c] for (i, j), c in sorted(self.terms.items())]

    def __add__(self, other: 'Chain1') -> 'Chain1':
        out = Chain1(self.terms)
        for (i, j), c in other.terms.items():
            out.add_edge(i, j, c)
        return out

    def __neg__(self) -> 'Chain1':
        return Chain1({k: -c for k, c in self.terms.items()})

    def __sub__(self, other: 'Chain1') -> 'Chain1':
        return self + (-other)

    def __rmul__(self, k: int) -> 'Chain1':
        return Chain1({e: int(k) * c for e, c in self.terms.items()}) if k else Chain1()

    def __eq__(self, other) -> bool:
        return isinstance(other, Chain1) and self.terms == other.terms

    def __len__(self) -> int:
        return len(self.terms)

    def __repr__(self) -> str:
        return f"Chain1({self.terms})"


@dataclass
class CohomClass:
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.int64).reshape(-1)

    def __add__(self, other: 'CohomClass') -> 'CohomClass':
        return CohomClass(self.coeffs + other.coeffs)

    def __eq__(self, other) -> bool:
        other = other.coeffs if isinstance(other, CohomClass) else np.asarray(other)
        return self.coeffs.shape == np.shape(other) and bool(np.all(self.coeffs == other))

    def to_list(self) -> list:
        return [int(v) for v in self.coeffs]


# --- Degree and seeds ---

def degree(state: State, cycle: Chain1, network: Optional[Network] = None) -> int:
    """
    Degree of a state on a 1-cycle: the forced differences summed with
    coefficients, divided by n.
    """
    if not cycle.terms:
        return 0
    keys = np.array(list(cycle.terms.keys()), dtype=np.int64)
    coeffs = np.array(list(cycle.terms.values()), dtype=np.int64)
    if network is not None:
        missing = [tuple(k) for k in keys.tolist() if tuple(k) not in network.edge_index]
        if missing:
            raise NotACycle(f"Chain uses edges {missing[:3]} that are not network edges")
    u = state.values
    delta = forced_delta(u[keys[:, 0]], u[keys[:, 1]], state.n)
    bad = np.flatnonzero(delta == 2)
    if len(bad):
        i, j = keys[bad[0]]
        raise DiscontinuousOnCycle((int(i), int(j)), (int(u[i]), int(u[j])))
    total = int((coeffs * delta).sum())
    if total % state.n:
        raise NonIntegralDegree(f"Forced sum {total} is not a multiple of n={state.n}")
    return total // state.n


def successor_arcs(state: State, network: Network):
    """Arcs x -> y of the successor digraph: neighbors with u(y) = u(x) + 1 mod n."""
    u = state.values
    keep = np.mod(u[network.arc_dst] - u[network.arc_src], state.n) == 1
    return network.arc_src[keep], network.arc_dst[keep]


def seed_nodes(state: State, network: Network) -> np.ndarray:
    """Nodes lying on some directed cycle of the successor digraph."""
    src, dst = successor_arcs(state, network)
    if len(src) == 0:
        return np.zeros(0, dtype=int)
    n = network.n_nodes
    graph = sparse.csr_matrix((np.ones(len(src), dtype=np.int8), (src, dst)), shape=(n, n))
    _, labels = connected_components(graph, directed=True, connection='strong')
    sizes = np.bincount(labels)
    return np.flatnonzero(sizes[labels] > 1)


def find_seed(state: State, network: Network) -> Optional[Chain1]:
    """
    First directed cycle of the successor digraph found by depth-first search
    in ascending node order, as a loop; None when the state has no seed.
    """
    src, dst = successor_arcs(state, network)
    if len(src) == 0:
        return None
    order = np.lexsort((dst, src))
    g = nx.DiGraph()
    g.add_nodes_from(range(network.n_nodes))
    g.add_edges_from(zip(src[order].tolist(), dst[order].tolist()))
    try:
        cycle = nx.find_cycle(g)
    except nx.NetworkXNoCycle:
        return None
    return Chain1.from_path([a for a, _ in cycle])


# --- Homology ---

@dataclass
class H1Basis:
    network: Network
    basis_cycles: list
    boundary_matrix: sparse.csr_matrix
    tree_edges: set
    non_tree_edges: list
    elim_order: list = field(default_factory=list)
    elim_expr: dict = field(default_factory=dict)
    free_gens: list = field(default_factory=list)
    snf_left: list = field(default_factory=list)   # unimodular row transform, rows of python ints
    relation_rank: int = 0

    @property
    def rank(self) -> int:
        return len(self.basis_cycles)

    def coordinates(self, cycle: Chain1) -> np.ndarray:
        """Integer coordinates of a cycle's homology class in the basis."""
        if not cycle.is_cycle():
            raise NotACycle("Chain has nonzero boundary")
        non_tree = set(self.non_tree_edges)
        z = {}
        for key, c in cycle.terms.items():
            eid = self.network.edge_index.get(key)
            if eid is None:
                raise NotACycle(f"Edge {key} is not a network edge")
            if eid in non_tree:
                z[eid] = z.get(eid, 0) + c
        for g in self.elim_order:
            c = z.pop(g, 0)
            if c:
                for h, v in self.elim_expr[g].items():
                    z[h] = z.get(h, 0) + c * v
        zr = [z.get(g, 0) for g in self.free_gens]
        y = [sum(row[k] * zr[k] for k in range(len(zr))) for row in self.snf_left]
        return np.array(y[self.relation_rank:], dtype=np.int64)


def _bfs_tree(network: Network):
    n = network.n_nodes
    parent = np.full(n, -1, dtype=int)
    depth = np.zeros(n, dtype=int)
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = [0]
    tree = set()
    head = 0
    while head < len(queue):
        x = queue[head]
        head += 1
        for y in network.neighbors(x):
            if not seen[y]:
                seen[y] = True
                parent[y] = x
                depth[y] = depth[x] + 1
                tree.add(network.edge_index[(min(x, y), max(x, y))])
                queue.append(y)
    return parent, depth, tree


def _fundamental_cycle(edge: tuple, parent: np.ndarray, depth: np.ndarray) -> Chain1:
    i, j = edge
    chain = Chain1().add_edge(i, j, 1)
    # Tree path j -> i through the lowest common ancestor
    up_j, up_i = [j], [i]
    a, b = j, i
    while depth[a] > depth[b]:
        a = parent[a]
        up_j.append(a)
    while depth[b] > depth[a]:
        b = parent[b]
        up_i.append(b)
    while a != b:
        a, b = parent[a], parent[b]
        up_j.append(a)
        up_i.append(b)
    path = up_j + up_i[-2::-1]
    for x, y in zip(path[:-1], path[1:]):
        chain.add_edge(int(x), int(y), 1)
    return chain


def _boundary_matrix(network: Network) -> sparse.csr_matrix:
    m, t = network.n_edges, len(network.triangles)
    rows, cols, vals = [], [], []
    for k, (i, j, l) in enumerate(network.triangles.tolist()):
        for (a, b), s in (((j, l), 1), ((i, l), -1), ((i, j), 1)):
            rows.append(network.edge_index[(a, b)])
            cols.append(k)
            vals.append(s)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(m, t), dtype=np.int64)


def _eliminate_unit_pivots(relations: dict):
    """
    Reduce a presentation by eliminating generators that appear with a unit
    coefficient in some relation.
    """
    occurs = defaultdict(set)
    for rid, rel in relations.items():
        for g in rel:
            occurs[g].add(rid)
    heap = [(len(rel), rid) for rid, rel in relations.items()]
    heapq.heapify(heap)
    order, exprs = [], {}
    while heap:
        size, rid = heapq.heappop(heap)
        rel = relations.get(rid)
        if rel is None or len(rel) != size:
            continue
        units = [g for g, c in rel.items() if abs(c) == 1]
        if not units:
            continue
        g = min(units, key=lambda h: (len(occurs[h]), h))
        s = rel[g]
        expr = {h: -s * c for h, c in rel.items() if h != g}
        del relations[rid]
        for h in rel:
            occurs[h].discard(rid)
        for other in sorted(occurs[g]):
            orel = relations[other]
            a = orel.pop(g)
            for h, c in expr.items():
                v = orel.get(h, 0) + a * c
                if v:
                    orel[h] = v
                    occurs[h].add(other)
                else:
                    orel.pop(h, None)
                    occurs[h].discard(other)
            if orel:
                heapq.heappush(heap, (len(orel), other))
            else:
                del relations[other]
        occurs[g] = set()
        order.append(g)
        exprs[g] = expr
    return order, exprs, relations


def _smith_reduce(free: list, rels: list) -> tuple:
    """
    Smith decomposition of the relation matrix over the free generators.

    Returns:
        tuple: (rank of the relations, left transform rows, inverse of the left transform).
    """
    size = len(free)
    if not rels or not size:
        identity = [[int(a == b) for b in range(size)] for a in range(size)]
        return 0, identity, identity
    pos = {g: k for k, g in enumerate(free)}
    mat = sympy.zeros(size, len(rels))
    for col, rel in enumerate(rels):
        for g, c in rel.items():
            mat[pos[g], col] = c
    diag_mat, left, _ = smith_normal_decomp(mat, domain=ZZ)
    diag = [int(diag_mat[k, k]) for k in range(min(diag_mat.shape))]
    factors = [abs(d) for d in diag if d != 0]
    if any(f > 1 for f in factors):
        raise TorsionDetected(factors)
    left_rows = [[int(left[a, b]) for b in range(size)] for a in range(size)]
    left_inv = left.inv()
    inv = [[int(left_inv[a, b]) for b in range(size)] for a in range(size)]
    return len(factors), left_rows, inv


def homology_basis(network: Network) -> H1Basis:
    """
    Integer H1 of the Rips 2-skeleton.

    Fundamental cycles of a BFS spanning tree present the cycle space; triangle
    boundaries restricted to the non-tree edges are the relations. Unit pivots
    are eliminated first and the remainder goes through a Smith decomposition.
    """
    if network.n_nodes == 0 or not network.is_connected():
        raise DisconnectedNetwork("homology_basis needs a connected network")
    parent, depth, tree = _bfs_tree(network)
    non_tree = [k for k in range(network.n_edges) if k not in tree]
    non_tree_set = set(non_tree)
    bmat = _boundary_matrix(network)

    relations = {}
    for k, (i, j, l) in enumerate(network.triangles.tolist()):
        rel = {}
        for (a, b), s in (((j, l), 1), ((i, l), -1), ((i, j), 1)):
            eid = network.edge_index[(a, b)]
            if eid in non_tree_set:
                rel[eid] = rel.get(eid, 0) + s
        rel = {g: c for g, c in rel.items() if c}
        if rel:
            relations[k] = rel

    order, exprs, remaining = _eliminate_unit_pivots(relations)
    eliminated = set(order)
    free = [g for g in non_tree if g not in eliminated]
    rels = [remaining[r] for r in sorted(remaining)]

    size = len(free)
    rank, left_rows, inv = _smith_reduce(free, rels)

    fundamentals = {g: _fundamental_cycle(tuple(network.edges[g].tolist()), parent, depth) for g in free}
    basis_cycles = []
    for col in range(rank, size):
        cycle = Chain1()
        for k, g in enumerate(free):
            if inv[k][col]:
                cycle = cycle + inv[k][col] * fundamentals[g]
        basis_cycles.append(cycle)

    return H1Basis(network, basis_cycles, bmat, tree, non_tree, order, exprs, free, left_rows, rank)


def is_null_homologous(cycle: Chain1, basis: H1Basis) -> bool:
    return not np.any(basis.coordinates(cycle))


# --- Defects and classes ---

@dataclass
class DefectReport:
    degrees: list                 # (basis index, degree or None when blocked)
    blocked: list                 # basis indices where the state is discontinuous
    seed: Optional[Chain1] = None
    seed_is_local: Optional[bool] = None
    local_triangles: list = field(default_factory=list)

    @property
    def has_global(self) -> bool:
        return any(d for _, d in self.degrees if d is not None) or self.seed_is_local is False

    @property
    def has_local(self) -> bool:
        return bool(self.local_triangles) or self.seed_is_local is True

    @property
    def has_defect(self) -> bool:
        return self.has_global or self.has_local or self.seed is not None

    def to_dict(self) -> dict:
        return {
            'has_defect': self.has_defect,
            'has_local': self.has_local,
            'has_global': self.has_global,
            'degrees': [[i, d] for i, d in self.degrees],
            'blocked': list(self.blocked),
            'seed': self.seed.to_list() if self.seed is not None else None,
            'seed_is_local': self.seed_is_local,
            'local_triangles': [list(t) for t in self.local_triangles],
        }


def triangle_degrees(state: State, network: Network) -> np.ndarray:
    """Degree on each triangle boundary; 2 marks triangles where the state is discontinuous."""
    tri = network.triangles
    if len(tri) == 0:
        return np.zeros(0, dtype=int)
    u, n = state.values, state.n
    d1 = forced_delta(u[tri[:, 0]], u[tri[:, 1]], n)
    d2 = forced_delta(u[tri[:, 1]], u[tri[:, 2]], n)
    d3 = forced_delta(u[tri[:, 2]], u[tri[:, 0]], n)
    blocked = (d1 == 2) | (d2 == 2) | (d3 == 2)
    total = d1 + d2 + d3
    out = np.where(total % n == 0, total // n, 0)
    return np.where(blocked, 2, out)


def find_defect(state: State, network: Network, basis: Optional[H1Basis] = None) -> DefectReport:
    """
    Degrees on the basis cycles, triangle-level local defects and a seed search.
    """
    if basis is None and network.is_connected():
        basis = homology_basis(network)
    degrees, blocked = [], []
    for k, cycle in enumerate(basis.basis_cycles if basis is not None else []):
        try:
            degrees.append((k, degree(state, cycle)))
        except DiscontinuousOnCycle:
            degrees.append((k, None))
            blocked.append(k)
    tri_deg = triangle_degrees(state, network)
    local = [tuple(int(v) for v in network.triangles[k]) for k in np.flatnonzero((tri_deg != 0) & (tri_deg != 2))]
    seed = find_seed(state, network)
    seed_local = None
    if seed is not None and basis is not None:
        seed_local = is_null_homologous(seed, basis)
    return DefectReport(degrees, blocked, seed, seed_local, local)


def cohomology_class(state: State, basis: H1Basis) -> CohomClass:
    """Degrees of a continuous state on every basis cycle."""
    ok, edge = is_continuous(basis.network, state)
    if not ok:
        raise DiscontinuousState(edge)
    return CohomClass([degree(state, c) for c in basis.basis_cycles])


def add_states(phi1: State, phi2: State, network: Network, basis: Optional[H1Basis] = None) -> State:
    """
    Pointwise sum of two states whose supports are disjoint and not adjacent.
    """
    if phi1.n != phi2.n:
        raise ValueError("States use different alphabets")
    s1, s2 = phi1.values != 0, phi2.values != 0
    if np.any(s1 & s2):
        raise OverlappingSupports("Supports share nodes")
    e = network.edges
    if np.any((s1[e[:, 0]] & s2[e[:, 1]]) | (s2[e[:, 0]] & s1[e[:, 1]])):
        raise OverlappingSupports("Supports contain neighboring nodes")
    out = State((phi1.values + phi2.values) % phi1.n, phi1.n, max(phi1.tick, phi2.tick))

    c1, _ = is_continuous(network, phi1)
    c2, _ = is_continuous(network, phi2)
    if c1 and c2:
        ok, edge = is_continuous(network, out)
        if not ok:
            raise ConsistencyError(f"Sum of continuous states is discontinuous at {edge}")
        if basis is not None:
            if not cohomology_class(out, basis) == cohomology_class(phi1, basis) + cohomology_class(phi2, basis):
                raise ConsistencyError("Class of the sum differs from the sum of classes")
    return out
