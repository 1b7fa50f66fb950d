from dataclasses import dataclass, field
from typing import Optional

import networkx as nx
import numpy as np
import sympy
from scipy.spatial import cKDTree

from .domain import HallwayDomain
from .errors import DisconnectedNetwork, NoBoundaryPath

# Half neighbourhood of a hash cell; each unordered cell pair is visited once
_HALF_STENCIL = ((0, 0), (1, -1), (1, 0), (1, 1), (0, 1))


@dataclass
class Network:
    positions: np.ndarray
    r: float
    eps: float
    edges: np.ndarray      # (m, 2) int, i < j, lexicographic
    triangles: np.ndarray  # (t, 3) int, i < j < k, lexicographic

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        n = len(self.positions)
        self.adjacency = [[] for _ in range(n)]
        for i, j in self.edges:
            self.adjacency[i].append(int(j))
            self.adjacency[j].append(int(i))
        for nbrs in self.adjacency:
            nbrs.sort()
        self.edge_index = {(int(i), int(j)): k for k, (i, j) in enumerate(self.edges)}
        # Directed arcs (both orientations) for vectorized updates
        self.arc_src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        self.arc_dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        self.arc_edge = np.concatenate([np.arange(len(self.edges))] * 2)

    @property
    def n_nodes(self) -> int:
        return len(self.positions)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, i: int) -> list:
        return self.adjacency[i]

    def are_neighbors(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edge_index

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency], dtype=int)

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n_nodes))
        g.add_edges_from(map(tuple, self.edges.tolist()))
        return g

    def is_connected(self) -> bool:
        if self.n_nodes == 0:
            return False
        return nx.is_connected(self.to_networkx())

    def without_edges(self, remove_mask: np.ndarray) -> 'Network':
        """Copy of the network with the masked edges removed; triangles follow the flag rule."""
        keep = self.edges[~np.asarray(remove_mask, dtype=bool)]
        return Network(self.positions.copy(), self.r, self.eps, keep, _flag_triangles(len(self.positions), keep))

    def subnetwork(self, nodes) -> 'Network':
        """Induced subnetwork on the given node ids, renumbered in sorted order."""
        nodes = np.unique(np.asarray(list(nodes), dtype=np.int64))
        index = np.full(self.n_nodes, -1, dtype=np.int64)
        index[nodes] = np.arange(len(nodes))
        edges = index[self.edges]
        triangles = index[self.triangles]
        return Network(self.positions[nodes], self.r, self.eps, edges[(edges >= 0).all(axis=1)],
                       triangles[(triangles >= 0).all(axis=1)])


def _metric_edges(points: np.ndarray, r: float) -> np.ndarray:
    cells = np.floor(points / r).astype(np.int64)
    buckets = {}
    for idx, key in enumerate(map(tuple, cells.tolist())):
        buckets.setdefault(key, []).append(idx)
    r2 = r * r
    found = []
    for (cx, cy), members in buckets.items():
        a = np.array(members, dtype=np.int64)
        for dx, dy in _HALF_STENCIL:
            other = buckets.get((cx + dx, cy + dy))
            if other is None:
                continue
            b = np.array(other, dtype=np.int64)
            diff = points[a][:, None, :] - points[b][None, :, :]
            d2 = (diff ** 2).sum(axis=-1)
            ii, jj = np.nonzero(d2 <= r2)
            i, j = a[ii], b[jj]
            if (dx, dy) == (0, 0):
                keep = i < j
                i, j = i[keep], j[keep]
            found.append(np.column_stack([np.minimum(i, j), np.maximum(i, j)]))
    if not found:
        return np.zeros((0, 2), dtype=np.int64)
    edges = np.unique(np.vstack(found), axis=0)
    return edges


def _flag_triangles(n: int, edges: np.ndarray) -> np.ndarray:
    nbrs = [set() for _ in range(n)]
    for i, j in edges.tolist():
        nbrs[i].add(j)
        nbrs[j].add(i)
    tris = []
    for i, j in edges.tolist():
        for k in sorted(nbrs[i] & nbrs[j]):
            if k > j:
                tris.append((i, j, k))
    tris.sort()
    return np.array(tris, dtype=np.int64).reshape(-1, 3)


def build_network(points, r: float, eps: float) -> Network:
    """
    Build the radius-r communication graph and its Rips 2-skeleton.

    Args:
        points: (N, 2) node positions; node id = row index.
        r (float): Communication radius.
        eps (float): Coverage radius.

    Returns:
        Network: Adjacency, edges and triangles per the metric rule.
    """
    if r <= 0 or eps <= 0:
        raise ValueError("r and eps must be positive")
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(points) == 0:
        raise ValueError("A network needs at least one node")
    edges = _metric_edges(points, r)
    return Network(points, float(r), float(eps), edges, _flag_triangles(len(points), edges))


# --- Coverage ---

@dataclass
class CoverageReport:
    resolution: float
    uncovered_cells: list
    covered_fraction: float
    n_cells: int = 0


def _report(grid, covered: np.ndarray) -> CoverageReport:
    inside = grid.inside.ravel()
    missing = inside & ~covered
    total = int(inside.sum())
    cells = [(int(k % grid.nx), int(k // grid.nx)) for k in np.flatnonzero(missing)]
    frac = 1.0 if total == 0 else float((inside & covered).sum()) / total
    return CoverageReport(grid.resolution, cells, frac, total)


def disk_coverage(centers: np.ndarray, eps: float, points: np.ndarray) -> np.ndarray:
    """Boolean mask of points within eps of any center."""
    if len(centers) == 0:
        return np.zeros(len(points), dtype=bool)
    dist, _ = cKDTree(centers).query(points, k=1, distance_upper_bound=eps * (1 + 1e-12))
    return dist <= eps


def shadow_covers(network: Network, domain: HallwayDomain, resolution: float,
                  mode: str = 'shadow', nodes=None, centers: Optional[np.ndarray] = None) -> CoverageReport:
    """
    Rasterized coverage check.

    Args:
        network (Network): The sensor network.
        domain (HallwayDomain): Region to rasterize.
        resolution (float): Grid cell side.
        mode (str): 'shadow' for the union of simplex hulls, 'disk' for eps-disks.
        nodes: Node ids used in disk mode (default: all nodes).
        centers: Optional coverage centers per node id (clones cover with their original's disk).
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    grid = domain.raster(resolution)
    pts = grid.centers()
    if mode == 'disk':
        ids = np.arange(network.n_nodes) if nodes is None else np.asarray(sorted(nodes), dtype=int)
        src = network.positions if centers is None else np.asarray(centers, dtype=float)
        covered = disk_coverage(src[ids] if len(ids) else np.zeros((0, 2)), network.eps, pts)
        return _report(grid, covered)
    if mode != 'shadow':
        raise ValueError(f"Unknown coverage mode '{mode}'")

    covered = np.zeros(len(pts), dtype=bool)
    tol = 1e-9
    pos = network.positions

    def cells_in_box(lo, hi):
        ix0 = max(0, int(np.floor((lo[0] - grid.x0) / grid.resolution - 0.5)))
        ix1 = min(grid.nx - 1, int(np.ceil((hi[0] - grid.x0) / grid.resolution - 0.5)))
        iy0 = max(0, int(np.floor((lo[1] - grid.y0) / grid.resolution - 0.5)))
        iy1 = min(grid.ny - 1, int(np.ceil((hi[1] - grid.y0) / grid.resolution - 0.5)))
        if ix1 < ix0 or iy1 < iy0:
            return np.zeros(0, dtype=int)
        gx, gy = np.meshgrid(np.arange(ix0, ix1 + 1), np.arange(iy0, iy1 + 1))
        return (gy * grid.nx + gx).ravel()

    # Vertices
    covered |= disk_coverage(pos, tol, pts)
    # Edge segments
    for i, j in network.edges:
        a, b = pos[i], pos[j]
        idx = cells_in_box(np.minimum(a, b), np.maximum(a, b))
        if len(idx) == 0:
            continue
        seg = b - a
        t = np.clip(((pts[idx] - a) @ seg) / float(seg @ seg), 0.0, 1.0)
        d = np.hypot(*(pts[idx] - (a + t[:, None] * seg)).T)
        covered[idx[d <= tol]] = True
    # Triangle hulls
    for i, j, k in network.triangles:
        a, b, c = pos[i], pos[j], pos[k]
        lo = np.minimum(np.minimum(a, b), c)
        hi = np.maximum(np.maximum(a, b), c)
        idx = cells_in_box(lo, hi)
        if len(idx) == 0:
            continue
        m = np.array([b - a, c - a]).T
        if abs(np.linalg.det(m)) < 1e-15:
            continue
        lam = np.linalg.solve(m, (pts[idx] - a).T)
        inside = (lam[0] >= -tol) & (lam[1] >= -tol) & (lam[0] + lam[1] <= 1 + tol)
        covered[idx[inside]] = True
    return _report(grid, covered)


# --- Local holes ---

@dataclass
class LocalHoleReport:
    rips_h1_rank: int
    domain_h1_rank: int
    has_local_hole: bool
    projection: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=int))


def skeleton_coordinates(network: Network, domain: HallwayDomain, chain) -> np.ndarray:
    """Skeleton-cycle coordinates of a 1-cycle of the network, routed through nearest skeleton points."""
    skeleton = domain.skeleton
    edge_ids, arcs = skeleton.project(network.positions)
    total = {}
    for (i, j), c in chain.terms.items():
        flow = skeleton.route((edge_ids[i], arcs[i]), (edge_ids[j], arcs[j]))
        for eid, frac in flow.items():
            total[eid] = total.get(eid, 0.0) + c * frac
    coords = np.array([total.get(eid, 0.0) for eid in skeleton.non_tree_edges])
    return np.rint(coords).astype(int)


def local_hole_check(network: Network, domain: HallwayDomain) -> LocalHoleReport:
    """
    Compare the Rips H1 rank with the domain's loop count and check that the
    basis cycles project onto a basis of the skeleton's cycles.
    """
    from .topology import homology_basis

    if not network.is_connected():
        raise DisconnectedNetwork("local_hole_check needs a connected network")
    basis = homology_basis(network)
    rank, g = basis.rank, domain.betti
    if rank != g:
        return LocalHoleReport(rank, g, True)
    if g == 0:
        return LocalHoleReport(rank, g, False)
    proj = np.array([skeleton_coordinates(network, domain, c) for c in basis.basis_cycles], dtype=int)
    det = int(sympy.Matrix(proj.tolist()).det())
    return LocalHoleReport(rank, g, abs(det) != 1, proj)


# --- Boundary paths and augmentation ---

@dataclass
class BoundaryPath:
    node_ids: list
    boundary_component_index: int
    closed: bool = False


def _boundary_cover(network: Network, domain: HallwayDomain, index: int, step: float):
    samples, _ = domain.sample_boundary(index, step)
    dist, _ = domain.distance_to_boundary(network.positions, index)
    cand = np.flatnonzero(dist <= network.eps)
    cover = {}
    if len(cand):
        hits = cKDTree(samples).query_ball_point(network.positions[cand], network.eps)
        for node, idx in zip(cand.tolist(), hits):
            if idx:
                cover[node] = np.array(sorted(idx), dtype=int)
    return samples, cover


def _frontier(union: np.ndarray) -> int:
    if union.all():
        return len(union)
    return int(np.argmin(union))


def extract_boundary_paths(network: Network, domain: HallwayDomain, step: Optional[float] = None) -> list:
    """
    Greedy boundary paths, one entry per boundary component (None when no path spans it).

    Args:
        network (Network): The sensor network.
        domain (HallwayDomain): Domain whose boundary components are walked.
        step (float): Boundary sampling step (default eps/8).

    Returns:
        list: BoundaryPath or None for each boundary component.
    """
    step = step or network.eps / 8.0
    result = []
    for comp in range(len(domain.boundary)):
        samples, cover = _boundary_cover(network, domain, comp, step)
        k = len(samples)
        starters = [x for x in sorted(cover) if cover[x][0] == 0]
        if not starters:
            result.append(None)
            continue

        def reach(nodes):
            union = np.zeros(k, dtype=bool)
            for x in nodes:
                union[cover[x]] = True
            return union

        start = max(starters, key=lambda x: (_frontier(reach([x])), -x))
        path = [start]
        union = reach(path)
        while not union.all():
            f = _frontier(union)
            x = path[-1]
            best, best_f = None, f
            for y in network.neighbors(x):
                if y in cover and y not in path and f in set(cover[y].tolist()):
                    if len(np.intersect1d(cover[x], cover[y])) == 0:
                        continue
                    trial = union.copy()
                    trial[cover[y]] = True
                    fy = _frontier(trial)
                    if fy > best_f:
                        best, best_f = y, fy
            if best is None:
                break
            path.append(best)
            union[cover[best]] = True
        if not union.all():
            result.append(None)
            continue
        first, last = path[0], path[-1]
        closed = (len(path) > 2 and network.are_neighbors(first, last)
                  and len(np.intersect1d(cover[first], cover[last])) > 0)
        result.append(BoundaryPath(path, comp, closed))
    return result


def max_boundary_distance(path: BoundaryPath, network: Network, domain: HallwayDomain) -> float:
    """Largest distance from a path node to its boundary component."""
    d, _ = domain.distance_to_boundary(network.positions[path.node_ids], path.boundary_component_index)
    return float(d.max())


@dataclass
class Augmentation:
    network: Network
    clone_of: np.ndarray   # original node id for every node of the enlarged network
    n_original: int
    state: Optional[object] = None

    def lift_state(self, state):
        from .ghm import State
        return State(state.values[self.clone_of].copy(), state.n, state.tick)

    def lift_nodes(self, nodes) -> np.ndarray:
        mask = np.zeros(self.n_original, dtype=bool)
        mask[np.asarray(list(nodes), dtype=int)] = True
        return np.flatnonzero(mask[self.clone_of])

    def lift_trace(self, trace):
        """
        Replay of a base-network run on the enlarged network: every clone carries its
        original's state at every tick.
        """
        from .simulator import RunTrace, TickEvent

        lifted = RunTrace(self.lift_state(trace.initial), self.lift_state(trace.final),
                          hashes=list(trace.hashes))
        lifted.snapshots.extend((t, values[self.clone_of]) for t, values in trace.snapshots)
        lifted.awake = [float(np.mean(values == 0)) for _, values in lifted.snapshots]
        lifted.events = [TickEvent(e.tick, self.lift_nodes(e.fired), self.lift_nodes(e.stalled))
                         for e in trace.events]
        return lifted

    def coverage_centers(self) -> np.ndarray:
        return self.network.positions[self.clone_of]


def augment_boundary_sensors(network: Network, domain: HallwayDomain, state_source=None,
                             paths: Optional[list] = None, step: Optional[float] = None) -> Augmentation:
    """
    Add boundary clones along every boundary path: one clone per path node at a
    boundary point of its disk, one per path edge at a boundary point shared by
    both disks. Clones copy their original's state and coverage.
    """
    step = step or network.eps / 8.0
    paths = paths if paths is not None else extract_boundary_paths(network, domain, step)
    missing = [i for i, p in enumerate(paths) if p is None]
    if missing or len(paths) != len(domain.boundary):
        raise NoBoundaryPath(f"No boundary path for boundary components {missing}")

    extra, clone_of = [], list(range(network.n_nodes))
    for path in paths:
        comp = path.boundary_component_index
        samples, cover = _boundary_cover(network, domain, comp, step)
        _, nearest = domain.distance_to_boundary(network.positions[path.node_ids], comp)
        for x, p in zip(path.node_ids, nearest):
            extra.append(p)
            clone_of.append(x)
        pairs = list(zip(path.node_ids[:-1], path.node_ids[1:]))
        if path.closed:
            pairs.append((path.node_ids[-1], path.node_ids[0]))
        for x, y in pairs:
            shared = np.intersect1d(cover[x], cover[y])
            extra.append(samples[shared[len(shared) // 2]])
            clone_of.append(x)

    positions = np.vstack([network.positions, np.array(extra, dtype=float).reshape(-1, 2)])
    aug = Augmentation(build_network(positions, network.r, network.eps),
                       np.array(clone_of, dtype=int), network.n_nodes)
    if state_source is not None:
        aug.state = aug.lift_state(state_source)
    return aug
