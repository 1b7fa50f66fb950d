import math
from dataclasses import dataclass, field
from typing import Optional, Union

import networkx as nx
import numpy as np

from .errors import ConsistencyError, DegenerateRect, DisconnectedDomain

Rect = tuple  # (xmin, ymin, xmax, ymax)

# Unit directions on the compressed boundary grid
_DIRS = [(1, 0), (0, 1), (-1, 0), (0, -1)]


def _overlap(a: Rect, b: Rect) -> Optional[Rect]:
    """Closed intersection of two rectangles, or None if they meet in at most a point."""
    x0, y0 = max(a[0], b[0]), max(a[1], b[1])
    x1, y1 = min(a[2], b[2]), min(a[3], b[3])
    if x1 < x0 or y1 < y0:
        return None
    if x1 == x0 and y1 == y0:
        return None
    return (x0, y0, x1, y1)


@dataclass
class SkeletonEdge:
    u: int
    v: int
    polyline: np.ndarray
    rect_index: int
    axis: int            # 0: corridor runs along x, 1: along y
    lead: float          # arc length from u to the centerline
    axis_start: float    # centerline coordinate where the straight part starts
    axis_sign: int       # +1 if the axis coordinate grows from u to v
    length: float
    free_span: tuple     # arc-length interval clear of junction overlaps

    def arc_of(self, points: np.ndarray) -> np.ndarray:
        """Arc-length position of points lying in this edge's corridor."""
        points = np.atleast_2d(points)
        return self.lead + (points[:, self.axis] - self.axis_start) * self.axis_sign


@dataclass
class SkeletonGraph:
    vertices: np.ndarray
    edges: list  # list of SkeletonEdge
    tree_edges: list = field(default_factory=list)
    non_tree_edges: list = field(default_factory=list)

    def __post_init__(self):
        self._graph = nx.Graph()
        self._graph.add_nodes_from(range(len(self.vertices)))
        self._edge_of = {}
        for eid, e in enumerate(self.edges):
            key = (min(e.u, e.v), max(e.u, e.v))
            if key in self._edge_of and self.edges[self._edge_of[key]].length <= e.length:
                continue
            self._edge_of[key] = eid
            self._graph.add_edge(e.u, e.v, weight=e.length)
        self.tree_edges, self.non_tree_edges = self._spanning_tree()
        self._dist = None
        self._paths = None

    @property
    def betti(self) -> int:
        return len(self.edges) - len(self.vertices) + 1

    def is_connected(self) -> bool:
        return nx.is_connected(self._graph)

    def _spanning_tree(self):
        # BFS from vertex 0, edges visited in id order
        incident = {i: [] for i in range(len(self.vertices))}
        for eid, e in enumerate(self.edges):
            incident[e.u].append((eid, e.v))
            incident[e.v].append((eid, e.u))
        seen = {0}
        queue = [0]
        tree = []
        while queue:
            x = queue.pop(0)
            for eid, y in sorted(incident[x]):
                if y not in seen:
                    seen.add(y)
                    tree.append(eid)
                    queue.append(y)
        tree_set = set(tree)
        non_tree = [eid for eid in range(len(self.edges)) if eid not in tree_set]
        return sorted(tree), non_tree

    def project(self, points: np.ndarray):
        """
        Nearest skeleton point for each input point.

        Returns:
            tuple: (edge ids, arc-length positions) as numpy arrays.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        best_d = np.full(len(points), np.inf)
        best_e = np.zeros(len(points), dtype=int)
        best_s = np.zeros(len(points))
        for eid, e in enumerate(self.edges):
            offset = 0.0
            for a, b in zip(e.polyline[:-1], e.polyline[1:]):
                seg = b - a
                seg_len = float(np.hypot(*seg))
                if seg_len == 0.0:
                    continue
                t = np.clip(((points - a) @ seg) / seg_len ** 2, 0.0, 1.0)
                foot = a + t[:, None] * seg
                d = np.hypot(*(points - foot).T)
                better = d < best_d
                best_d[better] = d[better]
                best_e[better] = eid
                best_s[better] = offset + t[better] * seg_len
                offset += seg_len
        return best_e, best_s

    def _shortest(self):
        if self._dist is None:
            self._dist, self._paths = {}, {}
            for src, (dist, paths) in nx.all_pairs_dijkstra(self._graph, weight='weight'):
                self._dist[src] = dist
                self._paths[src] = paths
        return self._dist, self._paths

    def route(self, p: tuple, q: tuple) -> dict:
        """
        Shortest skeleton route between two projected points.

        Args:
            p (tuple): (edge id, arc position) of the start.
            q (tuple): (edge id, arc position) of the end.

        Returns:
            dict: edge id -> signed fraction of the edge traversed (along u->v).
        """
        dist, paths = self._shortest()
        e1, s1 = p
        e2, s2 = q
        E1, E2 = self.edges[e1], self.edges[e2]
        best = None
        if e1 == e2:
            best = (abs(s2 - s1), {e1: (s2 - s1) / E1.length})
        starts = [(E1.u, s1, -s1 / E1.length), (E1.v, E1.length - s1, (E1.length - s1) / E1.length)]
        ends = [(E2.u, s2, s2 / E2.length), (E2.v, E2.length - s2, -(E2.length - s2) / E2.length)]
        for a, cost_a, frac_a in starts:
            for b, cost_b, frac_b in ends:
                if b not in dist[a]:
                    continue
                cost = cost_a + dist[a][b] + cost_b
                if best is not None and cost >= best[0] - 1e-12:
                    continue
                flow = {}
                flow[e1] = flow.get(e1, 0.0) + frac_a
                vertex_path = paths[a][b]
                for x, y in zip(vertex_path[:-1], vertex_path[1:]):
                    eid = self._edge_of[(min(x, y), max(x, y))]
                    sign = 1.0 if self.edges[eid].u == x else -1.0
                    flow[eid] = flow.get(eid, 0.0) + sign
                flow[e2] = flow.get(e2, 0.0) + frac_b
                best = (cost, flow)
        return best[1]

    def loop_coordinates(self, points: np.ndarray) -> np.ndarray:
        """
        Skeleton-cycle coordinates of a closed sequence of points, one integer per
        non-tree skeleton edge.
        """
        edges, arcs = self.project(points)
        total = {}
        k = len(edges)
        for i in range(k):
            j = (i + 1) % k
            for eid, frac in self.route((edges[i], arcs[i]), (edges[j], arcs[j])).items():
                total[eid] = total.get(eid, 0.0) + frac
        coords = np.array([total.get(eid, 0.0) for eid in self.non_tree_edges])
        rounded = np.rint(coords)
        if np.any(np.abs(coords - rounded) > 1e-6):
            raise ConsistencyError(f"Skeleton coordinates are not integral: {coords}")
        return rounded.astype(int)

    def to_networkx(self) -> nx.Graph:
        return self._graph.copy()


@dataclass
class RasterGrid:
    """Cell-center rasterization of a domain's bounding box."""
    x0: float
    y0: float
    resolution: float
    nx: int
    ny: int
    inside: np.ndarray  # (ny, nx) boolean, cell center in domain

    def centers(self) -> np.ndarray:
        cx = self.x0 + (np.arange(self.nx) + 0.5) * self.resolution
        cy = self.y0 + (np.arange(self.ny) + 0.5) * self.resolution
        gx, gy = np.meshgrid(cx, cy)
        return np.column_stack([gx.ravel(), gy.ravel()])


@dataclass
class HallwayDomain:
    rects: list
    skeleton: SkeletonGraph
    boundary: list  # closed polylines, first vertex not repeated
    boundary_area_sign: list = field(default_factory=list)

    @property
    def betti(self) -> int:
        return self.skeleton.betti

    @property
    def bounds(self) -> Rect:
        r = np.array(self.rects, dtype=float)
        return (r[:, 0].min(), r[:, 1].min(), r[:, 2].max(), r[:, 3].max())

    def contains_points(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = points[:, 0], points[:, 1]
        hit = np.zeros(len(points), dtype=bool)
        for xmin, ymin, xmax, ymax in self.rects:
            hit |= (x >= xmin) & (x <= xmax) & (y >= ymin) & (y <= ymax)
        return hit

    def raster(self, resolution: float) -> RasterGrid:
        xmin, ymin, xmax, ymax = self.bounds
        nx_ = max(1, int(math.ceil((xmax - xmin) / resolution)))
        ny_ = max(1, int(math.ceil((ymax - ymin) / resolution)))
        grid = RasterGrid(xmin, ymin, resolution, nx_, ny_, np.zeros((ny_, nx_), dtype=bool))
        grid.inside = self.contains_points(grid.centers()).reshape(ny_, nx_)
        return grid

    def rect_index(self, rect) -> Optional[int]:
        rect = tuple(float(v) for v in rect)
        for i, r in enumerate(self.rects):
            if tuple(float(v) for v in r) == rect:
                return i
        return None

    def sample_boundary(self, index: int, step: float):
        """
        Points spaced at most `step` apart along a boundary component.

        Returns:
            tuple: (points array, arc-length parameters).
        """
        poly = self.boundary[index]
        closed = np.vstack([poly, poly[:1]])
        pts, params = [], []
        offset = 0.0
        for a, b in zip(closed[:-1], closed[1:]):
            seg_len = float(np.hypot(*(b - a)))
            k = max(1, int(math.ceil(seg_len / step)))
            t = np.arange(k) / k
            pts.append(a + t[:, None] * (b - a))
            params.append(offset + t * seg_len)
            offset += seg_len
        return np.vstack(pts), np.concatenate(params)

    def distance_to_boundary(self, points: np.ndarray, index: int):
        """Distance from each point to boundary component `index` and the nearest point on it."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        poly = self.boundary[index]
        closed = np.vstack([poly, poly[:1]])
        best_d = np.full(len(points), np.inf)
        best_p = np.zeros_like(points)
        for a, b in zip(closed[:-1], closed[1:]):
            seg = b - a
            t = np.clip(((points - a) @ seg) / float(seg @ seg), 0.0, 1.0)
            foot = a + t[:, None] * seg
            d = np.hypot(*(points - foot).T)
            better = d < best_d
            best_d[better] = d[better]
            best_p[better] = foot[better]
        return best_d, best_p


def contains(domain: HallwayDomain, point) -> bool:
    """True iff the point lies in the closed union of the domain's rectangles."""
    return bool(domain.contains_points(np.asarray(point, dtype=float))[0])


def _compressed_cells(rects: list):
    xs = sorted({float(v) for r in rects for v in (r[0], r[2])})
    ys = sorted({float(v) for r in rects for v in (r[1], r[3])})
    inside = np.zeros((len(xs) - 1, len(ys) - 1), dtype=bool)
    for i in range(len(xs) - 1):
        cx = 0.5 * (xs[i] + xs[i + 1])
        for j in range(len(ys) - 1):
            cy = 0.5 * (ys[j] + ys[j + 1])
            inside[i, j] = any(r[0] <= cx <= r[2] and r[1] <= cy <= r[3] for r in rects)
    return xs, ys, inside


def _trace_boundary(xs: list, ys: list, inside: np.ndarray) -> list:
    """Boundary loops of the union, interior kept on the left of every loop."""
    ni, nj = inside.shape

    def cell(i, j):
        return 0 <= i < ni and 0 <= j < nj and inside[i, j]

    out = {}  # vertex -> list of direction indices
    for i in range(ni):
        for j in range(nj):
            if not inside[i, j]:
                continue
            if not cell(i, j - 1):
                out.setdefault((i, j), []).append(0)
            if not cell(i + 1, j):
                out.setdefault((i + 1, j), []).append(1)
            if not cell(i, j + 1):
                out.setdefault((i + 1, j + 1), []).append(2)
            if not cell(i - 1, j):
                out.setdefault((i, j + 1), []).append(3)

    loops = []
    for start in sorted(out):
        while out.get(start):
            vertex, d = start, out[start].pop(0)
            path = [(vertex, d)]
            while True:
                vertex = (vertex[0] + _DIRS[d][0], vertex[1] + _DIRS[d][1])
                if vertex == start:
                    break
                options = out.get(vertex, [])
                # Prefer left turn, then straight, then right
                for nd in ((d + 1) % 4, d, (d + 3) % 4):
                    if nd in options:
                        options.remove(nd)
                        d = nd
                        break
                else:
                    raise ConsistencyError(f"Open boundary chain at grid vertex {vertex}")
                path.append((vertex, d))
            corners = [v for k, (v, dd) in enumerate(path) if dd != path[k - 1][1]]
            loops.append(np.array([[xs[i], ys[j]] for i, j in corners], dtype=float))
    return loops


def _signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _touches(a: Rect, b: Rect) -> bool:
    return max(a[0], b[0]) <= min(a[2], b[2]) and max(a[1], b[1]) <= min(a[3], b[3])


def _junctions(rects: list) -> list:
    """
    Junction regions of the union: pairwise overlaps merged while they touch, so
    edge-sharing tilings and regions shared by three or more rectangles give one vertex.

    Returns:
        list: (bounding box, rectangle indices) per junction.
    """
    overlaps = []
    for a in range(len(rects)):
        for b in range(a + 1, len(rects)):
            ov = _overlap(rects[a], rects[b])
            if ov is not None:
                overlaps.append((ov, a, b))
    linked = nx.Graph()
    linked.add_nodes_from(range(len(overlaps)))
    for i in range(len(overlaps)):
        for j in range(i + 1, len(overlaps)):
            if _touches(overlaps[i][0], overlaps[j][0]):
                linked.add_edge(i, j)
    junctions = []
    for group in sorted(nx.connected_components(linked), key=min):
        boxes = np.array([overlaps[i][0] for i in group], dtype=float)
        box = (boxes[:, 0].min(), boxes[:, 1].min(), boxes[:, 2].max(), boxes[:, 3].max())
        members = sorted({k for i in group for k in overlaps[i][1:]})
        junctions.append((box, members))
    return junctions


def _build_skeleton(rects: list) -> SkeletonGraph:
    vertices = []
    stations = {k: [] for k in range(len(rects))}  # rect -> [(axis_pos, half_extent, vertex)]

    axes = []
    for r in rects:
        axes.append(0 if (r[2] - r[0]) >= (r[3] - r[1]) else 1)

    for box, members in _junctions(rects):
        vid = len(vertices)
        vertices.append(((box[0] + box[2]) / 2.0, (box[1] + box[3]) / 2.0))
        for k in members:
            ax = axes[k]
            pos = vertices[vid][ax]
            half = (box[2] - box[0]) / 2.0 if ax == 0 else (box[3] - box[1]) / 2.0
            stations[k].append((pos, half, vid))

    edges = []
    for k, r in enumerate(rects):
        ax = axes[k]
        lo, hi = (r[0], r[2]) if ax == 0 else (r[1], r[3])
        mid = (r[1] + r[3]) / 2.0 if ax == 0 else (r[0] + r[2]) / 2.0
        # Dead ends: centerline ends not inside any junction
        for end in (lo, hi):
            if not any(pos - half <= end <= pos + half for pos, half, _ in stations[k]):
                vid = len(vertices)
                vertices.append((end, mid) if ax == 0 else (mid, end))
                stations[k].append((end, 0.0, vid))
        ordered = sorted(stations[k])
        for (pa, ha, va), (pb, hb, vb) in zip(ordered[:-1], ordered[1:]):
            if va == vb:
                continue
            pa_pt = np.array(vertices[va], dtype=float)
            pb_pt = np.array(vertices[vb], dtype=float)
            a_proj = np.array((pa, mid) if ax == 0 else (mid, pa), dtype=float)
            b_proj = np.array((pb, mid) if ax == 0 else (mid, pb), dtype=float)
            pts = [pa_pt]
            for p in (a_proj, b_proj, pb_pt):
                if not np.allclose(p, pts[-1]):
                    pts.append(p)
            poly = np.array(pts)
            lead = float(np.hypot(*(a_proj - pa_pt)))
            straight = pb - pa
            length = float(np.hypot(*np.diff(poly, axis=0).T).sum())
            edges.append(SkeletonEdge(
                u=va, v=vb, polyline=poly, rect_index=k, axis=ax,
                lead=lead, axis_start=pa, axis_sign=1, length=length,
                free_span=(lead + ha, lead + straight - hb),
            ))
    return SkeletonGraph(np.array(vertices, dtype=float), edges)


def build_domain(rects: list) -> HallwayDomain:
    """
    Build a hallway domain from axis-aligned rectangles.

    Args:
        rects (list): (xmin, ymin, xmax, ymax) quadruples.

    Returns:
        HallwayDomain: Domain with boundary polylines and skeleton graph.
    """
    if not rects:
        raise DegenerateRect("A domain needs at least one rectangle")
    rects = [tuple(float(v) for v in r) for r in rects]
    for r in rects:
        if len(r) != 4 or r[2] <= r[0] or r[3] <= r[1]:
            raise DegenerateRect(f"Rectangle {r} has nonpositive extent")

    touching = nx.Graph()
    touching.add_nodes_from(range(len(rects)))
    for a in range(len(rects)):
        for b in range(a + 1, len(rects)):
            if _overlap(rects[a], rects[b]) is not None:
                touching.add_edge(a, b)
    if not nx.is_connected(touching):
        raise DisconnectedDomain(
            f"Rectangles form {nx.number_connected_components(touching)} separate pieces"
        )

    xs, ys, inside = _compressed_cells(rects)
    loops = _trace_boundary(xs, ys, inside)
    signs = [1 if _signed_area(p) > 0 else -1 for p in loops]
    skeleton = _build_skeleton(rects)

    holes = sum(1 for s in signs if s < 0)
    if skeleton.betti != holes:
        raise ConsistencyError(
            f"Skeleton has {skeleton.betti} loops but the boundary encloses {holes} holes"
        )
    return HallwayDomain(rects, skeleton, loops, signs)


def sample_points(domain: HallwayDomain, count: int, seed: Union[int, np.random.Generator] = 0) -> np.ndarray:
    """
    Uniform i.i.d. points over the area of the domain.

    Args:
        domain (HallwayDomain): Sampling region.
        count (int): Number of points (>= 1).
        seed (int | Generator): Seed or an existing generator.

    Returns:
        np.ndarray: (count, 2) array of positions.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    xs, ys, inside = _compressed_cells(domain.rects)
    pieces = []
    for i, j in zip(*np.nonzero(inside)):
        pieces.append((xs[i], ys[j], xs[i + 1], ys[j + 1]))
    pieces = np.array(pieces, dtype=float)
    areas = (pieces[:, 2] - pieces[:, 0]) * (pieces[:, 3] - pieces[:, 1])
    pick = rng.choice(len(pieces), size=count, p=areas / areas.sum())
    u = rng.random((count, 2))
    chosen = pieces[pick]
    x = chosen[:, 0] + u[:, 0] * (chosen[:, 2] - chosen[:, 0])
    y = chosen[:, 1] + u[:, 1] * (chosen[:, 3] - chosen[:, 1])
    return np.column_stack([x, y])


# --- Presets ---

def square(side: float = 1.0) -> HallwayDomain:
    return build_domain([(0.0, 0.0, side, side)])


def corridor(length: float = 10.0, width: float = 1.0) -> HallwayDomain:
    return build_domain([(0.0, 0.0, length, width)])


def annulus_frame(outer: float = 10.0, width: float = 1.0) -> HallwayDomain:
    """Square ring of four corridors overlapping at the corners (g = 1)."""
    return build_domain([
        (0.0, 0.0, outer, width),
        (0.0, outer - width, outer, outer),
        (0.0, 0.0, width, outer),
        (outer - width, 0.0, outer, outer),
    ])


def figure_eight(side: float = 10.0, width: float = 1.0) -> HallwayDomain:
    """Two stacked square rings sharing a middle corridor (g = 2)."""
    height = 2.0 * side
    mid = side
    return build_domain([
        (0.0, 0.0, side, width),
        (0.0, mid - width / 2.0, side, mid + width / 2.0),
        (0.0, height - width, side, height),
        (0.0, 0.0, width, height),
        (side - width, 0.0, side, height),
    ])


def hallway_grid(side: float = 200.0, width: float = 12.0) -> HallwayDomain:
    """Outer ring plus a central cross of hallways inside a side x side square (g = 4)."""
    half = side / 2.0
    inset = width / 2.0
    return build_domain([
        (0.0, 0.0, side, width),
        (0.0, side - width, side, side),
        (0.0, 0.0, width, side),
        (side - width, 0.0, side, side),
        (inset, half - width / 2.0, side - inset, half + width / 2.0),
        (half - width / 2.0, inset, half + width / 2.0, side - inset),
    ])
