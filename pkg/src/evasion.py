import hashlib
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .config import log
from .domain import HallwayDomain
from .errors import ConsistencyError
from .network import Network
from .simulator import RunTrace

CAPTURED = 'CapturedByTick'
SURVIVES_HORIZON = 'SurvivesHorizon'
SURVIVES_FOREVER = 'SurvivesForever'


@dataclass
class CellSpace:
    centers: np.ndarray       # (m, 2)
    adjacency: sparse.csr_matrix
    labels: np.ndarray        # (m, 2) int cell coordinates reported in witnesses
    resolution: float

    @property
    def size(self) -> int:
        return len(self.centers)


def grid_cells(domain: HallwayDomain, resolution: float) -> CellSpace:
    """Raster cells inside the domain joined to their 4-neighbors."""
    grid = domain.raster(resolution)
    inside = grid.inside.ravel()
    ids = np.full(inside.shape, -1, dtype=np.int64)
    ids[inside] = np.arange(int(inside.sum()))
    iy, ix = np.divmod(np.flatnonzero(inside), grid.nx)
    rows, cols = [], []
    for dx, dy in ((1, 0), (0, 1)):
        jx, jy = ix + dx, iy + dy
        ok = (jx < grid.nx) & (jy < grid.ny)
        other = np.full(len(ix), -1, dtype=np.int64)
        other[ok] = ids[jy[ok] * grid.nx + jx[ok]]
        keep = other >= 0
        rows.append(np.flatnonzero(keep))
        cols.append(other[keep])
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    m = len(ix)
    adj = sparse.csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(m, m))
    return CellSpace(grid.centers()[inside], (adj + adj.T).tocsr(), np.column_stack([ix, iy]), resolution)


def skeleton_cells(domain: HallwayDomain, resolution: float) -> CellSpace:
    """
    Segments of length <= resolution along every skeleton edge; end segments
    of edges meeting at a vertex are joined.
    """
    centers, labels, rows, cols = [], [], [], []
    ends = {}
    offset = 0
    for eid, e in enumerate(domain.skeleton.edges):
        k = max(1, int(np.ceil(e.length / resolution)))
        seg = np.diff(e.polyline, axis=0)
        cum = np.concatenate([[0.0], np.cumsum(np.hypot(seg[:, 0], seg[:, 1]))])
        s = (np.arange(k) + 0.5) * e.length / k
        pts = np.column_stack([np.interp(s, cum, e.polyline[:, 0]), np.interp(s, cum, e.polyline[:, 1])])
        centers.append(pts)
        labels.append(np.column_stack([np.full(k, eid), np.arange(k)]))
        rows.extend(range(offset, offset + k - 1))
        cols.extend(range(offset + 1, offset + k))
        ends.setdefault(e.u, []).append(offset)
        ends.setdefault(e.v, []).append(offset + k - 1)
        offset += k
    for members in ends.values():
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                if members[a] != members[b]:
                    rows.append(members[a])
                    cols.append(members[b])
    adj = sparse.csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(offset, offset))
    return CellSpace(np.vstack(centers), (adj + adj.T).tocsr(), np.vstack(labels), resolution)


@dataclass
class EvasionInstance:
    domain: HallwayDomain
    network: Network
    schedule: list                  # awake node ids per tick
    resolution: float
    t0: int = 0
    centers: Optional[np.ndarray] = None     # coverage center per node id
    state_keys: Optional[list] = None        # automaton snapshot hash per tick
    period: Optional[int] = None             # declared period of a hand-written schedule
    region: Optional[list] = None            # rectangles of the tested subdomain
    space: str = 'grid'                      # 'grid' (2-d cells) or 'skeleton' (1-d cells)
    horizon: Optional[int] = None
    _cells: Optional[CellSpace] = field(default=None, repr=False)

    def __post_init__(self):
        if not self.schedule:
            raise ValueError("The schedule needs at least one tick")
        if self.resolution <= 0 or self.resolution > self.network.eps / 2.0 + 1e-12:
            raise ValueError(f"Grid resolution must lie in (0, eps/2], got {self.resolution}")
        if self.space not in ('grid', 'skeleton'):
            raise ValueError(f"Unknown cell space '{self.space}'")
        if self.period is not None and (self.period < 1 or self.period > len(self.schedule)):
            raise ValueError("period must lie in [1, len(schedule)]")
        if self.state_keys is not None and len(self.state_keys) != len(self.schedule):
            raise ValueError("state_keys must align with the schedule")

    @classmethod
    def from_trace(cls, domain: HallwayDomain, network: Network, trace: RunTrace, resolution: float,
                   t0: int = 0, centers: Optional[np.ndarray] = None, region: Optional[list] = None,
                   space: str = 'grid', recurrence: bool = True) -> 'EvasionInstance':
        """
        Schedule from a trace's awake sets. Recurrence proofs use the snapshot
        hashes, so leave `recurrence` off for runs with random link failures.
        """
        ticks, history = trace.history()
        if len(ticks) != trace.ticks + 1:
            raise ValueError("Evasion needs every snapshot of the trace")
        schedule = [np.flatnonzero(row == 0) for row in history]
        keys = list(trace.hashes) if recurrence else None
        return cls(domain, network, schedule, resolution, t0, centers, keys, None, region, space)

    @property
    def cells(self) -> CellSpace:
        if self._cells is None:
            build = grid_cells if self.space == 'grid' else skeleton_cells
            self._cells = build(self.domain, self.resolution)
        return self._cells

    @property
    def last_tick(self) -> int:
        if self.horizon is not None:
            return self.horizon
        if self.period is not None:
            return self.t0 + len(self.schedule) + 64 * self.period
        return len(self.schedule) - 1

    def awake_at(self, tick: int) -> np.ndarray:
        if tick < len(self.schedule):
            return np.asarray(self.schedule[tick], dtype=int)
        if self.period is None:
            raise IndexError(f"Tick {tick} lies beyond the schedule")
        first = len(self.schedule) - self.period
        return np.asarray(self.schedule[first + (tick - first) % self.period], dtype=int)

    def key_at(self, tick: int):
        if self.period is not None:
            first = len(self.schedule) - self.period
            return ('p', (tick - first) % self.period) if tick >= first else None
        if self.state_keys is not None:
            return ('s', self.state_keys[tick])
        return None

    def region_mask(self) -> np.ndarray:
        if not self.region:
            return np.ones(self.cells.size, dtype=bool)
        c = self.cells.centers
        mask = np.zeros(len(c), dtype=bool)
        for xmin, ymin, xmax, ymax in self.region:
            mask |= (c[:, 0] >= xmin) & (c[:, 0] <= xmax) & (c[:, 1] >= ymin) & (c[:, 1] <= ymax)
        return mask


@dataclass
class Verdict:
    outcome: str
    tick: Optional[int]             # capture tick, or the last tick examined
    resolution: float
    recurrence: Optional[tuple] = None
    witness: list = field(default_factory=list)  # (tick, cell_x, cell_y)

    def to_dict(self) -> dict:
        return {
            'format_version': 1,
            'outcome': self.outcome,
            'tick': self.tick,
            'recurrence': list(self.recurrence) if self.recurrence else None,
            'resolution': self.resolution,
            'witness': [list(w) for w in self.witness],
        }


def coverage_mask(instance: EvasionInstance, tick: int) -> np.ndarray:
    """Cells whose centers lie within eps of a node awake at `tick`."""
    awake = instance.awake_at(tick)
    cells = instance.cells
    if len(awake) == 0:
        return np.zeros(cells.size, dtype=bool)
    src = instance.network.positions if instance.centers is None else np.asarray(instance.centers)
    eps = instance.network.eps
    dist, _ = cKDTree(src[awake]).query(cells.centers, k=1, distance_upper_bound=eps * (1 + 1e-12))
    return dist <= eps


def _components(adjacency: sparse.csr_matrix, free: np.ndarray) -> np.ndarray:
    """Component label per cell, -1 on covered cells."""
    labels = np.full(len(free), -1, dtype=np.int64)
    idx = np.flatnonzero(free)
    if len(idx):
        _, sub = connected_components(adjacency[idx][:, idx], directed=False)
        labels[idx] = sub
    return labels


def _mask_key(mask: np.ndarray) -> str:
    return hashlib.sha1(np.packbits(mask).tobytes()).hexdigest()


def decide(instance: EvasionInstance) -> Verdict:
    """
    Sweep the reachable uncovered components forward in time.

    A cell is covered at tick t when its center lies within eps of an awake node.
    Within a tick the evader reaches any cell of its uncovered component; it
    passes to the next tick wherever two uncovered components share a cell.

    Returns:
        Verdict: Capture tick, a recurrence proof of survival, or survival up to the horizon.
    """
    cells = instance.cells
    allowed = instance.region_mask()
    adj = cells.adjacency
    t = instance.t0
    free = allowed & ~coverage_mask(instance, t)
    labels = _components(adj, free)
    reach = free.copy()
    history = [(t, labels, reach)]
    seen = {}

    while True:
        if not reach.any():
            if len(history) > 1:
                prev_reach = history[-2][2]
                if np.any(prev_reach & free):
                    raise ConsistencyError(f"Capture at tick {t} contradicts an uncovered overlap")
            log(f"Evader captured at tick {t}", 'debug')
            return Verdict(CAPTURED, t, cells.resolution)
        key = instance.key_at(t)
        if key is not None:
            full = (key, _mask_key(reach))
            if full in seen:
                start = seen[full]
                return Verdict(SURVIVES_FOREVER, t, cells.resolution, (start, t),
                               _witness(history, cells))
            seen[full] = t
        if t >= instance.last_tick:
            return Verdict(SURVIVES_HORIZON, t, cells.resolution, None, _witness(history, cells))

        t += 1
        free = allowed & ~coverage_mask(instance, t)
        labels = _components(adj, free)
        hit = np.unique(labels[free & reach])
        reach = np.isin(labels, hit) & free
        history.append((t, labels, reach))


def _witness(history: list, cells: CellSpace) -> list:
    """Backtrack one cell per tick through overlapping reachable components."""
    t, labels, reach = history[-1]
    cell = int(np.flatnonzero(reach)[0])
    path = [(t, cell)]
    for k in range(len(history) - 2, -1, -1):
        tk, labels_k, reach_k = history[k]
        comp = labels[cell]
        joint = np.flatnonzero((labels == comp) & reach_k)
        cell = int(joint[0])
        path.append((tk, cell))
        labels = labels_k
    path.reverse()
    return [(tick, int(cells.labels[c, 0]), int(cells.labels[c, 1])) for tick, c in path]


def verify_witness(instance: EvasionInstance, verdict: Verdict) -> bool:
    """
    Re-check a witness: every cell is uncovered at its tick and consecutive
    cells sit in components that share an uncovered cell.
    """
    if not verdict.witness:
        return False
    cells = instance.cells
    index = {(int(a), int(b)): k for k, (a, b) in enumerate(cells.labels.tolist())}
    allowed = instance.region_mask()
    prev = None
    for tick, cx, cy in verdict.witness:
        cell = index.get((cx, cy))
        if cell is None:
            return False
        free = allowed & ~coverage_mask(instance, tick)
        if not free[cell]:
            return False
        labels = _components(cells.adjacency, free)
        if prev is not None:
            prev_tick, prev_labels, prev_free, prev_cell = prev
            if tick != prev_tick + 1:
                return False
            a = (prev_labels == prev_labels[prev_cell]) & prev_free
            b = (labels == labels[cell]) & free
            if not np.any(a & b):
                return False
        prev = (tick, labels, free, cell)
    return True


def decide_1d(instance: EvasionInstance) -> Verdict:
    """decide on 1-d cells laid along the skeleton."""
    if instance.space == 'skeleton':
        return decide(instance)
    return decide(replace(instance, space='skeleton', _cells=None))


def refine(instance: EvasionInstance, max_halvings: int = 4):
    """
    Halve the resolution until the outcome agrees at three consecutive resolutions.

    Returns:
        tuple: (final Verdict, list of (resolution, outcome)).
    """
    current = instance
    verdict = decide(current)
    steps = [(current.resolution, verdict.outcome)]
    for _ in range(max_halvings):
        if len(steps) >= 3 and len({o for _, o in steps[-3:]}) == 1:
            break
        current = replace(current, resolution=current.resolution / 2.0, _cells=None)
        verdict = decide(current)
        steps.append((current.resolution, verdict.outcome))
    return verdict, steps
