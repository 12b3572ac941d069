"""Grid path planning: A* over 26-connected free voxels plus shortcutting.

Edge costs and the heuristic are both Euclidean (admissible and
consistent on this graph), so the returned cost is optimal on the voxel
graph. Ties are broken by lower f, then lower h, then lexicographic
voxel index, which makes the search fully deterministic.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .splatmap import OccupancyGrid

DEFAULT_REPLAN_PERIOD = 1.0


class OutsideGrid(ValueError):
    """Start or goal lies outside the grid volume."""


class StartOccupied(ValueError):
    """Start voxel is occupied; no plan can begin there."""


class GoalOccupied(ValueError):
    """Goal voxel is occupied; deliberately not snapped to free space."""


class NoPath(ValueError):
    """Start and goal lie in disconnected free components."""


@dataclass(frozen=True)
class Path:
    """Piecewise-linear path; cost is the exact sum of segment lengths."""

    waypoints: np.ndarray = field(repr=False)
    cost: float = 0.0
    planned_at: float = 0.0

    def __post_init__(self) -> None:
        pts = np.asarray(self.waypoints, dtype=np.float64).reshape(-1, 3)
        if pts.shape[0] < 1:
            raise ValueError("path needs at least one waypoint")
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if pts.shape[0] > 1 and (seg == 0).any():
            raise ValueError("consecutive waypoints must be distinct")
        if abs(float(seg.sum()) - self.cost) > 1e-9:
            raise ValueError(f"cost {self.cost} != segment sum {seg.sum()}")
        object.__setattr__(self, "waypoints", pts)

    @classmethod
    def from_waypoints(cls, waypoints, planned_at: float = 0.0) -> "Path":
        pts = np.asarray(waypoints, dtype=np.float64).reshape(-1, 3)
        keep = [0] + [i for i in range(1, len(pts)) if np.linalg.norm(pts[i] - pts[i - 1]) > 0]
        pts = pts[keep]
        cost = float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())
        return cls(waypoints=pts, cost=cost, planned_at=planned_at)

    def to_payload(self) -> dict:
        return {
            "planned_at": self.planned_at,
            "cost_m": self.cost,
            "waypoints": [[float(c) for c in p] for p in self.waypoints],
        }


_NEIGHBORS = [
    (dx, dy, dz)
    for dx in (-1, 0, 1)
    for dy in (-1, 0, 1)
    for dz in (-1, 0, 1)
    if (dx, dy, dz) != (0, 0, 0)
]


def plan(grid: OccupancyGrid, start, goal, planned_at: float = 0.0) -> Path:
    """Optimal 26-connected A* from start to goal.

    Waypoints are voxel centers with the two endpoints substituted by the
    exact start and goal points. Start and goal must fall in free voxels
    inside the grid.
    """
    start = np.asarray(start, dtype=np.float64).reshape(3)
    goal = np.asarray(goal, dtype=np.float64).reshape(3)
    sv = grid.voxel_of(start)
    gv = grid.voxel_of(goal)
    if sv is None:
        raise OutsideGrid(f"start {start.tolist()} outside grid")
    if gv is None:
        raise OutsideGrid(f"goal {goal.tolist()} outside grid")
    occ3 = grid.as_3d()
    if occ3[sv]:
        raise StartOccupied(f"start voxel {sv} occupied")
    if occ3[gv]:
        raise GoalOccupied(f"goal voxel {gv} occupied")
    if sv == gv:
        if np.linalg.norm(goal - start) == 0:
            return Path(waypoints=start[None, :], cost=0.0, planned_at=planned_at)
        return Path.from_waypoints([start, goal], planned_at=planned_at)

    nx, ny, nz = grid.dims
    v = grid.voxel_size
    steps = [(dx, dy, dz, v * float(np.sqrt(dx * dx + dy * dy + dz * dz))) for dx, dy, dz in _NEIGHBORS]
    occ = grid.occupied
    n_total = occ.size
    g_cost = np.full(n_total, np.inf)
    came = np.full(n_total, -1, dtype=np.int64)
    closed = np.zeros(n_total, dtype=bool)
    gx, gy, gz = gv

    def h_of(ix: int, iy: int, iz: int) -> float:
        return v * float(np.sqrt((ix - gx) ** 2 + (iy - gy) ** 2 + (iz - gz) ** 2))

    s_flat = grid.index_of(*sv)
    g_flat = grid.index_of(*gv)
    g_cost[s_flat] = 0.0
    h0 = h_of(*sv)
    open_heap = [(h0, h0, s_flat, sv)]
    while open_heap:
        f, h, flat, (ix, iy, iz) = heapq.heappop(open_heap)
        if closed[flat]:
            continue
        closed[flat] = True
        if flat == g_flat:
            break
        base = g_cost[flat]
        for dx, dy, dz, step in steps:
            jx = ix + dx
            jy = iy + dy
            jz = iz + dz
            if not (0 <= jx < nx and 0 <= jy < ny and 0 <= jz < nz):
                continue
            jflat = (jx * ny + jy) * nz + jz
            if occ[jflat] or closed[jflat]:
                continue
            cand = base + step
            if cand < g_cost[jflat]:
                g_cost[jflat] = cand
                came[jflat] = flat
                hj = h_of(jx, jy, jz)
                heapq.heappush(open_heap, (cand + hj, hj, jflat, (jx, jy, jz)))
    else:
        raise NoPath(f"no free route from voxel {sv} to {gv}")

    chain = []
    cur = g_flat
    while cur != -1:
        cur_ix, rem = divmod(cur, ny * nz)
        cur_iy, cur_iz = divmod(rem, nz)
        chain.append(grid.voxel_center(cur_ix, cur_iy, cur_iz))
        cur = came[cur]
    chain.reverse()
    chain[0] = start
    chain[-1] = goal
    return Path.from_waypoints(chain, planned_at=planned_at)


def grid_cost(grid: OccupancyGrid, path: Path) -> float:
    """Voxel-graph cost of a plan result: segment sum with the substituted
    endpoints undone (useful for comparing against graph-search oracles)."""
    pts = path.waypoints.copy()
    sv = grid.voxel_of(pts[0])
    gv = grid.voxel_of(pts[-1])
    pts[0] = grid.voxel_center(*sv)
    pts[-1] = grid.voxel_center(*gv)
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def segment_free(grid: OccupancyGrid, a, b) -> bool:
    """True when every point sampled at voxel_size/2 steps along [a, b]
    (endpoints included) lies in a free voxel."""
    a = np.asarray(a, dtype=np.float64).reshape(3)
    b = np.asarray(b, dtype=np.float64).reshape(3)
    length = float(np.linalg.norm(b - a))
    n = max(int(np.ceil(length / (grid.voxel_size / 2.0))), 1)
    occ3 = grid.as_3d()
    for t in np.linspace(0.0, 1.0, n + 1):
        vox = grid.voxel_of(a + t * (b - a))
        if vox is None or occ3[vox]:
            return False
    return True


def smooth(path: Path, grid: OccupancyGrid, iterations: int, seed: int = 0) -> Path:
    """Randomized shortcutting: try to replace waypoint subchains with
    straight free segments.

    The first attempt is always the full chain (0, n-1), so a path with
    line of sight collapses to its endpoints regardless of seed. Cost
    never increases and endpoints are preserved.
    """
    pts = [p for p in path.waypoints]
    rng = np.random.default_rng(seed)
    for attempt in range(iterations):
        n = len(pts)
        if n <= 2:
            break
        if attempt == 0:
            i, j = 0, n - 1
        else:
            i = int(rng.integers(0, n - 1))
            j = int(rng.integers(i + 1, n))
        if j - i < 2:
            continue
        if segment_free(grid, pts[i], pts[j]):
            pts = pts[: i + 1] + pts[j:]
    out = Path.from_waypoints(pts, planned_at=path.planned_at)
    if out.cost > path.cost + 1e-9:
        return path
    return out


def replan_due(last: float, now: float, period: float = DEFAULT_REPLAN_PERIOD) -> bool:
    """True once at least period seconds separate now from the last plan."""
    return now - last >= period
