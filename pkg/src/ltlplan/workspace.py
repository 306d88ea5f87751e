"""Continuous 2-D workspace backed by a labeled occupancy grid.

The workspace is the unit square [0,1) x [0,1) discretized into a
``height`` x ``width`` grid of cells (200 x 200 by default).  Each cell is
Free, Obstacle, or carries exactly one region label in 1..m.  The grid is
both the obstacle/label model and the raster used for tensor encodings.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Optional

import numpy as np

FREE = 0
OBSTACLE = 1

_EPS = 1e-9


class WorkspaceError(Exception):
    pass


class ObstaclePoint(WorkspaceError):
    """A queried point lies inside an obstacle cell."""


class NoFreeSpace(WorkspaceError):
    """Every cell of the workspace is an obstacle."""


class GenerationFailed(WorkspaceError):
    """Random workspace generation exhausted its retry budget."""


class Point(NamedTuple):
    x: float
    y: float

    def dist(self, other: "Point") -> float:
        return float(np.hypot(self.x - other.x, self.y - other.y))


Cell = tuple[int, int]  # (row, col)


def region_code(i: int) -> int:
    """Grid code of region i (1-based): 1 + i."""
    return 1 + i


@dataclass(frozen=True)
class GridWorkspace:
    """Immutable labeled grid mapped onto the continuous unit square.

    ``grid[row, col]`` holds 0 for Free, 1 for Obstacle, 1+i for region i.
    """

    width: int
    height: int
    m: int
    grid: np.ndarray
    init: Point

    def __post_init__(self):
        g = np.ascontiguousarray(self.grid, dtype=np.int16)
        g.setflags(write=False)
        object.__setattr__(self, "grid", g)
        if g.shape != (self.height, self.width):
            raise WorkspaceError(f"grid shape {g.shape} != ({self.height},{self.width})")
        if not (0.0 <= self.init.x < 1.0 and 0.0 <= self.init.y < 1.0):
            raise WorkspaceError("init outside the unit square")
        if self.status_at_cell(self.cell_of(self.init)) == OBSTACLE:
            raise WorkspaceError("init lies in an obstacle cell")
        if not (g != OBSTACLE).any():
            raise WorkspaceError("no free cell")
        if g.max(initial=0) > 1 + self.m:
            raise WorkspaceError("region index out of range")

    # -- geometry ---------------------------------------------------------

    def cell_of(self, p: Point) -> Cell:
        col = min(int(p.x * self.width), self.width - 1)
        row = min(int(p.y * self.height), self.height - 1)
        return (row, col)

    def cell_center(self, c: Cell) -> Point:
        return Point((c[1] + 0.5) / self.width, (c[0] + 0.5) / self.height)

    def status_at_cell(self, c: Cell) -> int:
        return int(self.grid[c[0], c[1]])

    # -- labeling ---------------------------------------------------------

    def label_at(self, p: Point) -> Optional[int]:
        """Region index (1-based) of the cell containing p; None when Free.

        Raises ObstaclePoint for points inside obstacle cells.
        """
        s = self.status_at_cell(self.cell_of(p))
        if s == OBSTACLE:
            raise ObstaclePoint(f"point {p} lies in an obstacle cell")
        return s - 1 if s > 1 else None

    def symbol_at(self, p: Point) -> frozenset[int]:
        """The label valuation at p: empty set or a singleton region index."""
        lab = self.label_at(p)
        return frozenset() if lab is None else frozenset((lab,))

    # -- traversal --------------------------------------------------------

    def supercover(self, a: Point, b: Point) -> tuple[list[Cell], set[Cell]]:
        """Cells touched by the closed segment a-b.

        Returns (ordered, extra): ``ordered`` is the sequence of cells whose
        interior the segment crosses, in travel order; ``extra`` holds cells
        touched only at corners or along shared gridlines (conservative
        contact set for collision checks).
        """
        W, H = self.width, self.height
        # plain floats: scalar numpy arithmetic is an order of magnitude slower
        x0, y0 = float(a.x) * W, float(a.y) * H
        x1, y1 = float(b.x) * W, float(b.y) * H
        dx, dy = x1 - x0, y1 - y0

        ts = [0.0, 1.0]
        if dx != 0.0:
            lo, hi = (x0, x1) if x0 < x1 else (x1, x0)
            inv = 1.0 / dx
            for k in range(int(math.floor(lo)) + 1, int(math.ceil(hi))):
                ts.append((k - x0) * inv)
        if dy != 0.0:
            lo, hi = (y0, y1) if y0 < y1 else (y1, y0)
            inv = 1.0 / dy
            for k in range(int(math.floor(lo)) + 1, int(math.ceil(hi))):
                ts.append((k - y0) * inv)
        ts.sort()

        ordered: list[Cell] = []
        prev_t = ts[0]
        wmax, hmax = W - 1, H - 1
        for t in ts[1:]:
            if t - prev_t > _EPS:
                tm = 0.5 * (prev_t + t)
                c = int(x0 + tm * dx)
                r = int(y0 + tm * dy)
                c = 0 if c < 0 else (wmax if c > wmax else c)
                r = 0 if r < 0 else (hmax if r > hmax else r)
                if not ordered or ordered[-1] != (r, c):
                    ordered.append((r, c))
            prev_t = t
        if not ordered:  # degenerate: a == b
            ordered.append(self.cell_of(a))

        extra: set[Cell] = set()
        # segment running exactly along a gridline touches both sides
        if dx == 0.0 and abs(x0 - round(x0)) < 1e-9:
            k = int(round(x0))
            for (r, _) in ordered:
                for cc in (k - 1, k):
                    if 0 <= cc < W:
                        extra.add((r, cc))
        if dy == 0.0 and abs(y0 - round(y0)) < 1e-9:
            k = int(round(y0))
            for (_, c) in ordered:
                for rr in (k - 1, k):
                    if 0 <= rr < H:
                        extra.add((rr, c))
        # corner crossings touch all four adjacent cells
        if dx != 0.0 and dy != 0.0:
            for t in ts[1:-1]:
                if t <= _EPS or t >= 1.0 - _EPS:
                    continue
                xc = x0 + t * dx
                fx = xc - int(xc)
                if 1e-9 < fx < 1.0 - 1e-9:
                    continue
                yc = y0 + t * dy
                fy = yc - int(yc)
                if 1e-9 < fy < 1.0 - 1e-9:
                    continue
                kx = int(xc + 0.5)
                ky = int(yc + 0.5)
                for rr in (ky - 1, ky):
                    for cc in (kx - 1, kx):
                        if 0 <= rr < H and 0 <= cc < W:
                            extra.add((rr, cc))
        return ordered, extra

    def segment_valid(self, a: Point, b: Point) -> bool:
        """Transition validity of the straight segment a-b.

        True iff the segment touches no obstacle cell and the status
        sequence along it changes label value at most once (Free counts as
        its own value, so fully crossing a region from free space back to
        free space is invalid).
        """
        ordered, extra = self.supercover(a, b)
        cache = self.__dict__.setdefault("_cell_cache", {})
        g = cache.get("rows")
        if g is None:
            g = cache["rows"] = self.grid.tolist()
        changes = 0
        prev = -1
        for (r, c) in ordered:
            s = g[r][c]
            if s == OBSTACLE:
                return False
            if s != prev:
                if prev >= 0:
                    changes += 1
                    if changes > 1:
                        return False
                prev = s
        for (r, c) in extra:
            if g[r][c] == OBSTACLE:
                return False
        return True

    # -- grid search ------------------------------------------------------

    def grid_shortest_path(
        self, start: Cell, goal: Callable[[Cell], bool], allowed: Optional[Callable[[Cell], bool]] = None
    ) -> Optional[list[Cell]]:
        """Breadth-first shortest 4-connected path over non-obstacle cells.

        Returns the cell sequence from ``start`` to the nearest cell
        satisfying ``goal``, or None when unreachable.  ``start`` must not
        be an obstacle cell.  An ``allowed`` predicate further restricts
        which cells the path may traverse; goal cells and the start are
        exempt from it.
        """
        g = self.grid
        if g[start[0], start[1]] == OBSTACLE:
            raise WorkspaceError("start cell is an obstacle")
        if goal(start):
            return [start]
        H, W = self.height, self.width
        parent: dict[Cell, Cell] = {start: start}
        q = deque([start])
        while q:
            r, c = q.popleft()
            for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                if 0 <= nr < H and 0 <= nc < W and (nr, nc) not in parent and g[nr, nc] != OBSTACLE:
                    if allowed is not None and not goal((nr, nc)) and not allowed((nr, nc)):
                        continue
                    parent[(nr, nc)] = (r, c)
                    if goal((nr, nc)):
                        path = [(nr, nc)]
                        cur = (nr, nc)
                        while cur != start:
                            cur = parent[cur]
                            path.append(cur)
                        path.reverse()
                        return path
                    q.append((nr, nc))
        return None

    def _free_adjacency(self):
        """Sparse 4-connected adjacency over non-obstacle cells (cached)."""
        cache = self.__dict__.setdefault("_cell_cache", {})
        adj = cache.get("adj")
        if adj is None:
            from scipy.sparse import csr_matrix

            H, W = self.height, self.width
            free = self.grid != OBSTACLE
            idx = np.arange(H * W).reshape(H, W)
            rows, cols = [], []
            ok = free[:, :-1] & free[:, 1:]
            rows.append(idx[:, :-1][ok]); cols.append(idx[:, 1:][ok])
            ok = free[:-1, :] & free[1:, :]
            rows.append(idx[:-1, :][ok]); cols.append(idx[1:, :][ok])
            r = np.concatenate(rows); c = np.concatenate(cols)
            data = np.ones(r.size * 2, dtype=np.int8)
            adj = csr_matrix(
                (data, (np.concatenate([r, c]), np.concatenate([c, r]))),
                shape=(H * W, H * W),
            )
            cache["adj"] = adj
        return adj

    def _bfs_predecessors(self, start: Cell) -> np.ndarray:
        """Flat predecessor array of the BFS tree rooted at start (cached)."""
        cache = self.__dict__.setdefault("_cell_cache", {})
        preds = cache.setdefault("preds", {})
        src = start[0] * self.width + start[1]
        pred = preds.get(src)
        if pred is None:
            from scipy.sparse.csgraph import breadth_first_order

            _, pred = breadth_first_order(
                self._free_adjacency(), src, directed=False, return_predecessors=True
            )
            if len(preds) >= 512:  # bound the per-source cache
                preds.pop(next(iter(preds)))
            preds[src] = pred
        return pred

    def grid_path_to_cell(self, start: Cell, target: Cell) -> Optional[list[Cell]]:
        """Shortest 4-connected path start -> target over non-obstacle cells.

        Same contract as grid_shortest_path with a single-cell goal, but
        backed by a cached per-source search so repeated queries from the
        same start are cheap.
        """
        if self.grid[start[0], start[1]] == OBSTACLE:
            raise WorkspaceError("start cell is an obstacle")
        if start == target:
            return [start]
        if self.grid[target[0], target[1]] == OBSTACLE:
            return None
        pred = self._bfs_predecessors(start)
        W = self.width
        src = start[0] * W + start[1]
        cur = target[0] * W + target[1]
        rev = [cur]
        while cur != src:
            cur = int(pred[cur])
            if cur < 0:
                return None
            rev.append(cur)
        return [(i // W, i % W) for i in reversed(rev)]

    def bfs_distances(self, sources: Iterable[Cell]) -> np.ndarray:
        """4-connected BFS hop distances from a source set; -1 unreachable."""
        dist = np.full((self.height, self.width), -1, dtype=np.int32)
        g = self.grid
        q = deque()
        for (r, c) in sources:
            if g[r, c] != OBSTACLE and dist[r, c] < 0:
                dist[r, c] = 0
                q.append((r, c))
        H, W = self.height, self.width
        while q:
            r, c = q.popleft()
            d = dist[r, c] + 1
            for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                if 0 <= nr < H and 0 <= nc < W and dist[nr, nc] < 0 and g[nr, nc] != OBSTACLE:
                    dist[nr, nc] = d
                    q.append((nr, nc))
        return dist

    # -- sampling ---------------------------------------------------------

    def free_cell_indices(self) -> np.ndarray:
        """Flat indices (row-major) of non-obstacle cells."""
        cache = self.__dict__.setdefault("_cell_cache", {})
        if "free" not in cache:
            cache["free"] = np.flatnonzero(self.grid.ravel() != OBSTACLE)
        return cache["free"]

    def cells_with_symbol(self, symbol: frozenset[int]) -> np.ndarray:
        """Flat indices of cells whose valuation equals ``symbol``."""
        cache = self.__dict__.setdefault("_cell_cache", {})
        if symbol not in cache:
            if not symbol:
                code = FREE
            else:
                (lab,) = symbol
                code = region_code(lab)
            cache[symbol] = np.flatnonzero(self.grid.ravel() == code)
        return cache[symbol]

    def point_in_cell(self, flat_idx: int, rng: np.random.Generator) -> Point:
        r, c = divmod(int(flat_idx), self.width)
        u, v = rng.random(2)
        return Point((c + u) / self.width, (r + v) / self.height)

    def sample_free_uniform(self, rng: np.random.Generator) -> Point:
        """Uniform point over the union of non-obstacle cells."""
        free = self.free_cell_indices()
        if free.size == 0:
            raise NoFreeSpace("all cells are obstacles")
        return self.point_in_cell(int(rng.choice(free)), rng)

    # -- serialization ----------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "m": self.m,
            "init": [self.init.x, self.init.y],
            "grid": self.grid.ravel().tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), separators=(",", ":"))

    @staticmethod
    def from_json_dict(d: dict) -> "GridWorkspace":
        grid = np.asarray(d["grid"], dtype=np.int16).reshape(d["height"], d["width"])
        return GridWorkspace(
            width=d["width"],
            height=d["height"],
            m=d["m"],
            grid=grid,
            init=Point(d["init"][0], d["init"][1]),
        )

    @staticmethod
    def from_json(text: str) -> "GridWorkspace":
        return GridWorkspace.from_json_dict(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.to_json())

    @staticmethod
    def load(path) -> "GridWorkspace":
        with open(path) as f:
            return GridWorkspace.from_json(f.read())


# -- random instance generation -------------------------------------------


@dataclass
class GenParams:
    """Knobs for random workspace generation (axis-aligned rectangles)."""

    width: int = 200
    height: int = 200
    m: int = 7
    n_obstacles: tuple[int, int] = (6, 12)
    obstacle_size: tuple[int, int] = (10, 40)
    region_size: tuple[int, int] = (12, 24)
    max_retries: int = 100


def _try_generate(rng: np.random.Generator, p: GenParams) -> Optional[GridWorkspace]:
    grid = np.zeros((p.height, p.width), dtype=np.int16)
    n_obs = int(rng.integers(p.n_obstacles[0], p.n_obstacles[1] + 1))
    for _ in range(n_obs):
        w = int(rng.integers(p.obstacle_size[0], p.obstacle_size[1] + 1))
        h = int(rng.integers(p.obstacle_size[0], p.obstacle_size[1] + 1))
        r = int(rng.integers(0, p.height - h + 1))
        c = int(rng.integers(0, p.width - w + 1))
        grid[r : r + h, c : c + w] = OBSTACLE
    for i in range(1, p.m + 1):
        placed = False
        for _ in range(200):
            w = int(rng.integers(p.region_size[0], p.region_size[1] + 1))
            h = int(rng.integers(p.region_size[0], p.region_size[1] + 1))
            r = int(rng.integers(0, p.height - h + 1))
            c = int(rng.integers(0, p.width - w + 1))
            if (grid[r : r + h, c : c + w] == FREE).all():
                grid[r : r + h, c : c + w] = region_code(i)
                placed = True
                break
        if not placed:
            return None
    free = np.flatnonzero(grid.ravel() == FREE)
    if free.size == 0:
        return None
    r, c = divmod(int(rng.choice(free)), p.width)
    u, v = rng.random(2)
    init = Point((c + u) / p.width, (r + v) / p.height)
    w = GridWorkspace(width=p.width, height=p.height, m=p.m, grid=grid, init=init)
    # every region must be reachable from init through non-obstacle cells
    dist = w.bfs_distances([w.cell_of(init)])
    for i in range(1, p.m + 1):
        mask = grid == region_code(i)
        if not (dist[mask] >= 0).any():
            return None
    return w


def generate_random_workspace(seed: int, params: Optional[GenParams] = None) -> GridWorkspace:
    """Reproducible random workspace; retries with sub-seeds until connected."""
    p = params or GenParams()
    if p.m < 1:
        raise WorkspaceError("m must be >= 1")
    for attempt in range(p.max_retries):
        rng = np.random.default_rng([seed, attempt])
        w = _try_generate(rng, p)
        if w is not None:
            return w
    raise GenerationFailed(f"no connected workspace after {p.max_retries} attempts (seed={seed})")
