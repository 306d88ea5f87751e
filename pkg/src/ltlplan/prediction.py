"""Prediction provider: deterministic oracle and prediction file I/O.

A Prediction bundles a per-automaton-state probability vector and a
per-cell heatmap of likelihood of lying on the optimal path.  The oracle
stands in for externally trained predictors: a breadth-first search over
(cell, automaton state) pairs realizes a hop-shortest accepting lasso on
the grid, and the vector and heatmap derive from the cheapest one found.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.ndimage import distance_transform_edt

from ltlplan.buchi import Nba
from ltlplan.workspace import FREE, OBSTACLE, GridWorkspace, region_code

_MAGIC = b"NNTL1"


class PredictionError(Exception):
    pass


class NoRealizableRun(PredictionError):
    """Every candidate accepting lasso is physically unreachable."""


class DimensionMismatch(PredictionError):
    pass


class FormatError(PredictionError):
    pass


@dataclass(frozen=True)
class Prediction:
    """State-probability vector (length |Q_B|) and grid heatmap, both in [0,1]."""

    p: np.ndarray
    heatmap: np.ndarray

    def __post_init__(self):
        p = np.ascontiguousarray(self.p, dtype=np.float64)
        h = np.ascontiguousarray(self.heatmap, dtype=np.float64)
        if p.ndim != 1 or h.ndim != 2:
            raise DimensionMismatch("p must be a vector and heatmap a matrix")
        for arr, name in ((p, "p"), (h, "heatmap")):
            if not np.isfinite(arr).all() or arr.min(initial=0.0) < 0.0 or arr.max(initial=0.0) > 1.0:
                raise DimensionMismatch(f"{name} entries must be finite in [0,1]")
        p.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "heatmap", h)

    def validate_against(self, n_states: int, height: int, width: int) -> None:
        if self.p.shape != (n_states,):
            raise DimensionMismatch(f"p has length {self.p.shape[0]}, automaton has {n_states} states")
        if self.heatmap.shape != (height, width):
            raise DimensionMismatch(f"heatmap shape {self.heatmap.shape} != ({height},{width})")


# -- deterministic oracle --------------------------------------------------


def _symbol_of_status(status: int):
    return frozenset() if status == FREE else frozenset((status - 1,))


def _stay_statuses(b: Nba, m: int) -> list[set[int]]:
    """Per-state cell statuses the run can idle on.

    Reading a constant symbol while the robot crosses cells of one status
    keeps the run near a state iff that state lies on a nonempty cycle
    whose edges are all enabled by the symbol (a self-loop, or a waiting
    cycle through other states as tableau translations produce)."""
    universe = [frozenset()] + [frozenset((i,)) for i in range(1, m + 1)]
    out: list[set[int]] = [set() for _ in range(b.n)]
    for sym in universe:
        reach = _nonempty_closure(b.symbol_matrix(sym))
        status = FREE if not sym else region_code(next(iter(sym)))
        for q in range(b.n):
            if reach[q, q]:
                out[q].add(status)
    return out


def _nonempty_closure(mat: np.ndarray) -> np.ndarray:
    """Reachability by paths of >= 1 edges."""
    reach = mat.copy()
    for _ in range(mat.shape[0]):
        new = reach | (reach @ mat)
        if (new == reach).all():
            break
        reach = new
    return reach


def _guard_edges(w: GridWorkspace, b: Nba) -> list[tuple[int, int, np.ndarray]]:
    """Automaton edges with the grid mask of cells whose symbol enables them."""
    status = np.asarray(w.grid)
    free = status != OBSTACLE
    masks: dict = {}
    edges = []
    for (s, g, d) in b.edges:
        if g not in masks:
            ok = [st for st in ([FREE] + [region_code(i) for i in range(1, w.m + 1)])
                  if g.satisfied_by(_symbol_of_status(st))]
            masks[g] = free & np.isin(status, ok)
        if masks[g].any():
            edges.append((s, d, masks[g]))
    return edges


_DIRS = ((-1, 0), (1, 0), (0, -1), (0, 1))


def _shift(a: np.ndarray, dr: int, dc: int) -> np.ndarray:
    out = np.zeros_like(a)
    H, W = a.shape
    out[max(dr, 0):H + min(dr, 0), max(dc, 0):W + min(dc, 0)] = \
        a[max(-dr, 0):H + min(-dr, 0), max(-dc, 0):W + min(-dc, 0)]
    return out


def _product_bfs(n, shape, edges, seeds, stop_states=(), reentry=None):
    """Breadth-first search over (automaton state, cell) pairs.

    Moving to a 4-neighbour cell costs one hop and consumes the arriving
    cell's symbol; the automaton may also take edges enabled by the current
    cell's symbol without moving (zero hops, the trajectory repeats the
    cell).  Returns parent arrays, the first (hops, cell) per reached stop
    state, and for ``reentry`` searches the (hops, predecessor) of the
    first return to the seed node after at least one hop.
    """
    H, W = shape
    visited = np.zeros((n, H, W), dtype=bool)
    parq = np.full((n, H, W), -1, dtype=np.int32)
    parpos = np.full((n, H, W), -1, dtype=np.int32)
    frontier = np.zeros_like(visited)
    for (q, (r, c)) in seeds:
        frontier[q, r, c] = True
        visited[q, r, c] = True
    first: dict[int, tuple[int, tuple[int, int]]] = {}
    hops = 0
    while frontier.any():
        added = frontier.copy()
        # zero-hop closure within each cell
        while True:
            grew = False
            for (q, q2, mask) in edges:
                if reentry is not None and hops > 0 and q2 == reentry[0]:
                    rr, rc = reentry[1]
                    if added[q, rr, rc] and mask[rr, rc]:
                        return visited, parq, parpos, first, (hops, (q, (rr, rc)))
                new = added[q] & mask & ~visited[q2]
                if new.any():
                    visited[q2] |= new
                    idx = np.where(new)
                    parq[q2][idx] = q
                    parpos[q2][idx] = idx[0] * W + idx[1]
                    added[q2] |= new
                    grew = True
            if not grew:
                break
        for qf in stop_states:
            if qf not in first and added[qf].any():
                r, c = min(map(tuple, np.argwhere(added[qf])))
                first[qf] = (hops, (r, c))
        if stop_states and all(qf in first for qf in stop_states):
            break
        # one-hop moves to the four neighbours
        nxt = np.zeros_like(visited)
        for (dr, dc) in _DIRS:
            shifted = [_shift(added[q], dr, dc) for q in range(n)]
            for (q, q2, mask) in edges:
                if reentry is not None and q2 == reentry[0]:
                    rr, rc = reentry[1]
                    if shifted[q][rr, rc] and mask[rr, rc]:
                        return visited, parq, parpos, first, \
                            (hops + 1, (q, (rr - dr, rc - dc)))
                new = shifted[q] & mask & ~visited[q2]
                if new.any():
                    visited[q2] |= new
                    idx = np.where(new)
                    parq[q2][idx] = q
                    parpos[q2][idx] = (idx[0] - dr) * W + (idx[1] - dc)
                    nxt[q2] |= new
        frontier = nxt
        hops += 1
    return visited, parq, parpos, first, None


def _backtrack(parq, parpos, q, cell, W):
    cells = [cell]
    states = [q]
    while True:
        pq = int(parq[q, cell[0], cell[1]])
        if pq < 0:
            break
        pp = int(parpos[q, cell[0], cell[1]])
        q, cell = pq, divmod(pp, W)
        cells.append(cell)
        states.append(q)
    return cells[::-1], states[::-1]


def oracle_predict(
    w: GridWorkspace,
    b: Nba,
    rho: np.ndarray,
    lam: float,
    k: int = 5,
    sigma: float = 3.0,
    floor: float = 0.05,
) -> Prediction:
    """Deterministic prediction from an exact grid realization.

    A breadth-first search over (cell, automaton state) pairs finds, for
    each feasible accepting state, the hop-shortest run prefix from the
    initial cell, then the shortest return cycle (or a stationary one when
    the reached cell's symbol enables a cycle at that state).  Among the
    ``k`` hop-closest accepting states, the run minimizing the planner's
    lam-weighted prefix/suffix hop cost wins.  The vector is 1.0 on the
    winning run's states and ``floor`` elsewhere; the heatmap decays
    exponentially with cell distance to the realized path.
    """
    feas = [q for q in sorted(b.accepting) if (rho[b.init, q] < np.inf or q == b.init) and rho[q, q] < np.inf]
    if not feas:
        raise NoRealizableRun("no feasible accepting state")

    edges = _guard_edges(w, b)
    shape = (w.height, w.width)
    root = w.cell_of(w.init)
    _, parq, parpos, first, _ = _product_bfs(
        b.n, shape, edges, [(b.init, root)], stop_states=feas
    )
    if not first:
        raise NoRealizableRun("no candidate lasso is realizable on this workspace")
    stay_sets = _stay_statuses(b, w.m)
    status = np.asarray(w.grid)

    best = None  # (cost, states, cells)
    for qf, (dpre, cell) in sorted(first.items(), key=lambda kv: (kv[1][0], kv[0]))[:k]:
        pre_cells, pre_states = _backtrack(parq, parpos, qf, cell, w.width)
        cyc_status = int(status[cell])
        if cyc_status in stay_sets[qf]:
            # idle in place: the cell's symbol closes a cycle at qf
            dsuf = 0
            suf_cells: list = []
            reach = _nonempty_closure(b.symbol_matrix(_symbol_of_status(cyc_status)))
            suf_states = [u for u in range(b.n) if reach[qf, u] and reach[u, qf]]
        else:
            _, sq, sp, _, back = _product_bfs(
                b.n, shape, edges, [(qf, cell)], reentry=(qf, cell)
            )
            if back is None:
                continue
            dsuf, (pq, pcell) = back
            suf_cells, suf_states = _backtrack(sq, sp, pq, pcell, w.width)
        cost = lam * dpre + (1.0 - lam) * dsuf
        states = sorted(set(pre_states) | set(suf_states) | {qf})
        if best is None or cost < best[0]:
            best = (cost, states, pre_cells + suf_cells)
    if best is None:
        raise NoRealizableRun("no candidate lasso is realizable on this workspace")

    _, states, cells = best
    p = np.full(b.n, floor)
    p[states] = 1.0
    mask = np.ones((w.height, w.width), dtype=bool)
    for (r, c) in cells:
        mask[r, c] = False
    dist = distance_transform_edt(mask)
    heat = np.exp(-dist / sigma)
    heat[np.asarray(w.grid) == OBSTACLE] = 0.0
    return Prediction(p=p, heatmap=heat)


def oracle_or_none(w: GridWorkspace, b: Nba, rho: np.ndarray, lam: float) -> Optional[Prediction]:
    """oracle_predict, degrading to None with a warning when unrealizable."""
    try:
        return oracle_predict(w, b, rho, lam)
    except NoRealizableRun as e:
        warnings.warn(f"prediction oracle found no realizable run ({e}); falling back to biased sampling")
        return None


# -- file formats ----------------------------------------------------------


def save_prediction(pred: Prediction, path, binary: Optional[bool] = None) -> None:
    """Write a prediction file; .bin/.nntl extensions select the binary format."""
    binary = binary if binary is not None else str(path).endswith((".bin", ".nntl"))
    if binary:
        rows, cols = pred.heatmap.shape
        with open(path, "wb") as f:
            f.write(_MAGIC)
            f.write(struct.pack("<III", pred.p.shape[0], rows, cols))
            f.write(pred.p.astype("<f4").tobytes())
            f.write(pred.heatmap.astype("<f4").ravel().tobytes())
    else:
        d = {
            "n_states": int(pred.p.shape[0]),
            "grid": [int(pred.heatmap.shape[0]), int(pred.heatmap.shape[1])],
            "p": pred.p.tolist(),
            "heatmap": pred.heatmap.ravel().tolist(),
        }
        with open(path, "w") as f:
            json.dump(d, f, separators=(",", ":"))


def load_prediction(path, n_states: Optional[int] = None, grid: Optional[tuple[int, int]] = None) -> Prediction:
    """Load a prediction file (binary or JSON), validating declared dims."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:5] == _MAGIC:
        if len(blob) < 5 + 12:
            raise FormatError("truncated header")
        ns, rows, cols = struct.unpack_from("<III", blob, 5)
        need = 5 + 12 + 4 * (ns + rows * cols)
        if len(blob) != need:
            raise FormatError(f"expected {need} bytes, file has {len(blob)}")
        p = np.frombuffer(blob, dtype="<f4", count=ns, offset=17).astype(np.float64)
        heat = np.frombuffer(blob, dtype="<f4", count=rows * cols, offset=17 + 4 * ns)
        pred = Prediction(p=p, heatmap=heat.astype(np.float64).reshape(rows, cols))
    else:
        try:
            d = json.loads(blob.decode("utf-8"))
            p = np.asarray(d["p"], dtype=np.float64)
            rows, cols = d["grid"]
            heat = np.asarray(d["heatmap"], dtype=np.float64).reshape(rows, cols)
            if len(p) != d["n_states"]:
                raise DimensionMismatch("p length disagrees with declared n_states")
        except DimensionMismatch:
            raise
        except Exception as e:
            raise FormatError(f"cannot parse prediction file: {e}") from e
        pred = Prediction(p=p, heatmap=heat)
    if n_states is not None and pred.p.shape[0] != n_states:
        raise DimensionMismatch(f"p length {pred.p.shape[0]} != NBA size {n_states}")
    if grid is not None and pred.heatmap.shape != tuple(grid):
        raise DimensionMismatch(f"heatmap shape {pred.heatmap.shape} != grid {tuple(grid)}")
    return pred
