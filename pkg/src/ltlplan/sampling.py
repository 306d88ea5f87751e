"""Sampling strategies for random tree construction: uniform, biased, guided.

The biased strategy steers tree growth toward automaton progress using the
hop-distance table and grid shortest paths; the guided strategy reweights
its state choices with a prediction vector and replaces the spatial draw
with a heatmap-weighted rectangle sample, falling back to the plain biased
behaviour with the configured probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Optional, Sequence

import numpy as np

from ltlplan.buchi import Nba
from ltlplan.prediction import Prediction
from ltlplan.workspace import OBSTACLE, GridWorkspace, Point

if TYPE_CHECKING:
    from ltlplan.planner import PlannerConfig, ProductTree


class SamplingError(Exception):
    pass


class DeadEnd(SamplingError):
    """No automaton successor pair exists for the current selection."""


@dataclass
class SamplerContext:
    """Per-run inputs shared by all sampling strategies."""

    w: GridWorkspace
    nba: Nba  # pruned
    rho: np.ndarray
    feas_acc: tuple[int, ...]
    tree: "ProductTree"
    cfg: "PlannerConfig"
    rng: np.random.Generator
    prediction: Optional[Prediction] = None
    _fields: dict = None  # per-(state, accepting) progress distance fields

    def __post_init__(self):
        if self._fields is None:
            self._fields = {}


@dataclass(frozen=True)
class BiasSelection:
    """Outcome of the state-selection steps feeding the spatial draw."""

    q_f: int
    v_closest: int
    q_succ1: int
    q_succ2: int
    x_l: Point
    # True when the guided coin fell back to the plain biased strategy;
    # the spatial draw must then follow the biased bearing sampler too
    via_biased: bool = False


def _dist_to(rho: np.ndarray, q: int, q_f: int) -> float:
    # progress distance: zero for the accepting state itself (the diagonal
    # of rho stores cycle lengths, not reachability)
    return 0.0 if q == q_f else float(rho[q, q_f])


def sample_uniform(ctx: SamplerContext) -> Point:
    return ctx.w.sample_free_uniform(ctx.rng)


def _weighted_index(rng: np.random.Generator, weights: np.ndarray) -> int:
    total = float(weights.sum())
    if total <= 0.0:
        return int(rng.integers(0, len(weights)))
    return int(rng.choice(len(weights), p=weights / total))


def _successor_pairs(ctx: SamplerContext, q_closest: int, sym, q_f: int) -> list[tuple[int, int]]:
    rho = ctx.rho
    d_closest = _dist_to(rho, q_closest, q_f)
    pairs = []
    for q1 in sorted(set(ctx.nba.enabled(q_closest, sym))):
        d1 = _dist_to(rho, q1, q_f)
        if d1 > d_closest or not np.isfinite(d1):
            continue
        for (_, q2) in ctx.nba.out_edges[q1]:
            d2 = _dist_to(rho, q2, q_f)
            if d2 <= d1:
                pairs.append((q1, q2))
    # a stationary pair only qualifies when nothing else does
    moving = [(q1, q2) for (q1, q2) in pairs if q2 != q1]
    return sorted(set(moving or pairs))


def _region_point(ctx: SamplerContext, q1: int, q2: int) -> Optional[Point]:
    """Uniform point over cells whose label satisfies some q1->q2 guard."""
    w = ctx.w
    universe = [frozenset()] + [frozenset((i,)) for i in range(1, w.m + 1)]
    cells = []
    for (s, g, d) in ctx.nba.edges:
        if s == q1 and d == q2:
            for sym in universe:
                if g.satisfied_by(sym):
                    cells.append(w.cells_with_symbol(sym))
    if not cells:
        return None
    flat = np.unique(np.concatenate(cells))
    if flat.size == 0:
        return None
    return w.point_in_cell(int(ctx.rng.choice(flat)), ctx.rng)


def _progress_field(ctx: SamplerContext, q: int, q_f: int) -> Optional[np.ndarray]:
    """Grid hop distances to the nearest cell enabling automaton progress
    out of state q toward q_f; None when no such transition exists."""
    key = (q, q_f)
    if key in ctx._fields:
        return ctx._fields[key]
    w = ctx.w
    rho = ctx.rho
    d_q = _dist_to(rho, q, q_f)
    universe = [frozenset()] + [frozenset((i,)) for i in range(1, w.m + 1)]

    def enabling_cells(pred) -> list[np.ndarray]:
        out = []
        for (s, g, d2) in ctx.nba.edges:
            if s == q and pred(d2):
                for sym in universe:
                    if g.satisfied_by(sym):
                        out.append(w.cells_with_symbol(sym))
        return out

    cells = enabling_cells(lambda d2: _dist_to(rho, d2, q_f) < d_q)
    if not cells:  # accepting state itself: head for the return cycle
        cells = enabling_cells(
            lambda d2: d2 != q and np.isfinite(_dist_to(rho, d2, q_f))
        )
    field = None
    if cells:
        flat = np.unique(np.concatenate(cells))
        if flat.size:
            src = [divmod(int(i), w.width) for i in flat]
            field = w.bfs_distances(src)
    ctx._fields[key] = field
    return field


def _frontier_vertex(
    ctx: SamplerContext, ids: np.ndarray, q_f: int, tau: float = 0.0
) -> int:
    """A vertex among ids preferring geodesic closeness to a progress-
    enabling cell.  tau = 0 picks the closest outright (ties at random);
    tau > 0 softens the preference to exp(-hops/tau).  Uniform draw when
    no progress field applies."""
    w = ctx.w
    tree = ctx.tree
    xy = tree._xy[ids]
    rows = np.minimum((xy[:, 1] * w.height).astype(np.int64), w.height - 1)
    cols = np.minimum((xy[:, 0] * w.width).astype(np.int64), w.width - 1)
    h = np.full(ids.size, np.inf)
    qs = tree.q_array()[ids]
    for q in np.unique(qs):
        field = _progress_field(ctx, int(q), q_f)
        if field is None:
            continue
        mask = qs == q
        vals = field[rows[mask], cols[mask]].astype(float)
        vals[vals < 0] = np.inf
        h[mask] = vals
    if not np.isfinite(h).any():
        return int(ctx.rng.choice(ids))
    if tau > 0.0:
        weights = np.exp(-(h - h.min()) / tau)
        weights[~np.isfinite(h)] = 0.0
        return int(ids[_weighted_index(ctx.rng, weights)])
    best = np.flatnonzero(h == h.min())
    return int(ids[ctx.rng.choice(best)])


def biased_select(ctx: SamplerContext) -> BiasSelection:
    """Steps: pick a feasible accepting state, a tree vertex biased toward
    automaton progress, a chain-consistent successor pair, and a region
    point enabling the pair's transition."""
    rng = ctx.rng
    q_f = int(rng.choice(list(ctx.feas_acc)))
    qs = ctx.tree.q_array()
    dists = np.where(qs == q_f, 0.0, ctx.rho[qs, q_f])
    dmin = dists.min()
    min_ids = np.flatnonzero(dists == dmin)
    other_ids = np.flatnonzero(dists != dmin)
    if other_ids.size == 0 or rng.random() < ctx.cfg.p_d:
        # softness is configured relative to grid size so small maps still
        # get a decisive frontier preference
        tau_hops = ctx.cfg.tau * max(ctx.w.height, ctx.w.width)
        v = _frontier_vertex(ctx, min_ids, q_f, tau=tau_hops)
    else:
        v = int(rng.choice(other_ids))
    sym = ctx.tree.symbol(v)
    pairs = _successor_pairs(ctx, int(qs[v]), sym, q_f)
    if not pairs:
        raise DeadEnd(f"no successor pair from state {qs[v]} under {set(sym) or '{}'}")
    q1, q2 = pairs[int(rng.integers(0, len(pairs)))]
    x_l = _region_point(ctx, q1, q2)
    if x_l is None:
        raise DeadEnd(f"no workspace cell enables transition {q1}->{q2}")
    return BiasSelection(q_f=q_f, v_closest=v, q_succ1=q1, q_succ2=q2, x_l=x_l, via_biased=True)


def biased_target_and_sample(ctx: SamplerContext, sel: BiasSelection) -> Point:
    """Spatial draw: bearing toward the next cell of the grid shortest
    path from the selected vertex to the region point, wrapped-normal
    angle, uniform radius in (0, eta]."""
    w = ctx.w
    rng = ctx.rng
    x_closest = ctx.tree.point(sel.v_closest)
    cell_l = w.cell_of(sel.x_l)
    cell_c = w.cell_of(x_closest)
    path = w.grid_path_to_cell(cell_c, cell_l)
    if path is None:
        return sample_uniform(ctx)
    # when the vertex already sits in the region cell, head for the point
    # itself; otherwise for the first step of the path toward it
    x_target = sel.x_l if len(path) < 2 else w.cell_center(path[1])
    bearing = math.atan2(x_target.y - x_closest.y, x_target.x - x_closest.x)
    if x_target == x_closest:
        bearing = rng.uniform(-math.pi, math.pi)
    for _ in range(20):
        theta = rng.normal(bearing, ctx.cfg.sigma_angle)
        d = ctx.cfg.eta * (1.0 - rng.random())  # uniform on (0, eta]
        x = x_closest.x + d * math.cos(theta)
        y = x_closest.y + d * math.sin(theta)
        if 0.0 <= x < 1.0 and 0.0 <= y < 1.0:
            p = Point(x, y)
            if w.status_at_cell(w.cell_of(p)) != OBSTACLE:
                return p
    return sample_uniform(ctx)


def guided_select(ctx: SamplerContext) -> BiasSelection:
    """Prediction-weighted variant of the state selections.

    With probability 1 - alpha this is exactly biased_select; otherwise the
    accepting state, tree vertex, and successor pair are drawn with weights
    taken from the prediction vector (uniform when all weights vanish).
    """
    if ctx.prediction is None:
        raise SamplingError("guided sampling requires a prediction")
    rng = ctx.rng
    # alpha = 0 skips the coin so the draw stream matches biased exactly
    if ctx.cfg.alpha <= 0.0 or rng.random() >= ctx.cfg.alpha:
        return biased_select(ctx)
    p = ctx.prediction.p
    feas = np.asarray(ctx.feas_acc)
    q_f = int(feas[_weighted_index(rng, p[feas])])
    qs = ctx.tree.q_array()
    # the p-weighted draw picks the state class; within it, prefer the
    # vertex closest to making progress so the rectangle draw stays ahead
    # of the tree frontier
    classes = np.unique(qs)
    q_cls = int(classes[_weighted_index(rng, p[classes])])
    v = _frontier_vertex(ctx, np.flatnonzero(qs == q_cls), q_f)
    sym = ctx.tree.symbol(v)
    pairs = _successor_pairs(ctx, int(qs[v]), sym, q_f)
    if not pairs:
        raise DeadEnd(f"no successor pair from state {qs[v]} under {set(sym) or '{}'}")
    weights = np.array([p[q1] * p[q2] for (q1, q2) in pairs])
    q1, q2 = pairs[_weighted_index(rng, weights)]
    x_l = _region_point(ctx, q1, q2)
    if x_l is None:
        raise DeadEnd(f"no workspace cell enables transition {q1}->{q2}")
    return BiasSelection(q_f=q_f, v_closest=v, q_succ1=q1, q_succ2=q2, x_l=x_l)


def guided_rect_sample(ctx: SamplerContext, sel: BiasSelection) -> Point:
    """Heatmap-weighted cell draw inside the rectangle spanned by the
    region point and the selected vertex (inflated to at least 5x5 cells)."""
    w = ctx.w
    rng = ctx.rng
    heat = ctx.prediction.heatmap
    x_closest = ctx.tree.point(sel.v_closest)
    r1, c1 = w.cell_of(sel.x_l)
    r2, c2 = w.cell_of(x_closest)
    r_lo, r_hi = min(r1, r2), max(r1, r2)
    c_lo, c_hi = min(c1, c2), max(c1, c2)
    r_lo, r_hi = _inflate(r_lo, r_hi, 5, w.height)
    c_lo, c_hi = _inflate(c_lo, c_hi, 5, w.width)
    sub = np.array(heat[r_lo : r_hi + 1, c_lo : c_hi + 1])
    grid = np.asarray(w.grid[r_lo : r_hi + 1, c_lo : c_hi + 1])
    free = grid != OBSTACLE
    if not free.any():
        return sample_uniform(ctx)
    weights = np.where(free, sub, 0.0).ravel()
    if weights.sum() < 1e-9:
        weights = free.astype(float).ravel()
    idx = _weighted_index(rng, weights)
    rr, cc = divmod(idx, c_hi - c_lo + 1)
    return w.point_in_cell((r_lo + rr) * w.width + (c_lo + cc), rng)


def _inflate(lo: int, hi: int, min_span: int, limit: int) -> tuple[int, int]:
    span = hi - lo + 1
    if span >= min_span:
        return lo, hi
    grow = min_span - span
    lo = max(0, lo - grow // 2)
    hi = min(limit - 1, lo + min_span - 1)
    lo = max(0, hi - min_span + 1)
    return lo, hi


def make_sampler(strategy: str) -> Callable[[SamplerContext], Point]:
    """Sampler for a strategy name; DeadEnd falls back to uniform for the
    iteration, keeping every strategy total and full-support."""
    if strategy == "uniform":
        return sample_uniform
    if strategy == "biased":

        def biased(ctx: SamplerContext) -> Point:
            try:
                sel = biased_select(ctx)
            except DeadEnd:
                return sample_uniform(ctx)
            return biased_target_and_sample(ctx, sel)

        return biased
    if strategy == "guided":

        def guided(ctx: SamplerContext) -> Point:
            try:
                sel = guided_select(ctx)
            except DeadEnd:
                return sample_uniform(ctx)
            if sel.via_biased:
                return biased_target_and_sample(ctx, sel)
            return guided_rect_sample(ctx, sel)

        return guided
    raise SamplingError(f"unknown strategy {strategy!r}")
