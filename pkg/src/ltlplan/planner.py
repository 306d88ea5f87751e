"""Random tree construction over the product of workspace and automaton.

Prefix search grows a tree from the initial product state toward accepting
automaton states; suffix search grows return trees from each goal.  Edge
admission requires segment validity in the workspace and an automaton
transition enabled by the source point's label.  Rewiring keeps every
vertex on a minimum-cost path from its root.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional

import numpy as np

from ltlplan.buchi import (
    Nba,
    NoFeasibleAccepting,
    accepts_prefix_suffix,
    compute_rho,
    feasible_accepting,
    prune_infeasible,
)
from ltlplan.prediction import Prediction, oracle_or_none
from ltlplan.sampling import SamplerContext, make_sampler
from ltlplan.workspace import OBSTACLE, GridWorkspace, Point


class PlannerError(Exception):
    pass


class Unsatisfiable(PlannerError):
    """The pruned automaton has no feasible accepting state."""


class NoPrefixFound(PlannerError):
    pass


class NoPlanFound(PlannerError):
    pass


@dataclass
class PlannerConfig:
    lam: float = 0.5  # prefix/suffix cost weight
    eta: float = 0.1  # steer step
    gamma: float = 1.5  # rewiring radius constant, ~2*sqrt(3/(2*pi)) for the unit square
    max_iters: int = 10000
    strategy: str = "uniform"  # uniform | biased | guided
    alpha: float = 0.8
    p_d: float = 0.9
    tau: float = 0.06  # softness of the progress preference inside D_min, as a fraction of the larger grid dimension
    sigma_angle: float = math.pi / 6
    seed: int = 0
    first_solution_only: bool = True
    check_invariants: bool = False

    def __post_init__(self):
        if not (0.0 <= self.lam <= 1.0):
            raise PlannerError("lam must be in [0,1]")
        if self.eta <= 0.0:
            raise PlannerError("eta must be positive")
        if not (0.0 <= self.alpha <= 1.0):
            raise PlannerError("alpha must be in [0,1]")


@dataclass
class RunStats:
    """First-feasible metrics plus totals at termination."""

    T: Optional[float] = None  # wall seconds to first feasible plan
    n: Optional[int] = None  # iterations to first feasible plan
    m: Optional[int] = None  # tree node count at first feasible plan
    len: Optional[float] = None  # cost J of the first feasible plan
    total_iters: int = 0
    total_nodes: int = 0
    total_time: float = 0.0

    def to_json_dict(self) -> dict:
        return asdict(self)


@dataclass
class Plan:
    """Prefix vertex sequence plus suffix cycle with cost breakdown."""

    prefix: list[tuple[Point, int]]  # root .. goal
    suffix: list[tuple[Point, int]]  # goal .. last vertex before closing edge
    Jpre: float
    Jsuf: float
    J: float

    def prefix_word(self, w: GridWorkspace) -> list[frozenset]:
        return [w.symbol_at(p) for (p, _) in self.prefix[:-1]]

    def suffix_word(self, w: GridWorkspace) -> list[frozenset]:
        return [w.symbol_at(p) for (p, _) in self.suffix]

    def to_json_dict(self) -> dict:
        return {
            "prefix": [[p.x, p.y, q] for (p, q) in self.prefix],
            "suffix": [[p.x, p.y, q] for (p, q) in self.suffix],
            "Jpre": self.Jpre,
            "Jsuf": self.Jsuf,
            "J": self.J,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), separators=(",", ":"))


class ProductTree:
    """Random tree over workspace points paired with automaton states."""

    def __init__(self, w: GridWorkspace, root_x: Point, root_q: int):
        self.w = w
        self._xy = np.empty((256, 2))
        self._xy[0] = (root_x.x, root_x.y)
        self._qs = np.empty(256, dtype=np.int64)
        self._qs[0] = root_q
        self.n = 1
        self.parents: list[Optional[int]] = [None]
        self.costs: list[float] = [0.0]
        self.children: list[list[int]] = [[]]
        self.symbols: list[frozenset] = [w.symbol_at(root_x)]

    def point(self, i: int) -> Point:
        return Point(float(self._xy[i, 0]), float(self._xy[i, 1]))

    def q(self, i: int) -> int:
        return int(self._qs[i])

    def q_array(self) -> np.ndarray:
        return self._qs[: self.n]

    def positions(self) -> np.ndarray:
        return self._xy[: self.n]

    def symbol(self, i: int) -> frozenset:
        return self.symbols[i]

    def add(self, x: Point, q: int, parent: int, cost: float) -> int:
        if self.n == len(self._qs):
            self._xy = np.concatenate([self._xy, np.empty_like(self._xy)])
            self._qs = np.concatenate([self._qs, np.empty_like(self._qs)])
        i = self.n
        self._xy[i] = (x.x, x.y)
        self._qs[i] = q
        self.n += 1
        self.parents.append(parent)
        self.costs.append(cost)
        self.children.append([])
        self.children[parent].append(i)
        self.symbols.append(self.w.symbol_at(x))
        return i

    def reparent(self, v: int, new_parent: int, new_cost: float) -> None:
        old = self.parents[v]
        if old is not None:
            self.children[old].remove(v)
        self.parents[v] = new_parent
        self.children[new_parent].append(v)
        delta = new_cost - self.costs[v]
        stack = [v]
        while stack:
            u = stack.pop()
            self.costs[u] += delta
            stack.extend(self.children[u])

    def nearest(self, x: Point) -> int:
        d = self.positions() - (x.x, x.y)
        return int(np.argmin(np.einsum("ij,ij->i", d, d)))

    def near(self, x: Point, radius: float) -> np.ndarray:
        d = self.positions() - (x.x, x.y)
        return np.flatnonzero(np.einsum("ij,ij->i", d, d) <= radius * radius)

    def root_path(self, v: int) -> list[int]:
        path = [v]
        while self.parents[path[-1]] is not None:
            path.append(self.parents[path[-1]])
        path.reverse()
        return path

    def check_invariants(self, tol: float = 1e-9) -> None:
        roots = [i for i in range(self.n) if self.parents[i] is None]
        assert roots == [0], f"expected a single root, got {roots}"
        for v in range(1, self.n):
            path = self.root_path(v)
            assert path[0] == 0
            total = 0.0
            for a, b in zip(path, path[1:]):
                total += self.point(a).dist(self.point(b))
            assert abs(total - self.costs[v]) <= tol, f"cost mismatch at {v}"


def steer(x_nearest: Point, x_rand: Point, eta: float) -> Point:
    """x_rand when within eta of x_nearest, else the point at distance eta
    from x_nearest toward x_rand."""
    if eta <= 0.0:
        raise PlannerError("eta must be positive")
    d = x_nearest.dist(x_rand)
    if d <= eta:
        return x_rand
    f = eta / d
    return Point(x_nearest.x + f * (x_rand.x - x_nearest.x), x_nearest.y + f * (x_rand.y - x_nearest.y))


def near_radius(n: int, gamma: float, eta: float) -> float:
    # standard RRT* shrinking-radius schedule for 2-D; the single-vertex
    # tree uses eta so the root is connectable at all
    if n < 2:
        return eta
    return min(gamma * math.sqrt(math.log(n) / n), eta)


def extend(tree: ProductTree, x_new: Point, nba: Nba, cfg: PlannerConfig) -> list[int]:
    """Add product vertices at x_new reachable from near vertices, then
    rewire near vertices through the additions when that lowers cost."""
    w = tree.w
    if w.status_at_cell(w.cell_of(x_new)) == OBSTACLE:
        return []
    r = near_radius(tree.n, cfg.gamma, cfg.eta)
    near = tree.near(x_new, r)
    if near.size == 0:
        # frontier steps can outrun the shrinking radius; fall back to the
        # nearest vertex so growth never deadlocks
        near = np.array([tree.nearest(x_new)])
    xy = tree._xy[near]
    dists = np.hypot(xy[:, 0] - x_new.x, xy[:, 1] - x_new.y)
    through = np.array([tree.costs[int(i)] for i in near]) + dists
    seg_ok: dict[int, bool] = {}

    def valid(i: int) -> bool:
        if i not in seg_ok:
            seg_ok[i] = w.segment_valid(tree.point(i), x_new)
        return seg_ok[i]

    # candidate parents per new automaton state, cheapest first so the
    # segment check runs only while a state still lacks a parent
    best: dict[int, tuple[float, int]] = {}
    order = np.argsort(through, kind="stable")
    for k in order:
        i = int(near[k])
        q_news = [q for q in nba.enabled(tree.q(i), tree.symbol(i)) if q not in best]
        if not q_news:
            continue
        if not valid(i):
            continue
        for q_new in q_news:
            best[q_new] = (float(through[k]), i)
    added = []
    for q_new in sorted(best):
        c, parent = best[q_new]
        added.append(tree.add(x_new, q_new, parent, c))
    if not added:
        return []
    # rewire near vertices through the added vertices; the segment check
    # runs only when the cost filter already shows an improvement
    sym_new = tree.symbol(added[0])
    for k, i in enumerate(near):
        i = int(i)
        for a in added:
            c = tree.costs[a] + float(dists[k])
            if c < tree.costs[i] - 1e-15 and nba.has_transition(tree.q(a), sym_new, tree.q(i)):
                if valid(i):
                    tree.reparent(i, a, c)
    if cfg.check_invariants:
        tree.check_invariants()
    return added


def _make_context(
    w: GridWorkspace,
    nba: Nba,
    rho: np.ndarray,
    feas: tuple[int, ...],
    tree: ProductTree,
    cfg: PlannerConfig,
    rng: np.random.Generator,
    prediction: Optional[Prediction],
) -> SamplerContext:
    return SamplerContext(
        w=w, nba=nba, rho=rho, feas_acc=feas, tree=tree, cfg=cfg, rng=rng, prediction=prediction
    )


def search_prefix(
    w: GridWorkspace,
    nba: Nba,
    cfg: PlannerConfig,
    rho: np.ndarray,
    feas: tuple[int, ...],
    rng: np.random.Generator,
    prediction: Optional[Prediction] = None,
    iters: Optional[int] = None,
) -> tuple[ProductTree, list[int], int, Optional[int]]:
    """Grow the prefix tree from (init, q0).

    Returns (tree, goal vertex ids, iterations used, iteration of first
    goal or None).  Raises NoPrefixFound when no goal vertex appears.
    """
    tree = ProductTree(w, w.init, nba.init)
    ctx = _make_context(w, nba, rho, feas, tree, cfg, rng, prediction)
    sampler = make_sampler(cfg.strategy)
    # only feasible accepting states can close a suffix cycle, so only they
    # qualify as goals
    accepting = frozenset(feas)
    goals: list[int] = []
    first_at: list[Optional[int]] = [None]
    if nba.init in accepting:
        goals.append(0)
        first_at[0] = 0
        # an accepting root with a self-transition closes a zero-cost plan
        # on its own; otherwise keep growing so other return points exist
        if nba.has_transition(nba.init, tree.symbol(0), nba.init):
            return tree, goals, 0, 0
    def on_added(added: list[int], it: int) -> bool:
        hit = False
        for v in added:
            if tree.q(v) in accepting:
                goals.append(v)
                hit = True
        if hit and first_at[0] is None:
            first_at[0] = it
        return hit and cfg.first_solution_only

    budget = iters if iters is not None else cfg.max_iters
    used = _grow_counting(ctx, sampler, budget, on_added)
    if not goals:
        raise NoPrefixFound(f"no accepting product vertex within {budget} iterations")
    return tree, goals, used, first_at[0]


def _grow_counting(ctx, sampler, iters, on_added) -> int:
    """Sample-steer-extend loop; stops early when on_added returns True."""
    tree = ctx.tree
    cfg = ctx.cfg
    for it in range(iters):
        x_rand = sampler(ctx)
        x_near = tree.point(tree.nearest(x_rand))
        x_new = steer(x_near, x_rand, cfg.eta)
        if ctx.w.status_at_cell(ctx.w.cell_of(x_new)) == OBSTACLE:
            continue
        added = extend(tree, x_new, ctx.nba, cfg)
        if added and on_added(added, it + 1):
            return it + 1
    return iters


def _goal_reachable_by_closing_edge(w: GridWorkspace, nba: Nba, goal_x: Point, goal_q: int) -> bool:
    """Whether any cell that enables a transition into goal_q has line of
    sight to the goal point.  The closing edge of a suffix cycle is one
    straight segment from such a cell, so without one the cycle can never
    close and the search is skipped outright."""
    symbols = [frozenset()] + [frozenset([lab]) for lab in range(1, w.m + 1)]
    enabling = [
        sym
        for sym in symbols
        if any(d == goal_q and g.satisfied_by(sym) for (s, g, d) in nba.edges)
    ]
    if not enabling:
        return False
    cells = np.concatenate([w.cells_with_symbol(sym) for sym in enabling])
    if cells.size == 0:
        return False
    rows, cols = cells // w.width, cells % w.width
    cx = (cols + 0.5) / w.width
    cy = (rows + 0.5) / w.height
    # nearest-first so the common case exits after one or two checks
    order = np.argsort(np.hypot(cx - goal_x.x, cy - goal_x.y), kind="stable")
    for i in order:
        if w.segment_valid(Point(float(cx[i]), float(cy[i])), goal_x):
            return True
    return False


@dataclass
class SuffixResult:
    tree: Optional[ProductTree]  # None for a stay-in-place cycle
    cycle: list[tuple[Point, int]]  # goal vertex first
    Jsuf: float
    iters: int


def search_suffix_one(
    w: GridWorkspace,
    nba: Nba,
    cfg: PlannerConfig,
    rho: np.ndarray,
    feas: tuple[int, ...],
    rng: np.random.Generator,
    goal_x: Point,
    goal_q: int,
    iters: int,
    prediction: Optional[Prediction] = None,
) -> Optional[SuffixResult]:
    """Cheapest return cycle from one goal product state, or None."""
    sym_goal = w.symbol_at(goal_x)
    if nba.has_transition(goal_q, sym_goal, goal_q):
        return SuffixResult(tree=None, cycle=[(goal_x, goal_q)], Jsuf=0.0, iters=0)
    if not _goal_reachable_by_closing_edge(w, nba, goal_x, goal_q):
        return None
    tree = ProductTree(w, goal_x, goal_q)
    ctx = _make_context(w, nba, rho, feas, tree, cfg, rng, prediction)
    sampler = make_sampler(cfg.strategy)
    best: list[tuple[float, int]] = []  # (cycle cost, closing vertex)

    def on_added(added: list[int], it: int) -> bool:
        hit = False
        for v in added:
            xv = tree.point(v)
            if nba.has_transition(tree.q(v), tree.symbol(v), goal_q) and w.segment_valid(xv, goal_x):
                cost = tree.costs[v] + xv.dist(goal_x)
                best.append((cost, v))
                hit = True
        return hit and cfg.first_solution_only

    used = _grow_counting(ctx, sampler, iters, on_added)
    if not best:
        return None
    # re-evaluate closing costs: rewiring may have lowered vertex costs
    cost, v = min(
        ((tree.costs[vv] + tree.point(vv).dist(goal_x), vv) for (_, vv) in best), key=lambda t: t[0]
    )
    cyc = [(tree.point(i), tree.q(i)) for i in tree.root_path(v)]
    return SuffixResult(tree=tree, cycle=cyc, Jsuf=cost, iters=used)


def plan(
    w: GridWorkspace,
    nba: Nba,
    cfg: PlannerConfig,
    prediction: Optional[Prediction] = None,
) -> tuple[Plan, RunStats]:
    """Full prefix-suffix planning run with the configured strategy.

    Raises Unsatisfiable when the pruned automaton has no feasible
    accepting state, NoPlanFound when the iteration budget runs out.
    """
    t0 = time.perf_counter()
    pruned = prune_infeasible(nba, w.m)
    rho = compute_rho(pruned)
    try:
        feas = tuple(sorted(feasible_accepting(pruned, rho)))
    except NoFeasibleAccepting as e:
        raise Unsatisfiable(str(e)) from e
    cfg_used = cfg
    if cfg.strategy == "guided" and prediction is None:
        prediction = oracle_or_none(w, pruned, rho, cfg.lam)
        if prediction is None:
            cfg_used = PlannerConfig(**{**asdict(cfg), "strategy": "biased"})
    if prediction is not None:
        prediction.validate_against(pruned.n, w.height, w.width)
    rng = np.random.default_rng(cfg.seed)
    stats = RunStats()
    try:
        tree, goals, used, first_at = search_prefix(
            w, pruned, cfg_used, rho, feas, rng, prediction=prediction
        )
    except NoPrefixFound as e:
        stats.total_iters = cfg.max_iters
        stats.total_time = time.perf_counter() - t0
        raise NoPlanFound(str(e)) from e
    stats.total_iters = used
    stats.total_nodes = tree.n

    best_plan: Optional[Plan] = None
    first_recorded = False

    def group_goals(tr: ProductTree, vs: list[int]) -> dict[tuple, int]:
        # distinct product states (position, automaton state)
        keys: dict[tuple, int] = {}
        for v in vs:
            keys.setdefault((tr.point(v), tr.q(v)), v)
        return keys

    def try_goals(tr: ProductTree, keys: dict[tuple, int], per_goal: int, base_n: int) -> None:
        nonlocal best_plan, first_recorded
        for ((gx, gq), v) in keys.items():
            res = search_suffix_one(
                w, pruned, cfg_used, rho, feas, rng, gx, gq, per_goal, prediction=prediction
            )
            stats.total_iters += 0 if res is None else res.iters
            if res is None:
                continue
            if res.tree is not None:
                stats.total_nodes += res.tree.n
            jpre = tr.costs[v]
            j = cfg.lam * jpre + (1.0 - cfg.lam) * res.Jsuf
            prefix = [(tr.point(i), tr.q(i)) for i in tr.root_path(v)]
            cand = Plan(prefix=prefix, suffix=res.cycle, Jpre=jpre, Jsuf=res.Jsuf, J=j)
            if not first_recorded:
                first_recorded = True
                stats.T = time.perf_counter() - t0
                stats.n = base_n + res.iters
                stats.m = tr.n + (res.tree.n if res.tree is not None else 0)
                stats.len = j

            if best_plan is None or j < best_plan.J:
                best_plan = cand

    goal_keys = group_goals(tree, goals)
    # leave budget for a second prefix pass in case every first-round goal
    # has no line of sight back to its return region
    per_goal_budget = max(100, cfg.max_iters // max(4, len(goal_keys)))
    try_goals(tree, goal_keys, per_goal_budget, (first_at or 0))

    if best_plan is None:
        remaining = cfg.max_iters - stats.total_iters
        if remaining > 200:
            cfg_all = PlannerConfig(**{**asdict(cfg_used), "first_solution_only": False})
            try:
                tree2, goals2, used2, first2 = search_prefix(
                    w, pruned, cfg_all, rho, feas, rng, prediction=prediction, iters=remaining // 2
                )
            except NoPrefixFound:
                tree2 = None
            if tree2 is not None:
                stats.total_iters += used2
                stats.total_nodes += tree2.n
                keys2 = group_goals(tree2, goals2)
                per_goal2 = max(100, (remaining // 2) // max(1, len(keys2)))
                try_goals(tree2, keys2, per_goal2, used + used2)
    stats.total_time = time.perf_counter() - t0
    if best_plan is None:
        raise NoPlanFound("prefix goals found but no suffix cycle within budget")
    if not accepts_prefix_suffix(pruned, best_plan.prefix_word(w), best_plan.suffix_word(w)):
        raise PlannerError("internal error: assembled plan trace rejected by the automaton")
    return best_plan, stats
