"""End-to-end walkthrough on the bundled surveillance-style task.

Builds a 200x200 workspace with three labeled regions and a few obstacles,
translates the task "visit l2, then l3, then patrol l1 while never touching
l1 beforehand" into an automaton, plans with all three sampling strategies,
and renders the guided plan to an SVG next to this script.

Run:  python demos/case_study.py
"""

import pathlib
import time

import numpy as np

from ltlplan.bench import cmd_render
from ltlplan.buchi import compute_rho, prune_infeasible
from ltlplan.ltl import ltl_to_nba, parse_ltl
from ltlplan.planner import PlannerConfig, plan
from ltlplan.prediction import oracle_predict
from ltlplan.workspace import GridWorkspace, Point

FORMULA = "!l1 U (l2 && <> l3) && []<> l1"


def build_workspace() -> GridWorkspace:
    grid = np.zeros((200, 200), dtype=np.int16)
    grid[60:80, 40:60] = 1
    grid[120:140, 90:120] = 1
    grid[20:50, 130:145] = 1
    grid[30:50, 30:50] = 2 + 1  # l2
    grid[90:110, 60:80] = 3 + 1  # l3
    grid[150:170, 150:170] = 1 + 1  # l1
    return GridWorkspace(width=200, height=200, m=3, grid=grid, init=Point(0.1, 0.05))


def main():
    w = build_workspace()
    nba = ltl_to_nba(parse_ltl(FORMULA))
    print(f"task: {FORMULA}")
    print(f"automaton: {nba.n} states, {len(nba.edges)} edges, accepting {sorted(nba.accepting)}")

    pruned = prune_infeasible(nba, w.m)
    pred = oracle_predict(w, pruned, compute_rho(pruned), 0.5)

    best = None
    for strategy in ("uniform", "biased", "guided"):
        cfg = PlannerConfig(strategy=strategy, max_iters=50000, seed=1)
        t0 = time.perf_counter()
        p, stats = plan(w, nba, cfg, prediction=pred if strategy == "guided" else None)
        dt = time.perf_counter() - t0
        print(
            f"{strategy:>8}: {stats.n:>5} iterations to first plan, "
            f"{dt:5.2f} s, cost {p.J:.3f} "
            f"(prefix {p.Jpre:.3f}, suffix {p.Jsuf:.3f})"
        )
        if strategy == "guided":
            best = p

    out = pathlib.Path(__file__).with_name("case_study.svg")
    cmd_render(w, best, pred.heatmap, str(out))
    print(f"rendered guided plan + heatmap to {out}")


if __name__ == "__main__":
    main()
