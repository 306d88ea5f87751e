"""Sampling-based task planning for LTL specifications in continuous 2-D workspaces."""

from ltlplan.workspace import GridWorkspace, Point, GenParams, generate_random_workspace
from ltlplan.ltl import parse_ltl, eval_lasso, ltl_to_nba
from ltlplan.buchi import Nba, Guard, compute_rho, feasible_accepting, prune_infeasible
from ltlplan.planner import PlannerConfig, Plan, RunStats, plan
from ltlplan.prediction import Prediction, oracle_predict

__all__ = [
    "GridWorkspace",
    "Point",
    "GenParams",
    "generate_random_workspace",
    "parse_ltl",
    "eval_lasso",
    "ltl_to_nba",
    "Nba",
    "Guard",
    "compute_rho",
    "feasible_accepting",
    "prune_infeasible",
    "PlannerConfig",
    "Plan",
    "RunStats",
    "plan",
    "Prediction",
    "oracle_predict",
]
