"""Command line front end.

Verbs: generate, translate, nba, plan, compare, render, predict-oracle,
export-dataset.  Planning exit codes: 0 plan found, 2 unsatisfiable task,
3 budget exhausted, 64 usage error.
"""

from __future__ import annotations

import json
import os
import sys

import click
import numpy as np

from ltlplan import bench
from ltlplan.buchi import Nba, compute_rho, feasible_accepting, prune_infeasible, to_hoa
from ltlplan.encodings import ExpertConfig, export_dataset
from ltlplan.ltl import ltl_to_nba, parse_ltl
from ltlplan.planner import PlannerConfig
from ltlplan.prediction import load_prediction, oracle_predict, save_prediction
from ltlplan.workspace import GenParams, GridWorkspace


@click.group()
def main():
    """Sampling-based temporal-logic path planning over grid workspaces."""


def _load_nba(path: str) -> Nba:
    if path.endswith(".hoa"):
        from ltlplan.buchi import parse_hoa

        with open(path) as f:
            return parse_hoa(f.read())
    return Nba.load(path)


def _nba_from_opts(ltl: str, nba_path: str) -> Nba:
    if (ltl is None) == (nba_path is None):
        raise click.UsageError("provide exactly one of --ltl and --nba")
    if ltl is not None:
        return ltl_to_nba(parse_ltl(ltl))
    return _load_nba(nba_path)


@main.command()
@click.option("--seed", type=int, required=True)
@click.option("--count", type=int, default=20, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--m", type=int, default=7, show_default=True, help="Region labels per map.")
@click.option("--obstacles", type=(int, int), default=(6, 12), show_default=True)
def generate(seed, count, out_dir, m, obstacles):
    """Generate a deterministic batch of workspace+formula instances."""
    params = GenParams(m=m, n_obstacles=obstacles)
    manifest = bench.cmd_generate(seed, count, out_dir, params)
    click.echo(f"wrote {len(manifest['instances'])} instances to {out_dir}")


@main.command()
@click.option("--ltl", required=True, help="Formula text, e.g. '<> (l1 && <> l2)'.")
@click.option("--out", "out_path", type=click.Path(), required=True, help="nba.json or nba.hoa")
def translate(ltl, out_path):
    """Translate a formula to a Buchi automaton file."""
    b = ltl_to_nba(parse_ltl(ltl))
    if out_path.endswith(".hoa"):
        with open(out_path, "w") as f:
            f.write(to_hoa(b))
    else:
        b.save(out_path)
    click.echo(f"{b.n} states, {len(b.edges)} edges")


@main.command()
@click.option("--nba", "nba_path", type=click.Path(exists=True), required=True)
@click.option("--m", type=int, default=None, help="Label count for feasibility pruning.")
def nba(nba_path, m):
    """Print automaton info: size, feasible accepting states, distances."""
    b = _load_nba(nba_path)
    pruned = prune_infeasible(b, m)
    rho = compute_rho(pruned)
    try:
        feas = sorted(feasible_accepting(pruned, rho))
    except Exception:
        feas = []
    click.echo(f"states: {b.n} (reachable-pruned: {pruned.n})")
    click.echo(f"initial: {pruned.init}")
    click.echo(f"accepting: {sorted(pruned.accepting)}")
    click.echo(f"feasible accepting: {feas}")
    row = " ".join(
        "inf" if not np.isfinite(rho[pruned.init, q]) else str(int(rho[pruned.init, q]))
        for q in range(pruned.n)
    )
    click.echo(f"rho from init: {row}")


@main.command()
@click.option("--workspace", "ws_path", type=click.Path(exists=True), required=True)
@click.option("--ltl", default=None)
@click.option("--nba", "nba_path", type=click.Path(exists=True), default=None)
@click.option(
    "--strategy",
    type=click.Choice(["uniform", "biased", "guided"]),
    default="biased",
    show_default=True,
)
@click.option("--prediction", "pred_path", type=click.Path(exists=True), default=None)
@click.option("--oracle", is_flag=True, help="Derive the guidance heatmap analytically.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--max-iters", type=int, default=50000, show_default=True)
@click.option("--alpha", type=float, default=0.8, show_default=True)
@click.option("--pd", "p_d", type=float, default=0.9, show_default=True)
@click.option("--sigma-angle", type=float, default=np.pi / 6, show_default=True)
@click.option("--out-plan", type=click.Path(), default="plan.json", show_default=True)
@click.option("--out-stats", type=click.Path(), default="stats.json", show_default=True)
def plan(ws_path, ltl, nba_path, strategy, pred_path, oracle, seed, max_iters, alpha, p_d, sigma_angle, out_plan, out_stats):
    """Run one planning query and write plan.json plus stats.json."""
    w = GridWorkspace.load(ws_path)
    b = _nba_from_opts(ltl, nba_path)
    cfg = PlannerConfig(
        strategy=strategy,
        seed=seed,
        max_iters=max_iters,
        alpha=alpha,
        p_d=p_d,
        sigma_angle=sigma_angle,
    )
    pred = None
    if pred_path is not None:
        pred = load_prediction(pred_path, grid=(w.height, w.width))
    rc = bench.cmd_plan(
        w, b, cfg, out_plan=out_plan, out_stats=out_stats, prediction=pred, use_oracle=oracle
    )
    if rc == bench.EXIT_USAGE:
        click.echo("guided strategy needs --prediction or --oracle", err=True)
    elif rc == bench.EXIT_UNSAT:
        click.echo("task unsatisfiable on this workspace", err=True)
    elif rc == bench.EXIT_NO_PLAN:
        click.echo("no plan found within the iteration budget", err=True)
    else:
        click.echo(f"plan written to {out_plan}")
    sys.exit(rc)


@main.command()
@click.option("--instances", "instances_dir", type=click.Path(exists=True), required=True)
@click.option("--strategies", default="uniform,biased,guided", show_default=True)
@click.option("--trials", type=int, default=3, show_default=True)
@click.option("--out", "out_csv", type=click.Path(), required=True)
@click.option("--max-iters", type=int, default=50000, show_default=True)
@click.option("--budget", type=float, default=60.0, show_default=True)
@click.option("--simple-threshold", type=float, default=None, help="Split classes on uniform T.")
def compare(instances_dir, strategies, trials, out_csv, max_iters, budget, simple_threshold):
    """Benchmark strategies over an instance directory (resumable CSV)."""
    summary = bench.cmd_compare(
        instances_dir,
        [s.strip() for s in strategies.split(",") if s.strip()],
        trials,
        out_csv,
        max_iters=max_iters,
        budget_s=budget,
        simple_threshold=simple_threshold,
    )
    click.echo(",".join(bench.SUMMARY_FIELDS))
    for row in summary:
        click.echo(",".join(str(row[k]) for k in bench.SUMMARY_FIELDS))


@main.command()
@click.option("--workspace", "ws_path", type=click.Path(exists=True), required=True)
@click.option("--plan", "plan_path", type=click.Path(exists=True), default=None)
@click.option("--prediction", "pred_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_svg", type=click.Path(), default="out.svg", show_default=True)
def render(ws_path, plan_path, pred_path, out_svg):
    """Render workspace, optional plan and heatmap, to an SVG file."""
    from ltlplan.planner import Plan
    from ltlplan.workspace import Point

    w = GridWorkspace.load(ws_path)
    p = None
    if plan_path is not None:
        with open(plan_path) as f:
            d = json.load(f)
        p = Plan(
            prefix=[(Point(x, y), q) for (x, y, q) in d["prefix"]],
            suffix=[(Point(x, y), q) for (x, y, q) in d["suffix"]],
            Jpre=d["Jpre"],
            Jsuf=d["Jsuf"],
            J=d["J"],
        )
    hm = None
    if pred_path is not None:
        hm = np.asarray(load_prediction(pred_path, grid=(w.height, w.width)).heatmap)
    bench.cmd_render(w, p, heatmap=hm, out_svg=out_svg)
    click.echo(f"wrote {out_svg}")


@main.command("predict-oracle")
@click.option("--workspace", "ws_path", type=click.Path(exists=True), required=True)
@click.option("--ltl", default=None)
@click.option("--nba", "nba_path", type=click.Path(exists=True), default=None)
@click.option("--lam", type=float, default=0.5, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--binary", is_flag=True, help="Write the packed binary format.")
def predict_oracle(ws_path, ltl, nba_path, lam, out_path, binary):
    """Compute the analytic guidance prediction and save it."""
    w = GridWorkspace.load(ws_path)
    b = _nba_from_opts(ltl, nba_path)
    pruned = prune_infeasible(b, w.m)
    rho = compute_rho(pruned)
    pred = oracle_predict(w, pruned, rho, lam)
    save_prediction(pred, out_path, binary=binary or None)
    click.echo(f"wrote {out_path}")


@main.command("export-dataset")
@click.option("--instances", "instances_dir", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--iterations", type=int, default=10000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def export_dataset_cmd(instances_dir, out_dir, iterations, seed):
    """Encode an instance batch into training tensors, graphs and labels."""
    with open(os.path.join(instances_dir, "manifest.json")) as f:
        manifest = json.load(f)
    triples = []
    for e in manifest["instances"]:
        d = os.path.join(instances_dir, e["id"])
        triples.append(
            (
                e["id"],
                GridWorkspace.load(os.path.join(d, "workspace.json")),
                Nba.load(os.path.join(d, "nba.json")),
            )
        )
    out = export_dataset(triples, out_dir, ExpertConfig(iterations=iterations, seed=seed))
    ok = sum(1 for v in out["instances"] if "skipped" not in v)
    click.echo(f"exported {ok}/{len(triples)} instances to {out_dir}")


if __name__ == "__main__":
    main()
