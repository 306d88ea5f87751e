"""Benchmark harness: instance generation, single planning runs, strategy
comparison with CSV reporting, and static SVG rendering.

All randomness flows from recorded seeds so batches and reports are
reproducible byte-for-byte.  The compare command is append-safe: finished
(instance, strategy, seed) runs are keyed in the CSV and never rerun.
"""

from __future__ import annotations

import csv
import json
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from ltlplan.buchi import (
    Nba,
    NoFeasibleAccepting,
    compute_rho,
    feasible_accepting,
    prune_infeasible,
)
from ltlplan.ltl import ltl_to_nba, parse_ltl
from ltlplan.planner import (
    NoPlanFound,
    Plan,
    PlannerConfig,
    RunStats,
    Unsatisfiable,
    plan as run_planner,
)
from ltlplan.prediction import Prediction, oracle_or_none
from ltlplan.workspace import (
    OBSTACLE,
    GenParams,
    GenerationFailed,
    GridWorkspace,
    generate_random_workspace,
)

# context rows from the published simple-task comparison (mean seconds /
# mean iterations): uniform 54.2475 s / 1908.13, biased 1.03305 s / 101.0,
# guided 0.09518 s / 22.8941
REFERENCE_SIMPLE = {
    "uniform": {"T": 54.2475, "n": 1908.13},
    "biased": {"T": 1.03305, "n": 101.000},
    "guided": {"T": 0.09518, "n": 22.8941},
}

CSV_FIELDS = ["instance", "strategy", "seed", "T", "n", "m", "len", "timeout"]
SUMMARY_FIELDS = ["class", "strategy", "T", "n", "len", "m", "timeouts"]

# formula templates over region labels; {a}/{b}/{c} are distinct labels
FORMULA_TEMPLATES = [
    "<> l{a}",
    "<> l{a} && <> l{b}",
    "<> (l{a} && <> l{b})",
    "!l{a} U l{b}",
    "[]<> l{a}",
    "[]<> l{a} && <> l{b}",
    "<> (l{a} && <> (l{b} && <> l{c}))",
]


def workers() -> int:
    """Worker cap from NNGTL_WORKERS (default 1)."""
    try:
        return max(1, int(os.environ.get("NNGTL_WORKERS", "1")))
    except ValueError:
        return 1


# -- generate --------------------------------------------------------------


def _candidate_formulas(rng: np.random.Generator, m: int) -> str:
    t = FORMULA_TEMPLATES[int(rng.integers(0, len(FORMULA_TEMPLATES)))]
    labs = 1 + rng.permutation(m)[:3]
    return t.format(a=labs[0], b=labs[1], c=labs[2])


def generate_instance(seed: int, params: Optional[GenParams] = None):
    """One deterministic (workspace, formula, nba) triple.

    The formula is drawn from the template mix and kept only when the
    pruned automaton has a feasible accepting state and its symbolic run
    is physically realizable on the map (so every strategy can solve it).
    """
    params = params or GenParams()
    w = generate_random_workspace(seed, params)
    rng = np.random.default_rng([seed, 1])
    for _ in range(200):
        f = _candidate_formulas(rng, w.m)
        nba = ltl_to_nba(parse_ltl(f))
        pruned = prune_infeasible(nba, w.m)
        try:
            rho = compute_rho(pruned)
            feasible_accepting(pruned, rho)
        except NoFeasibleAccepting:
            continue
        if oracle_or_none(w, pruned, rho, 0.5) is None:
            continue
        return w, f, nba
    raise GenerationFailed(f"no satisfiable formula for seed {seed}")


def cmd_generate(seed: int, count: int, out_dir: str, params: Optional[GenParams] = None) -> dict:
    """Write `count` instance directories plus a manifest; deterministic
    in `seed` down to JSON byte equality."""
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for i in range(count):
        iid = f"inst{i:03d}"
        inst_seed = seed * 1000 + i
        w, f, nba = generate_instance(inst_seed, params)
        d = os.path.join(out_dir, iid)
        os.makedirs(d, exist_ok=True)
        w.save(os.path.join(d, "workspace.json"))
        nba.save(os.path.join(d, "nba.json"))
        with open(os.path.join(d, "formula.txt"), "w") as fh:
            fh.write(f + "\n")
        entries.append({"id": iid, "seed": inst_seed, "formula": f})
    manifest = {
        "seed": seed,
        "count": count,
        "template_mix": FORMULA_TEMPLATES,
        "instances": entries,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    return manifest


# -- plan ------------------------------------------------------------------

EXIT_OK = 0
EXIT_UNSAT = 2
EXIT_NO_PLAN = 3
EXIT_USAGE = 64


def cmd_plan(
    w: GridWorkspace,
    nba: Nba,
    cfg: PlannerConfig,
    out_plan: Optional[str] = None,
    out_stats: Optional[str] = None,
    prediction: Optional[Prediction] = None,
    use_oracle: bool = False,
) -> int:
    """Single planning run; writes plan.json/stats.json, returns an exit
    code (0 ok, 2 unsatisfiable, 3 search exhausted, 64 usage error)."""
    if cfg.strategy == "guided" and prediction is None and not use_oracle:
        return EXIT_USAGE
    if cfg.strategy == "guided" and prediction is None:
        pruned = prune_infeasible(nba, w.m)
        try:
            rho = compute_rho(pruned)
            feasible_accepting(pruned, rho)
        except NoFeasibleAccepting:
            return EXIT_UNSAT
        prediction = oracle_or_none(w, pruned, rho, cfg.lam)
    try:
        p, stats = run_planner(w, nba, cfg, prediction=prediction)
    except Unsatisfiable:
        return EXIT_UNSAT
    except NoPlanFound:
        return EXIT_NO_PLAN
    if out_plan:
        with open(out_plan, "w") as f:
            f.write(p.to_json())
    if out_stats:
        with open(out_stats, "w") as f:
            json.dump(stats.to_json_dict(), f, separators=(",", ":"))
    return EXIT_OK


# -- compare ---------------------------------------------------------------


@dataclass
class BenchRecord:
    instance: str
    strategy: str
    seed: int
    T: float
    n: Optional[int]
    m: Optional[int]
    len: Optional[float]
    timeout: bool


def _load_instance(path: str):
    w = GridWorkspace.load(os.path.join(path, "workspace.json"))
    nba = Nba.load(os.path.join(path, "nba.json"))
    return w, nba


def _one_run(args) -> dict:
    inst_dir, iid, strategy, seed, max_iters, budget_s = args
    w, nba = _load_instance(inst_dir)
    cfg = PlannerConfig(strategy=strategy, seed=seed, max_iters=max_iters)
    prediction = None
    if strategy == "guided":
        pruned = prune_infeasible(nba, w.m)
        rho = compute_rho(pruned)
        prediction = oracle_or_none(w, pruned, rho, cfg.lam)
    t0 = time.perf_counter()
    try:
        p, stats = run_planner(w, nba, cfg, prediction=prediction)
        rec = BenchRecord(
            instance=iid,
            strategy=strategy,
            seed=seed,
            T=round(time.perf_counter() - t0, 6),
            n=stats.n,
            m=stats.m,
            len=stats.len,
            timeout=False,
        )
    except NoPlanFound:
        # a timeout records T, n and m only; len stays absent
        rec = BenchRecord(
            instance=iid,
            strategy=strategy,
            seed=seed,
            T=round(time.perf_counter() - t0, 6),
            n=max_iters,
            m=None,
            len=None,
            timeout=True,
        )
    return asdict(rec)


def _read_done(out_csv: str) -> set:
    done = set()
    if os.path.exists(out_csv):
        with open(out_csv) as f:
            for row in csv.DictReader(f):
                done.add((row["instance"], row["strategy"], int(row["seed"])))
    return done


def cmd_compare(
    instances_dir: str,
    strategies: list[str],
    trials: int,
    out_csv: str,
    max_iters: int = 50000,
    budget_s: float = 60.0,
    simple_threshold: Optional[float] = None,
) -> list[dict]:
    """Run every (instance, strategy, seed) combination, appending rows to
    out_csv (idempotent by run key), and write a per-class summary next to
    it.  Returns the summary rows."""
    with open(os.path.join(instances_dir, "manifest.json")) as f:
        manifest = json.load(f)
    ids = [e["id"] for e in manifest["instances"]]
    done = _read_done(out_csv)
    tasks = []
    for iid in ids:
        for strategy in strategies:
            for seed in range(1, trials + 1):
                if (iid, strategy, seed) in done:
                    continue
                tasks.append(
                    (os.path.join(instances_dir, iid), iid, strategy, seed, max_iters, budget_s)
                )
    nw = workers()
    if tasks:
        # rows are flushed as runs finish so an interrupted batch resumes
        # where it stopped instead of redoing everything
        write_header = not os.path.exists(out_csv)
        with open(out_csv, "a", newline="") as f:
            wtr = csv.DictWriter(f, fieldnames=CSV_FIELDS)
            if write_header:
                wtr.writeheader()
                f.flush()
            if nw > 1:
                with ProcessPoolExecutor(max_workers=nw) as ex:
                    for r in ex.map(_one_run, tasks):
                        wtr.writerow(r)
                        f.flush()
            else:
                for t in tasks:
                    wtr.writerow(_one_run(t))
                    f.flush()
    return summarize(out_csv, simple_threshold)


def summarize(out_csv: str, simple_threshold: Optional[float] = None) -> list[dict]:
    """Per-class mean summary with the published context rows attached.

    The simple/complex split follows the uniform strategy's wall time per
    instance: at or below the threshold is `simple`.  Without a threshold
    all instances fall in one `all` class.
    """
    with open(out_csv) as f:
        rows = list(csv.DictReader(f))
    uniform_t = {}
    for r in rows:
        if r["strategy"] == "uniform":
            uniform_t.setdefault(r["instance"], []).append(float(r["T"]))

    def klass(iid: str) -> str:
        if simple_threshold is None:
            return "all"
        ts = uniform_t.get(iid)
        if not ts:
            return "all"
        return "simple" if statistics.mean(ts) <= simple_threshold else "complex"

    groups = {}
    for r in rows:
        groups.setdefault((klass(r["instance"]), r["strategy"]), []).append(r)
    summary = []
    for (cls, strategy) in sorted(groups):
        g = groups[(cls, strategy)]
        lens = [float(r["len"]) for r in g if r["len"] not in ("", "None", None)]
        summary.append(
            {
                "class": cls,
                "strategy": strategy,
                "T": round(statistics.mean(float(r["T"]) for r in g), 5),
                "n": round(statistics.mean(float(r["n"]) for r in g), 3),
                "len": round(statistics.mean(lens), 5) if lens else "",
                "m": round(
                    statistics.mean(
                        float(r["m"]) for r in g if r["m"] not in ("", "None", None)
                    ),
                    3,
                )
                if any(r["m"] not in ("", "None", None) for r in g)
                else "",
                "timeouts": sum(1 for r in g if r["timeout"] in ("True", True)),
            }
        )
    for strategy, ref in REFERENCE_SIMPLE.items():
        summary.append(
            {
                "class": "reference-simple",
                "strategy": strategy,
                "T": ref["T"],
                "n": ref["n"],
                "len": "",
                "m": "",
                "timeouts": "",
            }
        )
    base, _ = os.path.splitext(out_csv)
    with open(base + ".summary.csv", "w", newline="") as f:
        wtr = csv.DictWriter(f, fieldnames=SUMMARY_FIELDS)
        wtr.writeheader()
        for row in summary:
            wtr.writerow(row)
    return summary


def median_iterations(out_csv: str) -> dict:
    """Median iterations-to-first-feasible per strategy over the CSV."""
    with open(out_csv) as f:
        rows = list(csv.DictReader(f))
    per = {}
    for r in rows:
        per.setdefault(r["strategy"], []).append(float(r["n"]))
    return {s: statistics.median(v) for s, v in per.items()}


# -- render ----------------------------------------------------------------


def _svg_rect(x, y, ww, hh, fill, opacity=None) -> str:
    o = f' fill-opacity="{opacity:.3f}"' if opacity is not None else ""
    return f'<rect x="{x}" y="{y}" width="{ww}" height="{hh}" fill="{fill}"{o}/>'


def cmd_render(
    w: GridWorkspace,
    p: Optional[Plan] = None,
    heatmap: Optional[np.ndarray] = None,
    out_svg: str = "out.svg",
    scale: int = 4,
) -> str:
    """Layered SVG: obstacles gray, regions green with labels, optional
    heatmap overlay (opacity-mapped, run-length compressed), plan prefix
    red and suffix blue, initial-position marker."""
    from ltlplan.prediction import DimensionMismatch

    H, W = w.height, w.width
    if heatmap is not None and heatmap.shape != (H, W):
        raise DimensionMismatch(f"heatmap shape {heatmap.shape} != {(H, W)}")
    g = np.asarray(w.grid)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W * scale}" height="{H * scale}" '
        f'viewBox="0 0 {W * scale} {H * scale}">',
        _svg_rect(0, 0, W * scale, H * scale, "#ffffff"),
    ]
    # run-length blocks per row keep the file small
    def runs(mask_row):
        idx = np.flatnonzero(mask_row)
        if idx.size == 0:
            return
        start = prev = idx[0]
        for i in idx[1:]:
            if i != prev + 1:
                yield start, prev
                start = i
            prev = i
        yield start, prev

    for r in range(H):
        for c0, c1 in runs(g[r] == OBSTACLE):
            out.append(_svg_rect(c0 * scale, r * scale, (c1 - c0 + 1) * scale, scale, "#9e9e9e"))
    centers = {}
    for lab in range(1, w.m + 1):
        mask = g == 1 + lab
        if not mask.any():
            continue
        rr, cc = np.nonzero(mask)
        centers[lab] = (float(cc.mean()), float(rr.mean()))
        for r in np.unique(rr):
            for c0, c1 in runs(mask[r]):
                out.append(
                    _svg_rect(c0 * scale, r * scale, (c1 - c0 + 1) * scale, scale, "#66bb6a")
                )
    if heatmap is not None:
        hm = np.clip(np.asarray(heatmap, dtype=float), 0.0, 1.0)
        for r in range(H):
            for c0, c1 in runs(hm[r] > 0.0):
                op = float(hm[r, c0 : c1 + 1].mean()) * 0.6
                out.append(
                    _svg_rect(
                        c0 * scale, r * scale, (c1 - c0 + 1) * scale, scale, "#ff9800", op
                    )
                )
    for lab, (cx, cy) in centers.items():
        out.append(
            f'<text x="{cx * scale:.0f}" y="{cy * scale:.0f}" font-size="{4 * scale}" '
            f'text-anchor="middle" fill="#1b5e20">l{lab}</text>'
        )
    if p is not None:
        def poly(points, color):
            pts = " ".join(f"{pt.x * W * scale:.2f},{pt.y * H * scale:.2f}" for pt in points)
            return (
                f'<polyline points="{pts}" fill="none" stroke="{color}" '
                f'stroke-width="{scale / 2}"/>'
            )

        out.append(poly([pt for (pt, _) in p.prefix], "#e53935"))
        spts = [pt for (pt, _) in p.suffix]
        out.append(poly(spts + [spts[0]], "#1e88e5"))
    ix, iy = w.init.x * W * scale, w.init.y * H * scale
    out.append(f'<circle cx="{ix:.2f}" cy="{iy:.2f}" r="{scale}" fill="#000000"/>')
    out.append("</svg>")
    svg = "\n".join(out)
    with open(out_svg, "w") as f:
        f.write(svg)
    return svg
