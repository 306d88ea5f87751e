"""Tensor and graph encodings of planning instances, expert-path labels,
and dataset export for training a learned sampling heuristic.

The workspace becomes an (m+1)-channel grid tensor; the automaton becomes
a heterogeneous graph with one node per state, one node per guard
disjunct, and a pooling node every other node points at.  Expert plans
are rasterized into a binary path mask plus a visited-state mask.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from ltlplan.buchi import (
    Nba,
    NoFeasibleAccepting,
    compute_rho,
    feasible_accepting,
    prune_infeasible,
)
from ltlplan.planner import Plan, PlannerError, PlannerConfig, plan as run_planner
from ltlplan.workspace import OBSTACLE, GridWorkspace


class EncodingError(Exception):
    pass


def encode_workspace(w: GridWorkspace) -> np.ndarray:
    """(m+1, H, W) float32 tensor: channel 0 holds -1 at the initial cell,
    1 on obstacles, 0 elsewhere; channel i is the Region(i) indicator.

    The init marker wins over channel 0's free-space zero even when the
    initial point lies inside a labeled region (that region's channel
    still carries the 1).
    """
    g = np.asarray(w.grid)
    t = np.zeros((w.m + 1, w.height, w.width), dtype=np.float32)
    t[0][g == OBSTACLE] = 1.0
    r, c = w.cell_of(w.init)
    t[0, r, c] = -1.0
    for i in range(1, w.m + 1):
        t[i] = (g == 1 + i).astype(np.float32)
    return t


@dataclass(frozen=True)
class HeteroGraph:
    """State nodes, one edge-node per guard disjunct, and a pooling node.

    Node ids: states 0..n-1, edge-nodes n..n+k-1, pooling last.  Links are
    directed (src, dst) pairs: state -> edge-node -> state per disjunct,
    a self-loop on every non-pooling node, and every non-pooling node into
    the pooling node.
    """

    state_features: np.ndarray  # n x 3 float32
    edge_features: np.ndarray  # k x m float32, entries in {-1, 0, 1}
    links: list  # [(src, dst)] over the combined id space
    pooling: int
    m: int

    @property
    def node_count(self) -> int:
        return self.pooling + 1

    def to_json_dict(self) -> dict:
        return {
            "state_features": self.state_features.tolist(),
            "edge_features": self.edge_features.tolist(),
            "links": [[int(a), int(b)] for (a, b) in self.links],
            "pooling": self.pooling,
            "m": self.m,
        }

    @staticmethod
    def from_json_dict(d: dict) -> "HeteroGraph":
        return HeteroGraph(
            state_features=np.array(d["state_features"], dtype=np.float32).reshape(-1, 3),
            edge_features=np.array(d["edge_features"], dtype=np.float32).reshape(
                -1, d["m"]
            ),
            links=[tuple(l) for l in d["links"]],
            pooling=int(d["pooling"]),
            m=int(d["m"]),
        )


def encode_nba(b: Nba, rho: np.ndarray, m: int) -> HeteroGraph:
    """Heterogeneous graph over a pruned automaton and its distance table.

    State features: [is-initial, is-feasible-accepting, normalized hop
    distance to the nearest feasible accepting state].  Edge features per
    disjunct: +1 for a positive literal, -1 negated, 0 absent; guards with
    several disjuncts become parallel edge-nodes since a single vector
    cannot express disjunction.
    """
    try:
        feas = feasible_accepting(b, rho)
    except NoFeasibleAccepting:
        feas = frozenset()
    dist = np.full(b.n, np.inf)
    for q in range(b.n):
        for qf in feas:
            d = 0.0 if q == qf else float(rho[q, qf])
            dist[q] = min(dist[q], d)
    finite = dist[np.isfinite(dist)]
    dmax = float(finite.max()) if finite.size else 0.0
    v3 = np.ones(b.n)
    if dmax > 0.0:
        v3 = np.where(np.isfinite(dist), dist / dmax, 1.0)
    elif feas:
        v3 = np.where(np.isfinite(dist), 0.0, 1.0)
    state_feats = np.zeros((b.n, 3), dtype=np.float32)
    state_feats[b.init, 0] = 1.0
    for q in feas:
        state_feats[q, 1] = 1.0
    state_feats[:, 2] = v3

    edge_feats = []
    links = []
    next_id = b.n
    for (s, g, d) in b.edges:
        for disj in sorted(g.disjuncts, key=lambda x: sorted(x)):
            e = np.zeros(m, dtype=np.float32)
            for (i, pos) in disj:
                e[i - 1] = 1.0 if pos else -1.0
            edge_feats.append(e)
            links.append((s, next_id))
            links.append((next_id, d))
            next_id += 1
    pooling = next_id
    for i in range(pooling):
        links.append((i, i))
    for i in range(pooling):
        links.append((i, pooling))
    return HeteroGraph(
        state_features=state_feats,
        edge_features=np.array(edge_feats, dtype=np.float32).reshape(-1, m),
        links=links,
        pooling=pooling,
        m=m,
    )


def encode_expert(p: Plan, w: GridWorkspace, n_states: int) -> dict:
    """Binary training targets from an expert plan.

    path_mask marks every cell the plan polyline touches plus 8-neighbors;
    state_mask marks automaton states visited along prefix and suffix.
    The suffix closes back to its first vertex.
    """
    mask = np.zeros((w.height, w.width), dtype=np.int32)

    def mark(a, b):
        ordered, extra = w.supercover(a, b)
        for (r, c) in ordered:
            mask[r, c] = 1
        for (r, c) in extra:
            mask[r, c] = 1

    pts = [pt for (pt, _) in p.prefix]
    for a, b in zip(pts, pts[1:]):
        mark(a, b)
    spts = [pt for (pt, _) in p.suffix]
    if len(spts) == 1:
        mark(spts[0], spts[0])
    else:
        cyc = spts + [spts[0]]
        for a, b in zip(cyc, cyc[1:]):
            mark(a, b)
    from scipy.ndimage import binary_dilation

    mask = binary_dilation(mask, structure=np.ones((3, 3), dtype=bool)).astype(np.int32)

    state_mask = np.zeros(n_states, dtype=np.int32)
    for (_, q) in p.prefix:
        state_mask[q] = 1
    for (_, q) in p.suffix:
        state_mask[q] = 1
    return {"path_mask": mask, "state_mask": state_mask}


@dataclass
class ExpertConfig:
    """Expert-plan settings for dataset export."""

    iterations: int = 10000
    seed: int = 0
    lam: float = 0.5


class SkippedUnsatisfiable(Exception):
    """Instance whose task admits no feasible accepting run."""


def _write_bin(path: str, meta_path: str, arrays: list[tuple[str, np.ndarray]]) -> None:
    # little-endian f4/i4 payload with a sidecar describing the layout
    offset = 0
    metas = []
    with open(path, "wb") as f:
        for (name, a) in arrays:
            dt = "<f4" if a.dtype.kind == "f" else "<i4"
            buf = np.ascontiguousarray(a).astype(dt).tobytes()
            f.write(buf)
            metas.append(
                {"name": name, "shape": list(a.shape), "dtype": dt, "offset": offset}
            )
            offset += len(buf)
    with open(meta_path, "w") as f:
        json.dump({"arrays": metas}, f, separators=(",", ":"))


def read_bin(path: str, meta_path: str) -> dict:
    """Arrays back from a binary payload plus sidecar."""
    with open(meta_path) as f:
        meta = json.load(f)
    raw = open(path, "rb").read()
    out = {}
    for a in meta["arrays"]:
        count = int(np.prod(a["shape"])) if a["shape"] else 1
        arr = np.frombuffer(
            raw, dtype=np.dtype(a["dtype"]), count=count, offset=a["offset"]
        )
        out[a["name"]] = arr.reshape(a["shape"])
    return out


def export_dataset(instances, out_dir: str, expert_cfg: ExpertConfig = None) -> dict:
    """Write one directory per instance with workspace/NBA JSON, encoded
    tensors, the automaton graph, and expert labels; returns the manifest.

    instances: iterable of (instance_id, GridWorkspace, Nba).  Expert
    plans come from the biased strategy at expert_cfg.iterations; tasks
    without a feasible accepting state (or where no plan is found) are
    recorded as skipped rather than aborting the batch.
    """
    cfg = expert_cfg or ExpertConfig()
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for (iid, w, nba) in instances:
        entry = {"id": str(iid), "seed": cfg.seed}
        try:
            pruned = prune_infeasible(nba, w.m)
            rho = compute_rho(pruned)
            try:
                feasible_accepting(pruned, rho)
            except NoFeasibleAccepting as e:
                raise SkippedUnsatisfiable(str(e))
            pcfg = PlannerConfig(
                strategy="biased", max_iters=cfg.iterations, seed=cfg.seed, lam=cfg.lam
            )
            try:
                expert, _ = run_planner(w, nba, pcfg)
            except PlannerError as e:
                raise SkippedUnsatisfiable(f"no expert plan: {e}")
            d = os.path.join(out_dir, str(iid))
            os.makedirs(d, exist_ok=True)
            w.save(os.path.join(d, "workspace.json"))
            nba.save(os.path.join(d, "nba.json"))
            tensor = encode_workspace(w)
            _write_bin(
                os.path.join(d, "tensor.bin"),
                os.path.join(d, "tensor.meta.json"),
                [("tensor", tensor)],
            )
            graph = encode_nba(pruned, rho, w.m)
            with open(os.path.join(d, "graph.json"), "w") as f:
                json.dump(graph.to_json_dict(), f, separators=(",", ":"))
            labels = encode_expert(expert, w, nba.n)
            _write_bin(
                os.path.join(d, "labels.bin"),
                os.path.join(d, "labels.meta.json"),
                [("path_mask", labels["path_mask"]), ("state_mask", labels["state_mask"])],
            )
            entry["expert_cost"] = expert.J
        except SkippedUnsatisfiable as e:
            entry["skipped"] = "unsatisfiable"
            entry["reason"] = str(e)
        entries.append(entry)
    manifest = {"instances": entries}
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=1)
    return manifest
