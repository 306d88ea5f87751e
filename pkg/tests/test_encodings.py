import json

import numpy as np
import pytest

from conftest import fig_nba, grid_workspace
from ltlplan.buchi import compute_rho, prune_infeasible
from ltlplan.encodings import (
    HeteroGraph,
    encode_expert,
    encode_nba,
    encode_workspace,
    export_dataset,
    read_bin,
)
from ltlplan.ltl import ltl_to_nba, parse_ltl
from ltlplan.planner import Plan
from ltlplan.workspace import Point


class TestWorkspaceTensor:
    def test_channels_and_init_marker(self):
        w = grid_workspace(["..#.", ".1..", "..2.", "...."], (0.3, 0.9))
        t = encode_workspace(w)
        assert t.shape == (3, 4, 4) and t.dtype == np.float32
        assert t[0, 0, 2] == 1.0  # obstacle
        r, c = w.cell_of(w.init)
        assert t[0, r, c] == -1.0
        assert t[1, 1, 1] == 1.0 and t[1].sum() == 1.0
        assert t[2, 2, 2] == 1.0 and t[2].sum() == 1.0
        # free cells stay zero in channel 0
        assert t[0, 3, 3] == 0.0

    def test_init_inside_region_keeps_both_marks(self):
        # init placed inside region l1: channel 0 carries -1, channel 1 the 1
        w = grid_workspace(["1...", "....", "....", "...."], (0.125, 0.125))
        assert w.cell_of(w.init) == (0, 0)
        t = encode_workspace(w)
        assert t[0, 0, 0] == -1.0
        assert t[1, 0, 0] == 1.0


class TestNbaGraph:
    def setup_method(self):
        self.b = prune_infeasible(fig_nba(), 3)
        self.rho = compute_rho(self.b)
        self.g = encode_nba(self.b, self.rho, 3)

    def test_state_features(self):
        sf = self.g.state_features
        assert sf.shape == (5, 3)
        assert sf[0, 0] == 1.0 and sf[:, 0].sum() == 1.0
        # only state 4 is feasible accepting
        assert list(sf[:, 1]) == [0.0, 0.0, 0.0, 0.0, 1.0]
        # normalized hop distances to state 4: [3,2,2,1,0] / 3
        assert np.allclose(sf[:, 2], np.array([3, 2, 2, 1, 0]) / 3.0)

    def test_guard_vectors(self):
        # fig edges are single-disjunct after pruning, so one edge-node each
        assert self.g.edge_features.shape == (11, 3)
        by_pair = {}
        for i, (s, d) in enumerate(
            (s, d) for (s, gg, d) in self.b.edges for _ in gg.disjuncts
        ):
            by_pair.setdefault((s, d), []).append(i)
        # guard not-l1 and l3 on edge 0 -> 1
        (i,) = by_pair[(0, 1)]
        assert list(self.g.edge_features[i]) == [-1.0, 0.0, 1.0]
        # guard true on edge 2 -> 2
        (i,) = by_pair[(2, 2)]
        assert list(self.g.edge_features[i]) == [0.0, 0.0, 0.0]

    def test_node_count_and_pooling(self):
        k = self.g.edge_features.shape[0]
        assert self.g.node_count == self.b.n + k + 1
        assert self.g.pooling == self.g.node_count - 1
        links = set(self.g.links)
        # every non-pooling node has a self-loop and feeds the pooling node
        for i in range(self.g.pooling):
            assert (i, i) in links
            assert (i, self.g.pooling) in links
        assert (self.g.pooling, self.g.pooling) not in links

    def test_edge_node_wiring(self):
        n = self.b.n
        links = set(self.g.links)
        idx = n
        for (s, gg, d) in self.b.edges:
            for _ in gg.disjuncts:
                assert (s, idx) in links and (idx, d) in links
                idx += 1

    def test_disjunction_splits(self):
        from ltlplan.buchi import Guard, Nba

        guard = Guard.parse("l1 || l2")
        assert len(guard.disjuncts) == 2
        b = Nba(
            n=2,
            init=0,
            accepting=frozenset({1}),
            edges=((0, Guard.true(), 0), (0, guard, 1), (1, Guard.true(), 1)),
            n_aps=2,
        )
        g = encode_nba(b, compute_rho(b), 2)
        # one edge-node per disjunct: 1 + 2 + 1
        assert g.edge_features.shape[0] == 4
        rows = {tuple(r) for r in g.edge_features}
        assert (1.0, 0.0) in rows and (0.0, 1.0) in rows

    def test_json_roundtrip(self):
        d = json.loads(json.dumps(self.g.to_json_dict()))
        g2 = HeteroGraph.from_json_dict(d)
        assert np.array_equal(g2.state_features, self.g.state_features)
        assert np.array_equal(g2.edge_features, self.g.edge_features)
        assert list(g2.links) == [tuple(l) for l in self.g.links]
        assert g2.pooling == self.g.pooling and g2.m == self.g.m


class TestExpertLabels:
    def test_path_band_and_states(self):
        w = grid_workspace(
            ["........", "........", "........", ".......1"], (0.05, 0.1)
        )
        p = Plan(
            prefix=((Point(0.05, 0.1), 0), (Point(0.9375, 0.875), 1)),
            suffix=((Point(0.9375, 0.875), 1),),
            J=1.0,
            Jpre=1.0,
            Jsuf=0.0,
        )
        labels = encode_expert(p, w, 2)
        mask = labels["path_mask"]
        assert mask.shape == (4, 8) and set(np.unique(mask)) <= {0, 1}
        ordered, extra = w.supercover(Point(0.05, 0.1), Point(0.9375, 0.875))
        for (r, c) in list(ordered) + list(extra):
            assert mask[r, c] == 1
            # 3-wide band: 8-neighborhood of every touched cell is marked
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < 4 and 0 <= cc < 8:
                        assert mask[rr, cc] == 1
        assert list(labels["state_mask"]) == [1, 1]

    def test_suffix_cycle_closes(self):
        w = grid_workspace(["1......2"], (0.05, 0.5))
        a, b = Point(0.0625, 0.5), Point(0.9375, 0.5)
        p = Plan(
            prefix=((Point(0.05, 0.5), 0), (a, 1)),
            suffix=((a, 1), (b, 1)),
            J=0.5,
            Jpre=0.0,
            Jsuf=1.0,
        )
        mask = encode_expert(p, w, 2)["path_mask"]
        # the return leg b -> a is rasterized too, so the whole row is hit
        assert mask[0].all()


class TestExport:
    def make_instances(self):
        w = grid_workspace(
            ["........", "........", "........", ".......1"], (0.05, 0.1)
        )
        good = ("inst_ok", w, prune_infeasible(ltl_to_nba(parse_ltl("<> l1")), 1))
        bad = ("inst_bad", w, ltl_to_nba(parse_ltl("l1 && !l1")))
        return [good, bad]

    def test_export_layout_and_skip(self, tmp_path):
        out = tmp_path / "ds"
        manifest = export_dataset(self.make_instances(), str(out))
        entries = {e["id"]: e for e in manifest["instances"]}
        assert entries["inst_ok"]["expert_cost"] > 0.0
        assert entries["inst_bad"]["skipped"] == "unsatisfiable"
        d = out / "inst_ok"
        for name in (
            "workspace.json",
            "nba.json",
            "tensor.bin",
            "tensor.meta.json",
            "graph.json",
            "labels.bin",
            "labels.meta.json",
        ):
            assert (d / name).exists()
        assert not (out / "inst_bad").exists()
        on_disk = json.loads((out / "manifest.json").read_text())
        assert on_disk == manifest

    def test_binary_tensors_roundtrip_bit_exact(self, tmp_path):
        out = tmp_path / "ds"
        export_dataset(self.make_instances(), str(out))
        d = out / "inst_ok"
        tensors = read_bin(str(d / "tensor.bin"), str(d / "tensor.meta.json"))
        w = self.make_instances()[0][1]
        assert np.array_equal(tensors["tensor"], encode_workspace(w))
        labels = read_bin(str(d / "labels.bin"), str(d / "labels.meta.json"))
        assert labels["path_mask"].shape == (4, 8)
        assert labels["state_mask"].ndim == 1
        assert set(np.unique(labels["path_mask"])) <= {0, 1}
