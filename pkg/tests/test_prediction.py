import numpy as np
import pytest

from conftest import case_study_workspace, fig_nba, grid_workspace
from ltlplan.buchi import compute_rho, prune_infeasible
from ltlplan.ltl import ltl_to_nba, parse_ltl
from ltlplan.prediction import (
    DimensionMismatch,
    FormatError,
    NoRealizableRun,
    Prediction,
    load_prediction,
    oracle_predict,
    save_prediction,
)


def simple_case():
    w = grid_workspace(["........", "........", "........", ".......1"], (0.05, 0.1))
    b = prune_infeasible(ltl_to_nba(parse_ltl("<> l1")), 1)
    return w, b, compute_rho(b)


class TestOracle:
    def test_ridge_along_realized_path(self):
        w, b, rho = simple_case()
        pred = oracle_predict(w, b, rho, 0.5)
        ones = {tuple(c) for c in np.argwhere(pred.heatmap == 1.0)}
        start = w.cell_of(w.init)
        assert start in ones and (3, 7) in ones
        # the realized leg is a grid-shortest path, so it has as many cells
        # as any other shortest path between the endpoints
        assert len(ones) == len(w.grid_path_to_cell(start, (3, 7)))

    def test_p_two_tier(self):
        w, b, rho = simple_case()
        pred = oracle_predict(w, b, rho, 0.5)
        assert set(np.unique(pred.p)) <= {0.05, 1.0}
        assert pred.p[b.init] == 1.0

    def test_obstacle_cells_zero(self):
        w = grid_workspace(["........", "..##....", "........", ".......1"], (0.05, 0.1))
        b = prune_infeasible(ltl_to_nba(parse_ltl("<> l1")), 1)
        pred = oracle_predict(w, b, compute_rho(b), 0.5)
        assert pred.heatmap[1, 2] == 0.0 and pred.heatmap[1, 3] == 0.0

    def test_exponential_decay_from_ridge(self):
        w, b, rho = simple_case()
        pred = oracle_predict(w, b, rho, 0.5)
        ridge = np.argwhere(pred.heatmap == 1.0)
        for r in range(w.height):
            for c in range(w.width):
                d = np.hypot(ridge[:, 0] - r, ridge[:, 1] - c).min()
                assert pred.heatmap[r, c] == pytest.approx(np.exp(-d / 3.0), abs=1e-9)

    def test_case_study_prefers_l2_first_state(self):
        w = case_study_workspace()
        b = prune_infeasible(fig_nba(), 3)
        pred = oracle_predict(w, b, compute_rho(b), 0.5)
        # state 2 is entered after l2, which lies near the start; state 1
        # belongs to the longer l3-first order
        assert pred.p[2] == 1.0 and pred.p[1] == 0.05

    def test_deterministic(self):
        w = case_study_workspace()
        b = prune_infeasible(fig_nba(), 3)
        rho = compute_rho(b)
        a = oracle_predict(w, b, rho, 0.5)
        c = oracle_predict(w, b, rho, 0.5)
        assert np.array_equal(a.p, c.p) and np.array_equal(a.heatmap, c.heatmap)

    def test_unrealizable_raises(self):
        # region fully walled off, so no leg is reachable
        w = grid_workspace(["......", "..###.", "..#1#.", "..###."], (0.1, 0.1))
        b = prune_infeasible(ltl_to_nba(parse_ltl("<> l1")), 1)
        with pytest.raises(NoRealizableRun):
            oracle_predict(w, b, compute_rho(b), 0.5)


class TestRoundTrip:
    def fixture_pred(self, w):
        rng = np.random.default_rng(0)
        return Prediction(p=np.array([0.999, 0.486, 0.902, 0.994, 0.997]),
                          heatmap=rng.random((w.height, w.width)))

    def test_json_roundtrip(self, tmp_path):
        w = case_study_workspace()
        pred = self.fixture_pred(w)
        f = tmp_path / "p.json"
        save_prediction(pred, f)
        again = load_prediction(f, n_states=5, grid=(200, 200))
        assert np.allclose(again.p, pred.p, atol=1e-9)
        assert np.allclose(again.heatmap, pred.heatmap, atol=1e-9)

    def test_binary_roundtrip_bit_exact(self, tmp_path):
        w = case_study_workspace()
        pred = self.fixture_pred(w)
        f = tmp_path / "p.nntl"
        save_prediction(pred, f, binary=True)
        again = load_prediction(f, n_states=5, grid=(200, 200))
        assert np.array_equal(np.asarray(pred.p, np.float32), np.asarray(again.p, np.float32))
        assert np.array_equal(np.asarray(pred.heatmap, np.float32),
                              np.asarray(again.heatmap, np.float32))

    def test_wrong_grid_dimension(self, tmp_path):
        pred = Prediction(p=np.full(5, 0.5), heatmap=np.full((100, 100), 0.5))
        f = tmp_path / "p.json"
        save_prediction(pred, f)
        with pytest.raises(DimensionMismatch):
            load_prediction(f, n_states=5, grid=(200, 200))

    def test_truncated_binary(self, tmp_path):
        w = case_study_workspace()
        pred = self.fixture_pred(w)
        f = tmp_path / "p.nntl"
        save_prediction(pred, f, binary=True)
        data = f.read_bytes()
        (tmp_path / "t.nntl").write_bytes(data[: len(data) // 2])
        with pytest.raises(FormatError):
            load_prediction(tmp_path / "t.nntl")

    def test_out_of_range_rejected(self):
        with pytest.raises(DimensionMismatch):
            Prediction(p=np.array([1.5]), heatmap=np.zeros((2, 2)))
