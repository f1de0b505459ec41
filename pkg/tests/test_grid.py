import csv

import numpy as np
import pytest

from lowerexp.grid_baseline import GridSpec, grid_search
from lowerexp.problems import GaussianTailProblem, LogisticIMProblem, QuadraticProblem


class TestGridSpec:
    def test_inclusive_endpoints(self):
        axis = GridSpec([(-6, 6)], [100], 10).axes()[0]
        assert axis[0] == -6 and axis[-1] == 6 and axis.size == 100
        np.testing.assert_allclose(np.diff(axis), 12 / 99)

    def test_lexicographic_order(self):
        pts = GridSpec([(0, 1), (0, 2)], [2, 3], 1).points()
        np.testing.assert_array_equal(pts, [[0, 0], [0, 1], [0, 2], [1, 0], [1, 1], [1, 2]])

    def test_single_point_midpoint(self):
        np.testing.assert_array_equal(GridSpec([(-2, 4)], [1], 1).points(), [[1.0]])

    @pytest.mark.parametrize("spec, dps, expected", [
        (([(-3, 3), (0, 3), (-3, 3)], [15] * 3, 36), 64, 7_776_000),
        (([(-3, 3), (0, 3), (-3, 3), (-3, 3)], [10] * 4, 16), 81, 12_960_000),
        (([(-6, 6)], [100], 10), 1, 1000),
    ])
    def test_budget(self, spec, dps, expected):
        assert GridSpec(*spec).budget(dps) == expected

    @pytest.mark.parametrize("args", [([(0, 1)], [1, 2], 1), ([(0, 1)], [0], 1),
                                      ([(1, 0)], [2], 1), ([(0, 1)], [2], 0)])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            GridSpec(*args)


class TestGridSearch:
    def test_noiseless_quadratic(self):
        res = grid_search(QuadraticProblem([0.3, -0.7]), GridSpec([(-1, 1), (-1, 1)], [21, 21], 1),
                          rng=0)
        np.testing.assert_allclose(res.theta_best, [0.3, -0.7], atol=1e-12)
        assert res.value_best == pytest.approx(0.0, abs=1e-20)

    def test_max_mode(self):
        res = grid_search(QuadraticProblem([0.0]), GridSpec([(-1, 2)], [4], 1), mode="max", rng=0)
        assert res.theta_best[0] == 2.0 and res.index_best == 3

    def test_ties_go_to_first_index(self):
        res = grid_search(QuadraticProblem([0.0]), GridSpec([(-1, 1)], [2], 1), rng=0)
        assert res.index_best == 0

    def test_chunk_invariance(self):
        spec = GridSpec([(-6, 6)], [100], 10)
        a = grid_search(GaussianTailProblem(), spec, rng=5, chunk=7)
        b = grid_search(GaussianTailProblem(), spec, rng=5, chunk=256)
        np.testing.assert_array_equal(a.values, b.values)
        assert a.draws == 1000

    def test_non_crn_problem(self):
        prob = LogisticIMProblem.simulated(1, np.random.default_rng(0), contour_N=1)
        prob.supports_crn = False
        spec = GridSpec([(-3, 3), (0, 3), (-3, 3)], [2, 2, 2], 2)
        res = grid_search(prob, spec, mode="max", rng=1)
        assert res.values.shape == (8,) and np.all((res.values >= 0) & (res.values <= 1))
        assert res.draws == 8 * 2 * 64

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            grid_search(GaussianTailProblem(), GridSpec([(0, 1), (0, 1)], [2, 2], 1))

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            grid_search(GaussianTailProblem(), GridSpec([(0, 1)], [2], 1), mode="median")

    def test_csv(self, tmp_path):
        res = grid_search(GaussianTailProblem(), GridSpec([(-1, 1)], [3], 5), rng=2)
        res.write_csv(tmp_path / "grid.csv")
        rows = list(csv.reader((tmp_path / "grid.csv").open()))
        assert rows[0] == ["grid_index", "theta_1", "m_hat"]
        assert [float(r[2]) for r in rows[1:]] == res.values.tolist()
        assert res.all_values[(0.0,)] == res.values[1]
