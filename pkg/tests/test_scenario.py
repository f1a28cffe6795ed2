import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import lower_tail, upper_tail
from scenario_imdp.partition import Partition, box_polytope
from scenario_imdp.scenario import (IntervalTable, count_samples, count_samples_direct,
                                    frequentist_row, interval_table, lower_bounds,
                                    scaling_factors, scenario_program_oracle, solve_lower_bound,
                                    solve_upper_bound, upper_bounds)

REFERENCE = [(66, 0.174, 0.538), (82, 0.063, 0.363), (58, 0.239, 0.617)]


@pytest.mark.parametrize("n_out, lo, hi", REFERENCE)
def test_reference_intervals(n_out, lo, hi):
    assert abs(solve_lower_bound(100, 0.01, n_out) - lo) <= 1e-3
    assert abs(solve_upper_bound(100, 0.01, n_out) - hi) <= 1e-3


def test_special_cases():
    assert solve_lower_bound(50, 0.1, 50) == 0.0
    assert solve_upper_bound(50, 0.1, 0) == 1.0


@pytest.mark.parametrize("args", [(0, 0.1, 0), (10, 0.0, 1), (10, 1.0, 1), (10, 0.1, 11),
                                  (10, 0.1, -1), (10.5, 0.1, 1)])
def test_invalid_arguments(args):
    with pytest.raises(ValueError):
        solve_lower_bound(*args)


@pytest.mark.parametrize("N", [25, 100, 400, 1600, 6400])
def test_residuals_against_log_space_sums(N):
    beta = 0.01
    target = beta / (2 * N)
    table = interval_table(N, beta)
    for k in range(N + 1):
        if k < N:
            assert abs(lower_tail(N, k, table.lower[k]) - target) <= 1e-7 * max(1, target)
            assert abs(lower_tail(N, k, table.lower[k]) / target - 1) <= 1e-6
        if k > 0:
            assert abs(upper_tail(N, k, table.upper[k]) - target) <= 1e-7
            assert abs(upper_tail(N, k, table.upper[k]) / target - 1) <= 1e-6


@pytest.mark.parametrize("N", [25, 400, 3200])
def test_table_invariants(N):
    t = interval_table(N, 0.01)
    k = np.arange(N + 1)
    assert np.all(np.diff(t.lower) <= 0) and np.all(np.diff(t.upper) <= 0)
    assert np.all((0 <= t.lower) & (t.lower <= t.upper) & (t.upper <= 1))
    assert t.lower[N] == 0 and t.upper[0] == 1
    freq = (N - k) / N
    assert np.all((t.lower <= freq) & (freq <= t.upper))


def test_table_save_load_csv(tmp_path):
    t = IntervalTable.build(50, 0.05)
    t.save(tmp_path / "t.npz")
    back = IntervalTable.load(tmp_path / "t.npz")
    assert back.N == 50 and back.beta == 0.05
    assert np.array_equal(back.lower, t.lower) and np.array_equal(back.upper, t.upper)
    t.to_csv(tmp_path / "t.csv")
    rows = np.loadtxt(tmp_path / "t.csv", delimiter=",")
    assert rows.shape == (51, 3) and np.allclose(rows[:, 1], t.lower, atol=1e-12)


def test_vectorized_matches_scalar():
    k = np.array([1, 7, 30, 49])
    assert np.allclose(lower_bounds(50, 0.05, k), [solve_lower_bound(50, 0.05, int(i)) for i in k])
    assert np.allclose(upper_bounds(50, 0.05, k), [solve_upper_bound(50, 0.05, int(i)) for i in k])


def test_counts_reference_samples(samples_1d):
    part = Partition([-3.0], [2.0], [3])
    c = count_samples(part, part.centers(), samples_1d)
    succ, cnt = c.row(1)  # target 0, the middle region
    assert dict(zip(succ.tolist(), cnt.tolist())) == {0: 34, 1: 18, 2: 42, 3: 6}
    row = frequentist_row(c, 1)
    assert row[0] == 0.34 and np.isclose(sum(row.values()), 1.0)
    table = interval_table(100, 0.01)
    assert np.allclose(table.interval(100 - 34), (0.174, 0.538), atol=1e-3)


def test_count_simple_cases():
    part = Partition([-1.0], [2.0], [1])
    c = count_samples_direct(part, [[0.0]], np.array([[-2.0], [-0.5], [0.5], [2.0]]))
    assert dict(zip(*map(np.ndarray.tolist, c.row(0)))) == {0: 2, 1: 2}
    grid = Partition([0, 0], [1, 1], [3, 3])
    c = count_samples(grid, grid.centers(), np.zeros((7, 2)))
    for j in range(9):
        succ, cnt = c.row(j)
        assert succ.tolist() == [j] and cnt.tolist() == [7]
    with pytest.raises(ValueError):
        count_samples(grid, grid.centers(), np.zeros((0, 2)))
    with pytest.raises(ValueError):
        count_samples(grid, grid.centers(), np.zeros((3, 3)))


def test_frequentist_row_halves():
    part = Partition([0.0], [1.0], [2])
    c = count_samples_direct(part, [[0.5]], np.array([[0.0], [0.1], [1.0], [1.1]]))
    assert frequentist_row(c, 0) == {0: 0.5, 1: 0.5}


@pytest.mark.parametrize("seed", range(5))
def test_fast_counting_matches_direct(seed, bas1):
    rng = np.random.default_rng(seed)
    part = bas1.partition
    W = rng.multivariate_normal([0, 0], [[0.02, 0], [0, 0.1]], size=500)
    fast = count_samples(part, part.centers(), W)
    slow = count_samples_direct(part, part.centers(), W)
    assert np.array_equal(fast.indptr, slow.indptr)
    assert np.array_equal(fast.successors, slow.successors)
    assert np.array_equal(fast.counts, slow.counts)
    sums = np.add.reduceat(fast.counts, fast.indptr[:-1])
    assert np.all(sums == 500)


def test_grid_aligned_samples_count_like_direct():
    # samples exactly on half-cell offsets put successors on grid lines
    part = Partition([0, 0], [1, 1], [4, 4])
    W = np.array([[0.5, 0.5], [-0.5, 0.0], [0.5, -0.5], [1.5, 1.5], [0.25, 0.0]])
    fast = count_samples(part, part.centers(), W)
    slow = count_samples_direct(part, part.centers(), W)
    assert np.array_equal(fast.successors, slow.successors)
    assert np.array_equal(fast.counts, slow.counts)


REF_POINTS = [0.73, -1.39, 1.15, -0.41, 0.2, 1.75, -0.06, -0.65, -1.61, 1.33]


def test_scenario_program_reference_instance():
    R = box_polytope([-1.0], [1.0])
    pts = np.array(REF_POINTS)[:, None]
    assert abs(scenario_program_oracle(R, pts, 5) - 0.73) <= 0.01
    assert abs(scenario_program_oracle(R, pts, 4) - 1.15) <= 0.01
    with pytest.raises(ValueError):
        scenario_program_oracle(R, pts, 10)


def test_scenario_program_all_at_center():
    R = box_polytope([-1.0, 2.0], [1.0, 4.0])
    assert scenario_program_oracle(R, np.tile([0.0, 3.0], (6, 1)), 3) == 0.0


def test_scaling_factors_match_linprog():
    from scipy.optimize import linprog
    rng = np.random.default_rng(3)
    R = box_polytope([-1.0, 0.0], [2.0, 1.0])
    pts = rng.normal(0.5, 1.5, size=(6, 2))
    Mh = R.M @ R.center
    for x, lam in zip(pts, scaling_factors(R, pts)):
        # min lam s.t. M x <= lam (b - M h) + M h, lam >= 0
        res = linprog([1.0], A_ub=-(R.b - Mh)[:, None], b_ub=Mh - R.M @ x,
                      bounds=[(0, None)], method="highs")
        assert np.isclose(res.fun, lam, atol=1e-9)


def program_instance(rng, dim):
    lo = rng.uniform(-2, 0, dim)
    hi = lo + rng.uniform(0.5, 3, dim)
    R = box_polytope(lo, hi)
    N = int(rng.integers(2, 40))
    pts = rng.normal((lo + hi) / 2, rng.uniform(0.3, 2.0), size=(N, dim))
    return R, lo, hi, pts


def test_scenario_program_brackets_counted_removals():
    rng = np.random.default_rng(2024)
    checked = 0
    for trial in range(1000):
        dim = 1 + trial % 2
        R, lo, hi, pts = program_instance(rng, dim)
        part = Partition(lo, hi - lo, np.ones(dim, dtype=int))
        c = count_samples_direct(part, [np.zeros(dim)], pts)
        succ, cnt = c.row(0)
        n_in = int(cnt[succ == 0].sum())
        n_out = len(pts) - n_in
        if not 0 < n_out < len(pts):
            continue
        checked += 1
        assert scenario_program_oracle(R, pts, n_out) <= 1.0
        assert scenario_program_oracle(R, pts, n_out - 1) > 1.0
    assert checked > 500


@settings(max_examples=200, deadline=None)
@given(N=st.integers(1, 300), beta=st.floats(1e-4, 0.5), data=st.data())
def test_bounds_bracket_point_estimate(N, beta, data):
    k = data.draw(st.integers(0, N))
    lo, hi = solve_lower_bound(N, beta, k), solve_upper_bound(N, beta, k)
    assert 0 <= lo <= (N - k) / N <= hi <= 1


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(-12, 12), st.integers(-12, 12)), min_size=1, max_size=20))
def test_fast_counting_on_quarter_cell_offsets(offsets):
    part = Partition([-1.0, 2.0], [0.2, 0.5], [5, 4])
    W = np.array(offsets, dtype=float) * [0.05, 0.125]
    fast = count_samples(part, part.centers(), W)
    slow = count_samples_direct(part, part.centers(), W)
    assert np.array_equal(fast.indptr, slow.indptr)
    assert np.array_equal(fast.successors, slow.successors)
    assert np.array_equal(fast.counts, slow.counts)
