import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenario_imdp.partition import Partition, box_polytope, scaled_polytope


def line10():
    return Partition([0.0], [1.0], [10])


def test_region_index_1d():
    p = line10()
    assert p.region_index([3.5]) == 3  # fourth cell
    assert p.region_index([12.0]) == p.absorbing == 10
    assert p.region_index([-0.01]) == p.absorbing


def test_half_open_faces():
    p = line10()
    assert p.region_index([3.0]) == 3
    assert p.region_index([10.0]) == 9  # upper face belongs to the last cell
    assert p.region_index([0.0]) == 0


def test_region_index_batch_and_errors():
    p = line10()
    assert np.array_equal(p.region_index([[0.5], [9.5], [11.0]]), [0, 9, 10])
    with pytest.raises(ValueError):
        p.region_index([np.nan])


def test_bas_grid_point(bas1):
    part = bas1.partition
    i = part.region_index([21.0, 38.0])
    lo, hi = part.region_bounds(i)
    # 21.0 is interior to the middle zone cell [20.9, 21.1]; 38.0 is a grid line
    assert np.allclose(lo, [20.9, 38.0]) and np.allclose(hi, [21.1, 38.2])
    assert np.allclose(part.centers(i), [21.0, 38.1])
    assert i == 9 * 20 + 10


def test_bas_first_cell(bas1):
    lo, hi = bas1.partition.region_bounds(0)
    assert np.allclose(lo, [19.1, 36.0]) and np.allclose(hi, [19.3, 36.2])
    assert np.allclose(bas1.partition.upper, [22.9, 40.0])


def test_region_polytope():
    poly = line10().region_polytope(0)
    assert np.array_equal(poly.M, [[1.0], [-1.0]]) and np.array_equal(poly.b, [1.0, 0.0])
    p2 = Partition([0, 0], [1, 1], [3, 3])
    poly = p2.region_polytope(0)
    assert poly.M.shape == (4, 2)
    assert {tuple(v) for v in poly.vertices} == {(0, 0), (1, 0), (0, 1), (1, 1)}
    with pytest.raises(IndexError):
        p2.region_polytope(p2.absorbing)


def test_scaled_polytope_examples():
    box = box_polytope([-1.0], [1.0])
    assert np.allclose(scaled_polytope(box, 1.0).b, box.b)
    assert np.allclose(scaled_polytope(box, 1.2).b, [1.2, 1.2])
    assert np.allclose(scaled_polytope(box_polytope([0.0], [2.0]), 2.0).b, [3.0, 1.0])
    with pytest.raises(ValueError):
        scaled_polytope(box, -0.1)


def test_regions_in_box(bas1):
    part = bas1.partition
    goal = part.regions_in_box([20.9, -np.inf], [21.1, np.inf])
    assert goal.size == 20
    assert np.allclose(part.centers(goal)[:, 0], 21.0)
    with pytest.raises(ValueError):
        part.regions_in_box([20.95, 36.0], [21.1, 40.0])


def test_volumes_add_up(bas1):
    part = bas1.partition
    lo, hi = part.region_bounds()
    assert np.isclose(np.prod(hi - lo, axis=1).sum(), part.volume(), rtol=1e-9)


def test_centered_and_equality():
    a = Partition.centered([0, 0], [2, 2], [3, 5])
    assert np.allclose(a.lower, [-3, -5])
    assert a == Partition([-3, -5], [2, 2], [3, 5])


def test_round_trip_random_points(bas1, rng):
    part = bas1.partition
    x = rng.uniform(part.lower, part.upper, size=(100_000, 2))
    idx = part.region_index(x)
    lo, hi = part.region_bounds(idx)
    assert np.all((x >= lo) & (x < hi) | ((x == hi) & (hi == part.upper)))


@settings(max_examples=100, deadline=None)
@given(lo=st.floats(-5, 5), w=st.floats(0.1, 5), l1=st.floats(0, 3), dl=st.floats(1e-3, 3),
       c=st.floats(0.05, 0.95))
def test_scaled_nesting(lo, w, l1, dl, c):
    box = box_polytope([lo, lo], [lo + w, lo + 2 * w])
    box = type(box)(M=box.M, b=box.b, center=np.array([lo + c * w, lo + c * 2 * w]),
                    vertices=box.vertices)
    small = scaled_polytope(box, l1)
    big = scaled_polytope(box, l1 + dl)
    assert np.all(big.contains(small.vertices, tol=1e-9))
