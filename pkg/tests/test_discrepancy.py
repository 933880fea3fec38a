import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from mpqmc.discrepancy import (PointSet, nonoverlapping_tuples, overlapping_tuples,
                               star_discrepancy)
from mpqmc.driving import build_lfsr_cud, radical_inverse
from mpqmc.errors import TooLarge


def brute_star(points):
    """Enumerate every box whose corner coordinates come from the point
    coordinates or 1, counting both closed and open boxes."""
    pts = np.asarray(points, dtype=float)
    n, d = pts.shape
    axes = [np.unique(np.append(pts[:, j], 1.0)) for j in range(d)]
    best = 0.0
    for corner in itertools.product(*axes):
        c = np.array(corner)
        vol = np.prod(c)
        closed = np.all(pts <= c, axis=1).sum() / n
        open_ = np.all(pts < c, axis=1).sum() / n
        best = max(best, closed - vol, vol - open_)
    return best


def test_single_point_1d():
    # one point at x: sup is max(x, 1 - x)
    assert star_discrepancy(np.array([[0.3]])) == pytest.approx(0.7)
    assert star_discrepancy(np.array([[0.8]])) == pytest.approx(0.8)


def test_centred_grid_1d():
    n = 16
    x = (np.arange(n) + 0.5) / n
    assert star_discrepancy(x) == pytest.approx(1 / (2 * n))


def test_product_grid_2d():
    g = (np.arange(4) + 0.5) / 4
    pts = np.array(list(itertools.product(g, g)))
    assert star_discrepancy(pts) == pytest.approx(brute_star(pts), abs=1e-15)


@given(arrays(np.float64, st.tuples(st.integers(1, 14), st.integers(1, 3)),
              elements=st.floats(0, 1, exclude_max=True)))
@settings(max_examples=120, deadline=None)
def test_matches_brute_force(pts):
    assert star_discrepancy(pts) == pytest.approx(brute_star(pts), abs=1e-12)


@given(arrays(np.float64, st.tuples(st.integers(1, 30), st.integers(1, 3)),
              elements=st.floats(0, 1, exclude_max=True)))
@settings(max_examples=60, deadline=None)
def test_bounds(pts):
    n = pts.shape[0]
    D = star_discrepancy(pts)
    assert 1 / (2 * n) - 1e-12 <= D <= 1 + 1e-12


def test_ties_and_duplicates():
    pts = np.array([[0.5, 0.5]] * 4 + [[0.25, 0.75]] * 2)
    assert star_discrepancy(pts) == pytest.approx(brute_star(pts), abs=1e-15)


def test_too_large():
    with pytest.raises(TooLarge):
        star_discrepancy(np.full((1025, 3), 0.5))
    with pytest.raises(TooLarge):
        star_discrepancy(np.full((4, 4), 0.5))


def test_point_set_validation():
    with pytest.raises(ValueError):
        PointSet(np.array([[1.0]]))
    with pytest.raises(ValueError):
        PointSet(np.array([[-0.1]]))
    assert PointSet(np.array([0.1, 0.2])).dim == 1


def test_tuple_views():
    seq = np.arange(7) / 8
    assert overlapping_tuples(seq, 3).n == 5
    ps = nonoverlapping_tuples(seq, 3)
    assert ps.n == 2 and np.array_equal(ps.points[1], seq[3:6])


def test_van_der_corput_pairs_fail_uniformity():
    # consecutive pairs of the radical inverse never enter [0, 1/2)^2
    u = radical_inverse(np.arange(1, 65))
    pts = overlapping_tuples(u, 2).points
    assert not np.any((pts[:, 0] < 0.5) & (pts[:, 1] < 0.5))
    assert star_discrepancy(pts) >= 0.25


def test_lfsr_cyclic_pairs_are_uniform():
    u = build_lfsr_cud(12).values
    pairs = overlapping_tuples(np.append(u, u[:1]), 2)
    assert star_discrepancy(pairs) < 0.01
