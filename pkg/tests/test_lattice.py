"""Cylinder geometry, folded distances, and Steiner tree lengths."""

import pytest

from isingcyl.lattice import (
    CylinderGeometry,
    edge_distance,
    norm1_cyl,
    per_range,
    ring_sign,
    steiner_length,
)


def test_geometry_validation():
    with pytest.raises(ValueError):
        CylinderGeometry(3, 4)
    with pytest.raises(ValueError):
        CylinderGeometry(0, 4)
    with pytest.raises(ValueError):
        CylinderGeometry(4, 0)
    CylinderGeometry(2, 1)


def test_sites_row_major():
    g = CylinderGeometry(4, 2)
    assert list(g.sites()) == [
        (1, 1), (2, 1), (3, 1), (4, 1),
        (1, 2), (2, 2), (3, 2), (4, 2),
    ]
    assert g.n_sites == 8
    assert g.n_horizontal_bonds == 8
    assert g.n_vertical_bonds == 4


def test_contains_and_extended_rows():
    g = CylinderGeometry(4, 3)
    assert g.contains((1, 1)) and g.contains((4, 3))
    assert not g.contains((0, 1)) and not g.contains((1, 0))
    assert not g.contains((1, 4))
    # virtual boundary rows belong to the extended range only
    assert g.contains_extended((2, 0)) and g.contains_extended((2, 4))
    assert not g.contains_extended((2, 5))


def test_per_range_window():
    L = 8
    for z1 in range(-20, 21):
        folded = per_range(z1, L)
        assert -L // 2 < folded <= L // 2
        assert (folded - z1) % L == 0
    # antipodal displacement keeps the positive representative
    assert per_range(4, 8) == 4
    assert per_range(-4, 8) == 4
    with pytest.raises(ValueError):
        per_range(1, 7)


def test_ring_sign_cases():
    assert ring_sign(0, 8) == 1
    assert ring_sign(3, 8) == 1
    assert ring_sign(4, 8) == 0
    assert ring_sign(-4, 8) == 0
    assert ring_sign(5, 8) == -1
    assert ring_sign(-7, 8) == -1


def test_norm1_wraps_horizontally():
    assert norm1_cyl((1, 1), (8, 1), 8) == 1
    assert norm1_cyl((1, 1), (5, 3), 8) == 6
    assert norm1_cyl((2, 2), (2, 2), 8) == 0


def test_edge_distance_routes():
    # near the bottom boundary the through-boundary route wins
    assert edge_distance((1, 1), (2, 1), 8, 6) == min(1 + 2, 8 - 1)
    # symmetric under swapping the pair
    assert edge_distance((3, 2), (6, 5), 8, 6) == edge_distance(
        (6, 5), (3, 2), 8, 6)


def test_steiner_degenerate_cases():
    with pytest.raises(ValueError):
        steiner_length(())
    with pytest.raises(ValueError):
        steiner_length(((3, 4),))
    with pytest.raises(ValueError):
        steiner_length(((0, 0), (0, 1), (0, 2), (0, 3), (0, 4)))
    assert steiner_length(((0, 0), (2, 5))) == 7
    assert steiner_length(((3, 4), (3, 4))) == 0


def test_steiner_three_points_is_half_perimeter():
    # with a single Steiner point allowed, three terminals always cost
    # exactly the half-perimeter of their bounding box
    pts = ((0, 0), (4, 1), (2, 6))
    assert steiner_length(pts) == 4 + 6
    pts = ((-3, 2), (5, 2), (1, -1))
    assert steiner_length(pts) == 8 + 3


def test_steiner_four_corners_beats_mst():
    # the 2 x n "ladder" needs two Steiner points; the optimal tree costs
    # 2 + 2 + n rather than the MST's 2 + n + n
    pts = ((0, 0), (0, 2), (5, 0), (5, 2))
    assert steiner_length(pts) == 2 + 2 + 5


def test_steiner_collinear_and_duplicates():
    assert steiner_length(((0, 0), (3, 0), (7, 0))) == 7
    assert steiner_length(((1, 1), (1, 1), (4, 1))) == 3
