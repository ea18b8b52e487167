"""Continuum cylinder propagator and the lattice-to-continuum sweep."""

import math

import numpy as np
import pytest

from isingcyl.exact import Couplings
from isingcyl.scaling import (
    ContinuumCylinder,
    cylinder_scal_block,
    fourier_profile_check,
    g_scal,
    plane_scal_block,
    rescaling_residual,
    scaling_remainder_records,
)

ISO = Couplings.isotropic_critical()
CYL = ContinuumCylinder(1.0, 1.0)


def test_plane_limit_closed_form():
    # the plane limit is -z1 / (2 pi t2 (1 - t2) |z|^2) on the diagonal
    norm = 2.0 * math.pi * ISO.t2 * (1.0 - ISO.t2)
    for z1, z2 in [(1.0, 0.0), (0.5, 0.5), (-0.3, 1.1)]:
        expected = -z1 / (norm * (z1 * z1 + z2 * z2))
        assert math.isclose(g_scal(ISO, z1, z2), expected, rel_tol=1e-14)


def test_plane_block_antisymmetry_structure():
    blk = plane_scal_block(ISO, 0.4, 0.7)
    swap = plane_scal_block(ISO, -0.4, -0.7)
    assert np.max(np.abs(blk + swap.T)) < 1e-13


def test_continuum_cylinder_validation():
    with pytest.raises(ValueError):
        ContinuumCylinder(0.0, 1.0)
    with pytest.raises(ValueError):
        ContinuumCylinder(1.0, -2.0)


def test_lattice_embedding():
    geo = CYL.lattice_geometry(1.0 / 16.0)
    assert (geo.L, geo.M) == (16, 16)
    assert CYL.lattice_site(1.0 / 16.0, (5.0 / 16.0, 6.0 / 16.0)) == (5, 6)
    # continuum points off the grid floor down
    assert CYL.lattice_site(1.0 / 16.0, (0.33, 0.99)) == (5, 15)


def test_cylinder_block_antisymmetric_under_swap():
    z, zp = (0.3125, 0.375), (0.6875, 0.625)
    a = cylinder_scal_block(CYL, ISO, z, zp)
    b = cylinder_scal_block(CYL, ISO, zp, z)
    assert np.max(np.abs(a + b.T)) < 1e-9


def test_cylinder_block_boundary_pattern():
    # rows with the + component die at the bottom edge, - at the top
    zp = (0.5, 0.5)
    bottom = cylinder_scal_block(CYL, ISO, (0.25, 1e-7), zp)
    assert abs(bottom[0, 0]) < 1e-6 and abs(bottom[0, 1]) < 1e-6
    top = cylinder_scal_block(CYL, ISO, (0.25, 1.0 - 1e-7), zp)
    assert abs(top[1, 0]) < 1e-6 and abs(top[1, 1]) < 1e-6


@pytest.mark.parametrize("xi", [0.5, 2.0])
def test_rescaling_covariance(xi):
    # both z and xi z must stay inside the unit cylinder; the bound
    # reflects the shell-sum truncation, not the identity itself
    z, zp = (0.125, 0.1875), (0.3125, 0.375)
    assert rescaling_residual(CYL, ISO, z, zp, xi) < 1e-6


def test_fourier_profile_consistency():
    pts = [(0.35, 0.4), (0.6, 0.25)]
    assert fourier_profile_check(ISO, pts) < 1e-6


def test_remainder_records_shape_and_slope():
    pairs = [((0.3125, 0.375), (0.6875, 0.625))]
    recs = scaling_remainder_records(CYL, ISO, pairs, meshes=(1 / 16, 1 / 32))
    assert len(recs) == 2
    assert all(rec["pair_id"] == 0 for rec in recs)
    slopes = {rec["fitted_slope"] for rec in recs}
    assert len(slopes) == 1
    assert 0.5 < slopes.pop() < 1.5
    assert recs[0]["residual_norm"] > recs[1]["residual_norm"]


def test_remainder_records_preserve_pair_order():
    pairs = [((0.3125, 0.375), (0.6875, 0.625)),
             ((0.125, 0.5), (0.625, 0.5))]
    recs = scaling_remainder_records(CYL, ISO, pairs, meshes=(1 / 8, 1 / 16))
    assert [rec["pair_id"] for rec in recs] == [0, 0, 1, 1]
    assert [rec["L"] for rec in recs] == [8, 16, 8, 16]
