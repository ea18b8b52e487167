"""Action matrix, Pfaffian partition function, and the dense propagator."""

import math

import numpy as np
import pytest

from isingcyl.energy import BruteForceGibbs
from isingcyl.exact import (
    Couplings,
    PropagatorCache,
    Species,
    build_action_matrix,
    flat_index,
    horizontal_kernel,
    horizontal_kernel_infinite,
    massive_propagator,
    partition_function_log,
    site_of_index,
)
from isingcyl.lattice import CylinderGeometry


def test_couplings_validation_and_critical_line():
    with pytest.raises(ValueError):
        Couplings(0.0, 0.5)
    with pytest.raises(ValueError):
        Couplings(0.5, 1.0)
    with pytest.raises(ValueError):
        Couplings.from_beta(-1.0, 1.0, 1.0)
    c = Couplings.critical_from_t1(0.5)
    assert math.isclose(c.t2, 1.0 / 3.0)
    assert c.is_critical
    iso = Couplings.isotropic_critical()
    assert math.isclose(iso.t1, math.sqrt(2.0) - 1.0)
    assert iso.t1 == iso.t2 and iso.is_critical
    assert not Couplings(0.3, 0.3).is_critical


def test_flat_index_roundtrip():
    g = CylinderGeometry(4, 3)
    seen = set()
    for z in g.sites():
        for sp in Species:
            idx = flat_index(g, z, sp)
            assert site_of_index(g, idx) == (z, sp)
            seen.add(idx)
    assert seen == set(range(4 * g.n_sites))


def test_action_matrix_is_skew_and_sparse():
    g = CylinderGeometry(6, 4)
    a = build_action_matrix(g, Couplings(0.4, 0.3)).dense()
    assert np.max(np.abs(a + a.T)) == 0.0
    # every row couples a field to its on-site partners plus at most
    # one neighbor bond
    assert np.count_nonzero(a) <= a.shape[0] * 8


@pytest.mark.parametrize("L,M", [(2, 1), (4, 2), (6, 3)])
def test_partition_function_matches_enumeration(L, M):
    g = CylinderGeometry(L, M)
    rng = np.random.default_rng(L * 10 + M)
    for _ in range(3):
        beta = float(rng.uniform(0.1, 0.7))
        J1 = float(rng.uniform(0.4, 1.4))
        J2 = float(rng.uniform(0.4, 1.4))
        res = partition_function_log(g, beta, J1, J2)
        ref = BruteForceGibbs(g, beta, J1, J2).log_partition()
        assert math.isclose(res.log_z, ref, rel_tol=1e-12)
        assert res.pf_sign == 1.0


def test_partition_decomposition_consistent():
    g = CylinderGeometry(4, 3)
    beta, J1, J2 = 0.25, 1.0, 2.0
    res = partition_function_log(g, beta, J1, J2)
    prefactor = (12 * math.log(2.0) + 12 * math.log(math.cosh(0.25))
                 + 8 * math.log(math.cosh(0.5)))
    assert math.isclose(res.log_z, prefactor + res.log_pf_abs, rel_tol=1e-14)


def test_propagator_cache_blocks():
    g = CylinderGeometry(4, 3)
    cache = PropagatorCache(g, Couplings(0.35, 0.45))
    m = cache.matrix
    assert np.max(np.abs(m + m.T)) == 0.0
    with pytest.raises(ValueError):
        m[0, 0] = 1.0  # the cache is read-only
    z, zp = (2, 1), (4, 3)
    blk = cache.vertical_block(z, zp)
    assert blk[0, 0] == cache.two_point(z, Species.VBAR, zp, Species.VBAR)
    assert blk[0, 1] == cache.two_point(z, Species.VBAR, zp, Species.V)
    assert blk[1, 0] == cache.two_point(z, Species.V, zp, Species.VBAR)
    assert blk[1, 1] == cache.two_point(z, Species.V, zp, Species.V)


def test_horizontal_kernel_antiperiodic_wrap():
    L, t1 = 8, 0.4
    for y in range(-L, L + 1):
        assert math.isclose(horizontal_kernel(y + L, L, t1),
                            -horizontal_kernel(y, L, t1),
                            rel_tol=0, abs_tol=1e-15)


def test_horizontal_kernel_approaches_infinite_volume():
    t1 = 0.3
    for y in (0, 1, 2, 3):
        finite = horizontal_kernel(y, 64, t1)
        infinite = horizontal_kernel_infinite(y, t1)
        assert abs(finite - infinite) < 2.0 * t1 ** (64 - abs(y))


def test_massive_propagator_structure():
    g = CylinderGeometry(6, 4)
    c = Couplings.isotropic_critical()
    z = (2, 2)
    blk = massive_propagator(g, c, z, z)
    # on-site block is purely off-diagonal
    assert blk[0, 0] == 0.0 and blk[1, 1] == 0.0
    assert blk[0, 1] != 0.0 and blk[1, 0] != 0.0
    # vertical displacement kills it entirely (delta in z2)
    off = massive_propagator(g, c, z, (4, 3))
    assert np.max(np.abs(off)) == 0.0
