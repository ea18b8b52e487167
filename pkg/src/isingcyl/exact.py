"""Exact Grassmann representation of the cylinder Ising model.

The partition function of the nearest-neighbor Ising model on an L x M
cylinder equals, after the high-temperature expansion is organized into a
Gaussian Grassmann integral,

    Z = 2^{LM} (cosh beta J1)^{LM} (cosh beta J2)^{L(M-1)} Pf A,

where A is the 4LM x 4LM antisymmetric matrix of the quadratic action in
the four species Hbar, H, Vbar, V living on each site.  The action
couples each site to itself (six local monomials) and to its horizontal
and vertical neighbors with weights t1 = tanh(beta J1), t2 = tanh(beta J2).
The horizontal field is antiperiodic around the cylinder, H_{(L+1, y)} =
-H_{(1, y)}, and the vertical coupling out of the top row is absent.

Wick's rule reduces every even correlation to a Pfaffian of two-point
functions <Phi_i Phi_j> = -[A^{-1}]_{ij}; `propagator_from_A` exposes the
dense inverse.  The horizontal (xi) sector decouples from the vertical
(phi) sector after a Schur reduction and has the explicit "massive"
propagator computed by `massive_propagator` as an antiperiodized
geometric kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache

import numpy as np

from .blocks import PropagatorBlock
from .lattice import CylinderGeometry
from .skew import SkewMatrix, pfaffian_sign_logabs, skew_inverse

CRITICAL_TOL = 1e-14


@dataclass(frozen=True)
class Couplings:
    """Hyperbolic-tangent couplings t_l = tanh(beta J_l), both in (0, 1).

    The critical line is t1 t2 + t1 + t2 = 1, i.e. t2 = (1 - t1)/(1 + t1).
    """

    t1: float
    t2: float

    def __post_init__(self):
        for name, t in (("t1", self.t1), ("t2", self.t2)):
            if not 0.0 < t < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {t}")

    @classmethod
    def from_beta(cls, beta, J1, J2):
        if beta <= 0 or J1 <= 0 or J2 <= 0:
            raise ValueError("beta, J1, J2 must be positive")
        return cls(math.tanh(beta * J1), math.tanh(beta * J2))

    @classmethod
    def critical_from_t1(cls, t1):
        return cls(t1, (1.0 - t1) / (1.0 + t1))

    @classmethod
    def isotropic_critical(cls):
        t = math.sqrt(2.0) - 1.0
        return cls(t, t)

    @property
    def is_critical(self):
        return abs(self.t1 * self.t2 + self.t1 + self.t2 - 1.0) <= CRITICAL_TOL


class Species(IntEnum):
    """Canonical on-site ordering of the four Grassmann species."""

    HBAR = 0
    H = 1
    VBAR = 2
    V = 3


def flat_index(geometry, z, species):
    """Flat Grassmann index: site-major in (z2, z1), species-minor.

    Bijective onto {0, ..., 4 L M - 1}.
    """
    z1, z2 = z
    if not geometry.contains(z):
        raise ValueError(f"site {z} outside {geometry.L} x {geometry.M} lattice")
    return 4 * ((z2 - 1) * geometry.L + (z1 - 1)) + int(species)


def site_of_index(geometry, idx):
    """Inverse of `flat_index`: returns ((z1, z2), Species)."""
    n = 4 * geometry.n_sites
    if not 0 <= idx < n:
        raise ValueError(f"index {idx} outside 0..{n - 1}")
    site, sp = divmod(idx, 4)
    z2, z1 = divmod(site, geometry.L)
    return (z1 + 1, z2 + 1), Species(sp)


def build_action_matrix(geometry, couplings):
    """Assemble the quadratic action matrix A.

    Each monomial c Phi_i Phi_j of the action contributes A_ij += c,
    A_ji -= c, so that S = (1/2) (Phi, A Phi) reproduces it exactly.
    Monomials per site z (with t-couplings first, then the six local
    terms):

        t1 Hbar_z H_{z+e1}   (antiperiodic wrap: -t1 when z1 = L)
        t2 Vbar_z V_{z+e2}   (dropped on the top row)
        Hbar_z H_z,  Vbar_z V_z,
        Vbar_z Hbar_z,  V_z Hbar_z,  H_z Vbar_z,  V_z H_z

    Returns:
        SkewMatrix of dimension 4 L M.
    """
    L, M = geometry.L, geometry.M
    t1, t2 = couplings.t1, couplings.t2
    a = SkewMatrix.zeros(4 * L * M)

    def ix(z, sp):
        return flat_index(geometry, z, sp)

    for z2 in range(1, M + 1):
        for z1 in range(1, L + 1):
            z = (z1, z2)
            # horizontal hopping, antiperiodic around the cylinder
            if z1 < L:
                a.add_pair(ix(z, Species.HBAR), ix((z1 + 1, z2), Species.H), t1)
            else:
                a.add_pair(ix(z, Species.HBAR), ix((1, z2), Species.H), -t1)
            # vertical hopping, open at the top
            if z2 < M:
                a.add_pair(ix(z, Species.VBAR), ix((z1, z2 + 1), Species.V), t2)
            # local monomials
            a.add_pair(ix(z, Species.HBAR), ix(z, Species.H), 1.0)
            a.add_pair(ix(z, Species.VBAR), ix(z, Species.V), 1.0)
            a.add_pair(ix(z, Species.VBAR), ix(z, Species.HBAR), 1.0)
            a.add_pair(ix(z, Species.V), ix(z, Species.HBAR), 1.0)
            a.add_pair(ix(z, Species.H), ix(z, Species.VBAR), 1.0)
            a.add_pair(ix(z, Species.V), ix(z, Species.H), 1.0)
    return a


@dataclass(frozen=True)
class PartitionResult:
    """log Z split into its exactly known pieces plus the Pfaffian."""

    log_z: float
    pf_sign: float
    log_pf_abs: float


def partition_function_log(geometry, beta, J1, J2):
    """Exact log partition function via the Pfaffian formula.

    Args:
        geometry: CylinderGeometry.
        beta, J1, J2: inverse temperature and the two exchange couplings.

    Returns:
        PartitionResult with log Z = LM log 2 + LM log cosh(beta J1)
        + L(M-1) log cosh(beta J2) + log|Pf A| and the sign of Pf A under
        the canonical index ordering.
    """
    L, M = geometry.L, geometry.M
    couplings = Couplings.from_beta(beta, J1, J2)
    a = build_action_matrix(geometry, couplings)
    sign, log_pf = pfaffian_sign_logabs(a)
    if sign == 0:
        raise ArithmeticError("action matrix is singular; Z would vanish")
    prefactor = (
        L * M * math.log(2.0)
        + L * M * math.log(math.cosh(beta * J1))
        + L * (M - 1) * math.log(math.cosh(beta * J2))
    )
    return PartitionResult(prefactor + log_pf, float(np.real(sign)), log_pf)


class PropagatorCache:
    """Dense two-point function <Phi_i Phi_j> = -[A^{-1}]_{ij}.

    Built once per (geometry, couplings) and immutable afterwards; all
    accessors are reads of a fixed array, safe under concurrent use.
    """

    def __init__(self, geometry, couplings):
        self.geometry = geometry
        self.couplings = couplings
        a = build_action_matrix(geometry, couplings)
        inv = skew_inverse(a)
        g = -inv.dense()
        g.setflags(write=False)
        self.matrix = g

    def two_point(self, z, species, zp, species_p):
        i = flat_index(self.geometry, z, species)
        j = flat_index(self.geometry, zp, species_p)
        return self.matrix[i, j]

    def vertical_block(self, z, zp):
        """The (Vbar, V) 2x2 block: rows/cols ordered (+, -) = (Vbar, V)."""
        i = flat_index(self.geometry, z, Species.VBAR)
        j = flat_index(self.geometry, zp, Species.VBAR)
        # Vbar and V sit at consecutive flat indices
        return self.matrix[i:i + 2, j:j + 2].copy()


@lru_cache(maxsize=16)
def propagator_from_A(geometry, couplings):
    """Cached dense propagator for small lattices (dimension 4 L M)."""
    return PropagatorCache(geometry, couplings)


def horizontal_kernel_infinite(y, t1):
    """Infinite-volume Schur kernel s_{infinity,+}(y) = (-t1)^y for y >= 0.

    The mirrored kernel s_{infinity,-}(y) equals s_{infinity,+}(-y).
    """
    if y < 0:
        return 0.0
    return (-t1) ** y


def horizontal_kernel(y, L, t1):
    """Antiperiodized kernel s_+(y) = sum_n (-1)^n s_{infinity,+}(y + nL).

    The series is geometric with ratio t1^L; terms are accumulated until
    they drop below 1e-30 so the truncation is far below roundoff.
    """
    total = 0.0
    n = math.ceil(-y / L)
    while True:
        yy = y + n * L
        term = (-1.0) ** n * (-t1) ** yy
        total += term
        if t1 ** yy < 1e-30:
            break
        n += 1
    return total


def horizontal_kernel_minus(y, L, t1):
    return horizontal_kernel(-y, L, t1)


def massive_propagator(geometry, couplings, z, zp):
    """Two-point block of the horizontal (xi) sector.

    <xi_omega,z xi_omega',z'> is diagonal in the row index and couples
    only opposite species:

        [[0,               s_+(z1 - z1')],
         [-s_-(z1 - z1'),  0            ]] * delta_{z2, z2'}.

    Args:
        z, zp: lattice sites.

    Returns:
        PropagatorBlock (zero block when the rows differ).
    """
    if not (geometry.contains(z) and geometry.contains(zp)):
        raise ValueError("sites must lie on the lattice")
    m = np.zeros((2, 2))
    if z[1] == zp[1]:
        dz1 = z[0] - zp[0]
        m[0, 1] = horizontal_kernel(dz1, geometry.L, couplings.t1)
        m[1, 0] = -horizontal_kernel_minus(dz1, geometry.L, couplings.t1)
    return PropagatorBlock(m)
