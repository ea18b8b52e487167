"""Cylinder geometry and distance functions.

The lattice is a discrete cylinder: L columns (horizontal direction,
periodic) by M rows (vertical direction, open at top and bottom).  Sites
are 1-based, z = (z1, z2) with z1 in {1..L} and z2 in {1..M}.  Propagator
boundary identities additionally refer to the extended rows z2 = 0 and
z2 = M + 1, where Dirichlet-like cancellations hold.

Horizontal displacements live on a ring of circumference L.  `per_range`
folds a displacement into the symmetric window (-L/2, L/2], and `ring_sign`
is +1/0/-1 according to whether the displacement is shorter than, equal to,
or longer than half the circumference; the sign multiplies the bulk part of
the propagator so that the bulk/edge split is continuous across the
antipodal line.

`edge_distance` measures how far a pair of points is from "feeling" the
boundary: it is the minimum over (i) reflecting the pair off the top or
bottom row and (ii) winding the long way around the cylinder.

`steiner_length` is the exact rectilinear Steiner minimal tree length of
up to four points, used as the decay exponent delta in weighted kernel
norms.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass


def per_range(z1, L):
    """Fold a horizontal displacement into the window (-L/2, L/2].

    The antipodal displacement L/2 maps to +L/2, not -L/2; this matches
    the convention used by the bulk/edge decomposition, where the sign
    function vanishes there anyway.

    Args:
        z1: integer displacement (any integer, not necessarily reduced).
        L: even circumference.

    Returns:
        Integer congruent to z1 mod L lying in (-L/2, L/2].
    """
    if L % 2 != 0:
        raise ValueError(f"circumference must be even, got L={L}")
    return (z1 + L // 2 - 1) % L - L // 2 + 1


def ring_sign(z1, L):
    """Sign weight of the bulk propagator: +1, 0, -1 for |z1| <, =, > L/2.

    Evaluated on the raw (unfolded) displacement of two columns in
    {1..L}, so |z1| <= L - 1.
    """
    a = 2 * abs(z1)
    if a < L:
        return 1
    if a == L:
        return 0
    return -1


def norm1_cyl(z, zp, L):
    """Cylinder l1 distance: folded horizontal part plus vertical part."""
    return abs(per_range(z[0] - zp[0], L)) + abs(z[1] - zp[1])


def edge_distance(z, zp, L, M):
    """Distance-to-boundary metric entering edge-part decay bounds.

    Minimum of two routes: connect z and z' through the nearest horizontal
    boundary (top or bottom, whichever pair of reflections is cheaper), or
    connect them the long way around the cylinder.

    Args:
        z, zp: sites with z2 in the extended range {0..M+1}.
        L, M: cylinder dimensions.
    """
    dx = abs(per_range(z[0] - zp[0], L))
    via_boundary = dx + min(z[1] + zp[1], 2 * (M + 1) - z[1] - zp[1])
    around = L - dx + abs(z[1] - zp[1])
    return min(via_boundary, around)


def _l1(p, q):
    return abs(p[0] - q[0]) + abs(p[1] - q[1])


def _mst_length(points):
    """Prim's algorithm on the complete l1 graph (tiny point sets)."""
    n = len(points)
    if n <= 1:
        return 0
    in_tree = [False] * n
    dist = [_l1(points[0], q) for q in points]
    in_tree[0] = True
    total = 0
    for _ in range(n - 1):
        best, best_d = -1, None
        for i in range(n):
            if not in_tree[i] and (best_d is None or dist[i] < best_d):
                best, best_d = i, dist[i]
        in_tree[best] = True
        total += best_d
        for i in range(n):
            if not in_tree[i]:
                d = _l1(points[best], points[i])
                if d < dist[i]:
                    dist[i] = d
    return total


def steiner_length(points):
    """Exact rectilinear Steiner minimal tree length for up to 4 points.

    Candidate Steiner points are restricted to the Hanan grid (pairwise
    intersections of horizontal/vertical lines through the terminals),
    which is exact for the rectilinear metric.  A tree on n terminals
    needs at most n - 2 Steiner points, so subsets of size <= 2 suffice.

    Repeated points are collapsed first; a single distinct point has
    length 0.  Three distinct points always meet at the coordinate-wise
    median, giving the bounding-box half-perimeter; four points fall
    back on the Hanan enumeration, stopped early when the half-perimeter
    lower bound (any spanning tree projects onto the full extent of
    both axes) is reached.

    Args:
        points: iterable of 2 to 4 integer pairs (before deduplication).

    Returns:
        Integer tree length.
    """
    pts = [tuple(p) for p in points]
    if not 2 <= len(pts) <= 4:
        raise ValueError(f"steiner_length supports 2..4 points, got {len(pts)}")
    terminals = sorted(set(pts))
    n = len(terminals)
    if n == 1:
        return 0
    if n == 2:
        return _l1(terminals[0], terminals[1])
    xs = sorted({p[0] for p in terminals})
    ys = sorted({p[1] for p in terminals})
    half_perimeter = xs[-1] - xs[0] + ys[-1] - ys[0]
    if n == 3:
        return half_perimeter
    best = _mst_length(terminals)
    if best == half_perimeter:
        return best
    hanan = [(x, y) for x in xs for y in ys if (x, y) not in set(terminals)]
    for k in range(1, n - 1):
        for extra in itertools.combinations(hanan, k):
            best = min(best, _mst_length(terminals + list(extra)))
            if best == half_perimeter:
                return best
    return best


@dataclass(frozen=True)
class CylinderGeometry:
    """An L x M cylinder, periodic horizontally, open vertically.

    Attributes:
        L: even number of columns, L >= 2.
        M: number of rows, M >= 1.
    """

    L: int
    M: int

    def __post_init__(self):
        if self.L < 2 or self.L % 2 != 0:
            raise ValueError(f"L must be even and >= 2, got {self.L}")
        if self.M < 1:
            raise ValueError(f"M must be >= 1, got {self.M}")

    @property
    def n_sites(self):
        return self.L * self.M

    @property
    def n_horizontal_bonds(self):
        # one bond per site: (z1, z2) -- (z1 + 1, z2), wrapping at z1 = L
        return self.L * self.M

    @property
    def n_vertical_bonds(self):
        # open rows: no bond leaves the top row
        return self.L * (self.M - 1)

    def sites(self):
        """Iterate sites row-major: (1,1), (2,1), ..., (L,M)."""
        for z2 in range(1, self.M + 1):
            for z1 in range(1, self.L + 1):
                yield (z1, z2)

    def contains(self, z):
        return 1 <= z[0] <= self.L and 1 <= z[1] <= self.M

    def contains_extended(self, z):
        """Extended range including the virtual rows z2 = 0 and M + 1."""
        return 1 <= z[0] <= self.L and 0 <= z[1] <= self.M + 1

    def per(self, dz1):
        return per_range(dz1, self.L)

    def sign(self, dz1):
        return ring_sign(dz1, self.L)

    def norm1(self, z, zp):
        return norm1_cyl(z, zp, self.L)

    def edge_distance(self, z, zp):
        return edge_distance(z, zp, self.L, self.M)
