"""Exact free-fermion solution of the critical 2D Ising model on a cylinder.

The package computes partition functions and fermionic two-point
functions on finite L x M cylinders (periodic ring, open vertical
boundary) through the Pfaffian representation, decomposes the critical
propagator into renormalization-group scales with fitted decay
envelopes and Gram factorizations, takes the lattice propagator to its
continuum cylinder limit, evaluates truncated energy correlations
against brute-force enumeration, and carries a small calculus of local
Grassmann kernels (collapse, interpolation, symmetrization, weighted
norms) used to bound effective interactions.

Every numerical claim is gated by the acceptance suite in
`isingcyl.verify`, also reachable as `isingcyl verify` on the command
line.
"""

__version__ = "0.1.0"
