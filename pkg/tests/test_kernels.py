"""Local-kernel calculus: collapse, interpolation, symmetrization, norms.

The structural identities (remainder equivalence, operator algebra,
exact zeros) are checked through the wedge-expansion oracle, which
reduces every kernel to its canonical antisymmetric coefficients.
"""

import math

import numpy as np
import pytest

from isingcyl import kernels
from isingcyl.kernels import (
    Kernel,
    antisymmetrize,
    canonical_path,
    certify_translation_invariance,
    derivative_expansion,
    formal_pairing,
    interpolate_remainder,
    interpolation_bound_reports,
    kernel_from_text,
    kernel_to_text,
    kernels_equivalent,
    kinetic_monomial,
    localization_operator,
    localize_collapse,
    mass_monomial,
    random_sparse_kernel,
    reflection_average,
    renormalization_operator,
    span_projection,
    symmetrize,
    verify_interpolation_bounds,
    wedge_expansion,
    weighted_norm,
)


def _mixed(rng, entries=4):
    out = Kernel(translation_invariant=True)
    for n, p in ((2, 0), (2, 1), (2, 2), (4, 0), (4, 1)):
        out = out.plus(random_sparse_kernel(rng, n, p, entries=entries))
    return out


# ---------------------------------------------------------------------------
# label bookkeeping


def test_label_validation():
    k = Kernel(translation_invariant=True)
    with pytest.raises(ValueError):
        k.add(((2, (0, 0), (0, 0)), (1, (0, 0), (1, 0))), 1.0)
    with pytest.raises(ValueError):
        k.add(((1, (3, 0), (0, 0)), (1, (0, 0), (1, 0))), 1.0)
    with pytest.raises(ValueError):
        k.add(((1, (0, 0), (0, 0)),), 1.0)


def test_anchored_lookup_is_shift_invariant():
    k = Kernel(translation_invariant=True)
    k.add(((1, (0, 0), (5, 7)), (-1, (1, 0), (6, 7))), 0.25)
    assert k.value(((1, (0, 0), (0, 0)), (-1, (1, 0), (1, 0)))) == 0.25
    assert k.value(((1, (0, 0), (-3, 2)), (-1, (1, 0), (-2, 2)))) == 0.25


def test_certification_detects_inconsistency():
    lit = Kernel(translation_invariant=False)
    lit.add(((1, (0, 0), (0, 0)), (-1, (0, 0), (1, 0))), 0.5)
    lit.add(((1, (0, 0), (2, 3)), (-1, (0, 0), (3, 3))), 0.5)
    cert = certify_translation_invariance(lit)
    assert cert.translation_invariant and len(cert) == 1
    bad = Kernel(translation_invariant=False)
    bad.add(((1, (0, 0), (0, 0)), (-1, (0, 0), (1, 0))), 0.5)
    bad.add(((1, (0, 0), (2, 3)), (-1, (0, 0), (3, 3))), 0.75)
    with pytest.raises(ValueError):
        certify_translation_invariance(bad)


def test_mixing_anchored_and_literal_rejected():
    a = Kernel(translation_invariant=True)
    b = Kernel(translation_invariant=False)
    with pytest.raises(ValueError):
        a.plus(b)


# ---------------------------------------------------------------------------
# collapse and interpolation


def test_canonical_path_staircase():
    assert canonical_path((0, 0), (0, 0)) == ()
    assert canonical_path((0, 0), (2, 1)) == ((0, 0), (1, 0), (2, 0), (2, 1))
    assert canonical_path((1, 1), (-1, 0)) == ((1, 1), (0, 1), (-1, 1), (-1, 0))


def test_collapse_moves_everything_to_first_position():
    k = Kernel(translation_invariant=True)
    k.add(((1, (0, 0), (0, 0)), (-1, (0, 0), (2, 1))), 1.5)
    c = localize_collapse(k)
    assert c.value(((1, (0, 0), (0, 0)), (-1, (0, 0), (0, 0)))) == 1.5
    assert len(c) == 1


def test_interpolated_remainder_hand_case():
    k = Kernel(translation_invariant=True)
    k.add(((1, (0, 0), (0, 0)), (-1, (0, 0), (2, 1))), 1.0)
    rem = interpolate_remainder(k, 2, 0)
    # three path steps: two horizontal differences, one vertical
    assert len(rem) == 3
    assert rem.value(((1, (0, 0), (0, 0)), (-1, (1, 0), (0, 0)))) == 1.0
    assert rem.value(((1, (0, 0), (0, 0)), (-1, (1, 0), (1, 0)))) == 1.0
    assert rem.value(((1, (0, 0), (0, 0)), (-1, (0, 1), (2, 0)))) == 1.0


@pytest.mark.parametrize("n,p", [(2, 0), (2, 1), (4, 0)])
def test_remainder_equivalence_oracle(n, p):
    # the defining identity: sector = collapse + interpolated remainder,
    # as Grassmann forms
    rng = np.random.default_rng(10 * n + p)
    for _ in range(5):
        v = random_sparse_kernel(rng, n, p, entries=5)
        rebuilt = localize_collapse(v, n, p).plus(interpolate_remainder(v, n, p))
        assert kernels_equivalent(v, rebuilt)


def test_interpolation_rejects_other_sectors():
    rng = np.random.default_rng(3)
    v = random_sparse_kernel(rng, 2, 2, entries=3)
    with pytest.raises(ValueError):
        interpolate_remainder(v, 2, 2)


def test_derivative_expansion_preserves_wedge():
    # on a literal kernel the rewrite is wedge-exact at every index; an
    # anchored kernel re-bases when the first field moves, so there the
    # identity is only representative-exact away from the anchor field
    rng = np.random.default_rng(4)
    lit = random_sparse_kernel(rng, 2, 1, entries=5,
                               translation_invariant=False)
    for idx in (0, 1):
        for direction in (1, 2):
            assert kernels_equivalent(lit, derivative_expansion(lit, idx,
                                                                direction))
    anchored = random_sparse_kernel(rng, 2, 1, entries=5)
    for direction in (1, 2):
        assert kernels_equivalent(anchored,
                                  derivative_expansion(anchored, 1, direction))
    with pytest.raises(ValueError):
        derivative_expansion(lit, 0, 3)


def test_formal_pairing_respects_equivalence():
    rng = np.random.default_rng(5)
    v = random_sparse_kernel(rng, 2, 0, entries=5)
    rebuilt = localize_collapse(v, 2, 0).plus(interpolate_remainder(v, 2, 0))
    monos = set(wedge_expansion(v)) | set(wedge_expansion(rebuilt))
    coeffs = {m: float(rng.uniform(-1, 1)) for m in monos}
    assert math.isclose(formal_pairing(v, coeffs),
                        formal_pairing(rebuilt, coeffs),
                        rel_tol=0, abs_tol=1e-12)


# ---------------------------------------------------------------------------
# symmetrization and the operator algebra


def test_symmetrize_is_projection():
    rng = np.random.default_rng(6)
    v = _mixed(rng)
    s = symmetrize(v)
    assert s.max_abs_diff(symmetrize(s)) < 1e-14
    # antisymmetrization alone is also idempotent
    a = antisymmetrize(v)
    assert a.max_abs_diff(antisymmetrize(a)) < 1e-14
    # reflection averaging commutes into the full symmetrization
    assert symmetrize(reflection_average(v)).max_abs_diff(s) < 1e-13


def test_quartic_collapse_vanishes_identically():
    # collapsing a quartic repeats field labels, which the antisymmetric
    # projection kills exactly, raw or symmetrized
    rng = np.random.default_rng(7)
    for _ in range(10):
        v40 = random_sparse_kernel(rng, 4, 0, entries=6)
        assert symmetrize(localize_collapse(v40, 4, 0)).max_abs() == 0.0
        assert localization_operator(v40).max_abs() == 0.0
        assert localization_operator(symmetrize(v40)).max_abs() == 0.0


def test_localization_idempotent_on_invariant_kernels():
    # the operator identities hold exactly on the reflection-invariant
    # class (the physical one); raw kernels can leave it
    rng = np.random.default_rng(8)
    for _ in range(5):
        v = symmetrize(_mixed(rng, entries=5))
        loc = localization_operator(v)
        assert localization_operator(loc).max_abs_diff(loc) == 0.0
        assert renormalization_operator(loc).max_abs() == 0.0


def test_localization_lands_in_the_marginal_span():
    rng = np.random.default_rng(9)
    v = symmetrize(_mixed(rng, entries=5))
    loc = localization_operator(v)
    basis = [mass_monomial(), kinetic_monomial(1), kinetic_monomial(2)]
    _, resid = span_projection(loc, basis)
    assert resid < 1e-12


def test_renormalization_case_table():
    rng = np.random.default_rng(10)
    v = symmetrize(_mixed(rng, entries=4))
    for sector in ((2, 0), (2, 1), (4, 0)):
        assert renormalization_operator(v, sector).max_abs() == 0.0
    # sectors outside the special set pass through untouched
    v22 = random_sparse_kernel(rng, 2, 2, entries=3)
    extra = renormalization_operator(v22, (6, 0))
    assert extra.max_abs_diff(v22.sector(6, 0)) == 0.0


def test_operators_require_certificate():
    lit = Kernel(translation_invariant=False)
    lit.add(((1, (0, 0), (0, 0)), (-1, (0, 0), (1, 0))), 1.0)
    with pytest.raises(ValueError):
        localization_operator(lit)
    with pytest.raises(ValueError):
        renormalization_operator(lit)
    with pytest.raises(ValueError):
        interpolation_bound_reports(lit, [(0.0, 0.5)])


# ---------------------------------------------------------------------------
# weighted norms and the interpolation bounds


def test_symmetrization_contracts_underived_norms():
    rng = np.random.default_rng(11)
    for n, p in ((2, 0), (4, 0)):
        v = random_sparse_kernel(rng, n, p, entries=6)
        for rate in (0.0, 0.3):
            assert (weighted_norm(symmetrize(v), n, p, rate)
                    <= weighted_norm(v, n, p, rate) + 1e-12)


def test_symmetrization_norm_slack_on_derivative_sectors():
    # reflections re-base the derivative stencil, so at positive rate
    # the contraction only holds with the e^{rate p} allowance
    rng = np.random.default_rng(12)
    for n, p in ((2, 1), (2, 2), (4, 1)):
        v = random_sparse_kernel(rng, n, p, entries=6)
        assert (weighted_norm(symmetrize(v), n, p, 0.0)
                <= weighted_norm(v, n, p, 0.0) + 1e-12)
        rate = 0.4
        bound = math.exp(rate * p) * weighted_norm(v, n, p, rate)
        assert weighted_norm(symmetrize(v), n, p, rate) <= bound + 1e-12


def test_interpolation_bounds_nonnegative_margins():
    rng = np.random.default_rng(13)
    combos = [(0.0, 0.1), (0.0, 0.5), (0.2, 0.1), (0.2, 0.5)]
    for _ in range(5):
        v = _mixed(rng, entries=4)
        for report in interpolation_bound_reports(v, combos):
            for name, (value, bound, margin) in report.items():
                assert margin >= 0.0, name


def test_interpolation_bounds_parameter_validation():
    rng = np.random.default_rng(14)
    v = random_sparse_kernel(rng, 2, 0, entries=3)
    with pytest.raises(ValueError):
        verify_interpolation_bounds(v, -0.1, 0.5)
    with pytest.raises(ValueError):
        verify_interpolation_bounds(v, 0.1, 0.0)


def test_single_report_matches_batch():
    rng = np.random.default_rng(15)
    v = _mixed(rng, entries=3)
    lone = verify_interpolation_bounds(v, 0.1, 0.25)
    batch = interpolation_bound_reports(v, [(0.1, 0.25)])[0]
    assert lone == batch


# ---------------------------------------------------------------------------
# serialization


def test_text_roundtrip_bit_exact():
    rng = np.random.default_rng(16)
    v = _mixed(rng, entries=5)
    back = kernel_from_text(kernel_to_text(v))
    assert back.max_abs_diff(v) == 0.0
    assert back.translation_invariant
    lit = random_sparse_kernel(rng, 2, 0, entries=4,
                               translation_invariant=False)
    back = kernel_from_text(kernel_to_text(lit))
    assert back.max_abs_diff(lit) == 0.0
    assert not back.translation_invariant


def test_text_dump_is_deterministic():
    rng = np.random.default_rng(17)
    v = _mixed(rng, entries=3)
    txt = kernel_to_text(v)
    assert txt == kernel_to_text(kernel_from_text(txt))


def test_text_parse_errors():
    with pytest.raises(ValueError):
        kernel_from_text("")
    with pytest.raises(ValueError):
        kernel_from_text("kernel 99 anchored\n")
    with pytest.raises(ValueError):
        kernel_from_text("kernel 1 sideways\n")
    with pytest.raises(ValueError):
        kernel_from_text("kernel 1 anchored\n2 1 0:0 0:0 1.0\n")
