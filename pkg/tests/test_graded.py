from fractions import Fraction

import pytest

from src.core.error_handler import PreconditionError, ValidationError
from src.core.fixtures import (aff1_sheared, broken_sl2, current_algebra, matrix_algebra, sl2, subcomplex_example,
                               truncated_polynomials)
from src.core.graded import (GLA, GradedSpace, LinearMap, Permutation, Vector, apply_bracket, check_homology_criterion,
                             differential_derivation, homology, inner_derivation, koszul_sign, projections,
                             unshuffles, validate_gla)
from src.core.verification import failing_words


def test_space_basics():
    space = GradedSpace([("x", 0), ("y", 1), ("z", -1)], label="V")
    assert space.dim == 3
    assert space.index("y") == 1
    assert space.indices_of_degree(1) == [1]
    with pytest.raises(ValidationError):
        space.index("w")


def test_duplicate_names_rejected():
    with pytest.raises(ValidationError):
        GradedSpace([("x", 0), ("x", 1)])


def test_shifted_names_and_degrees():
    shifted = GradedSpace([("x", 0), ("y", 1)]).shifted("n")
    assert shifted.names == ("n|s^-1(x)", "n|s^-1(y)")
    assert shifted.degrees == (-1, 0)


def test_canonical_words_skip_repeated_odd():
    space = GradedSpace([("x", 0), ("y", 1)])
    assert space.canonical_words(2) == [(0, 0), (0, 1)]
    assert space.canonical_words(3) == [(0, 0, 0), (0, 0, 1)]


def test_unshuffles_count_and_order():
    result = unshuffles(2, 2)
    assert len(result) == 6
    assert result[0] == Permutation.identity(4)
    assert result[-1].images == (3, 4, 1, 2)


def test_koszul_sign():
    swap = Permutation((2, 1))
    assert koszul_sign(swap, [1, 1]) == -1
    assert koszul_sign(swap, [1, 0]) == 1
    assert koszul_sign(Permutation((3, 4, 1, 2)), [1, 1, 1, 1]) == 1
    assert koszul_sign(Permutation((2, 3, 1)), [1, 1, 1]) == 1


def test_permutation_inverse():
    sigma = Permutation((2, 3, 1))
    assert sigma.compose(sigma.inverse()) == Permutation.identity(3)
    with pytest.raises(ValidationError):
        Permutation((1, 1, 2))


def test_sl2_brackets(sl2_gla):
    e, h, f = 0, 1, 2
    assert sl2_gla.bracket_basis(e, f) == {h: 1}
    assert sl2_gla.bracket_basis(f, e) == {h: -1}
    assert sl2_gla.bracket_basis(h, e) == {e: 2}
    assert sl2_gla.bracket_basis(e, h) == {e: -2}


def test_sl2_is_valid(sl2_gla):
    report = validate_gla(sl2_gla, require_closed_complement=False)
    assert report.ok
    assert report.total_checks > 0


def test_broken_jacobi_is_reported():
    report = validate_gla(broken_sl2().gla, require_closed_complement=False)
    assert not report.ok
    assert ("jacobi", 3, ["e", "h", "f"]) in failing_words(report)


def test_complement_closure(sl2_gla):
    report = validate_gla(sl2_gla)
    assert report.ok
    open_complement = sl2().with_splitting({"L": ["h"], "A": ["e", "f"]})
    assert validate_gla(open_complement, require_closed_complement=False).notes
    assert not validate_gla(open_complement).ok


def test_splitting_must_cover_basis():
    with pytest.raises(ValidationError):
        sl2().with_splitting({"L": ["e"], "A": ["h"]})


def test_inconsistent_bracket_entries():
    space = GradedSpace([("x", 0), ("y", 0)])
    with pytest.raises(ValidationError):
        GLA(space, {(0, 1): {1: 1}, (1, 0): {1: 1}})


def test_projection(sl2_gla):
    x = {0: Fraction(1), 1: Fraction(2), 2: Fraction(3)}
    assert sl2_gla.project(x) == {1: 2, 2: 3}
    assert sl2_gla.project_perp(x) == {0: 1}
    p, p_perp = projections(sl2_gla)
    assert p.apply(x) == sl2_gla.project(x)
    assert (p + p_perp) == LinearMap.identity(sl2_gla.space)


def test_apply_bracket(sl2_gla):
    space = sl2_gla.space
    value = apply_bracket(sl2_gla, space.vector({"e": 1}), space.vector({"f": 2}))
    assert value.coeffs == {1: 2}
    other = GradedSpace([("x", 0)])
    with pytest.raises(ValidationError):
        apply_bracket(sl2_gla, space.vector({"e": 1}), other.vector({"x": 1}))


def test_inner_derivation(sl2_gla):
    ad_h = inner_derivation(sl2_gla, sl2_gla.space.vector({"h": 1}), "ad_h")
    assert ad_h.degree == 0
    assert not ad_h.leibniz_violations()
    assert ad_h.preserves_L
    ad_f = inner_derivation(sl2_gla, sl2_gla.space.vector({"f": 1}), "ad_f")
    assert not ad_f.preserves_L


def test_derivation_bracket_is_inner(sl2_gla):
    space = sl2_gla.space
    ad_e = inner_derivation(sl2_gla, space.vector({"e": 1}))
    ad_f = inner_derivation(sl2_gla, space.vector({"f": 1}))
    ad_h = inner_derivation(sl2_gla, space.vector({"h": 1}))
    assert ad_e.bracket(ad_f).matrix == ad_h.matrix


def test_current_algebra_differential(aff1):
    g = aff1.gla
    assert g.space.names == ("h", "e", "h.u", "e.u")
    assert g.space.degrees == (0, 0, -1, -1)
    d = differential_derivation(g)
    assert d.apply({g.space.index("h.u"): Fraction(1)}) == {g.space.index("h"): 1}
    assert d.is_square_zero()
    assert not d.leibniz_violations()
    assert validate_gla(g).ok


def test_change_basis_rejects_dependent_vectors(aff1):
    g = aff1.gla
    basis = [("a", {0: Fraction(1)}), ("b", {0: Fraction(2)}), ("c", {2: Fraction(1)}), ("d", {3: Fraction(1)})]
    with pytest.raises(ValidationError, match="linearly dependent"):
        g.change_basis(basis)


def test_transport_differential_to_new_basis(aff1):
    sheared = aff1_sheared(aff1.gla)
    assert aff1.gla.transport_map(sheared, aff1.gla.differential) == sheared.differential


def test_sub_algebra_requires_closure(sl2_gla):
    with pytest.raises(ValidationError):
        sl2_gla.sub_algebra([0, 2])
    borel = sl2_gla.sub_algebra([0, 1], name="b")
    assert borel.dim == 2


def test_vector_arithmetic(sl2_gla):
    space = sl2_gla.space
    x = space.vector({"e": 1})
    y = space.vector({"f": "1/2"})
    assert (x + y).coeffs == {0: 1, 2: Fraction(1, 2)}
    assert (2 * y).coeffs == {2: 1}
    assert (x - x).is_zero
    assert (x + y).is_homogeneous()
    mixed = Vector(GradedSpace([("a", 0), ("b", 1)]), {0: 1, 1: 1})
    with pytest.raises(ValidationError):
        mixed.degree


def test_homology_of_acyclic_complex():
    space, d, _ = subcomplex_example()
    assert homology(space, d).total == 0


def test_homology_needs_square_zero():
    space = GradedSpace([("a", 0), ("b", 1), ("c", 2)])
    d = LinearMap(space, space, {0: {1: Fraction(1)}, 1: {2: Fraction(1)}}, 1)
    with pytest.raises(PreconditionError):
        homology(space, d)


def test_hypothesis_holds_on_split_current_algebra(aff1):
    result = check_homology_criterion(aff1.gla)
    assert result.injective and result.surjective and result.agree


def test_hypothesis_fails_on_witness(witness):
    result = check_homology_criterion(witness.gla)
    assert not result.injective
    assert not result.surjective
    assert result.agree
    assert result.witness is not None


def test_hypothesis_needs_differential(sl2_gla):
    with pytest.raises(PreconditionError):
        check_homology_criterion(sl2_gla)


def test_current_algebra_rejects_graded_base():
    base = GLA(GradedSpace([("x", 1)]), {})
    with pytest.raises(ValidationError):
        current_algebra(base, [("u", -1)])


@pytest.mark.parametrize("builder", [truncated_polynomials, matrix_algebra])
def test_associative_examples_validate(builder):
    assert builder().validate().ok


def test_every_jacobi_violation_is_listed():
    space = GradedSpace([(f"x{i}", 0) for i in range(9)])
    brackets = {(i, j): {(i + j) % 9: 1} for i in range(9) for j in range(i + 1, 9)}
    report = validate_gla(GLA(space, brackets), require_closed_complement=False)
    violations = report.failed[("jacobi", 3)]
    assert violations > 50
    assert len(report.checks) == sum(report.failed.values())
    assert len(failing_words(report, "jacobi")) == violations
