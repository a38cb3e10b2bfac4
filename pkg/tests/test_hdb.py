from fractions import Fraction

import pytest

from src.core.coalgebra import check_linfty, decalage
from src.core.error_handler import PreconditionError
from src.core.fixtures import (aff1_sheared, euler_operator, getzler_sl2, koszul_operators, matrix_algebra,
                               nonflat_derivation, random_coderivation, sl2, subcomplex_example,
                               truncated_polynomials)
from src.core.graded import Derivation, GradedSpace, differential_derivation, inner_derivation
from src.core.hdb import (adjoint_morphism, check_koszul_formulas, check_projection_morphism,
                          complement_isomorphism, first_brackets, getzler_brackets, inner_derivation_separation,
                          koszul_brackets, operator_order_bound, phi_derivation, phi_element,
                          phi_is_identity_on_coderivations, projection_morphism, subcomplex_brackets,
                          verify_theorem_hdb, voronov_brackets)

E, H, F = 0, 1, 2


def element(gla, **coeffs):
    return gla.space.vector(coeffs)


def test_constant_term_is_projection(sl2_gla):
    phi = phi_element(sl2_gla, element(sl2_gla, e=1, f=1), 2)
    assert phi.value_in_m(()) == {F: 1}


def test_brackets_of_element_in_l(sl2_gla):
    phi = phi_element(sl2_gla, element(sl2_gla, e=1), 2)
    # A positions: h = 0, f = 1
    assert phi.value_in_m((0,)) == {}
    assert phi.value_in_m((1,)) == {H: 1}
    assert phi.value_in_m((0, 1)) == {H: -1}
    assert phi.value_in_m((1, 1)) == {}


def test_brackets_of_element_in_complement(sl2_gla):
    phi = phi_element(sl2_gla, element(sl2_gla, f=1), 2)
    assert phi.value_in_m((0,)) == {F: 1}
    # the only term with the 1/12 weight survives here
    assert phi.value_in_m((0, 0)) == {F: Fraction(2, 3)}


def test_brackets_of_inner_derivation(sl2_gla):
    ad_e = inner_derivation(sl2_gla, element(sl2_gla, e=1), "ad_e")
    phi = phi_derivation(sl2_gla, ad_e, 2)
    assert phi.coder.is_reduced
    assert phi.value_in_m((1,)) == {H: 1}
    assert phi.value_in_m((0, 1)) == {H: -1}


def test_derivation_must_preserve_l(sl2_gla):
    ad_f = inner_derivation(sl2_gla, element(sl2_gla, f=1), "ad_f")
    with pytest.raises(PreconditionError):
        phi_derivation(sl2_gla, ad_f, 2)


def test_complement_must_be_closed():
    open_split = sl2().with_splitting({"L": ["h"], "A": ["e", "f"]})
    with pytest.raises(PreconditionError):
        phi_element(open_split, element(open_split, e=1), 2)


def test_written_out_brackets_agree(sl2_gla, sl2_fixture):
    sources = list(sl2_fixture.elements) + list(sl2_fixture.derivations)
    for source in sources:
        if isinstance(source, Derivation):
            phi = phi_derivation(sl2_gla, source, 2)
            arities = (1, 2)
        else:
            phi = phi_element(sl2_gla, source, 2)
            arities = (0, 1, 2)
        a = sl2_gla.A
        for arity in arities:
            for word in phi.a_space.canonical_words(arity):
                assert phi.value_in_m(word) == first_brackets(sl2_gla, source, tuple(a[k] for k in word))


def test_brackets_respect_brackets(sl2_fixture):
    report = verify_theorem_hdb(sl2_fixture.gla, sl2_fixture.elements, sl2_fixture.derivations, 2)
    assert report.ok
    assert report.total_checks > 0


def test_brackets_respect_brackets_on_current_algebra(sl2_current):
    report = verify_theorem_hdb(sl2_current.gla, sl2_current.elements, sl2_current.derivations, 2)
    assert report.ok


def test_differential_brackets_square_to_zero(sl2_current):
    g = sl2_current.gla
    d = differential_derivation(g)
    phi = phi_derivation(g.without_differential(), d, 3)
    assert check_linfty(phi.a_space, phi.coder, 3).ok


def test_nonflat_derivation_brackets_do_not_square_to_zero():
    fixture = nonflat_derivation()
    (ad_y,) = fixture.derivations
    assert not ad_y.is_square_zero()
    phi = phi_derivation(fixture.gla, ad_y, 3)
    assert not check_linfty(phi.a_space, phi.coder, 3).ok


def test_projection_morphism(aff1, sl2_current):
    for fixture in (aff1, sl2_current):
        report = check_projection_morphism(fixture.gla, differential_derivation(fixture.gla), 3)
        assert report.ok


def test_abelian_complement_reduces_to_single_brackets(aff1):
    g = aff1.gla.without_differential()
    for source in aff1.elements:
        phi = phi_element(g, source, 3)
        single = voronov_brackets(g, source, 3)
        for arity in range(0, 4):
            for word in phi.a_space.canonical_words(arity):
                assert phi.value(word) == single.value(word)


def test_single_brackets_need_abelian_complement(sl2_gla):
    with pytest.raises(PreconditionError):
        voronov_brackets(sl2_gla, element(sl2_gla, e=1), 2)


def test_inner_derivation_differs_from_element(sl2_gla):
    assert inner_derivation_separation(sl2_gla, element(sl2_gla, h=1), 3) == (1, ["f"])
    with pytest.raises(PreconditionError):
        inner_derivation_separation(sl2_gla, element(sl2_gla, e=1), 3)


def test_coderivations_are_their_own_brackets():
    import random

    space = GradedSpace([("v", 0), ("w", 1)], label="V")
    rng = random.Random(11)
    for degree in (1, 0, -1):
        r = random_coderivation(space, degree, 3, rng)
        assert phi_is_identity_on_coderivations(space, r, 3).ok


def test_adjoint_morphism(aff1):
    values, report = adjoint_morphism(decalage(aff1.gla), 2)
    assert report.ok
    assert values


@pytest.mark.parametrize("label", ["kills_unit", "moves_unit"])
def test_koszul_formulas_on_matrices(label):
    algebra = matrix_algebra()
    assert check_koszul_formulas(algebra, koszul_operators(algebra)[label], 2).ok


def test_koszul_brackets_of_multiplication_vanish():
    algebra = truncated_polynomials(3)
    times_x = algebra.left_multiplication(1)
    brackets = koszul_brackets(algebra, times_x, 2)
    assert brackets.value(()) == {1: 1}
    for word in brackets.a_space.canonical_words(1):
        assert brackets.value(word) == {}


@pytest.mark.parametrize("power,order", [(1, 1), (2, 2)])
def test_euler_operator_orders(power, order):
    algebra = truncated_polynomials(3)
    bound = operator_order_bound(algebra, euler_operator(algebra, power), 3, 3)
    assert bound.bound == order


def test_subcomplex_brackets():
    space, d, w = subcomplex_example()
    result = subcomplex_brackets(space, d, w, 3)
    assert result.report.ok


def test_getzler_closed_form():
    brackets, report = getzler_brackets(getzler_sl2().gla, 3)
    assert report.ok
    assert brackets.a_space.dim == 3


def test_change_of_complement(aff1):
    sheared = aff1_sheared(aff1.gla)
    report = complement_isomorphism(aff1.gla, sheared, differential_derivation(aff1.gla),
                                    differential_derivation(sheared), 2)
    assert report.ok


def test_projection_morphism_lands_in_l(aff1, sl2_gla):
    morphism, target = projection_morphism(aff1.gla, aff1.differential, 2)
    assert target.space.dim == len(aff1.gla.L)
    assert morphism.domain.dim == len(aff1.gla.A)
    ad_f = inner_derivation(sl2_gla, element(sl2_gla, f=1), "ad_f")
    with pytest.raises(PreconditionError):
        projection_morphism(sl2_gla, ad_f, 2)
