from fractions import Fraction

import pytest

from src.core.coalgebra import check_ideal, check_morphism, decalage
from src.core.error_handler import PreconditionError, ValidationError
from src.core.fixtures import get_fixture, sl2
from src.core.graded import LinearMap, inner_derivation
from src.core.hdb import phi_derivation, phi_element
from src.core.models import Report
from src.core.suites import Subject, mis_signed_bernoulli, transfer_check
from src.core.transfer import (RetractionData, build_derivation_cylinder_retraction, check_generalized_first_bracket,
                               check_transfer_oracle, check_transfer_fixed_points, check_weak_equivalence,
                               generalized_brackets_via_transfer, perturbed_projection, twisted_cone_retraction,
                               transfer, trivial_retraction, validate_retraction)
from src.core.verification import compare_coderivations


@pytest.fixture
def sl2_decalage(sl2_gla):
    return decalage(sl2_gla)


def test_trivial_retraction_reproduces_structure(sl2_decalage):
    q = sl2_decalage.Q
    data = trivial_retraction(sl2_decalage.space, q.linear_part())
    assert validate_retraction(data).ok
    assert data.satisfies_side_conditions()
    result = transfer(q, data, 3)
    report = Report(command="transfer-check")
    assert compare_coderivations(report, "trivial", result.R, q, range(1, 4))
    assert check_transfer_fixed_points(result, q, 3).ok


def test_perturbed_projection_of_trivial_retraction(sl2_decalage):
    q = sl2_decalage.Q
    data = trivial_retraction(sl2_decalage.space, q.linear_part())
    g = perturbed_projection(q, data, 3)
    assert check_morphism(g, q, q, 3).ok
    for word in sl2_decalage.space.canonical_words(2):
        assert g.value(word) == {}


def test_retraction_maps_are_typed(sl2_decalage):
    space = sl2_decalage.space
    identity = LinearMap.identity(space)
    q1 = sl2_decalage.Q.linear_part()
    with pytest.raises(ValidationError):
        RetractionData(space, space, q1, q1, identity, identity, LinearMap.zero(space, space, 0))


def test_broken_retraction_is_reported(sl2_decalage):
    space = sl2_decalage.space
    q1 = sl2_decalage.Q.linear_part()
    data = RetractionData(space, space, q1, q1, LinearMap.zero(space, space, 0), LinearMap.identity(space),
                          LinearMap.zero(space, space, -1))
    report = validate_retraction(data)
    assert not report.ok
    assert {c.identity for c in report.checks} >= {"pi_f1", "homotopy"}


def test_inconsistent_linear_part(aff1):
    v = decalage(aff1.gla)
    data = trivial_retraction(v.space, LinearMap.zero(v.space, v.space, 1))
    with pytest.raises(PreconditionError):
        transfer(v.Q, data, 2)


def test_weak_equivalence(aff1):
    v = decalage(aff1.gla)
    assert check_weak_equivalence(trivial_retraction(v.space, v.Q.linear_part())).ok


@pytest.mark.parametrize("name", ["aff1-split", "sl2-split"])
def test_transfer_oracle_on_shipped_fixtures(name):
    fixture = get_fixture(name)
    report = check_transfer_oracle(fixture.gla, [fixture.differential], 2, check_structure=True)
    assert report.ok
    assert report.data["dimensions"]["small"] == 1 + fixture.gla.dim + len(fixture.gla.A)


def test_transfer_oracle_without_derivations(sl2_gla):
    assert check_transfer_oracle(sl2_gla, [], 3).ok


def test_extended_cylinder_is_an_extension(aff1):
    sec = build_derivation_cylinder_retraction(aff1.gla, [aff1.differential], 3)
    assert sec.n_der == 1
    assert sec.retraction.satisfies_side_conditions()
    assert check_ideal(sec.big, sec.n_der, 3).ok


def test_selection_must_preserve_l(sl2_gla):
    ad_f = inner_derivation(sl2_gla, sl2_gla.space.vector({"f": 1}), "ad_f")
    with pytest.raises(PreconditionError):
        build_derivation_cylinder_retraction(sl2_gla, [ad_f], 2)


def test_mis_signed_bernoulli_is_caught_from_arity_three():
    subject = Subject.from_fixture(get_fixture("sl2-split"))
    assert transfer_check(subject, 2, mis_signed_bernoulli).ok
    assert not transfer_check(subject, 3, mis_signed_bernoulli).ok
    assert transfer_check(subject, 3).ok


def test_transfer_check_needs_closed_complement():
    g = sl2().with_splitting({"L": ["h"], "A": ["e", "f"]})
    with pytest.raises(PreconditionError):
        transfer_check(Subject("open", g, [], []), 2)


def test_transferred_brackets_match_closed_forms(sl2_fixture, sl2_gla):
    e = sl2_gla.space.vector({"e": 1})
    via_transfer = generalized_brackets_via_transfer(sl2_gla, e, 2)
    closed = phi_element(sl2_gla, e, 2)
    assert via_transfer.value_in_m((0, 1)) == {1: -1}
    for arity in range(0, 3):
        for word in closed.a_space.canonical_words(arity):
            assert via_transfer.value(word) == closed.value(word)

    ad_e = sl2_fixture.derivations[1]
    via_transfer = generalized_brackets_via_transfer(sl2_gla, ad_e, 2)
    closed = phi_derivation(sl2_gla, ad_e, 2)
    for arity in (1, 2):
        for word in closed.a_space.canonical_words(arity):
            assert via_transfer.value(word) == closed.value(word)


def test_first_bracket_for_open_complement():
    g = sl2().with_splitting({"L": ["h"], "A": ["e", "f"]})
    for coeffs in ({"e": 1, "f": 1}, {"h": 1}, {"e": Fraction(1, 2), "h": 3}):
        assert check_generalized_first_bracket(g, g.space.vector(coeffs)).ok


def test_cone_retraction(aff1):
    gla = aff1.gla
    data = twisted_cone_retraction(gla, aff1.n_indices, aff1.differential)
    assert data.satisfies_side_conditions()
    assert validate_retraction(data).ok
    assert data.small.dim == len(aff1.n_indices) + len(gla.A)


def test_cone_retraction_needs_invariant_n(aff1):
    with pytest.raises(PreconditionError):
        twisted_cone_retraction(aff1.gla, [aff1.gla.space.index("h.u")], aff1.differential)
