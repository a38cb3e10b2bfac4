import random
from fractions import Fraction

import pytest

from src.core.coalgebra import (CoalgMorphism, Coderivation, TableMap, check_linfty, check_morphism,
                                compose_morphisms, coproduct_check, corestrict, curvature, decalage, decalage_morphism,
                                evaluate_at_unit, extension_from_morphism, identity_morphism, is_maurer_cartan,
                                morphism_from_extension, normalize_word, nr_bracket, nr_product, push_mc, reconstruct,
                                reconstruct_morphism, reduced_part, sigma_section, twist_structure)
from src.core.error_handler import PreconditionError, TruncationError, ValidationError
from src.core.fixtures import broken_sl2, getzler_sl2, nonflat_derivation, random_coderivation
from src.core.graded import GLA, GradedSpace, LinearMap
from src.core.models import Flavor, Report
from src.core.verification import compare_coderivations, compare_morphisms


@pytest.fixture
def small_space():
    return GradedSpace([("v", 0), ("w", 1)], label="V")


def test_reduced_coderivation_rejects_constant_term(small_space):
    table = {0: TableMap(0, 1, {(): {1: Fraction(1)}})}
    with pytest.raises(ValidationError):
        Coderivation(small_space, 1, table, flavor=Flavor.REDUCED)


def test_window_is_enforced(small_space):
    q = Coderivation.from_rule(small_space, 1, lambda word: {}, max_arity=2)
    assert q.value((0, 0)) == {}
    with pytest.raises(TruncationError):
        q.value((0, 0, 0))


def test_bracket_with_itself_of_even_coderivation_vanishes(small_space):
    r = random_coderivation(small_space, 0, 2, random.Random(3))
    bracket = nr_bracket(r, r)
    for arity in range(0, 3):
        for word in small_space.canonical_words(arity):
            assert bracket.value(word) == {}


def test_sigma_section_brackets_to_insertion(small_space):
    """[Q, sigma_v] evaluated at the unit is q_1(v) for a reduced Q"""
    q = Coderivation.from_rule(small_space, 1, lambda word: {1: Fraction(1)} if word == (0,) else {},
                               top_arity=1)
    sigma = sigma_section(small_space, small_space.basis_vector("v"))
    bracket = nr_bracket(q.as_unreduced(), sigma)
    assert bracket.value(()) == {1: 1}


def test_decalage_is_linfty(sl2_gla):
    model = decalage(sl2_gla, "sl2")
    assert model.space.names[0] == "s^-1(e)"
    assert model.Q.top_arity == 2
    assert check_linfty(model.space, model.Q, 3).ok


def test_decalage_of_current_algebra(aff1):
    model = decalage(aff1.gla)
    space = model.space
    # q_1(s^-1 h.u) = -s^-1 h
    assert model.Q.value((space.index("s^-1(h.u)"),)) == {space.index("s^-1(h)"): -1}
    assert check_linfty(space, model.Q, 3).ok


def test_broken_algebra_fails_linfty():
    model = decalage(broken_sl2().gla)
    report = check_linfty(model.space, model.Q, 3)
    assert not report.ok
    assert {arity for _, arity in report.failed} == {3}
    assert report.passed[("QQ", 2)] > 0


def test_identity_morphism(sl2_gla):
    model = decalage(sl2_gla)
    identity = identity_morphism(model.space)
    assert check_morphism(identity, model.Q, model.Q, 3).ok
    composite = compose_morphisms(identity, identity)
    assert composite.value((0,)) == {0: 1}
    assert composite.value((0, 1)) == {}


def test_composed_morphism_respects_coproduct(small_space):
    def rule(word):
        if len(word) == 1:
            return {word[0]: Fraction(1)}
        if word == (0, 0):
            return {0: Fraction(1)}
        return {}

    f = CoalgMorphism.from_rule(small_space, small_space, rule, top_arity=2)
    g = compose_morphisms(f, f)
    assert coproduct_check(g, 3).ok
    assert g.value((0, 0)) == {0: 2}


def test_strict_morphism_needs_degree_zero(small_space):
    with pytest.raises(ValidationError):
        CoalgMorphism.strict(LinearMap(small_space, small_space, {0: {1: Fraction(1)}}, 1))


def test_degree_one_elements_are_maurer_cartan():
    g = getzler_sl2().gla
    model = decalage(g)
    x = model.space.vector({"s^-1(e.w)": 1, "s^-1(f.w)": 2})
    assert is_maurer_cartan(model, x)
    twisted = twist_structure(model, x)
    assert check_linfty(twisted.space, twisted.Q, 3).ok


def test_curvature_of_self_bracketing_element():
    g = nonflat_derivation().gla
    model = decalage(g)
    x = model.space.vector({"s^-1(y)": 1})
    assert curvature(model, x).coeffs == {model.space.index("s^-1(z)"): Fraction(-1, 2)}
    with pytest.raises(PreconditionError):
        twist_structure(model, x)


def test_maurer_cartan_needs_degree_zero(sl2_gla):
    model = decalage(sl2_gla)
    with pytest.raises(PreconditionError):
        curvature(model, model.space.vector({"s^-1(e)": 1}))


def test_push_forward_along_identity():
    model = decalage(getzler_sl2().gla)
    x = model.space.vector({"s^-1(h.w)": 1})
    assert push_mc(identity_morphism(model.space), x) == x


def test_inclusion_of_sub_dgla_is_strict_morphism(aff1):
    gla = aff1.gla
    l_gla = gla.sub_algebra(gla.L, name="L")
    inclusion = LinearMap(l_gla.space, gla.space, {k: {x: Fraction(1)} for k, x in enumerate(gla.L)})
    source, target = decalage(l_gla), decalage(gla)
    f = decalage_morphism(inclusion, source, target)
    assert check_morphism(f, source.Q, target.Q, 3).ok
    with pytest.raises(ValidationError):
        decalage_morphism(inclusion, target, target)


def test_taylor_coefficients_rebuild_the_coderivation(aff1):
    q = decalage(aff1.gla).Q
    coeffs = corestrict(q)
    assert [m.arity for m in coeffs] == [0, 1, 2]
    rebuilt = reconstruct(coeffs, Flavor.REDUCED, q.space)
    report = Report(command="check")
    assert compare_coderivations(report, "rebuilt", rebuilt, q, range(1, 3))
    assert report.ok


def test_reconstruct_rejects_mixed_degrees(small_space):
    with pytest.raises(ValidationError):
        reconstruct([None, TableMap(1, 0), TableMap(2, 1)], Flavor.REDUCED, small_space)


def test_reconstructed_linear_morphism(small_space):
    f1 = TableMap(1, 0, {(i,): {i: Fraction(1)} for i in range(small_space.dim)})
    f = reconstruct_morphism([f1, None, None], small_space, small_space)
    assert coproduct_check(f, 3).ok
    assert compare_morphisms(Report(command="check"), "identity", f, identity_morphism(small_space), range(1, 4))


def test_normalize_word_sorts_with_koszul_sign(small_space):
    odd = GradedSpace([("a", 1), ("b", 1)])
    assert normalize_word([1, 0], odd) == ((0, 1), -1)
    assert normalize_word([1, 0], small_space) == ((0, 1), 1)
    assert normalize_word([1, 1], small_space) is None
    with pytest.raises(ValidationError):
        normalize_word([2], small_space)


def test_unit_evaluation_and_product_with_section(small_space):
    v = small_space.basis_vector("v")
    sigma = sigma_section(small_space, v)
    assert evaluate_at_unit(sigma) == v
    q = Coderivation.from_rule(small_space, 1, lambda word: {1: Fraction(1)} if word == (0,) else {},
                               top_arity=1).as_unreduced()
    assert nr_product(q, sigma).value(()) == {1: 1}
    assert nr_product(sigma, q).value(()) == {}
    with pytest.raises(PreconditionError):
        evaluate_at_unit(Coderivation.zero(small_space, 1))
    with pytest.raises(ValidationError):
        nr_product(q, sigma_section(GradedSpace([("x", 0)]), GradedSpace([("x", 0)]).basis_vector("x")))


def test_extension_round_trip():
    # <e> is an ideal of aff(1) and sits last in the basis
    gla = GLA(GradedSpace([("h", 0), ("e", 0)]), {(0, 1): {1: 1}}, name="aff1")
    theta = decalage(gla)
    base, fiber, data = morphism_from_extension(theta, 1)
    rebuilt = extension_from_morphism(base, fiber, data, top_arity=2)
    for arity in (1, 2):
        for word in theta.space.canonical_words(arity):
            assert rebuilt.Q.value(word) == theta.Q.value(word)
    assert check_linfty(rebuilt.space, rebuilt.Q, 3).ok


@pytest.fixture
def mixed_space():
    return GradedSpace([("v", 0), ("w", 1), ("z", -1)], label="V")


def random_triples(space, seeds=range(6)):
    for seed in seeds:
        rng = random.Random(seed)
        yield [random_coderivation(space, rng.choice([-1, 0, 1]), 2, rng) for _ in range(3)]


def reduced_random(space, degree, rng):
    q = random_coderivation(space, degree, 2, rng)
    return Coderivation(space, degree, {a: m for a, m in q.coefficients.items() if a > 0},
                        flavor=Flavor.REDUCED, top_arity=2)


def koszul(a, b):
    return -1 if (a.degree % 2 and b.degree % 2) else 1


def associator(q, r, s):
    return nr_product(nr_product(q, r), s) - nr_product(q, nr_product(r, s))


def test_nr_product_is_pre_lie(mixed_space):
    report = Report(command="check")
    for q, r, s in random_triples(mixed_space):
        compare_coderivations(report, "pre_lie", associator(q, r, s),
                              associator(q, s, r).scaled(koszul(r, s)), range(0, 3))
    assert report.ok
    assert report.total_checks > 0


def test_nr_bracket_is_graded_antisymmetric(mixed_space):
    report = Report(command="check")
    for q, r, _ in random_triples(mixed_space):
        compare_coderivations(report, "antisymmetry", nr_bracket(q, r),
                              nr_bracket(r, q).scaled(-koszul(q, r)), range(0, 3))
    assert report.ok


def test_nr_bracket_satisfies_jacobi(mixed_space):
    report = Report(command="check")
    for q, r, s in random_triples(mixed_space):
        lhs = nr_bracket(q, nr_bracket(r, s))
        rhs = nr_bracket(nr_bracket(q, r), s) + nr_bracket(r, nr_bracket(q, s)).scaled(koszul(q, r))
        compare_coderivations(report, "jacobi", lhs, rhs, range(0, 3))
    assert report.ok


def test_embedding_of_reduced_coderivations_is_a_lie_map(mixed_space):
    rng = random.Random(17)
    report = Report(command="check")
    for degree_a, degree_b in [(1, 0), (1, 1), (-1, 1)]:
        a, b = reduced_random(mixed_space, degree_a, rng), reduced_random(mixed_space, degree_b, rng)
        reduced_then_embedded = nr_bracket(a, b).as_unreduced()
        assert not reduced_then_embedded.is_reduced
        compare_coderivations(report, "lie_map", reduced_then_embedded,
                              nr_bracket(a.as_unreduced(), b.as_unreduced()), range(0, 4))
    assert report.ok


def test_unit_evaluation_kernel_is_the_embedded_reduced_part(mixed_space):
    for seed in range(4):
        rng = random.Random(seed)
        assert evaluate_at_unit(reduced_random(mixed_space, 1, rng).as_unreduced()).is_zero
        q = random_coderivation(mixed_space, 1, 2, rng)
        unit_value = evaluate_at_unit(q)
        kernel = q - sigma_section(mixed_space, unit_value) if not unit_value.is_zero else q
        assert evaluate_at_unit(kernel).is_zero
        report = Report(command="check")
        compare_coderivations(report, "exactness", reduced_part(kernel).as_unreduced(), kernel, range(0, 3))
        assert report.ok
    with pytest.raises(PreconditionError):
        reduced_part(sigma_section(mixed_space, mixed_space.basis_vector("w")))
