from fractions import Fraction

import pytest

from src.core.coalgebra import check_linfty
from src.core.cocone import (PolyForm, PolyFormAlgebra, check_cocylinder, check_fiber_model, check_polyform,
                             check_psi, classifying_morphism_is_strict, cocylinder_retraction, cocylinder_structure,
                             cone_change_of_basis, cylinder_transfer_oracle, fiber_cone, fiber_product_membership,
                             homotopy_replacement_diagram, inclusion_cone, inclusion_cylinder, model_fiber_product,
                             polyform_ops, psi_morphism)
from src.core.error_handler import PreconditionError, TruncationError, ValidationError
from src.core.fixtures import aff1_sheared, sl2
from src.core.graded import LinearMap, differential_derivation, inner_derivation
from src.core.transfer import validate_retraction


def test_cylinder_of_sl2(sl2_gla, sl2_fixture):
    cone = inclusion_cylinder(sl2_gla, 3)
    assert cone.space.dim == 3 + 1 + 3
    assert check_cocylinder(cone, 3).ok
    for d in sl2_fixture.derivations:
        assert check_psi(cone, d, 3).ok


def test_cocone_without_second_algebra(aff1):
    plain = aff1.gla.without_differential()
    cone = inclusion_cone(plain, [], plain.L, 3)
    assert cone.offsets[0] == cone.offsets[1] == 0
    assert check_cocylinder(cone, 3).ok


def test_cone_needs_sub_algebras(sl2_gla):
    with pytest.raises(PreconditionError):
        inclusion_cone(sl2_gla, [sl2_gla.space.index("e"), sl2_gla.space.index("f")], sl2_gla.L, 2)


def test_psi_needs_invariant_subalgebras(sl2_gla):
    cone = inclusion_cylinder(sl2_gla, 2)
    ad_f = inner_derivation(sl2_gla, sl2_gla.space.vector({"f": 1}), "ad_f")
    with pytest.raises(PreconditionError):
        psi_morphism(cone, ad_f)


def test_psi_of_odd_differential(aff1):
    cone = inclusion_cone(aff1.gla.without_differential(), aff1.n_indices, aff1.gla.L, 3)
    d = aff1.differential
    psi = psi_morphism(cone, d)
    assert psi.degree == 1
    assert check_psi(cone, d, 3).ok


def test_classifying_morphism_is_strict(aff1, sl2_current):
    assert classifying_morphism_is_strict(aff1.gla, [aff1.differential], 2).ok
    assert classifying_morphism_is_strict(sl2_current.gla, sl2_current.derivations[:2], 2).ok


@pytest.mark.parametrize("with_n", [False, True])
def test_fiber_model(aff1, with_n):
    n_indices = aff1.n_indices if with_n else []
    model, report = check_fiber_model(aff1.gla, n_indices, aff1.differential, 2)
    assert report.ok
    assert model.small.space.dim == len(n_indices) + len(aff1.gla.A)


def test_fiber_model_of_nonabelian_complement(sl2_current):
    _, report = check_fiber_model(sl2_current.gla, sl2_current.n_indices, sl2_current.differential, 2)
    assert report.ok


def test_fiber_model_of_unit_complement(aff1):
    model = model_fiber_product(aff1.gla, [], aff1.differential, 3)
    assert check_linfty(model.small.space, model.small.Q, 3).ok


def test_fiber_model_needs_a_differential(sl2_gla):
    ad_e = inner_derivation(sl2_gla, sl2_gla.space.vector({"e": 1}), "ad_e")
    with pytest.raises(PreconditionError):
        fiber_cone(sl2_gla, [], ad_e, 2)


def test_replacement_diagram(aff1, witness):
    for fixture in (aff1, witness):
        diagram, report = homotopy_replacement_diagram(fixture.gla, fixture.differential, 2)
        assert report.ok, report.summary()
        assert diagram.l_algebra.space.dim == len(fixture.gla.L)


def test_change_of_complement_on_cones(aff1):
    gla1 = aff1.gla
    gla2 = aff1_sheared(gla1)
    model1 = model_fiber_product(gla1, [], aff1.differential, 2)
    model2 = model_fiber_product(gla2, [], differential_derivation(gla2), 2)
    iso = cone_change_of_basis(model1.cone, model2.cone, gla1, gla2)
    assert iso.linear_part().columns
    with pytest.raises(PreconditionError):
        cone_change_of_basis(model1.cone, model2.cone, gla1, gla1)


def test_polynomial_forms():
    base = sl2().with_splitting({"L": ["e"], "A": ["h", "f"]})
    poly = PolyFormAlgebra(base, 2)
    assert check_polyform(poly).ok
    e = {base.space.index("e"): 1}
    t_e = PolyForm(base, {1: e})
    assert poly.evaluate(t_e, 0) == {}
    assert poly.evaluate(t_e, 1) == e
    with pytest.raises(TruncationError):
        poly.index(4, 0, 0)
    with pytest.raises(ValidationError):
        PolyFormAlgebra(base, -1)


def test_fiber_product_membership():
    base = sl2().with_splitting({"L": ["e"], "A": ["h", "f"]})
    poly = polyform_ops(base, 1)
    e = base.space.index("e")
    l_gla = base.sub_algebra([e], name="L")
    f = LinearMap(l_gla.space, base.space, {0: {e: Fraction(1)}})
    g = LinearMap.identity(base.space)
    path = PolyForm(base, {1: {e: 1}})
    assert fiber_product_membership(poly, {0: Fraction(1)}, {}, path, f, g)
    assert not fiber_product_membership(poly, {0: Fraction(1)}, {e: Fraction(1)}, path, f, g)
    with pytest.raises(ValidationError):
        fiber_product_membership(poly, {}, {}, path, f, LinearMap.identity(l_gla.space))


def test_cylinder_transfer_oracle(sl2_gla):
    cone = inclusion_cylinder(sl2_gla, 2)
    report = cylinder_transfer_oracle(cone.n_gla, cone.l_gla, sl2_gla, cone.g, cone.f, 2)
    assert report.ok
    assert report.data["t_degree"]["reached"] <= report.data["t_degree"]["bound"]


def test_cocylinder_needs_dgla_morphisms(sl2_gla):
    cone = inclusion_cylinder(sl2_gla, 2)
    with pytest.raises(ValidationError):
        cocylinder_structure(cone.n_gla, cone.l_gla, sl2_gla, cone.g.scaled(2), cone.f, 2)
    rebuilt = cocylinder_structure(cone.n_gla, cone.l_gla, sl2_gla, cone.g, cone.f, 2)
    assert rebuilt.space.dim == cone.space.dim


def test_cocylinder_retraction_identities(sl2_gla):
    cone = inclusion_cylinder(sl2_gla, 2)
    retraction = cocylinder_retraction(cone.n_gla, cone.l_gla, sl2_gla, cone.g, cone.f, 1, cone)
    assert validate_retraction(retraction.data).ok
