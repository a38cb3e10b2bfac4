"""
Polynomial forms on the line, mapping cocylinders and cocones of dgla morphisms, and the
finite models of homotopy fiber products of sub-dglas N, L of M with a splitting.

Cone spaces are laid out as s^-1 N (tag "n") | s^-1 L (tag "l") | M (tag "m"); the models
of fiber products live on s^-1 N (tag "n") | A (tag "a").
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Any

import sympy

from .coalgebra import (Coderivation, CoalgMorphism, LInftyAlgebra, Word, check_linfty, check_morphism,
                        compose_morphisms, decalage, morphism_from_extension, nr_bracket, restrict_coderivation,
                        restrict_morphism, twist_morphism, twist_structure)
from .error_handler import PreconditionError, TruncationError, ValidationError
from .graded import (GLA, GradedSpace, LinearMap, Derivation, Vector, Vec, vec_add, vec_scale,
                     vec_to_json, column_to_vec, signed_permutations, homology_map_is_iso)
from .hdb import phi_derivation, phi_element, projection_morphism, require_closed_complement, preserves_l
from .models import Flavor, Report
from .scalars import bernoulli_first
from .transfer import (RetractionData, build_derivation_cylinder_retraction, nested_perp_sum,
                       closed_form_structure, twisted_projection_morphism, twisted_cone_retraction, transfer,
                       validate_retraction)
from .verification import default_manager

logger = logging.getLogger(__name__)

Bernoulli = Callable[[int], Fraction]


# ---------------------------------------------------------------------------
# polynomial forms

@dataclass
class PolyForm:
    """sum_k t^k (x) terms0[k] + sum_k t^k dt (x) terms1[k] with coefficients in M"""
    base: GLA
    terms0: Dict[int, Vec] = field(default_factory=dict)
    terms1: Dict[int, Vec] = field(default_factory=dict)

    def __post_init__(self):
        self.terms0 = {k: dict(v) for k, v in self.terms0.items() if v}
        self.terms1 = {k: dict(v) for k, v in self.terms1.items() if v}

    @property
    def is_zero(self) -> bool:
        return not self.terms0 and not self.terms1

    @property
    def t_degree(self) -> int:
        return max(list(self.terms0) + list(self.terms1), default=-1)

    def _combine(self, other: "PolyForm", scale) -> "PolyForm":
        terms0 = {k: dict(v) for k, v in self.terms0.items()}
        terms1 = {k: dict(v) for k, v in self.terms1.items()}
        for k, v in other.terms0.items():
            vec_add(terms0.setdefault(k, {}), v, scale)
        for k, v in other.terms1.items():
            vec_add(terms1.setdefault(k, {}), v, scale)
        return PolyForm(self.base, terms0, terms1)

    def __add__(self, other: "PolyForm") -> "PolyForm":
        return self._combine(other, 1)

    def __sub__(self, other: "PolyForm") -> "PolyForm":
        return self._combine(other, -1)

    def scaled(self, scale) -> "PolyForm":
        return PolyForm(self.base, {k: vec_scale(v, scale) for k, v in self.terms0.items()},
                        {k: vec_scale(v, scale) for k, v in self.terms1.items()})

    def __eq__(self, other) -> bool:
        return isinstance(other, PolyForm) and self.terms0 == other.terms0 and self.terms1 == other.terms1

    def to_json(self) -> Dict[str, Any]:
        space = self.base.space
        return {
            "t": [{"power": k, "value": vec_to_json(space, v)} for k, v in sorted(self.terms0.items())],
            "t_dt": [{"power": k, "value": vec_to_json(space, v)} for k, v in sorted(self.terms1.items())],
        }


class PolyFormAlgebra:
    """
    M[t, dt] with t-degree bounded by `t_degree` on dt-terms; dt-free terms run to
    t^(t_degree + 1), the image of t^t_degree dt under integration. Brackets leaving
    that range raise TruncationError.
    """

    def __init__(self, base: GLA, t_degree: int):
        if t_degree < 0:
            raise ValidationError("t-degree bound must be nonnegative")
        self.base = base
        self.t_degree = t_degree
        self.name = f"{base.name}[t,dt]"
        dim = base.dim
        self._dim = dim
        self._free_top = t_degree + 1
        basis = []
        for k in range(self._free_top + 1):
            basis.extend((f"t^{k}*{name}", degree) for name, degree in base.space.basis)
        for k in range(t_degree + 1):
            basis.extend((f"t^{k}dt*{name}", degree + 1) for name, degree in base.space.basis)
        self.space = GradedSpace(basis, label=self.name)
        self._dt_offset = (self._free_top + 1) * dim

    # basis bookkeeping -------------------------------------------------

    def index(self, power: int, dt: int, x: int) -> int:
        top = self._free_top if not dt else self.t_degree
        if power > top:
            raise TruncationError(f"Form of t-degree {power} outside the bound {top}")
        return (self._dt_offset if dt else 0) + power * self._dim + x

    def decode(self, index: int) -> Tuple[int, int, int]:
        dt = 1 if index >= self._dt_offset else 0
        local = index - self._dt_offset if dt else index
        return local // self._dim, dt, local % self._dim

    def to_vec(self, form: PolyForm) -> Vec:
        result: Vec = {}
        for dt, terms in ((0, form.terms0), (1, form.terms1)):
            for k, value in terms.items():
                for x, c in value.items():
                    result[self.index(k, dt, x)] = c
        return result

    # operations --------------------------------------------------------

    def differential(self, form: PolyForm) -> PolyForm:
        """d(t^k (x) m) = k t^(k-1) dt (x) m + t^k (x) dm, d(t^k dt (x) m) = -t^k dt (x) dm"""
        d = self.base.apply_differential
        terms0: Dict[int, Vec] = {}
        terms1: Dict[int, Vec] = {}
        for k, m in form.terms0.items():
            if k > 0:
                vec_add(terms1.setdefault(k - 1, {}), m, k)
            vec_add(terms0.setdefault(k, {}), d(m))
        for k, m in form.terms1.items():
            vec_add(terms1.setdefault(k, {}), d(m), -1)
        return PolyForm(self.base, terms0, terms1)

    def bracket(self, left: PolyForm, right: PolyForm) -> PolyForm:
        """[a1 (x) l1, a2 (x) l2] = (-1)^{|l1||a2|} a1 a2 (x) [l1, l2]"""
        br = self.base.bracket
        parities = self.base.space.parities
        terms0: Dict[int, Vec] = {}
        terms1: Dict[int, Vec] = {}
        for a, x in left.terms0.items():
            for b, y in right.terms0.items():
                vec_add(terms0.setdefault(a + b, {}), br(x, y))
            for b, y in right.terms1.items():
                for i, c in x.items():
                    sign = -1 if parities[i] else 1
                    vec_add(terms1.setdefault(a + b, {}), br({i: c}, y), sign)
        for a, x in left.terms1.items():
            for b, y in right.terms0.items():
                vec_add(terms1.setdefault(a + b, {}), br(x, y))
        return PolyForm(self.base, terms0, terms1)

    def evaluate(self, form: PolyForm, s) -> Vec:
        """e_s: t = s, dt = 0"""
        s = Fraction(s)
        result: Vec = {}
        for k, m in form.terms0.items():
            vec_add(result, m, s ** k)
        return result

    def integrate(self, form: PolyForm) -> Vec:
        """integral over [0, 1]"""
        result: Vec = {}
        for k, m in form.terms1.items():
            vec_add(result, m, Fraction(1, k + 1))
        return result

    def integrate_to_t(self, form: PolyForm) -> PolyForm:
        """integral from 0 to t"""
        return PolyForm(self.base, {k + 1: vec_scale(m, Fraction(1, k + 1)) for k, m in form.terms1.items()})

    def homotopy(self, form: PolyForm) -> PolyForm:
        """integral from 0 to t minus t times the integral over [0, 1]"""
        partial = self.integrate_to_t(form)
        return partial - PolyForm(self.base, {1: self.integrate(form)})

    # model interface for decalage -------------------------------------

    def basis_form(self, index: int) -> PolyForm:
        k, dt, x = self.decode(index)
        terms = {k: {x: Fraction(1)}}
        return PolyForm(self.base, {} if dt else terms, terms if dt else {})

    def bracket_basis(self, i: int, j: int) -> Vec:
        return self.to_vec(self.bracket(self.basis_form(i), self.basis_form(j)))

    def differential_basis(self, index: int) -> Vec:
        return self.to_vec(self.differential(self.basis_form(index)))


def polyform_ops(base: GLA, t_degree: int) -> PolyFormAlgebra:
    """Differential, bracket, evaluation and both integrations on M[t, dt] up to `t_degree`"""
    poly = PolyFormAlgebra(base, t_degree)
    logger.debug(f"Forms over {base.name!r}: {poly.space.dim} basis forms up to t^{t_degree + 1}")
    return poly


def fiber_product_membership(poly: PolyFormAlgebra, l: Vec, n: Vec, m: PolyForm, f: LinearMap,
                             g: LinearMap) -> bool:
    """(l, n, m) lies in L x_M M[t, dt] x_M N exactly when m(0) = g(n) and m(1) = f(l)"""
    if f.target != poly.base.space or g.target != poly.base.space:
        raise ValidationError("Fiber product maps must land in the algebra of the forms")
    return poly.evaluate(m, 0) == g.apply(n) and poly.evaluate(m, 1) == f.apply(l)


def check_polyform(poly: PolyFormAlgebra) -> Report:
    """d^2 = 0, e_0 and e_1 are dgla morphisms, and Stokes: int d w + d int w = e_1 w - e_0 w"""
    report = Report(command="cocone")
    base = poly.base
    space = poly.space
    mgr = default_manager
    for index in range(space.dim):
        form = poly.basis_form(index)
        name = [space.names[index]]
        dd = poly.differential(poly.differential(form))
        report.record("polyform_d_squared", 1, name, dd.to_json(), [], passed=dd.is_zero)
        lhs = poly.integrate(poly.differential(form))
        vec_add(lhs, base.apply_differential(poly.integrate(form)))
        rhs = poly.evaluate(form, 1)
        vec_add(rhs, poly.evaluate(form, 0), -1)
        mgr.compare_vectors(report, "polyform_stokes", base.space, 1, name, lhs, rhs)
        for s in (0, 1):
            mgr.compare_vectors(report, f"polyform_e{s}_chain", base.space, 1, name,
                                poly.evaluate(poly.differential(form), s),
                                base.apply_differential(poly.evaluate(form, s)))
    half = poly.t_degree // 2
    small = [i for i in range(space.dim) if poly.decode(i)[0] <= half]
    for a, i in enumerate(small):
        for j in small[a:]:
            bracket = poly.bracket(poly.basis_form(i), poly.basis_form(j))
            for s in (0, 1):
                mgr.compare_vectors(report, f"polyform_e{s}_bracket", base.space, 2,
                                    [space.names[i], space.names[j]], poly.evaluate(bracket, s),
                                    base.bracket(poly.evaluate(poly.basis_form(i), s),
                                                 poly.evaluate(poly.basis_form(j), s)))
    return report


# ---------------------------------------------------------------------------
# cocylinders and cocones

@dataclass
class ConeStructure:
    """L-infinity[1] structure on s^-1 N x s^-1 L x M for dgla morphisms g: N -> M, f: L -> M"""
    n_gla: GLA
    l_gla: GLA
    m_gla: GLA
    g: LinearMap
    f: LinearMap
    algebra: LInftyAlgebra
    offsets: Tuple[int, int, int]
    n_indices: Optional[List[int]] = None
    l_indices: Optional[List[int]] = None

    @property
    def space(self) -> GradedSpace:
        return self.algebra.space

    @property
    def Q(self) -> Coderivation:
        return self.algebra.Q

    def slot(self, index: int) -> Tuple[str, int]:
        n_off, l_off, m_off = self.offsets
        if index < l_off:
            return "n", index - n_off
        if index < m_off:
            return "l", index - l_off
        return "m", index - m_off

    def to_json(self, max_arity: Optional[int] = None) -> Dict[str, Any]:
        return {"structure": self.Q.to_json(max_arity), "basis": [{"name": n, "degree": d}
                                                                  for n, d in self.space.basis]}


def cone_layout(n_space: GradedSpace, l_space: GradedSpace, m_space: GradedSpace) -> Tuple[GradedSpace, List[int]]:
    return GradedSpace.direct_sum([n_space.shifted("n"), l_space.shifted("l"), m_space.tagged("m")], label="cone")


def _check_dgla_morphism(phi: LinearMap, source: GLA, target: GLA, name: str):
    if phi.source != source.space or phi.target != target.space or phi.degree != 0:
        raise ValidationError(f"{name} must be a degree-0 map {source.name} -> {target.name}")
    for i in range(source.dim):
        if phi.apply(source.differential_basis(i)) != target.apply_differential(phi.column(i)):
            raise ValidationError(f"{name} does not commute with the differentials on {source.space.names[i]}")
        for j in range(i, source.dim):
            if phi.apply(source.bracket_basis(i, j)) != target.bracket(phi.column(i), phi.column(j)):
                raise ValidationError(
                    f"{name} does not respect [{source.space.names[i]}, {source.space.names[j]}]")


def _nested_sum(gla: GLA, seed: Vec, inputs: Sequence[int]) -> Vec:
    """sum over sigma of eps [..[seed, m_s1].., m_si]"""
    parities = gla.space.parities
    total: Vec = {}
    for order, sign in signed_permutations(tuple(parities[x] for x in inputs)):
        chain = seed
        for p in order:
            chain = gla.bracket_with_basis(chain, inputs[p])
            if not chain:
                break
        vec_add(total, chain, sign)
    return total


def cocylinder_structure(n_gla: GLA, l_gla: GLA, m_gla: GLA, g: LinearMap, f: LinearMap, max_arity: int,
                         bernoulli: Bernoulli = bernoulli_first, validate: bool = True) -> ConeStructure:
    """
    r_1(s^-1 n, s^-1 l, m) = (-s^-1 dn, -s^-1 dl, dm + g(n) - f(l)),
    r_2 on pairs in s^-1 N or in s^-1 L is the decalage bracket,
    r_{i+1}(s^-1 n . m^i) = B_i(1)/i! sum eps [..[g(n), m_s1].., m_si],
    r_{i+1}(s^-1 l . m^i) = -B_i(0)/i! sum eps [..[f(l), m_s1].., m_si],
    and zero otherwise.
    """
    if validate:
        _check_dgla_morphism(g, n_gla, m_gla, "g")
        _check_dgla_morphism(f, l_gla, m_gla, "f")
    space, offsets = cone_layout(n_gla.space, l_gla.space, m_gla.space)
    n_off, l_off, m_off = offsets
    n_parities, l_parities = n_gla.space.parities, l_gla.space.parities

    def shift(value: Vec, offset: int, scale=1) -> Vec:
        return {offset + k: scale * c for k, c in value.items() if c}

    def locate(k: int) -> Tuple[int, int]:
        if k < l_off:
            return 0, k - n_off
        if k < m_off:
            return 1, k - l_off
        return 2, k - m_off

    def rule(word: Word) -> Vec:
        slots = [locate(k) for k in word]
        if len(word) == 1:
            kind, x = slots[0]
            if kind == 0:
                result = shift(n_gla.differential_basis(x), n_off, -1)
                return vec_add(result, shift(g.column(x), m_off))
            if kind == 1:
                result = shift(l_gla.differential_basis(x), l_off, -1)
                return vec_add(result, shift(f.column(x), m_off, -1))
            return shift(m_gla.differential_basis(x), m_off)
        kinds = [kind for kind, _ in slots]
        if len(word) == 2 and kinds[0] == kinds[1] == 0:
            x, y = slots[0][1], slots[1][1]
            return shift(n_gla.bracket_basis(x, y), n_off, -1 if n_parities[x] else 1)
        if len(word) == 2 and kinds[0] == kinds[1] == 1:
            x, y = slots[0][1], slots[1][1]
            return shift(l_gla.bracket_basis(x, y), l_off, -1 if l_parities[x] else 1)
        if kinds[0] == 2 or any(kind != 2 for kind in kinds[1:]):
            return {}
        i = len(word) - 1
        kind, x = slots[0]
        inputs = [y for _, y in slots[1:]]
        if kind == 0:
            weight = (-1) ** i * bernoulli(i) / factorial(i)
            seed = g.column(x)
        else:
            weight = -bernoulli(i) / factorial(i)
            seed = f.column(x)
        if not weight or not seed:
            return {}
        return shift(vec_scale(_nested_sum(m_gla, seed, inputs), weight), m_off)

    q = Coderivation.from_rule(space, 1, rule, max_arity, Flavor.REDUCED, label="cocylinder")
    algebra = LInftyAlgebra(space, q, f"cyl({g.source.label or 'N'}->{m_gla.name}<-{f.source.label or 'L'})")
    logger.debug(f"Cocylinder structure on {space.dim} basis elements, window {max_arity}")
    return ConeStructure(n_gla, l_gla, m_gla, g, f, algebra, tuple(offsets))


def _inclusion(sub: GLA, ambient: GLA, indices: Sequence[int]) -> LinearMap:
    return LinearMap(sub.space, ambient.space, {k: {x: Fraction(1)} for k, x in enumerate(indices)})


def inclusion_cone(m_gla: GLA, n_indices: Sequence[int], l_indices: Sequence[int], max_arity: int,
                   bernoulli: Bernoulli = bernoulli_first) -> ConeStructure:
    """Cone of the inclusions of two basis-aligned sub-dglas"""
    n_indices, l_indices = list(n_indices), list(l_indices)
    try:
        n_gla = m_gla.sub_algebra(n_indices, name="N")
        l_gla = m_gla.sub_algebra(l_indices, name="L")
    except ValidationError as e:
        raise PreconditionError(f"Inclusions are not sub-dglas: {e}") from None
    cone = cocylinder_structure(n_gla, l_gla, m_gla, _inclusion(n_gla, m_gla, n_indices),
                                _inclusion(l_gla, m_gla, l_indices), max_arity, bernoulli, validate=False)
    cone.n_indices = n_indices
    cone.l_indices = l_indices
    return cone


def inclusion_cylinder(gla: GLA, max_arity: int, bernoulli: Bernoulli = bernoulli_first) -> ConeStructure:
    """Cylinder of L -> M: N = M with g the identity"""
    return inclusion_cone(gla, list(range(gla.dim)), list(gla.L), max_arity, bernoulli)


def fiber_cone(gla: GLA, n_indices: Sequence[int], d: Derivation, max_arity: int,
               bernoulli: Bernoulli = bernoulli_first) -> ConeStructure:
    """Cone of N -> M <- L with the common differential D"""
    _check_model_derivation(gla, d)
    m_gla = gla.with_differential(d.matrix)
    return inclusion_cone(m_gla, n_indices, gla.L, max_arity, bernoulli)


def check_cocylinder(cone: ConeStructure, max_arity: int) -> Report:
    return check_linfty(cone.space, cone.Q, max_arity, "cocylinder_QQ")


# ---------------------------------------------------------------------------
# the cylinder transfer oracle

class FormProductModel:
    """N x L x M[t, dt] as one dgla, blockwise"""

    def __init__(self, n_gla: GLA, l_gla: GLA, poly: PolyFormAlgebra):
        self.blocks = [n_gla, l_gla, poly]
        self.space, self.offsets = GradedSpace.direct_sum(
            [n_gla.space.tagged("n"), l_gla.space.tagged("l"), poly.space.tagged("w")], label="fiber-product")
        self.name = "fiber-product"

    def locate(self, index: int) -> Tuple[int, int]:
        for block in (2, 1, 0):
            if index >= self.offsets[block]:
                return block, index - self.offsets[block]
        raise ValidationError(f"Index {index} outside the product")

    def bracket_basis(self, i: int, j: int) -> Vec:
        bi, li = self.locate(i)
        bj, lj = self.locate(j)
        if bi != bj:
            return {}
        offset = self.offsets[bi]
        return {offset + k: c for k, c in self.blocks[bi].bracket_basis(li, lj).items()}

    def differential_basis(self, index: int) -> Vec:
        block, local = self.locate(index)
        offset = self.offsets[block]
        return {offset + k: c for k, c in self.blocks[block].differential_basis(local).items()}


@dataclass
class CylinderRetraction:
    """Decalage of the form product with the retraction onto the cone"""
    poly: PolyFormAlgebra
    product: FormProductModel
    big: LInftyAlgebra
    cone: ConeStructure
    data: RetractionData


def _fiber_product_basis(product: FormProductModel, poly: PolyFormAlgebra, g: LinearMap, f: LinearMap) -> List[Vec]:
    """Exact basis of the shifted fiber product e_0(w) = g(n), e_1(w) = f(l)"""
    dim_m = poly.base.dim
    n_off, l_off, w_off = product.offsets
    variables = list(range(product.space.dim))
    rows = sympy.zeros(2 * dim_m, len(variables))
    for k in range(g.source.dim):
        for x, c in g.column(k).items():
            rows[x, n_off + k] -= sympy.Rational(c.numerator, c.denominator)
    for k in range(f.source.dim):
        for x, c in f.column(k).items():
            rows[dim_m + x, l_off + k] -= sympy.Rational(c.numerator, c.denominator)
    for power in range(poly.t_degree + 2):
        for x in range(dim_m):
            column = w_off + poly.index(power, 0, x)
            if power == 0:
                rows[x, column] += 1
            rows[dim_m + x, column] += 1
    return [column_to_vec(v) for v in rows.nullspace()]


def cocylinder_retraction(n_gla: GLA, l_gla: GLA, m_gla: GLA, g: LinearMap, f: LinearMap, t_degree: int,
                          cone: Optional[ConeStructure] = None) -> CylinderRetraction:
    """
    pi = integral over [0, 1] on the form slot, f_1(n, l, m) = (n, l, (1 - t) g(n) + t f(l) + dt m),
    K = integral from 0 to t minus t times the integral over [0, 1].
    """
    poly = polyform_ops(m_gla, t_degree)
    product = FormProductModel(n_gla, l_gla, poly)
    big = decalage(product, "s^-1(fiber-product)")
    if cone is None:
        cone = cocylinder_structure(n_gla, l_gla, m_gla, g, f, 1)
    small = cone.space
    n_off, l_off, w_off = product.offsets
    c_n, c_l, c_m = cone.offsets

    def form(power: int, dt: int, x: int) -> int:
        return w_off + poly.index(power, dt, x)

    pi_columns: Dict[int, Vec] = {}
    f1_columns: Dict[int, Vec] = {}
    k_columns: Dict[int, Vec] = {}
    for k in range(n_gla.dim):
        pi_columns[n_off + k] = {c_n + k: Fraction(1)}
        image = {n_off + k: Fraction(1)}
        for x, c in g.column(k).items():
            vec_add(image, {form(0, 0, x): c, form(1, 0, x): -c})
        f1_columns[c_n + k] = image
    for k in range(l_gla.dim):
        pi_columns[l_off + k] = {c_l + k: Fraction(1)}
        image = {l_off + k: Fraction(1)}
        for x, c in f.column(k).items():
            vec_add(image, {form(1, 0, x): c})
        f1_columns[c_l + k] = image
    for x in range(m_gla.dim):
        f1_columns[c_m + x] = {form(0, 1, x): Fraction(1)}
        for power in range(t_degree + 1):
            scale = Fraction(1, power + 1)
            pi_columns[form(power, 1, x)] = {c_m + x: scale}
            k_columns[form(power, 1, x)] = vec_add({form(power + 1, 0, x): scale}, {form(1, 0, x): -scale})

    data = RetractionData(big.space, small, big.Q.linear_part(), cone.Q.linear_part(),
                          LinearMap(big.space, small, pi_columns), LinearMap(small, big.space, f1_columns),
                          LinearMap(big.space, big.space, k_columns, -1),
                          test_vectors=_fiber_product_basis(product, poly, g, f), label="cocylinder")
    return CylinderRetraction(poly, product, big, cone, data)


def cylinder_transfer_oracle(n_gla: GLA, l_gla: GLA, m_gla: GLA, g: LinearMap, f: LinearMap, max_arity: int,
                             t_degree: Optional[int] = None, t_degree_factor: int = 2) -> Report:
    """Transfer from the decalage of the genuine fiber product reproduces the cocylinder brackets"""
    t_degree = t_degree if t_degree is not None else t_degree_factor * max_arity
    cone = cocylinder_structure(n_gla, l_gla, m_gla, g, f, max_arity)
    retraction = cocylinder_retraction(n_gla, l_gla, m_gla, g, f, t_degree, cone)
    report = Report(command="cocone")
    report.merge(check_polyform(retraction.poly), prefix="polyform.")
    report.merge(validate_retraction(retraction.data), prefix="retraction.")
    result = transfer(retraction.big.Q, retraction.data, max_arity)
    default_manager.compare_coderivations(report, "cylinder_oracle", result.R, cone.Q, range(1, max_arity + 1))

    poly, w_off = retraction.poly, retraction.product.offsets[2]
    reached = 0
    for arity in range(1, max_arity + 1):
        for word in cone.space.canonical_words(arity):
            for index in result.F.value(word):
                if index >= w_off:
                    reached = max(reached, poly.decode(index - w_off)[0])
    report.data["t_degree"] = {"bound": t_degree, "reached": reached}
    logger.info(f"Cylinder transfer oracle: {report.total_checks} checks, max t-degree {reached}, ok={report.ok}")
    return report


# ---------------------------------------------------------------------------
# derivations acting on the cylinder

def psi_morphism(cone: ConeStructure, d: Derivation) -> Coderivation:
    """
    Linear coderivation (s^-1 n, s^-1 l, m) -> ((-1)^{|D|} s^-1 Dn, (-1)^{|D|} s^-1 Dl, Dm) on the
    cone of two inclusions preserved by D
    """
    if cone.n_indices is None or cone.l_indices is None:
        raise PreconditionError("Psi needs a cone of basis-aligned inclusions")
    if d.matrix.source != cone.m_gla.space:
        raise ValidationError(f"Derivation {d.name} does not act on {cone.m_gla.name}")
    n_off, l_off, m_off = cone.offsets
    sign = -1 if d.degree % 2 else 1
    columns: Dict[int, Vec] = {}
    for positions, offset, what in ((cone.n_indices, n_off, "N"), (cone.l_indices, l_off, "L")):
        position = {x: k for k, x in enumerate(positions)}
        for k, x in enumerate(positions):
            try:
                columns[offset + k] = {offset + position[y]: sign * c for y, c in d.matrix.column(x).items()}
            except KeyError:
                raise PreconditionError(f"{d.name} does not preserve {what}") from None
    for x in range(cone.m_gla.dim):
        columns[m_off + x] = {m_off + y: c for y, c in d.matrix.column(x).items()}
    linear = LinearMap(cone.space, cone.space, columns, d.degree)

    def rule(word: Word) -> Vec:
        return linear.column(word[0])

    return Coderivation.from_rule(cone.space, d.degree, rule, None, Flavor.REDUCED, top_arity=1,
                                  label=f"Psi({d.name})")


def check_psi(cone: ConeStructure, d: Derivation, max_arity: int) -> Report:
    """[R, Psi(D)] = 0 coefficientwise"""
    report = Report(command="cocone")
    bracket = nr_bracket(cone.Q, psi_morphism(cone, d))
    space = cone.space
    for arity in range(1, max_arity + 1):
        for word in space.canonical_words(arity):
            value = bracket.value(word)
            report.record("psi_commutes", arity, space.word_names(word), vec_to_json(space, value), [],
                          passed=not value)
    return report


def classifying_morphism_is_strict(gla: GLA, derivations: Sequence[Derivation], max_arity: int) -> Report:
    """Read the extended cylinder's classifying data back: sf_1(s^-1 D) = Psi(D), sf_{>=2} = 0"""
    sec = build_derivation_cylinder_retraction(gla, derivations, max_arity)
    report = Report(command="cocone")
    split = sec.n_der
    _, fiber, data = morphism_from_extension(sec.big, split, sec.big.space.subspace(range(split)),
                                             sec.cylinder.space)
    base_space = data.base
    for arity in range(1, max_arity + 1):
        for v_word in base_space.canonical_words(arity):
            coder = data.value(v_word)
            expected = psi_morphism(sec.cylinder, sec.derivations[v_word[0]]) if arity == 1 else None
            last = max_arity - arity
            for k in range(0, last + 1):
                for w_word in fiber.space.canonical_words(k):
                    value = coder.value(w_word) if coder is not None else {}
                    wanted = expected.value(w_word) if (expected is not None and k == 1) else {}
                    names = base_space.word_names(v_word) + ["|"] + fiber.space.word_names(w_word)
                    default_manager.compare_vectors(report, "classifying_strict", fiber.space, arity + k, names,
                                                    value, wanted)
    return report


# ---------------------------------------------------------------------------
# models of homotopy fiber products

def _check_model_derivation(gla: GLA, d: Derivation):
    gla._require_splitting()
    if d.matrix.source != gla.space:
        raise ValidationError(f"Derivation {d.name} does not act on {gla.name}")
    if d.degree != 1:
        raise PreconditionError(f"{d.name} must have degree 1 to serve as a differential")
    if not d.is_square_zero():
        raise PreconditionError(f"{d.name} does not square to zero")
    if d.leibniz_violations():
        raise PreconditionError(f"{d.name} is not a derivation")
    if not preserves_l(gla, d):
        raise PreconditionError(f"{d.name} does not preserve L")


def fiber_model_space(gla: GLA, n_indices: Sequence[int]) -> GradedSpace:
    space, _ = GradedSpace.direct_sum([gla.space.subspace(list(n_indices)).shifted("n"),
                                       gla.space.subspace(gla.A).tagged("a")], label="s^-1N x A")
    return space


@dataclass
class FiberModel:
    """(s^-1 N x A, R_D) with the morphism F_D into the cone"""
    gla: GLA
    n_indices: List[int]
    derivation: Derivation
    small: LInftyAlgebra
    morphism: CoalgMorphism
    cone: ConeStructure
    max_arity: int

    def to_json(self) -> Dict[str, Any]:
        return {"structure": self.small.Q.to_json(self.max_arity),
                "morphism": self.morphism.to_json(self.max_arity)}


def model_fiber_product(gla: GLA, n_indices: Sequence[int], d: Derivation, max_arity: int,
                        bernoulli: Bernoulli = bernoulli_first) -> FiberModel:
    """
    R_D on s^-1 N x A:
        r_1(s^-1 n, a) = (-s^-1 Dn, P(Da + n)), r_2(s^-1 n1 . s^-1 n2) = (-1)^{|n1|} s^-1 [n1, n2],
        r_{i+1}(s^-1 n . a^i) = Phi(n)_i, r_i(a^i) = Phi(D)_i;
    F_D into the cone:
        f_1(s^-1 n, a) = (s^-1 n, s^-1 P_perp(n + Da), a),
        f_{i+1}(s^-1 n . a^i) = s^-1 (1/i!) sum eps P_perp [..[n, a_s1].., a_si],
        f_i(a^i) = s^-1 (1/i!) sum eps P_perp [..[D a_s1, a_s2].., a_si].
    """
    n_indices = list(n_indices)
    if n_indices != sorted(set(n_indices)):
        raise ValidationError("N indices must be increasing and distinct")
    require_closed_complement(gla)
    cone = fiber_cone(gla, n_indices, d, max_arity, bernoulli)
    plain = gla.without_differential()
    small = fiber_model_space(gla, n_indices)
    n_count = len(n_indices)
    n_position = {x: k for k, x in enumerate(n_indices)}
    l_position = {x: k for k, x in enumerate(gla.L)}
    a_indices = list(gla.A)
    a_position = {x: k for k, x in enumerate(a_indices)}
    parities = gla.space.parities
    n_off, l_off, m_off = cone.offsets
    phi_d = phi_derivation(plain, d, max_arity, bernoulli)
    phi_n: Dict[int, Any] = {}

    def phi_of(x: int):
        if x not in phi_n:
            phi_n[x] = phi_element(plain, gla.space.basis_vector(x), max_arity, bernoulli)
        return phi_n[x]

    def a_slot(value: Vec) -> Vec:
        return {n_count + a_position[x]: c for x, c in gla.project(value).items()}

    def slots(word: Word) -> List[Tuple[str, int]]:
        return [("n", k) if k < n_count else ("a", k - n_count) for k in word]

    def r_rule(word: Word) -> Vec:
        parts = slots(word)
        kinds = [kind for kind, _ in parts]
        if len(word) == 1:
            kind, k = parts[0]
            if kind == "n":
                x = n_indices[k]
                result = {n_position[y]: -c for y, c in d.matrix.column(x).items()}
                return vec_add(result, a_slot({x: Fraction(1)}))
            return a_slot(d.matrix.column(a_indices[k]))
        if all(kind == "a" for kind in kinds):
            return {n_count + j: c for j, c in phi_d.value(tuple(k for _, k in parts)).items()}
        if kinds[0] == "n" and all(kind == "a" for kind in kinds[1:]):
            x = n_indices[parts[0][1]]
            return {n_count + j: c for j, c in phi_of(x).value(tuple(k for _, k in parts[1:])).items()}
        if len(word) == 2 and kinds == ["n", "n"]:
            x, y = n_indices[parts[0][1]], n_indices[parts[1][1]]
            sign = -1 if parities[x] else 1
            return {n_position[z]: sign * c for z, c in gla.bracket_basis(x, y).items()}
        return {}

    def l_slot(value: Vec) -> Vec:
        return {l_off + l_position[x]: c for x, c in gla.project_perp(value).items()}

    def f_rule(word: Word) -> Vec:
        parts = slots(word)
        kinds = [kind for kind, _ in parts]
        if len(word) == 1:
            kind, k = parts[0]
            if kind == "n":
                x = n_indices[k]
                return vec_add({n_off + k: Fraction(1)}, l_slot({x: Fraction(1)}))
            x = a_indices[k]
            return vec_add(l_slot(d.matrix.column(x)), {m_off + x: Fraction(1)})
        inputs = [a_indices[k] for kind, k in parts if kind == "a"]
        if all(kind == "a" for kind in kinds):
            return l_slot(nested_perp_sum(gla, {}, inputs, first=d.matrix.column))
        if kinds[0] == "n" and len(inputs) == len(word) - 1:
            return l_slot(nested_perp_sum(gla, {n_indices[parts[0][1]]: Fraction(1)}, inputs))
        return {}

    r = Coderivation.from_rule(small, 1, r_rule, max_arity, Flavor.REDUCED, label="R_D")
    f = CoalgMorphism.from_rule(small, cone.space, f_rule, max_arity, label="F_D")
    logger.info(f"Fiber product model on {small.dim} basis elements (N dim {n_count}), window {max_arity}")
    return FiberModel(gla, n_indices, d, LInftyAlgebra(small, r, "R_D"), f, cone, max_arity)


@dataclass
class TwistedRoute:
    """R_D, F_D and the cone structure obtained by twisting the extended cylinder by s^-1 D"""
    structure: Coderivation
    morphism: CoalgMorphism
    cone_structure: Coderivation


def fiber_model_via_twisting(gla: GLA, n_indices: Sequence[int], d: Derivation, max_arity: int,
                             bernoulli: Bernoulli = bernoulli_first) -> TwistedRoute:
    """Twist the closed-form structure on s^-1 Der x s^-1 M x A by s^-1 D and restrict to s^-1 N x A"""
    n_indices = list(n_indices)
    _check_model_derivation(gla, d)
    sec = build_derivation_cylinder_retraction(gla, [d], max_arity + 2)
    closed_r = closed_form_structure(sec, max_arity + 2, bernoulli)
    closed_f = twisted_projection_morphism(sec, max_arity + 2)
    x_small = Vector(sec.small, {0: Fraction(1)})
    twisted = twist_structure(LInftyAlgebra(sec.small, closed_r), x_small)
    indices = [sec.small_n(x) for x in n_indices] + [sec.small_a(j) for j in range(len(gla.A))]
    target = fiber_model_space(gla, n_indices)
    structure = restrict_coderivation(twisted.Q, indices, target).with_window(max_arity)

    cone = fiber_cone(gla, n_indices, d, max_arity, bernoulli)
    cylinder = sec.cylinder
    c_n, c_l, c_m = (sec.big_cylinder(offset) for offset in cylinder.offsets)
    cone_indices = ([c_n + x for x in n_indices] + [c_l + k for k in range(len(gla.L))]
                    + [c_m + x for x in range(gla.dim)])
    morphism = restrict_morphism(twist_morphism(closed_f, x_small), indices, cone_indices, target, cone.space)
    x_big = Vector(sec.big.space, {0: Fraction(1)})
    twisted_big = twist_structure(sec.big, x_big)
    cone_structure = restrict_coderivation(twisted_big.Q, cone_indices, cone.space).with_window(max_arity)
    return TwistedRoute(structure, CoalgMorphism.from_rule(target, cone.space, morphism.value, max_arity,
                                                           label="F_D twisted"), cone_structure)


def fiber_model_via_transfer(gla: GLA, n_indices: Sequence[int], d: Derivation, max_arity: int):
    """Transfer of the cone structure along the retraction onto s^-1 N x A"""
    cone = fiber_cone(gla, n_indices, d, max_arity)
    data = twisted_cone_retraction(gla, n_indices, d)
    return transfer(cone.Q, data, max_arity)


def check_fiber_model(gla: GLA, n_indices: Sequence[int], d: Derivation, max_arity: int,
                      bernoulli: Bernoulli = bernoulli_first, routes: bool = True) -> Tuple[FiberModel, Report]:
    """
    R_D squares to zero, F_D is a morphism into the cone, the stated retraction is valid, and
    the twisting and transfer routes agree with the closed forms
    """
    model = model_fiber_product(gla, n_indices, d, max_arity, bernoulli)
    report = Report(command="fiber-model")
    arities = range(1, max_arity + 1)
    report.merge(check_linfty(model.small.space, model.small.Q, max_arity, "fiber_model_QQ"))
    report.merge(check_morphism(model.morphism, model.small.Q, model.cone.Q, max_arity, "fiber_model_morphism"))
    retraction = twisted_cone_retraction(gla, n_indices, d)
    report.merge(validate_retraction(retraction), prefix="retraction.")
    side = retraction.satisfies_side_conditions()
    report.record("retraction.side_conditions", 1, [], side, True, passed=side)
    linear = model.morphism.linear_part()
    default_manager.compare_maps(report, "f1_matches_retraction", model.small.space, model.cone.space, [1],
                                 lambda w: linear.column(w[0]), lambda w: retraction.f1.column(w[0]))
    if routes:
        twisted = fiber_model_via_twisting(gla, n_indices, d, max_arity, bernoulli)
        default_manager.compare_coderivations(report, "twisting_route_structure", model.small.Q,
                                              twisted.structure, arities)
        default_manager.compare_morphisms(report, "twisting_route_morphism", model.morphism, twisted.morphism,
                                          arities)
        default_manager.compare_coderivations(report, "twisting_route_cone", model.cone.Q, twisted.cone_structure,
                                              arities)
        transferred = fiber_model_via_transfer(gla, n_indices, d, max_arity)
        default_manager.compare_coderivations(report, "transfer_route_structure", model.small.Q, transferred.R,
                                              arities)
        default_manager.compare_morphisms(report, "transfer_route_morphism", model.morphism, transferred.F,
                                          arities)
    logger.info(f"Fiber model checks on {gla.name}: {report.total_checks} checks, ok={report.ok}")
    return model, report


# ---------------------------------------------------------------------------
# the homotopy replacement diagram

@dataclass
class ReplacementDiagram:
    """A -> s^-1 M x A -> s^-1 L and the strict section s^-1 L -> s^-1 M x A"""
    model: FiberModel
    inclusion: CoalgMorphism
    vertical: CoalgMorphism
    section: CoalgMorphism
    l_algebra: LInftyAlgebra


def homotopy_replacement_diagram(gla: GLA, d: Derivation, max_arity: int) -> Tuple[ReplacementDiagram, Report]:
    model = model_fiber_product(gla, list(range(gla.dim)), d, max_arity)
    report = Report(command="fiber-model")
    small = model.small.space
    cone = model.cone
    dim = gla.dim
    l_indices = list(gla.L)
    a_indices = list(gla.A)
    l_gla = cone.l_gla
    l_algebra = decalage(l_gla, "s^-1 L")
    m_algebra = decalage(gla.with_differential(d.matrix), "s^-1 M")
    _, l_off, _ = cone.offsets

    phi = phi_derivation(gla.without_differential(), d, max_arity)
    a_space = phi.a_space
    inclusion = CoalgMorphism.strict(LinearMap(a_space, small, {j: {dim + j: Fraction(1)}
                                                                for j in range(len(a_indices))}), "A->s^-1MxA")
    report.merge(check_morphism(inclusion, phi.coder, model.small.Q, max_arity, "top_left_inclusion"))

    projection = CoalgMorphism.strict(LinearMap(cone.space, l_algebra.space,
                                                {l_off + k: {k: Fraction(1)} for k in range(len(l_indices))}),
                                      "p_L")
    report.merge(check_morphism(projection, cone.Q, l_algebra.Q, max_arity, "cone_projection"))
    vertical = compose_morphisms(projection, model.morphism)
    report.merge(check_morphism(vertical, model.small.Q, l_algebra.Q, max_arity, "vertical_composite"))

    section = CoalgMorphism.strict(LinearMap(l_algebra.space, small, {k: {x: Fraction(1)}
                                                                      for k, x in enumerate(l_indices)}),
                                   "s^-1L->s^-1MxA")
    report.merge(check_morphism(section, l_algebra.Q, model.small.Q, max_arity, "strict_section"))

    base_projection = CoalgMorphism.strict(LinearMap(small, m_algebra.space, {x: {x: Fraction(1)}
                                                                             for x in range(dim)}), "p_M")
    report.merge(check_morphism(base_projection, model.small.Q, m_algebra.Q, max_arity, "base_projection"))
    round_trip = compose_morphisms(base_projection, section)
    default_manager.compare_maps(report, "right_triangle", l_algebra.space, m_algebra.space, [1],
                                 round_trip.value, lambda w: {l_indices[w[0]]: Fraction(1)})

    expected, _ = projection_morphism(gla, d, max_arity)
    left = compose_morphisms(vertical, inclusion)
    default_manager.compare_maps(report, "left_triangle", a_space, l_algebra.space, range(1, max_arity + 1),
                                 left.value, expected.value)

    identity_check = compose_morphisms(vertical, section)
    default_manager.compare_maps(report, "vertical_round_trip", l_algebra.space, l_algebra.space,
                                 range(1, max_arity + 1), identity_check.value,
                                 lambda w: {w[0]: Fraction(1)} if len(w) == 1 else {})
    try:
        iso = homology_map_is_iso(l_algebra.space, l_algebra.Q.linear_part(), small, model.small.Q.linear_part(),
                                  section.linear_part())
    except PreconditionError as e:
        logger.error(f"Section is not a chain map: {e}")
        iso = False
    report.record("section_quasi_isomorphism", 1, [], iso, True, passed=iso)
    diagram = ReplacementDiagram(model, inclusion, vertical, section, l_algebra)
    return diagram, report


# ---------------------------------------------------------------------------
# change of complement on the cone

def cone_change_of_basis(cone1: ConeStructure, cone2: ConeStructure, gla1: GLA, gla2: GLA) -> CoalgMorphism:
    """
    Strict isomorphism between the cones of L -> M presented in the bases of gla1 and gla2,
    where gla2 = gla1.change_basis(...) keeps the span of L
    """
    transition = getattr(gla2, "transition", None)
    if transition is None:
        raise PreconditionError("Second algebra must come from a change of basis of the first")
    if cone1.n_gla.dim or cone2.n_gla.dim:
        raise PreconditionError("Change of complement acts on cocones (N = 0)")
    inverse = transition.inv()
    _, l1_off, m1_off = cone1.offsets
    _, l2_off, m2_off = cone2.offsets
    l2_position = {x: k for k, x in enumerate(gla2.L)}
    columns: Dict[int, Vec] = {}
    for x in range(gla1.dim):
        new = column_to_vec(inverse[:, x])
        columns[m1_off + x] = {m2_off + y: c for y, c in new.items()}
    for k, x in enumerate(gla1.L):
        new = column_to_vec(inverse[:, x])
        try:
            columns[l1_off + k] = {l2_off + l2_position[y]: c for y, c in new.items()}
        except KeyError:
            raise ValidationError("Change of basis does not keep the span of L") from None
    return CoalgMorphism.strict(LinearMap(cone1.space, cone2.space, columns), "cone change of basis")
