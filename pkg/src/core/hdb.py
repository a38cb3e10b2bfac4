"""
Nonabelian higher derived brackets on a complement A of a subalgebra L

For a splitting M = L + A with projection P onto A, every m in M and every derivation D
preserving L give brackets on A by the Bernoulli-weighted nested bracket sums; this module
evaluates them, checks that they respect brackets, and specializes them to the classical
examples (coderivations, Koszul brackets, subcomplexes, Getzler's brackets).
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union, Any

from .coalgebra import (Coderivation, CoalgMorphism, LInftyAlgebra, Word, nr_bracket, sigma_section,
                        evaluate_at_unit, check_linfty, check_morphism, decalage, normalize_indices,
                        linear_combination, compose_morphisms)
from .error_handler import PreconditionError, ValidationError
from .graded import (GLA, GradedSpace, GradedAlgebra, LinearMap, MatrixLieAlgebra, Derivation, Vector, Vec,
                     vec_add, vec_scale, vec_reindex, vec_to_json, signed_permutations, inner_derivation,
                     differential_derivation, elementary_map, matrix_lie_algebra, rank_of, column_to_vec)
from .models import Flavor, Report
from .scalars import bernoulli_first
from .verification import default_manager

logger = logging.getLogger(__name__)

Bernoulli = Callable[[int], Fraction]


@dataclass
class HigherBrackets:
    """Brackets Phi(source) as a coderivation of S(A); A keeps the names of its M basis elements"""
    gla: GLA
    coder: Coderivation
    source_label: str = ""

    @property
    def a_space(self) -> GradedSpace:
        return self.coder.space

    def value(self, word: Word) -> Vec:
        """Value on a canonical word of A positions, in A coordinates"""
        return self.coder.value(word)

    def value_in_m(self, word: Word) -> Vec:
        a_indices = self.gla.A
        return {a_indices[k]: c for k, c in self.coder.value(word).items()}

    def to_json(self, max_arity: Optional[int] = None) -> Dict[str, Any]:
        result = self.coder.to_json(max_arity)
        result["source"] = self.source_label
        return result


# ---------------------------------------------------------------------------
# the bracket-sum evaluator

class _VectorOps:
    """Nested brackets of M elements against A basis elements"""

    def __init__(self, gla: GLA):
        self.gla = gla

    def bracket(self, x: Vec, a: int) -> Vec:
        return self.gla.bracket_with_basis(x, a)

    def project(self, x: Vec) -> Vec:
        return self.gla.project(x)

    def zero(self) -> Vec:
        return {}

    def accumulate(self, total: Vec, term: Vec, weight: Fraction) -> Vec:
        return vec_add(total, term, weight)


class _CoderivationOps:
    """Nested brackets inside Coder(SV) with A = image of the section sigma"""

    def __init__(self, space: GradedSpace):
        self.space = space
        self._sigmas: Dict[int, Coderivation] = {}

    def sigma(self, v: int) -> Coderivation:
        if v not in self._sigmas:
            self._sigmas[v] = sigma_section(self.space, self.space.basis_vector(v))
        return self._sigmas[v]

    def bracket(self, x: Coderivation, a: int) -> Coderivation:
        return nr_bracket(x, self.sigma(a))

    def project(self, x: Coderivation) -> Coderivation:
        value = evaluate_at_unit(x)
        if value.is_zero:
            return Coderivation.zero(self.space, x.degree, Flavor.UNREDUCED)
        return sigma_section(self.space, value)

    def zero(self) -> Vec:
        return {}

    def accumulate(self, total: Vec, term: Coderivation, weight: Fraction) -> Vec:
        return vec_add(total, term.value(()), weight)


def bracket_sum(ops, inputs: Sequence[int], parities: Sequence[int], seed, bernoulli: Bernoulli,
                first: Optional[Callable[[int], Any]] = None):
    """
    sum over sigma of eps(sigma) sum_k B_{i-k} / (k! (i-k)!) [..[P c_k, a_s(k+1)].., a_s(i)]

    The chain starts at c_0 = seed (elements) or c_1 = first(a_s(1)) (derivations) and
    continues with c_k = [c_{k-1}, a_s(k)].
    """
    i = len(inputs)
    total = ops.zero()
    k_start = 0 if first is None else 1
    weights = [bernoulli(i - k) / (factorial(k) * factorial(i - k)) for k in range(i + 1)]
    chains: Dict[Tuple[int, ...], Any] = {}
    for order, sign in signed_permutations(tuple(parities)):
        ordered = [inputs[p] for p in order]
        for k in range(k_start, i + 1):
            key = tuple(order[:k])
            chain = chains.get(key)
            if chain is None:
                if k == 0:
                    chain = seed
                elif k == 1 and first is not None:
                    chain = first(ordered[0])
                else:
                    chain = ops.bracket(chains[tuple(order[:k - 1])], ordered[k - 1])
                chains[key] = chain
            if not weights[k]:
                continue
            term = ops.project(chain)
            for a in ordered[k:]:
                term = ops.bracket(term, a)
            total = ops.accumulate(total, term, sign * weights[k])
    return total


def a_space_of(gla: GLA) -> GradedSpace:
    return gla.space.subspace(gla.A, label="A")


def require_closed_complement(gla: GLA):
    gla._require_splitting()
    violations = gla.closure_violations(gla.A)
    if violations:
        i, j = violations[0]
        names = gla.space.names
        raise PreconditionError(
            f"A-span not bracket-closed ([{names[i]}, {names[j]}] leaves A); "
            f"closed-form brackets need a subalgebra, use --via-transfer")


def preserves_l(gla: GLA, d: Derivation) -> bool:
    """P D P_perp = 0 for the splitting of `gla`"""
    return all(not gla.project(d.matrix.column(i)) for i in gla.L)


def to_a_coordinates(gla: GLA, value: Vec) -> Vec:
    position = {index: k for k, index in enumerate(gla.A)}
    try:
        return vec_reindex(value, position)
    except KeyError:
        raise ValidationError("Derived bracket left the A-span") from None


def phi_element(gla: GLA, m: Vector, max_arity: int, bernoulli: Bernoulli = bernoulli_first) -> HigherBrackets:
    """Phi(m) on S(A), unreduced, with Phi(m)_0(1) = Pm"""
    require_closed_complement(gla)
    if m.space != gla.space:
        raise ValidationError("Source element is not in the algebra")
    degree = m.degree if not m.is_zero else 0
    a_indices = gla.A
    parities = gla.space.parities
    ops = _VectorOps(gla)
    seed = m.coeffs

    def rule(word: Word) -> Vec:
        if not word:
            return to_a_coordinates(gla, gla.project(seed))
        inputs = [a_indices[k] for k in word]
        return to_a_coordinates(gla, bracket_sum(ops, inputs, [parities[x] for x in inputs], seed, bernoulli))

    coder = Coderivation.from_rule(a_space_of(gla), degree, rule, max_arity, Flavor.UNREDUCED,
                                   label=f"Phi({m!r})")
    return HigherBrackets(gla, coder, _element_label(m))


def phi_derivation(gla: GLA, d: Derivation, max_arity: int,
                   bernoulli: Bernoulli = bernoulli_first) -> HigherBrackets:
    """Phi(D) on the reduced S(A)"""
    require_closed_complement(gla)
    if not preserves_l(gla, d):
        raise PreconditionError(f"Derivation {d.name} does not preserve L (PDP != PD)")
    a_indices = gla.A
    parities = gla.space.parities
    ops = _VectorOps(gla)

    def first(a: int) -> Vec:
        return d.matrix.column(a)

    def rule(word: Word) -> Vec:
        inputs = [a_indices[k] for k in word]
        return to_a_coordinates(gla, bracket_sum(ops, inputs, [parities[x] for x in inputs], None, bernoulli, first))

    coder = Coderivation.from_rule(a_space_of(gla), d.degree, rule, max_arity, Flavor.REDUCED,
                                   label=f"Phi({d.name})")
    return HigherBrackets(gla, coder, d.name)


def _element_label(m: Vector) -> str:
    return " + ".join(f"{c}*{m.space.names[i]}" if c != 1 else m.space.names[i]
                      for i, c in sorted(m.coeffs.items())) or "0"


def first_brackets(gla: GLA, source: Union[Vector, Derivation], word: Word) -> Vec:
    """
    The low-arity brackets written out term by term (arity <= 2), in M coordinates.

    Independent of bracket_sum; `word` holds M indices of A basis elements.
    """
    project = gla.project
    br = gla.bracket
    half = Fraction(1, 2)
    is_derivation = isinstance(source, Derivation)
    if len(word) == 0:
        if is_derivation:
            return {}
        return project(source.coeffs)
    if len(word) == 1:
        a = {word[0]: Fraction(1)}
        if is_derivation:
            return project(source.apply(a))
        m = source.coeffs
        result = project(br(m, a))
        return vec_add(result, br(project(m), a), -half)
    if len(word) != 2:
        raise ValidationError("Written-out brackets exist up to arity 2")
    x, y = word
    swap = -1 if (gla.space.parities[x] and gla.space.parities[y]) else 1
    result: Vec = {}
    for first, second, sign in ((x, y, 1), (y, x, swap)):
        a, b = {first: Fraction(1)}, {second: Fraction(1)}
        if is_derivation:
            da = source.apply(a)
            vec_add(result, project(br(da, b)), sign * half)
            vec_add(result, br(project(da), b), -sign * half)
        else:
            m = source.coeffs
            vec_add(result, project(br(br(m, a), b)), sign * half)
            vec_add(result, br(project(br(m, a)), b), -sign * half)
            vec_add(result, br(br(project(m), a), b), sign * Fraction(1, 12))
    return result


def voronov_brackets(gla: GLA, source: Union[Vector, Derivation], max_arity: int) -> Coderivation:
    """
    Single-term brackets P[..[m, a_1]..., a_i] (or P[..[D a_1, a_2]..., a_i]) for abelian A.
    """
    gla._require_splitting()
    a_indices = gla.A
    for k, i in enumerate(a_indices):
        for j in a_indices[k:]:
            if gla.bracket_basis(i, j):
                raise PreconditionError("Single-term brackets need an abelian complement")
    is_derivation = isinstance(source, Derivation)

    def rule(word: Word) -> Vec:
        inputs = [a_indices[k] for k in word]
        if is_derivation:
            chain = source.matrix.column(inputs[0])
            rest = inputs[1:]
        else:
            chain = source.coeffs
            rest = inputs
        for a in rest:
            chain = gla.bracket_with_basis(chain, a)
        return to_a_coordinates(gla, gla.project(chain))

    if is_derivation:
        return Coderivation.from_rule(a_space_of(gla), source.degree, rule, max_arity, Flavor.REDUCED)
    degree = source.degree if not source.is_zero else 0
    return Coderivation.from_rule(a_space_of(gla), degree, rule, max_arity, Flavor.UNREDUCED)


# ---------------------------------------------------------------------------
# bracket compatibility

def verify_theorem_hdb(gla: GLA, elements: Sequence[Vector], derivations: Sequence[Derivation], max_arity: int,
                       bernoulli: Bernoulli = bernoulli_first) -> Report:
    """
    [Phi(m1), Phi(m2)] = Phi([m1, m2]), [Phi(D1), Phi(D2)] = Phi([D1, D2]) and
    [Phi(D), Phi(m)] = Phi(Dm), coefficientwise up to max_arity; plus Phi(D).Phi(D) = 0
    for square-zero odd D.
    """
    report = Report(command="check")
    window = max_arity + 1
    phis_m = [phi_element(gla, m, window, bernoulli) for m in elements]
    phis_d = [phi_derivation(gla, d, window, bernoulli) for d in derivations]
    mgr = default_manager

    for a in range(len(elements)):
        for b in range(a, len(elements)):
            lhs = nr_bracket(phis_m[a].coder, phis_m[b].coder)
            bracket = Vector(gla.space, gla.bracket(elements[a].coeffs, elements[b].coeffs))
            rhs = phi_element(gla, bracket, window, bernoulli).coder
            mgr.compare_coderivations(report, "phi_bracket_elements", lhs, rhs, range(0, max_arity + 1))

    for a in range(len(derivations)):
        for b in range(a, len(derivations)):
            lhs = nr_bracket(phis_d[a].coder, phis_d[b].coder)
            rhs = phi_derivation(gla, derivations[a].bracket(derivations[b]), window, bernoulli).coder
            mgr.compare_coderivations(report, "phi_bracket_derivations", lhs, rhs, range(1, max_arity + 1))

    for a, d in enumerate(derivations):
        for b, m in enumerate(elements):
            lhs = nr_bracket(phis_d[a].coder.as_unreduced(), phis_m[b].coder)
            rhs = phi_element(gla, Vector(gla.space, d.apply(m.coeffs)), window, bernoulli).coder
            mgr.compare_coderivations(report, "phi_derivation_on_element", lhs, rhs, range(0, max_arity + 1))

    for a, d in enumerate(derivations):
        if d.degree == 1 and d.is_square_zero():
            report.merge(check_linfty(phis_d[a].a_space, phis_d[a].coder, max_arity, "phi_D_squared"))

    logger.info(f"Bracket compatibility on {gla.name}: {report.total_checks} checks, ok={report.ok}")
    return report


def projection_morphism(gla: GLA, d: Derivation, max_arity: int) -> Tuple[CoalgMorphism, LInftyAlgebra]:
    """
    Morphism (A, Phi(D)) -> s^-1(L, D) with coefficients
    (1/i!) sum eps P_perp[..[D a_s(1), a_s(2)].., a_s(i)].
    """
    gla._require_splitting()
    if not preserves_l(gla, d):
        raise PreconditionError(f"Derivation {d.name} does not preserve L")
    l_indices = gla.L
    l_gla = gla.without_differential().sub_algebra(l_indices, name="L")
    l_gla = l_gla.with_differential(d.restricted_to(l_gla, l_indices))
    target = decalage(l_gla, name="s^-1 L")
    position = {index: k for k, index in enumerate(l_indices)}
    a_indices = gla.A
    parities = gla.space.parities

    def rule(word: Word) -> Vec:
        inputs = [a_indices[k] for k in word]
        total: Vec = {}
        for order, sign in signed_permutations(tuple(parities[x] for x in inputs)):
            chain = d.matrix.column(inputs[order[0]])
            for p in order[1:]:
                chain = gla.bracket_with_basis(chain, inputs[p])
            vec_add(total, gla.project_perp(chain), sign)
        return vec_reindex(vec_scale(total, Fraction(1, factorial(len(word)))), position)

    morphism = CoalgMorphism.from_rule(a_space_of(gla), target.space, rule, max_arity, label="p_L")
    return morphism, target


def check_projection_morphism(gla: GLA, d: Derivation, max_arity: int,
                              bernoulli: Bernoulli = bernoulli_first) -> Report:
    if d.degree != 1 or not d.is_square_zero():
        raise PreconditionError(f"{d.name} must be a square-zero derivation of degree 1")
    morphism, target = projection_morphism(gla, d, max_arity)
    phi = phi_derivation(gla, d, max_arity, bernoulli)
    return check_morphism(morphism, phi.coder, target.Q, max_arity, "projection_morphism")


# ---------------------------------------------------------------------------
# coderivations: Phi is the identity, and the adjoint morphism

def phi_is_identity_on_coderivations(space: GradedSpace, r: Coderivation, max_arity: int) -> Report:
    """Brackets of R inside Coder(SV) with A = sigma(V) and P(Q) = sigma_{Q(1)} reproduce R"""
    if r.is_reduced:
        r = r.as_unreduced()
    report = Report(command="check")
    ops = _CoderivationOps(space)
    parities = space.parities

    for arity in range(0, max_arity + 1):
        for word in space.canonical_words(arity):
            if not word:
                computed = r.value(())
            else:
                computed = bracket_sum(ops, list(word), [parities[v] for v in word], r, bernoulli_first)
            expected = r.value(word)
            report.record("phi_identity", arity, space.word_names(word), vec_to_json(space, computed),
                          vec_to_json(space, expected), passed=computed == expected)
    return report


def adjoint_morphism(v: LInftyAlgebra, max_arity: int) -> Tuple[Dict[Word, Coderivation], Report]:
    """
    Ad_i(v_1 . ... . v_i) = s^-1([..[Q, sigma_v1].., sigma_vi] - sigma_{q_i(v)}), checked against
    s Ad_i(v)_k(w) = q_{i+k}(v . w).
    """
    space = v.space
    q = v.Q.as_unreduced()
    report = Report(command="check")
    values: Dict[Word, Coderivation] = {}
    sigmas = {k: sigma_section(space, space.basis_vector(k)) for k in range(space.dim)}

    for arity in range(1, max_arity + 1):
        for word in space.canonical_words(arity):
            nested = q
            for letter in word:
                nested = nr_bracket(nested, sigmas[letter])
            correction = Vector(space, q.value(word))
            if correction.is_zero:
                ad = nested
            else:
                ad = linear_combination(space, nested.degree, [(1, nested), (-1, sigma_section(space, correction))])
            values[word] = ad
            for k in range(0, max_arity - arity + 1):
                for tail in space.canonical_words(k):
                    lhs = ad.value(tail)
                    if k == 0:
                        rhs: Vec = {}
                    else:
                        normalized = normalize_indices(word + tail, space.parities)
                        rhs = {}
                        if normalized is not None:
                            full, sign = normalized
                            rhs = vec_scale(q.value(full), sign)
                    report.record("adjoint", arity + k, space.word_names(word) + ["|"] + space.word_names(tail),
                                  vec_to_json(space, lhs), vec_to_json(space, rhs), passed=lhs == rhs)
    return values, report


# ---------------------------------------------------------------------------
# Koszul brackets

def endomorphism_lie_algebra(algebra: GradedAlgebra) -> MatrixLieAlgebra:
    """
    End(B) with A-part the left multiplications l(b) and L-part the maps killing the unit,
    presented by E(b_i, b_j) with b_j != 1
    """
    space = algebra.space
    names = space.names
    elements = [(f"l({names[k]})", algebra.left_multiplication(k)) for k in range(space.dim)]
    l_part = []
    for j in range(space.dim):
        if j == algebra.unit:
            continue
        for i in range(space.dim):
            label = f"E({names[i]},{names[j]})"
            elements.append((label, elementary_map(space, i, j)))
            l_part.append(label)
    splitting = {"A": [label for label, _ in elements[:space.dim]], "L": l_part}
    return matrix_lie_algebra(space, elements, splitting, name=f"End({algebra.name})")


def koszul_brackets(algebra: GradedAlgebra, f: LinearMap, max_arity: int,
                    bernoulli: Bernoulli = bernoulli_first) -> HigherBrackets:
    """Phi(f) inside End(B); A-coordinates coincide with the algebra's basis"""
    validation = algebra.validate()
    if not validation.ok:
        raise ValidationError(f"Algebra {algebra.name!r} is not unital associative")
    end = endomorphism_lie_algebra(algebra)
    m = Vector(end.space, end.decompose(f))
    return phi_element(end, m, max_arity, bernoulli)


def check_koszul_formulas(algebra: GradedAlgebra, f: LinearMap, max_arity: int = 2) -> Report:
    """Phi(f)_1(a) = f(a) - f(1) o a, and for f(1) = 0 the second-order formula"""
    report = Report(command="check")
    brackets = koszul_brackets(algebra, f, max(max_arity, 2))
    space = algebra.space
    unit = {algebra.unit: Fraction(1)}
    f_of_unit = f.apply(unit)
    degree_f = f.degree
    degrees = space.degrees

    for a in range(space.dim):
        ea = {a: Fraction(1)}
        expected = vec_add(dict(f.apply(ea)),
                           algebra.jordan(f_of_unit, ea, degree_f, degrees[a]), -1)
        computed = brackets.value((a,))
        default_manager.compare_vectors(report, "koszul_phi_1", space, 1, [space.names[a]], computed, expected)

    if not f_of_unit:
        for word in space.canonical_words(2):
            a, b = word
            ea, eb = {a: Fraction(1)}, {b: Fraction(1)}
            expected = dict(f.apply(algebra.jordan(ea, eb, degrees[a], degrees[b])))
            vec_add(expected, algebra.jordan(f.apply(ea), eb, degree_f + degrees[a], degrees[b]), -1)
            sign = -1 if (degrees[a] % 2 and degree_f % 2) else 1
            vec_add(expected, algebra.jordan(ea, f.apply(eb), degrees[a], degree_f + degrees[b]), -sign)
            computed = brackets.value(word)
            default_manager.compare_vectors(report, "koszul_phi_2", space, 2, space.word_names(word),
                                            computed, expected)
    return report


@dataclass
class OrderBound:
    """Smallest k with Phi(f)_i = 0 for k < i <= window, or None when above k_max"""
    bound: Optional[int]
    window: int
    vanishing: Dict[int, bool] = field(default_factory=dict)

    @property
    def exceeds(self) -> bool:
        return self.bound is None

    def to_dict(self) -> Dict[str, Any]:
        return {"bound": self.bound, "window": self.window, "relative_to_window": True,
                "vanishing": {str(k): v for k, v in sorted(self.vanishing.items())}}


def operator_order_bound(algebra: GradedAlgebra, f: LinearMap, k_max: int, max_arity: int) -> OrderBound:
    brackets = koszul_brackets(algebra, f, max_arity)
    space = brackets.a_space
    vanishing = {}
    for arity in range(0, max_arity + 1):
        vanishing[arity] = all(not brackets.value(word) for word in space.canonical_words(arity))
    for k in range(0, k_max + 1):
        if all(vanishing[i] for i in range(k + 1, max_arity + 1)):
            return OrderBound(k, max_arity, vanishing)
    return OrderBound(None, max_arity, vanishing)


def order_bracket_check(algebra: GradedAlgebra, f: LinearMap, g: LinearMap, k_max: int, max_arity: int) -> Report:
    """Bound of [f, g] against bound(f) + bound(g) - 1, reported as data within the window"""
    report = Report(command="check")
    bound_f = operator_order_bound(algebra, f, k_max, max_arity)
    bound_g = operator_order_bound(algebra, g, k_max, max_arity)
    commutator = MatrixLieAlgebra.commutator(f, g)
    bound_fg = operator_order_bound(algebra, commutator, k_max, max_arity)
    report.data["order_classes"] = {"f": bound_f.to_dict(), "g": bound_g.to_dict(), "[f,g]": bound_fg.to_dict()}
    if None not in (bound_f.bound, bound_g.bound, bound_fg.bound):
        limit = max(bound_f.bound + bound_g.bound - 1, 0)
        report.record("order_bracket_bound", 0, [], bound_fg.bound, limit, passed=bound_fg.bound <= limit)
    else:
        report.notes.append("order bound exceeds k_max inside the window; no comparison made")
    return report


# ---------------------------------------------------------------------------
# subcomplexes

@dataclass
class SubcomplexResult:
    end: MatrixLieAlgebra
    brackets: HigherBrackets
    strict: CoalgMorphism
    report: Report


def subcomplex_brackets(space: GradedSpace, d: LinearMap, w_indices: Sequence[int], max_arity: int) -> SubcomplexResult:
    """
    Brackets of d inside End(V) for a subcomplex W with basis-aligned complement C; the
    A-part is Hom(W, C) with projection f -> P f P_perp.
    """
    if not d.compose(d).is_zero():
        raise PreconditionError("d does not square to zero")
    w_set = set(w_indices)
    for w in w_set:
        if any(k not in w_set for k in d.column(w)):
            raise PreconditionError("W is not closed under d")
    names = space.names
    elements, a_part, l_part = [], [], []
    for i in range(space.dim):
        for j in range(space.dim):
            label = f"E({names[i]},{names[j]})"
            elements.append((label, elementary_map(space, i, j)))
            (a_part if (i not in w_set and j in w_set) else l_part).append(label)
    end = matrix_lie_algebra(space, elements, {"A": a_part, "L": l_part}, name="End(V)")
    d_vector = Vector(end.space, end.decompose(d))
    derivation = inner_derivation(end, d_vector, name="[d,-]")
    brackets = phi_derivation(end, derivation, max_arity)
    report = Report(command="check")

    c_proj = LinearMap(space, space, {i: {i: Fraction(1)} for i in range(space.dim) if i not in w_set})
    w_proj = LinearMap(space, space, {i: {i: Fraction(1)} for i in w_set})
    a_indices = end.A
    a_space = brackets.a_space

    def as_map(value: Vec) -> LinearMap:
        return end.realize({a_indices[k]: c for k, c in value.items()})

    def on_w(linear: LinearMap) -> LinearMap:
        return c_proj.compose(linear).compose(w_proj)

    for k, index in enumerate(a_indices):
        f = end.elements[index]
        sign = -1 if f.degree % 2 else 1
        expected = on_w(d.compose(f).combine(f.compose(d), -sign))
        computed = on_w(as_map(brackets.value((k,))))
        report.record("subcomplex_phi_1", 1, [a_space.names[k]], computed.to_json(), expected.to_json(),
                      passed=computed.columns == expected.columns)

    if max_arity >= 2:
        perp_d = w_proj.compose(d)
        for word in a_space.canonical_words(2):
            f, g = (end.elements[a_indices[k]] for k in word)
            outer = -1 if (f.degree + 1) % 2 else 1
            inner = -1 if ((f.degree + 1) % 2 and (g.degree + 1) % 2) else 1
            expected = f.compose(perp_d).compose(g).combine(g.compose(perp_d).compose(f), -inner).scaled(outer)
            expected = on_w(expected)
            computed = on_w(as_map(brackets.value(word)))
            report.record("subcomplex_phi_2", 2, a_space.word_names(word), computed.to_json(), expected.to_json(),
                          passed=computed.columns == expected.columns)

    for arity in range(3, max_arity + 1):
        for word in a_space.canonical_words(arity):
            value = brackets.value(word)
            report.record("subcomplex_phi_vanishes", arity, a_space.word_names(word),
                          vec_to_json(a_space, value), [], passed=not value)

    morphism, target = projection_morphism(end, derivation, max_arity)
    perp_d_p = w_proj.compose(d).compose(c_proj)
    l_position = {index: k for k, index in enumerate(end.L)}
    for k, index in enumerate(a_indices):
        f = end.elements[index]
        expected = vec_reindex(end.decompose(MatrixLieAlgebra.commutator(perp_d_p, f)), l_position)
        default_manager.compare_vectors(report, "subcomplex_strict_morphism", target.space, 1,
                                        [a_space.names[k]], morphism.value((k,)), expected)
    if max_arity >= 2:
        for word in a_space.canonical_words(2):
            value = morphism.value(word)
            report.record("subcomplex_strict_morphism", 2, a_space.word_names(word),
                          vec_to_json(target.space, value), [], passed=not value)
    strict = CoalgMorphism.from_rule(a_space, target.space, lambda word: morphism.value(word) if len(word) == 1 else {},
                                     top_arity=1, label="[P_perp d P,-]")
    report.merge(check_morphism(strict, brackets.coder, target.Q, max_arity,
                                "subcomplex_strict_is_morphism"))
    return SubcomplexResult(end, brackets, strict, report)


# ---------------------------------------------------------------------------
# Getzler's brackets

def getzler_splitting(gla: GLA) -> GLA:
    """L = nonnegative degrees, A = negative degrees"""
    degrees = gla.space.degrees
    return gla.with_splitting({
        "L": [i for i in range(gla.dim) if degrees[i] >= 0],
        "A": [i for i in range(gla.dim) if degrees[i] < 0],
    })


def getzler_brackets(gla: GLA, max_arity: int, bernoulli: Bernoulli = bernoulli_first) -> Tuple[HigherBrackets, Report]:
    """
    Phi(D) for the degree splitting, compared with the closed form
    -B_{i-1}/(i-1)! sum eps [..[P_perp D l_s(1), l_s(2)].., l_s(i)] for i >= 2.
    """
    split = getzler_splitting(gla)
    d = differential_derivation(split)
    brackets = phi_derivation(split, d, max_arity, bernoulli)
    report = Report(command="check")
    a_indices = split.A
    a_space = brackets.a_space
    parities = split.space.parities
    degrees = split.space.degrees

    for k, index in enumerate(a_indices):
        value = brackets.value_in_m((k,))
        image = d.matrix.column(index)
        expected = {} if degrees[index] == -1 else dict(image)
        default_manager.compare_vectors(report, "getzler_phi_1", split.space, 1, [a_space.names[k]], value, expected)

    for arity in range(2, max_arity + 1):
        weight = -bernoulli(arity - 1) / factorial(arity - 1)
        for word in a_space.canonical_words(arity):
            inputs = [a_indices[k] for k in word]
            closed: Vec = {}
            if weight:
                for order, sign in signed_permutations(tuple(parities[x] for x in inputs)):
                    chain = split.project_perp(d.matrix.column(inputs[order[0]]))
                    for p in order[1:]:
                        chain = split.bracket_with_basis(chain, inputs[p])
                    vec_add(closed, chain, sign * weight)
            default_manager.compare_vectors(report, "getzler_closed_form", split.space, arity,
                                            a_space.word_names(word), brackets.value_in_m(word), closed)
    return brackets, report


# ---------------------------------------------------------------------------
# inner derivations against elements

def inner_derivation_separation(gla: GLA, m: Vector, max_arity: int) -> Optional[Tuple[int, List[str]]]:
    """First word where Phi([m,-]) and Phi(m) differ, for m normalizing L with Pm != 0"""
    gla._require_splitting()
    if not gla.normalizes(m.coeffs, gla.L):
        raise PreconditionError("Element does not normalize L")
    if not gla.project(m.coeffs):
        raise PreconditionError("Element lies in L; its brackets agree with those of its inner derivation")
    phi_m = phi_element(gla, m, max_arity)
    phi_ad = phi_derivation(gla, inner_derivation(gla, m, "ad_m"), max_arity)
    space = phi_m.a_space
    for arity in range(1, max_arity + 1):
        for word in space.canonical_words(arity):
            if phi_m.value(word) != phi_ad.value(word):
                return arity, space.word_names(word)
    return None


# ---------------------------------------------------------------------------
# change of complement

def complement_isomorphism(gla1: GLA, gla2: GLA, d1: Derivation, d2: Derivation, max_arity: int) -> Report:
    """
    For two complements A1, A2 of the same L (gla2 = gla1 in a basis keeping L), build
    (A1, Phi1(D)) -> cone -> cone' -> (A2, Phi2(D)) and check it is a morphism whose linear
    part is P2 on A1, an isomorphism.
    """
    from .cocone import model_fiber_product, cone_change_of_basis
    from .transfer import perturbed_projection, twisted_cone_retraction

    report = Report(command="check")
    model1 = model_fiber_product(gla1, [], d1, max_arity)
    model2 = model_fiber_product(gla2, [], d2, max_arity)
    iso = cone_change_of_basis(model1.cone, model2.cone, gla1, gla2)
    report.merge(check_morphism(iso, model1.cone.Q, model2.cone.Q, max_arity, "cone_isomorphism"))
    data = twisted_cone_retraction(gla2, [], d2)
    g = perturbed_projection(model2.cone.Q, data, max_arity)
    phi1 = phi_derivation(gla1, d1, max_arity)
    phi2 = phi_derivation(gla2, d2, max_arity)
    composite = _rebase(compose_morphisms(g, compose_morphisms(iso, model1.morphism)), phi1.a_space, phi2.a_space)
    report.merge(check_morphism(composite, phi1.coder, phi2.coder, max_arity, "complement_isomorphism"))

    transition = gla2.transition.inv()
    a2_position = {index: k for k, index in enumerate(gla2.A)}
    columns = []
    for k, index in enumerate(gla1.A):
        new_coords = column_to_vec(transition[:, index])
        expected = vec_reindex(gla2.project(new_coords), a2_position)
        computed = composite.value((k,))
        default_manager.compare_vectors(report, "complement_linear_part", phi2.a_space, 1,
                                        [phi1.a_space.names[k]], computed, expected)
        columns.append(computed)
    invertible = rank_of(columns, len(gla2.A)) == len(gla1.A)
    report.record("complement_linear_part_invertible", 1, [], invertible, True, passed=invertible)
    return report


def _rebase(f: CoalgMorphism, domain: GradedSpace, codomain: GradedSpace) -> CoalgMorphism:
    """Same coefficients, read on spaces with the same basis order under other names"""
    if f.domain.degrees != domain.degrees or f.codomain.degrees != codomain.degrees:
        raise ValidationError("Rebased morphism must keep the graded dimensions")
    return CoalgMorphism.from_rule(domain, codomain, f.value, f.window, f.top_arity, label=f.label)
