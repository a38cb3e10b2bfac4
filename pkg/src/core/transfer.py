"""
Homotopy retraction data and transfer of L-infinity[1] structures

Given a big structure (V, Q) and retraction data (pi, f1, K) onto (W, r1), the transferred
structure R and the morphism F: W -> V are the unique solutions of

    pF = f1 + K q_+ F,        pR = r1 + pi q_+ F,

computed by induction on the arity. The flagship instance is the retraction of the
cylinder of L -> M extended by selected derivations, whose transfer reproduces the
Bernoulli-weighted brackets on the complement A in closed form.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import factorial
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Any, Union

from .coalgebra import (Coderivation, CoalgMorphism, LInftyAlgebra, ClassifyingData, SymVec, Word,
                        check_linfty, check_morphism, decalage, extension_from_morphism, sym_add,
                        symmetric_product)
from .error_handler import PreconditionError, ValidationError
from .graded import (GLA, GradedSpace, LinearMap, MatrixLieAlgebra, Derivation, Vector, Vec, vec_add,
                     vec_scale, signed_permutations, koszul_parity, homology_map_is_iso)
from .hdb import HigherBrackets, phi_element, phi_derivation, a_space_of, to_a_coordinates, preserves_l
from .models import Flavor, Report
from .scalars import bernoulli_first
from .verification import default_manager

logger = logging.getLogger(__name__)

Bernoulli = Callable[[int], Fraction]


# ---------------------------------------------------------------------------
# retraction data

@dataclass
class RetractionData:
    """
    (V, q1) -> (W, r1) with pi f1 = id_W and K q1 + q1 K = f1 pi - id_V.

    `test_vectors` restricts the homotopy identity to a subspace of V (for instance the
    fiber product inside a product of form spaces); None means the whole basis.
    """
    big: GradedSpace
    small: GradedSpace
    q1: LinearMap
    r1: LinearMap
    pi: LinearMap
    f1: LinearMap
    K: LinearMap
    test_vectors: Optional[List[Vec]] = None
    label: str = ""

    def __post_init__(self):
        expected = {
            "q1": (self.q1, self.big, self.big, 1),
            "r1": (self.r1, self.small, self.small, 1),
            "pi": (self.pi, self.big, self.small, 0),
            "f1": (self.f1, self.small, self.big, 0),
            "K": (self.K, self.big, self.big, -1),
        }
        for name, (linear, source, target, degree) in expected.items():
            if linear.source != source or linear.target != target:
                raise ValidationError(f"Retraction map {name} has the wrong source or target")
            if linear.degree != degree:
                raise ValidationError(f"Retraction map {name} has degree {linear.degree}, expected {degree}")

    def satisfies_side_conditions(self) -> bool:
        """K K = 0, K f1 = 0 and pi K = 0"""
        return (self.K.compose(self.K).is_zero() and self.K.compose(self.f1).is_zero()
                and self.pi.compose(self.K).is_zero())


def validate_retraction(data: RetractionData) -> Report:
    """
    Check the retraction identities on basis elements (or the supplied test vectors).

    Identities:
        pi_f1: pi f1 = id on W
        homotopy: K q1 + q1 K = f1 pi - id
        pi_chain / f1_chain: pi and f1 commute with the differentials
        degree: every map has its declared degree
    """
    report = Report(command="transfer-check")
    big, small = data.big, data.small
    mgr = default_manager

    for name, linear in (("q1", data.q1), ("r1", data.r1), ("pi", data.pi), ("f1", data.f1), ("K", data.K)):
        bad = linear.degree_violations()
        report.record("degree", 1, [name], [linear.source.names[i] for i in bad], [], passed=not bad)

    for j in range(small.dim):
        unit = {j: Fraction(1)}
        mgr.compare_vectors(report, "pi_f1", small, 1, [small.names[j]], data.pi.apply(data.f1.column(j)), unit)
        mgr.compare_vectors(report, "f1_chain", big, 1, [small.names[j]],
                            data.q1.apply(data.f1.column(j)), data.f1.apply(data.r1.column(j)))

    if data.test_vectors is None:
        tests = [(big.names[i], {i: Fraction(1)}) for i in range(big.dim)]
    else:
        tests = [(f"v{k}", vector) for k, vector in enumerate(data.test_vectors)]
    for label, vector in tests:
        lhs = data.K.apply(data.q1.apply(vector))
        vec_add(lhs, data.q1.apply(data.K.apply(vector)))
        rhs = data.f1.apply(data.pi.apply(vector))
        vec_add(rhs, vector, -1)
        mgr.compare_vectors(report, "homotopy", big, 1, [label], lhs, rhs)
        mgr.compare_vectors(report, "pi_chain", small, 1, [label],
                            data.pi.apply(data.q1.apply(vector)), data.r1.apply(data.pi.apply(vector)))
    logger.debug(f"Retraction {data.label or ''}: {report.total_checks} checks, ok={report.ok}")
    return report


def trivial_retraction(space: GradedSpace, q1: LinearMap) -> RetractionData:
    identity = LinearMap.identity(space)
    return RetractionData(space, space, q1, q1, identity, identity, LinearMap.zero(space, space, -1),
                          label="trivial")


# ---------------------------------------------------------------------------
# the transfer engine

@dataclass
class TransferResult:
    """Transferred structure R on W and the morphism F: (W, R) -> (V, Q)"""
    R: Coderivation
    F: CoalgMorphism
    data: RetractionData
    max_arity: int

    @property
    def structure(self) -> LInftyAlgebra:
        return LInftyAlgebra(self.data.small, self.R, "transferred")

    def to_json(self) -> Dict[str, Any]:
        return {"structure": self.R.to_json(self.max_arity), "morphism": self.F.to_json(self.max_arity)}


def _q_plus(q: Coderivation, components: SymVec) -> Vec:
    """sum over words u of length >= 2 of c_u q_{|u|}(u)"""
    total: Vec = {}
    for u, c in components.items():
        if len(u) >= 2:
            vec_add(total, q.value(u), c)
    return total


def transfer(q: Coderivation, data: RetractionData, max_arity: int, verify_structure: bool = False) -> TransferResult:
    """
    Transfer Q along the retraction data up to max_arity.

    Args:
        q: L-infinity[1] structure on data.big, known at least up to max_arity
        data: Retraction data whose q1 is the linear part of q
        max_arity: Window of the result
        verify_structure: Check QQ = 0 up to max_arity first

    Returns:
        TransferResult with R on data.small and F: data.small -> data.big
    """
    if q.space != data.big:
        raise ValidationError("Structure does not live on the big space of the retraction")
    if q.linear_part() != data.q1:
        raise PreconditionError("Linear part of the structure is inconsistent with q1 of the retraction")
    if verify_structure:
        check = check_linfty(q.space, q, max_arity)
        if not check.ok:
            raise PreconditionError("Big structure does not square to zero")
    logger.info(f"Transferring {q.label or 'structure'} (dim {data.big.dim} -> {data.small.dim}) "
                f"up to arity {max_arity}")
    holder: Dict[str, CoalgMorphism] = {}

    def components(word: Word) -> SymVec:
        morphism = holder["F"]
        result: SymVec = {}
        for k in range(2, len(word) + 1):
            sym_add(result, morphism.component(k, word))
        return result

    def f_rule(word: Word) -> Vec:
        if len(word) == 1:
            return data.f1.column(word[0])
        return data.K.apply(_q_plus(q, components(word)))

    def r_rule(word: Word) -> Vec:
        if len(word) == 1:
            return data.r1.column(word[0])
        return data.pi.apply(_q_plus(q, components(word)))

    f = CoalgMorphism.from_rule(data.small, data.big, f_rule, max_arity, label="F")
    holder["F"] = f
    r = Coderivation.from_rule(data.small, 1, r_rule, max_arity, Flavor.REDUCED, label="R")
    return TransferResult(r, f, data, max_arity)


def check_transfer_fixed_points(result: TransferResult, q: Coderivation, max_arity: int,
                                check_structure: bool = True) -> Report:
    """
    Re-check pF = f1 + K q_+ F and pR = r1 + pi q_+ F from the full action of F, then
    the morphism equation and, optionally, RR = 0.
    """
    report = Report(command="transfer-check")
    data, f, r = result.data, result.F, result.R
    small, big = data.small, data.big
    for arity in range(1, max_arity + 1):
        for word in small.canonical_words(arity):
            pushed = _q_plus(q, f.apply(word))
            expected_f = data.K.apply(pushed)
            expected_r = data.pi.apply(pushed)
            if arity == 1:
                vec_add(expected_f, data.f1.column(word[0]))
                vec_add(expected_r, data.r1.column(word[0]))
            names = small.word_names(word)
            default_manager.compare_vectors(report, "fixed_point_F", big, arity, names, f.value(word), expected_f)
            default_manager.compare_vectors(report, "fixed_point_R", small, arity, names, r.value(word), expected_r)
    report.merge(check_morphism(f, r, q, max_arity, "transfer_morphism"))
    if check_structure:
        report.merge(check_linfty(small, r, max_arity, "transferred_QQ"))
    return report


def check_weak_equivalence(data: RetractionData) -> Report:
    """f1 induces an isomorphism in homology (needs q1 and r1 square-zero)"""
    report = Report(command="transfer-check")
    try:
        iso = homology_map_is_iso(data.small, data.r1, data.big, data.q1, data.f1)
    except PreconditionError as e:
        logger.error(f"Linear part is not a chain map between complexes: {e}")
        report.fail("f1_quasi_isomorphism", 1, [], str(e), True)
        return report
    report.record("f1_quasi_isomorphism", 1, [], iso, True, passed=iso)
    return report


# ---------------------------------------------------------------------------
# perturbed projection

def _symmetrized_homotopy(data: RetractionData, incl_proj: LinearMap, sym: SymVec) -> SymVec:
    """
    K extended to S(V): on a word of length m, K acts on one letter, f1 pi on a subset S
    of the others and the identity on the rest, averaged over orderings.
    """
    big = data.big
    parities = big.parities
    result: SymVec = {}
    for word, coeff in sym.items():
        m = len(word)
        word_parities = [parities[w] for w in word]
        for p in range(m):
            k_image = data.K.column(word[p])
            if not k_image:
                continue
            others = [x for x in range(m) if x != p]
            for size in range(m):
                weight = Fraction(factorial(size) * factorial(m - 1 - size), factorial(m))
                for chosen in combinations(others, size):
                    projected = [incl_proj.column(word[x]) for x in chosen]
                    if any(not v for v in projected):
                        continue
                    rest = [x for x in others if x not in chosen]
                    order = list(chosen) + [p] + rest
                    sign = -1 if koszul_parity(order, word_parities) else 1
                    if sum(word_parities[x] for x in chosen) & 1:
                        sign = -sign
                    vectors = projected + [k_image] + [{word[x]: Fraction(1)} for x in rest]
                    sym_add(result, symmetric_product(vectors, big), coeff * weight * sign)
    return result


def perturbed_projection(q: Coderivation, data: RetractionData, max_arity: int) -> CoalgMorphism:
    """
    Quasi-inverse G: (V, Q) -> (W, R) of the transfer morphism, G = p S(pi) sum_k (delta K~)^k
    with delta the part of Q of arity >= 2. Requires the side conditions.
    """
    if q.space != data.big:
        raise ValidationError("Structure does not live on the big space of the retraction")
    if q.linear_part() != data.q1:
        raise PreconditionError("Linear part of the structure is inconsistent with q1 of the retraction")
    if not data.satisfies_side_conditions():
        raise PreconditionError("Perturbed projection needs K K = 0, K f1 = 0 and pi K = 0")
    incl_proj = data.f1.compose(data.pi)

    def rule(word: Word) -> Vec:
        result: Vec = {}
        current: SymVec = {word: Fraction(1)}
        while current:
            for u, c in current.items():
                if len(u) == 1:
                    vec_add(result, data.pi.column(u[0]), c)
            current = q.apply_sym(_symmetrized_homotopy(data, incl_proj, current), min_arity=2)
        return result

    return CoalgMorphism.from_rule(data.big, data.small, rule, max_arity, label="G")


# ---------------------------------------------------------------------------
# the retraction of the cylinder of L -> M extended by derivations

@dataclass
class DerivationCylinder:
    """
    Big space s^-1 Der_sel x (s^-1 M x s^-1 L x M) with its structure and the retraction
    onto W = s^-1 Der_sel x s^-1 M x A.
    """
    gla: GLA
    derivations: List[Derivation]
    selection: Optional[MatrixLieAlgebra]
    cylinder: Any
    big: LInftyAlgebra
    retraction: RetractionData
    max_arity: int

    @property
    def n_der(self) -> int:
        return len(self.derivations)

    @property
    def small(self) -> GradedSpace:
        return self.retraction.small

    def small_n(self, x: int) -> int:
        """W position of s^-1 e_x"""
        return self.n_der + x

    def small_a(self, j: int) -> int:
        """W position of the j-th A basis element"""
        return self.n_der + self.gla.dim + j

    def small_slot(self, index: int) -> Tuple[str, int]:
        if index < self.n_der:
            return "D", index
        if index < self.n_der + self.gla.dim:
            return "n", index - self.n_der
        return "a", index - self.n_der - self.gla.dim

    def big_cylinder(self, index: int) -> int:
        return self.n_der + index

    def insertion_bound(self, support) -> Optional[int]:
        """At most two copies of derivation letters fit into any coefficient"""
        return 2 if all(k < self.n_der for k in support) else None


def _selection_algebra(gla: GLA, derivations: Sequence[Derivation]) -> Optional[MatrixLieAlgebra]:
    if not derivations:
        return None
    names = [d.name for d in derivations]
    if len(set(names)) != len(names):
        raise ValidationError(f"Selected derivations need distinct names: {names}")
    for d in derivations:
        if d.matrix.source != gla.space:
            raise ValidationError(f"Derivation {d.name} does not act on {gla.name}")
        if not preserves_l(gla, d):
            raise PreconditionError(f"Derivation {d.name} does not preserve L")
    try:
        return MatrixLieAlgebra(gla.space, [(d.name, d.matrix) for d in derivations], name="Der_sel")
    except ValidationError as e:
        raise ValidationError(f"Selected derivations are not bracket-closed: {e}") from None


def _require_closed_l(gla: GLA):
    gla._require_splitting()
    violations = gla.closure_violations(gla.L)
    if violations:
        i, j = violations[0]
        raise PreconditionError(
            f"L not closed: [{gla.space.names[i]}, {gla.space.names[j]}] leaves L")


def build_derivation_cylinder_retraction(gla: GLA, derivations: Sequence[Derivation],
                                         max_arity: int) -> DerivationCylinder:
    """
    The big structure is the cylinder of L -> M (identity on the N = M side, zero
    differentials) extended over s^-1 Der_sel by q_2(s^-1 D . w) = Psi(D)(w); the retraction
    is pi(s^-1 D, s^-1 m, s^-1 l, n) = (s^-1 D, s^-1 m, Pn),
    f1(s^-1 D, s^-1 m, a) = (s^-1 D, s^-1 m, s^-1 P_perp m, a), K = (0, 0, s^-1 P_perp n, 0).
    """
    from .cocone import inclusion_cylinder, psi_morphism

    _require_closed_l(gla)
    plain = gla.without_differential()
    derivations = list(derivations)
    selection = _selection_algebra(plain, derivations)
    cylinder = inclusion_cylinder(plain, max_arity)
    psis = [psi_morphism(cylinder, d) for d in derivations]

    if selection is not None:
        base = decalage(selection, "s^-1(Der_sel)", tag="D")
    else:
        empty = GradedSpace([], label="Der_sel")
        base = LInftyAlgebra(empty, Coderivation.zero(empty, 1), "s^-1(Der_sel)")

    def classifying(word: Word) -> Optional[Coderivation]:
        return psis[word[0]].as_unreduced()

    data = ClassifyingData(base.space, cylinder.space, classifying, top_arity=1)
    n_der = len(derivations)

    def bound(support) -> Optional[int]:
        return 2 if all(k < n_der for k in support) else None

    big = extension_from_morphism(base, cylinder.algebra, data, max_arity=max_arity, insertion_bound=bound,
                                  name="big")

    dim = plain.dim
    l_position = {x: k for k, x in enumerate(plain.L)}
    a_position = {x: k for k, x in enumerate(plain.A)}
    small_space, small_offsets = GradedSpace.direct_sum(
        [base.space, plain.space.shifted("n"), plain.space.subspace(plain.A).tagged("a")], label="W")
    n_off, a_off = small_offsets[1], small_offsets[2]
    cyl_n = n_der + cylinder.offsets[0]
    cyl_l = n_der + cylinder.offsets[1]
    cyl_m = n_der + cylinder.offsets[2]

    pi_columns: Dict[int, Vec] = {}
    f1_columns: Dict[int, Vec] = {}
    k_columns: Dict[int, Vec] = {}
    for k in range(n_der):
        pi_columns[k] = {k: Fraction(1)}
        f1_columns[k] = {k: Fraction(1)}
    for x in range(dim):
        pi_columns[cyl_n + x] = {n_off + x: Fraction(1)}
        image = {cyl_n + x: Fraction(1)}
        if x in l_position:
            image[cyl_l + l_position[x]] = Fraction(1)
            k_columns[cyl_m + x] = {cyl_l + l_position[x]: Fraction(1)}
        else:
            pi_columns[cyl_m + x] = {a_off + a_position[x]: Fraction(1)}
        f1_columns[n_off + x] = image
    for x, j in a_position.items():
        f1_columns[a_off + j] = {cyl_m + x: Fraction(1)}

    r1_columns = {n_off + x: {a_off + a_position[x]: Fraction(1)} for x in a_position}
    retraction = RetractionData(
        big.space, small_space, big.Q.linear_part(), LinearMap(small_space, small_space, r1_columns, 1),
        LinearMap(big.space, small_space, pi_columns), LinearMap(small_space, big.space, f1_columns),
        LinearMap(big.space, big.space, k_columns, -1), label="cylinder-extension")
    logger.info(f"Built extended cylinder retraction: big dim {big.space.dim}, small dim {small_space.dim}, "
                f"{n_der} derivation(s)")
    return DerivationCylinder(plain, derivations, selection, cylinder, big, retraction, max_arity)


def _derived_bracket_tables(sec: DerivationCylinder, max_arity: int, bernoulli: Bernoulli):
    gla = sec.gla
    phi_d = [phi_derivation(gla, d, max_arity, bernoulli) for d in sec.derivations]
    phi_m: Dict[int, HigherBrackets] = {}

    def phi_basis(x: int) -> HigherBrackets:
        if x not in phi_m:
            phi_m[x] = phi_element(gla, gla.space.basis_vector(x), max_arity, bernoulli)
        return phi_m[x]

    return phi_d, phi_basis


def _a_to_small(sec: DerivationCylinder, value: Vec) -> Vec:
    return {sec.small_a(j): c for j, c in value.items()}


def closed_form_structure(sec: DerivationCylinder, max_arity: Optional[int] = None,
                            bernoulli: Bernoulli = bernoulli_first) -> Coderivation:
    """
    Closed-form structure on W = s^-1 Der_sel x s^-1 M x A:
    r_1(s^-1 m) = Pm, r_2 on pairs of derivations or of shifted elements is the decalage
    bracket, r_2(s^-1 D . s^-1 m) = (-1)^{|D|} s^-1 Dm, and r_{i+1}(s^-1 D . a^i) = Phi(D)_i,
    r_{i+1}(s^-1 m . a^i) = Phi(m)_i; everything else vanishes.
    """
    max_arity = max_arity or sec.max_arity
    gla = sec.gla
    phi_d, phi_basis = _derived_bracket_tables(sec, max_arity, bernoulli)
    a_position = {x: k for k, x in enumerate(gla.A)}
    parities = gla.space.parities

    def rule(word: Word) -> Vec:
        slots = [sec.small_slot(index) for index in word]
        kinds = [kind for kind, _ in slots]
        if len(word) == 1:
            kind, x = slots[0]
            if kind == "n" and x in a_position:
                return {sec.small_a(a_position[x]): Fraction(1)}
            return {}
        a_word = tuple(j for kind, j in slots[1:] if kind == "a")
        if len(a_word) == len(word) - 1 and kinds[0] != "a":
            kind, x = slots[0]
            if kind == "D":
                return _a_to_small(sec, phi_d[x].value(a_word))
            return _a_to_small(sec, phi_basis(x).value(a_word))
        if len(word) != 2:
            return {}
        (k1, x1), (k2, x2) = slots
        if k1 == "D" and k2 == "D":
            value = sec.selection.bracket_basis(x1, x2)
            sign = -1 if sec.selection.space.parities[x1] else 1
            return vec_scale(value, sign)
        if k1 == "n" and k2 == "n":
            sign = -1 if parities[x1] else 1
            return {sec.small_n(y): sign * c for y, c in gla.bracket_basis(x1, x2).items()}
        if k1 == "D" and k2 == "n":
            d = sec.derivations[x1]
            sign = -1 if d.degree % 2 else 1
            return {sec.small_n(y): sign * c for y, c in d.matrix.column(x2).items()}
        return {}

    return Coderivation.from_rule(sec.small, 1, rule, max_arity, Flavor.REDUCED, insertion_bound=sec.insertion_bound,
                                  label="R_closed")


def nested_perp_sum(gla: GLA, seed: Vec, inputs: Sequence[int], first=None) -> Vec:
    """(1/i!) sum eps P_perp [..[seed, a_s1].., a_si] (or starting from D a_s1)"""
    parities = gla.space.parities
    total: Vec = {}
    i = len(inputs)
    for order, sign in signed_permutations(tuple(parities[x] for x in inputs)):
        ordered = [inputs[p] for p in order]
        if first is not None:
            chain = first(ordered[0])
            rest = ordered[1:]
        else:
            chain = seed
            rest = ordered
        for a in rest:
            chain = gla.bracket_with_basis(chain, a)
        vec_add(total, gla.project_perp(chain), Fraction(sign, factorial(i)))
    return total


def twisted_projection_morphism(sec: DerivationCylinder, max_arity: Optional[int] = None) -> CoalgMorphism:
    """
    Closed-form morphism W -> big space: f1 plus the shifted L-slot values
    (1/i!) sum eps P_perp [..[D a_s1, a_s2].., a_si] on s^-1 D . a^i and
    (1/i!) sum eps P_perp [..[m, a_s1].., a_si] on s^-1 m . a^i.
    """
    max_arity = max_arity or sec.max_arity
    gla = sec.gla
    a_indices = gla.A
    l_position = {x: k for k, x in enumerate(gla.L)}
    cyl_l = sec.big_cylinder(sec.cylinder.offsets[1])
    f1 = sec.retraction.f1

    def to_l_slot(value: Vec) -> Vec:
        return {cyl_l + l_position[x]: c for x, c in value.items()}

    def rule(word: Word) -> Vec:
        if len(word) == 1:
            return f1.column(word[0])
        slots = [sec.small_slot(index) for index in word]
        if slots[0][0] == "a" or any(kind != "a" for kind, _ in slots[1:]):
            return {}
        kind, x = slots[0]
        inputs = [a_indices[j] for _, j in slots[1:]]
        if kind == "D":
            d = sec.derivations[x]
            return to_l_slot(nested_perp_sum(gla, {}, inputs, first=d.matrix.column))
        return to_l_slot(nested_perp_sum(gla, {x: Fraction(1)}, inputs))

    return CoalgMorphism.from_rule(sec.small, sec.big.space, rule, max_arity, insertion_bound=sec.insertion_bound,
                                   label="F_closed")


def check_transfer_oracle(gla: GLA, derivations: Sequence[Derivation], max_arity: int,
                          bernoulli: Bernoulli = bernoulli_first, check_structure: bool = False) -> Report:
    """
    Transfer over the extended cylinder retraction against the closed forms, coefficientwise.
    `bernoulli` only feeds the closed-form side.
    """
    report = Report(command="transfer-check")
    sec = build_derivation_cylinder_retraction(gla, derivations, max_arity)
    report.merge(validate_retraction(sec.retraction), prefix="retraction.")
    result = transfer(sec.big.Q, sec.retraction, max_arity)
    closed_r = closed_form_structure(sec, max_arity, bernoulli)
    closed_f = twisted_projection_morphism(sec, max_arity)
    arities = range(1, max_arity + 1)
    default_manager.compare_coderivations(report, "transferred_structure", result.R, closed_r, arities)
    default_manager.compare_morphisms(report, "transferred_morphism", result.F, closed_f, arities)
    if check_structure:
        report.merge(check_linfty(sec.small, result.R, max_arity, "transferred_QQ"))
    report.data["dimensions"] = {"big": sec.big.space.dim, "small": sec.small.dim}
    logger.info(f"Transfer oracle on {gla.name}: {report.total_checks} checks, ok={report.ok}")
    return report


# ---------------------------------------------------------------------------
# brackets for complements that are not subalgebras

def generalized_brackets_via_transfer(gla: GLA, source: Union[Vector, Derivation], max_arity: int) -> HigherBrackets:
    """Brackets on A read off the transferred structure; A need not be bracket-closed"""
    is_derivation = isinstance(source, Derivation)
    sec = build_derivation_cylinder_retraction(gla, [source] if is_derivation else [], max_arity + 1)
    result = transfer(sec.big.Q, sec.retraction, max_arity + 1)
    a_space = a_space_of(sec.gla)
    a_first = sec.small_a(0)

    def a_part(value: Vec) -> Vec:
        return {k - a_first: c for k, c in value.items() if k >= a_first}

    def shifted(word: Word) -> Word:
        return tuple(sec.small_a(j) for j in word)

    if is_derivation:
        def rule(word: Word) -> Vec:
            return a_part(result.R.value((0,) + shifted(word)))

        coder = Coderivation.from_rule(a_space, source.degree, rule, max_arity, Flavor.REDUCED,
                                       label=f"Phi({source.name})")
        return HigherBrackets(sec.gla, coder, source.name)

    if source.space != gla.space:
        raise ValidationError("Source element is not in the algebra")
    m = source.coeffs

    def rule(word: Word) -> Vec:
        if not word:
            return to_a_coordinates(sec.gla, sec.gla.project(m))
        total: Vec = {}
        for x, c in m.items():
            vec_add(total, a_part(result.R.value((sec.small_n(x),) + shifted(word))), c)
        return total

    degree = source.degree if not source.is_zero else 0
    coder = Coderivation.from_rule(a_space, degree, rule, max_arity, Flavor.UNREDUCED, label="Phi(m)")
    return HigherBrackets(sec.gla, coder, "m")


def check_generalized_first_bracket(gla: GLA, m: Vector) -> Report:
    """Phi(m)_1(a) = P[m, a] - 1/2 P[Pm, a] for the transferred brackets"""
    report = Report(command="brackets")
    brackets = generalized_brackets_via_transfer(gla, m, 1)
    a_space = brackets.a_space
    for j, x in enumerate(gla.A):
        a = {x: Fraction(1)}
        expected = gla.project(gla.bracket(m.coeffs, a))
        vec_add(expected, gla.project(gla.bracket(gla.project(m.coeffs), a)), Fraction(-1, 2))
        default_manager.compare_vectors(report, "generalized_phi_1", gla.space, 1, [a_space.names[j]],
                                        brackets.value_in_m((j,)), expected)
    return report


# ---------------------------------------------------------------------------
# the cone with differential D onto s^-1 N x A

def twisted_cone_retraction(gla: GLA, n_indices: Sequence[int], d: Derivation) -> RetractionData:
    """
    Retraction of the cone s^-1 N x s^-1 L x M with differential D onto s^-1 N x A:
    pi(s^-1 n, s^-1 l, m) = (s^-1 n, Pm), f1(s^-1 n, a) = (s^-1 n, s^-1 P_perp(n + Da), a),
    K(s^-1 n, s^-1 l, m) = (0, s^-1 P_perp m, 0).
    """
    from .cocone import fiber_cone, fiber_model_space

    cone = fiber_cone(gla, n_indices, d, 1)
    small = fiber_model_space(gla, n_indices)
    n_indices = list(n_indices)
    n_position = {x: k for k, x in enumerate(n_indices)}
    l_position = {x: k for k, x in enumerate(gla.L)}
    a_position = {x: k for k, x in enumerate(gla.A)}
    n_off, l_off, m_off = cone.offsets
    a_off = len(n_indices)

    def l_slot(value: Vec) -> Vec:
        return {l_off + l_position[x]: c for x, c in gla.project_perp(value).items()}

    def a_slot(value: Vec) -> Vec:
        return {a_off + a_position[x]: c for x, c in gla.project(value).items()}

    pi_columns: Dict[int, Vec] = {}
    f1_columns: Dict[int, Vec] = {}
    k_columns: Dict[int, Vec] = {}
    r1_columns: Dict[int, Vec] = {}
    for k, x in enumerate(n_indices):
        pi_columns[n_off + k] = {k: Fraction(1)}
        f1_columns[k] = vec_add({n_off + k: Fraction(1)}, l_slot({x: Fraction(1)}))
        image = d.matrix.column(x)
        try:
            moved = {n_position[y]: -c for y, c in image.items()}
        except KeyError:
            raise PreconditionError(f"{d.name} does not preserve N") from None
        r1_columns[k] = vec_add(moved, a_slot({x: Fraction(1)}))
    for x in range(gla.dim):
        if x in a_position:
            pi_columns[m_off + x] = {a_off + a_position[x]: Fraction(1)}
        else:
            k_columns[m_off + x] = {l_off + l_position[x]: Fraction(1)}
    for x, j in a_position.items():
        image = d.matrix.column(x)
        f1_columns[a_off + j] = vec_add(l_slot(image), {m_off + x: Fraction(1)})
        r1_columns[a_off + j] = a_slot(image)

    return RetractionData(cone.space, small, cone.Q.linear_part(), LinearMap(small, small, r1_columns, 1),
                          LinearMap(cone.space, small, pi_columns), LinearMap(small, cone.space, f1_columns),
                          LinearMap(cone.space, cone.space, k_columns, -1), label="cone")
