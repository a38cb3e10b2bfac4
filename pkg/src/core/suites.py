"""
Check suites behind the `check`, `transfer-check`, `cocone` and `fiber-model` commands

Each suite runs the library verifiers on a subject algebra (a bundle or a shipped fixture)
and folds their reports into one, in a fixed order.
"""

import logging
import random
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Union

from .bundle import AlgebraBundle
from .coalgebra import check_linfty, decalage
from .cocone import (check_cocylinder, check_fiber_model, check_psi, classifying_morphism_is_strict,
                     cylinder_transfer_oracle, homotopy_replacement_diagram, inclusion_cone)
from .error_handler import PreconditionError
from .fixtures import (Fixture, getzler_sl2, matrix_algebra, euler_operator, koszul_operators,
                       random_coderivation, random_split_algebras, shipped_fixtures, subcomplex_example,
                       truncated_polynomials, aff1_split, aff1_sheared)
from .graded import (GLA, GradedSpace, Derivation, Vector, validate_gla, differential_derivation,
                     check_homology_criterion, elementary_map, vec_to_json)
from .hdb import (Bernoulli, HigherBrackets, adjoint_morphism, check_koszul_formulas, check_projection_morphism,
                  complement_isomorphism, first_brackets, getzler_brackets, koszul_brackets, operator_order_bound,
                  order_bracket_check, phi_derivation, phi_element, phi_is_identity_on_coderivations, preserves_l,
                  inner_derivation_separation, subcomplex_brackets, verify_theorem_hdb, voronov_brackets)
from .models import Report, Suite
from .scalars import bernoulli_first
from .transfer import (check_generalized_first_bracket, check_transfer_oracle, generalized_brackets_via_transfer)
from .verification import default_manager

logger = logging.getLogger(__name__)


def mis_signed_bernoulli(i: int) -> Fraction:
    """Bernoulli table with the sign of B_2 flipped; a fault-injection hook for the transfer oracle"""
    value = bernoulli_first(i)
    return -value if i == 2 else value


class Subject:
    """What the suites run on: an algebra with its elements, derivations and derivation selection"""

    def __init__(self, name: str, gla: GLA, elements: Sequence[Vector], derivations: Sequence[Derivation],
                 selection: Optional[Sequence[Derivation]] = None, n_indices: Sequence[int] = ()):
        self.name = name
        self.gla = gla
        self.elements = list(elements)
        self.derivations = list(derivations)
        self.selection = list(selection) if selection is not None else self.derivations
        self.n_indices = list(n_indices)

    @classmethod
    def from_bundle(cls, bundle: AlgebraBundle) -> "Subject":
        gla = bundle.require_gla()
        elements = [bundle.elements[name] for name in sorted(bundle.elements)]
        derivations = [bundle.derivations[name] for name in sorted(bundle.derivations)]
        d = bundle.differential()
        if d is not None and all(x.name != d.name for x in derivations):
            derivations.insert(0, d)
        return cls(bundle.name, gla, elements, derivations, bundle.selected_derivations(), bundle.n_indices)

    @classmethod
    def from_fixture(cls, fixture: Fixture) -> "Subject":
        d = fixture.differential
        selection = [d] if d is not None else []
        return cls(fixture.name, fixture.gla, fixture.elements, fixture.derivations, selection,
                   fixture.n_indices)

    @property
    def complement_closed(self) -> bool:
        return self.gla.has_splitting and not self.gla.closure_violations(self.gla.A)

    @property
    def complement_abelian(self) -> bool:
        a = self.gla.A
        return all(not self.gla.bracket_basis(i, j) for k, i in enumerate(a) for j in a[k:])

    def square_zero(self) -> List[Derivation]:
        return [d for d in self.derivations if d.degree == 1 and d.is_square_zero()]


def _run_guarded(report: Report, identity: str, check: Callable[[], Report], prefix: str = ""):
    """Merge a sub-check; a precondition failure becomes a note rather than aborting the suite"""
    try:
        report.merge(check(), prefix=prefix)
    except PreconditionError as e:
        report.notes.append(f"{identity} skipped: {e}")
        logger.debug(f"{identity} skipped: {e}")


# ---------------------------------------------------------------------------
# suites on one subject

def theorem_suite(subject: Subject, max_arity: int, bernoulli: Bernoulli = bernoulli_first) -> Report:
    """Axioms, bracket compatibility of Phi, the projection morphism and the transfer oracle"""
    report = Report(command="check")
    gla = subject.gla
    report.merge(validate_gla(gla, require_closed_complement=False), prefix="validate.")
    if not gla.has_splitting:
        report.notes.append(f"{subject.name}: no splitting M = L + A; only the axioms were checked")
        return report
    if not subject.complement_closed:
        report.notes.append(f"{subject.name}: A is not a subalgebra; closed-form theorems skipped")
        for m in subject.elements:
            _run_guarded(report, "generalized_phi_1", lambda m=m: check_generalized_first_bracket(gla, m))
        return report
    plain = gla.without_differential()
    derivations = [d for d in subject.derivations if preserves_l(gla, d)]
    report.merge(verify_theorem_hdb(plain, subject.elements, derivations, max_arity, bernoulli))
    for d in subject.square_zero():
        if preserves_l(gla, d):
            _run_guarded(report, "projection_morphism", lambda d=d: check_projection_morphism(gla, d, max_arity,
                                                                                               bernoulli))
    _run_guarded(report, "transfer_oracle",
                 lambda: check_transfer_oracle(gla, subject.selection, max_arity, bernoulli), prefix="oracle.")
    if gla.differential is not None:
        hypothesis = check_homology_criterion(gla)
        report.record("homology_hypothesis_agree", 1, [], hypothesis.injective, hypothesis.surjective,
                      passed=hypothesis.agree)
    return report


def linfty_suite(subject: Subject, max_arity: int) -> Report:
    """Square-zero structures: Phi(D).Phi(D) = 0 exactly when D^2 = 0, decalages and cocylinders"""
    report = Report(command="check")
    gla = subject.gla
    _run_guarded(report, "decalage", lambda: check_linfty(*_decalage_parts(gla), max_arity, "decalage_QQ"))
    if not subject.complement_closed:
        report.notes.append(f"{subject.name}: A is not a subalgebra; Phi(D) checks skipped")
        return report
    plain = gla.without_differential()
    for d in subject.derivations:
        if d.degree != 1 or not preserves_l(gla, d):
            continue
        phi = phi_derivation(plain, d, max_arity)
        inner = check_linfty(phi.a_space, phi.coder, max_arity, "phi_D_squared")
        if d.is_square_zero():
            report.merge(inner)
            _run_guarded(report, "projection_morphism", lambda d=d: check_projection_morphism(gla, d, max_arity))
        else:
            witness = inner.checks[0].word if inner.checks else []
            report.record("phi_D_squared_nonzero", 1, witness, inner.ok, False, passed=not inner.ok)
            report.notes.append(f"{d.name} does not square to zero; Phi({d.name}).Phi({d.name}) != 0 as expected")
    _run_guarded(report, "cocylinder", lambda: check_cocylinder(inclusion_cone(plain, [], gla.L, max_arity),
                                                                max_arity))
    return report


def _decalage_parts(gla: GLA):
    model = decalage(gla, gla.name)
    return model.space, model.Q


def low_arity_check(gla: GLA, source: Union[Vector, Derivation], brackets: HigherBrackets,
                    max_arity: int = 2) -> Report:
    """Computed brackets against the written-out formulas of arity <= 2"""
    report = Report(command="brackets")
    a_space = brackets.a_space
    a_indices = gla.A
    first = 1 if isinstance(source, Derivation) else 0
    for arity in range(first, min(max_arity, 2) + 1):
        for word in a_space.canonical_words(arity):
            expected = first_brackets(gla, source, tuple(a_indices[k] for k in word))
            default_manager.compare_vectors(report, "low_arity_formulas", gla.space, arity,
                                            a_space.word_names(word), brackets.value_in_m(word), expected)
    return report


def abelian_reduction_check(gla: GLA, source: Union[Vector, Derivation], max_arity: int) -> Report:
    """On an abelian complement the brackets reduce to single nested brackets"""
    report = Report(command="check")
    if isinstance(source, Derivation):
        phi = phi_derivation(gla, source, max_arity)
        first = 1
    else:
        phi = phi_element(gla, source, max_arity)
        first = 0
    single = voronov_brackets(gla, source, max_arity)
    default_manager.compare_coderivations(report, "abelian_reduction", phi.coder, single,
                                          range(first, max_arity + 1))
    return report


def examples_suite(subject: Optional[Subject], max_arity: int, seed: int = 0) -> Report:
    """The classical specializations, plus subject-specific reductions when a subject is given"""
    report = Report(command="check")
    rng = random.Random(seed)
    small = min(max_arity, 3)

    space = GradedSpace([("v", 0), ("w", 1)], label="V")
    for k in range(3):
        r = random_coderivation(space, 1 - 2 * (k % 2), small, rng)
        report.merge(phi_is_identity_on_coderivations(space, r, small))
    v = decalage(aff1_split().gla, "s^-1 aff1")
    _, adjoint = adjoint_morphism(v, small)
    report.merge(adjoint)

    matrices = matrix_algebra()
    for label, op in sorted(koszul_operators(matrices).items()):
        report.merge(check_koszul_formulas(matrices, op, 2))
    polynomials = truncated_polynomials(3)
    multiplication = elementary_map(polynomials.space, 1, 0).combine(elementary_map(polynomials.space, 2, 1))
    for label, op, order in (("l(x)", multiplication, 0), ("E", euler_operator(polynomials), 1),
                             ("E^2", euler_operator(polynomials, 2), 2)):
        bound = operator_order_bound(polynomials, op, 2, max_arity)
        report.record("operator_order", order, [label], bound.bound, order, passed=bound.bound == order)
    orders = order_bracket_check(polynomials, euler_operator(polynomials), euler_operator(polynomials, 2), 2,
                                 max_arity)
    report.merge(orders)

    v_space, d, w_indices = subcomplex_example()
    report.merge(subcomplex_brackets(v_space, d, w_indices, max_arity).report)
    _, getzler = getzler_brackets(getzler_sl2().gla, max_arity)
    report.merge(getzler)
    base = aff1_split()
    sheared = aff1_sheared(base.gla)
    report.merge(complement_isomorphism(base.gla, sheared, base.differential, differential_derivation(sheared),
                                        small))

    if subject is not None and subject.complement_closed:
        gla = subject.gla.without_differential()
        for m in subject.elements:
            report.merge(low_arity_check(gla, m, phi_element(gla, m, 2)))
        for d in subject.derivations:
            if preserves_l(subject.gla, d):
                report.merge(low_arity_check(gla, d, phi_derivation(gla, d, 2)))
        if subject.complement_abelian:
            for source in subject.elements + [d for d in subject.derivations if preserves_l(subject.gla, d)]:
                report.merge(abelian_reduction_check(gla, source, max_arity))
        separations = {}
        for m in subject.elements:
            if gla.normalizes(m.coeffs, gla.L) and gla.project(m.coeffs):
                found = inner_derivation_separation(gla, m, max_arity)
                separations[repr(m)] = None if found is None else {"arity": found[0], "word": found[1]}
        if separations:
            report.data["inner_vs_element"] = separations
    if subject is not None and subject.gla.differential is not None and subject.gla.has_splitting:
        hypothesis = check_homology_criterion(subject.gla)
        report.record("homology_hypothesis_agree", 1, [], hypothesis.injective, hypothesis.surjective,
                      passed=hypothesis.agree)
    return report


# ---------------------------------------------------------------------------
# entry points

def _map_subjects(subjects: Sequence[Subject], run: Callable[[Subject], Report], workers: int) -> List[Report]:
    """Reports in subject order, whatever the number of workers"""
    if workers <= 1 or len(subjects) <= 1:
        return [run(s) for s in subjects]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, subjects))


def run_suite(subject: Optional[Subject], suite: Suite, max_arity: int, seed: Optional[int] = None,
              random_count: int = 0, max_attempts: int = 4000, workers: int = 1) -> Report:
    """
    Run a check suite.

    Args:
        subject: Algebra to check; None runs on the shipped fixtures
        suite: Which suite, or Suite.ALL
        max_arity: Truncation arity of every coefficientwise comparison
        seed: Seed of the randomized fixtures; None leaves them out
        random_count: Number of randomized fixtures added when a seed is given
        max_attempts: Rejection sampler budget
        workers: Threads used across subjects

    Returns:
        Report whose identities are prefixed by the subject name
    """
    subjects = [subject] if subject is not None else [Subject.from_fixture(f) for f in shipped_fixtures()]
    if seed is not None and random_count:
        subjects += [Subject.from_fixture(f) for f in random_split_algebras(seed, random_count, max_attempts)]
    report = Report(command="check")
    suites = [Suite.THEOREMS, Suite.LINFTY, Suite.EXAMPLES] if suite == Suite.ALL else [suite]

    for current in suites:
        logger.info(f"Running suite {current.value} on {len(subjects)} subjects up to arity {max_arity}")
        if current == Suite.EXAMPLES:
            report.merge(examples_suite(subjects[0], max_arity, seed or 0), prefix=f"examples.{subjects[0].name}.")
            continue
        runner = theorem_suite if current == Suite.THEOREMS else linfty_suite
        results = _map_subjects(subjects, lambda s: runner(s, max_arity), workers)
        for s, result in zip(subjects, results):
            report.merge(result, prefix=f"{current.value}.{s.name}.")
    report.data["subjects"] = [s.name for s in subjects]
    return report


def transfer_check(subject: Subject, max_arity: int, bernoulli: Bernoulli = bernoulli_first) -> Report:
    """Transferred structure and morphism against the closed forms"""
    if not subject.complement_closed:
        raise PreconditionError("The closed-form side of the transfer check needs A to be a subalgebra")
    report = check_transfer_oracle(subject.gla, subject.selection, max_arity, bernoulli)
    report.command = "transfer-check"
    return report


def cocone_report(subject: Subject, max_arity: int, with_second_algebra: bool = False,
                  cylinder_oracle: bool = False, t_degree_factor: int = 2) -> Report:
    """Cocone (or cone with N) structure, its checks and, with a differential, the fiber model"""
    report = Report(command="cocone")
    gla = subject.gla
    n_indices = subject.n_indices if with_second_algebra else []
    plain = gla.without_differential()
    cone = inclusion_cone(plain, n_indices, gla.L, max_arity)
    report.merge(check_cocylinder(cone, max_arity))
    report.data["cone"] = cone.to_json(max_arity)
    for d in subject.selection:
        if preserves_l(gla, d):
            _run_guarded(report, "psi", lambda d=d: check_psi(cone, d, max_arity), prefix=f"{d.name}.")
    if cylinder_oracle:
        report.merge(cylinder_transfer_oracle(cone.n_gla, cone.l_gla, plain, cone.g, cone.f, max_arity,
                                              t_degree_factor=t_degree_factor))
    if subject.selection:
        _run_guarded(report, "classifying", lambda: classifying_morphism_is_strict(gla, subject.selection,
                                                                                   max_arity))
    d = _differential(gla)
    if d is not None and subject.complement_closed:
        model, model_report = check_fiber_model(gla, n_indices, d, max_arity)
        report.merge(model_report)
        report.data["fiber_model"] = model.to_json()
    return report


def fiber_model_report(subject: Subject, max_arity: int, with_second_algebra: bool = False) -> Report:
    gla = subject.gla
    d = _differential(gla)
    if d is None:
        raise PreconditionError("The fiber model needs a differential")
    n_indices = subject.n_indices if with_second_algebra else []
    model, report = check_fiber_model(gla, n_indices, d, max_arity)
    report.data["fiber_model"] = model.to_json()
    if not n_indices:
        _, diagram = homotopy_replacement_diagram(gla, d, max_arity)
        report.merge(diagram, prefix="diagram.")
    return report


def _differential(gla: GLA) -> Optional[Derivation]:
    if gla.differential is None:
        return None
    return differential_derivation(gla)


def brackets_report(subject_gla: GLA, source: Union[Vector, Derivation], max_arity: int,
                    via_transfer: bool = False) -> Report:
    """Higher brackets of one source with their low-arity cross-check"""
    report = Report(command="brackets")
    if via_transfer:
        brackets = generalized_brackets_via_transfer(subject_gla, source, max_arity)
        if isinstance(source, Vector):
            report.merge(check_generalized_first_bracket(subject_gla, source))
    else:
        plain = subject_gla.without_differential()
        if isinstance(source, Derivation):
            brackets = phi_derivation(plain, source, max_arity)
        else:
            brackets = phi_element(plain, source, max_arity)
        report.merge(low_arity_check(plain, source, brackets, max_arity))
    report.data["brackets"] = brackets.to_json(max_arity)
    report.data["complement"] = [{"name": n, "degree": d} for n, d in brackets.a_space.basis]
    return report


def koszul_report(bundle: AlgebraBundle, source_name: str, max_arity: int) -> Report:
    """Koszul brackets of an operator on an associative bundle"""
    algebra = bundle.algebra
    op = bundle.resolve_source(source_name)
    report = Report(command="brackets")
    report.merge(algebra.validate(), prefix="validate.")
    brackets = koszul_brackets(algebra, op, max_arity)
    report.data["brackets"] = brackets.to_json(max_arity)
    report.merge(check_koszul_formulas(algebra, op, min(max_arity, 2)))
    bound = operator_order_bound(algebra, op, max_arity, max_arity)
    report.data["order"] = bound.to_dict()
    return report


def validate_report(bundle: AlgebraBundle) -> Report:
    """Axioms of the algebra, plus Leibniz and L-preservation of every named derivation"""
    if bundle.is_associative:
        return bundle.algebra.validate()
    gla = bundle.gla
    report = validate_gla(gla, require_closed_complement=False)
    space = gla.space
    for name in sorted(bundle.derivations):
        d = bundle.derivations[name]
        violations = d.leibniz_violations()
        for (i, j), lhs, rhs in violations:
            report.fail(f"{name}.leibniz", 2, [space.names[i], space.names[j]],
                        vec_to_json(space, lhs), vec_to_json(space, rhs))
        if not violations:
            report.record(f"{name}.leibniz", 2, [], None, None, passed=True)
        if gla.has_splitting and not preserves_l(gla, d):
            report.notes.append(f"{name} does not preserve L; its higher brackets are not defined")
    report.data["dimension"] = gla.dim
    if gla.has_splitting:
        report.data["splitting"] = {"L": [space.names[i] for i in gla.L], "A": [space.names[i] for i in gla.A]}
    return report
