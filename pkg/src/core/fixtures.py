"""
Shipped fixture algebras and the seeded sampler of random split graded Lie algebras

Most fixtures are current algebras g (x) Lambda(u_1, ..., u_k) over a Lie algebra g in degree 0
and odd generators u_i, with the differential d/du of a generator of degree -1.
"""

import logging
import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Any

from .coalgebra import Coderivation, TableMap
from .error_handler import PreconditionError, ValidationError
from .graded import (GLA, GradedAlgebra, GradedSpace, LinearMap, Derivation, Vector, Vec, vec_add,
                     inner_derivation, differential_derivation, elementary_map, validate_gla)
from .models import Flavor

logger = logging.getLogger(__name__)

LieTable = Dict[Tuple[str, str], Dict[str, Any]]


@dataclass
class Fixture:
    """A split algebra with the elements and derivations its checks run on"""
    name: str
    gla: GLA
    elements: List[Vector] = field(default_factory=list)
    derivations: List[Derivation] = field(default_factory=list)
    n_names: List[str] = field(default_factory=list)
    description: str = ""
    abelian_complement: bool = False
    flat: bool = True

    @property
    def n_indices(self) -> List[int]:
        return [self.gla.space.index(name) for name in self.n_names]

    @property
    def differential(self) -> Optional[Derivation]:
        if self.gla.differential is None:
            return None
        return differential_derivation(self.gla)

    def to_bundle(self):
        from .bundle import AlgebraBundle

        return AlgebraBundle(
            name=self.name,
            gla=self.gla,
            derivations={d.name: d for d in self.derivations},
            elements={f"m{k}": m for k, m in enumerate(self.elements)},
            n_names=list(self.n_names),
        )


# ---------------------------------------------------------------------------
# builders

def lie_algebra(names: Sequence[str], table: LieTable, name: str = "") -> GLA:
    """Lie algebra in degree 0 from brackets of named basis elements"""
    space = GradedSpace([(n, 0) for n in names], label=name)
    brackets = {}
    for (left, right), value in table.items():
        brackets[(space.index(left), space.index(right))] = {
            space.index(k): Fraction(c) for k, c in value.items()}
    return GLA(space, brackets, name=name)


def _monomials(count: int) -> List[Tuple[int, ...]]:
    return [combo for size in range(count + 1) for combo in combinations(range(count), size)]


def _multiply_monomials(left: Tuple[int, ...], right: Tuple[int, ...]) -> Optional[Tuple[Tuple[int, ...], int]]:
    if set(left) & set(right):
        return None
    joined = left + right
    inversions = sum(1 for a in range(len(joined)) for b in range(a + 1, len(joined)) if joined[a] > joined[b])
    return tuple(sorted(joined)), -1 if inversions % 2 else 1


def _monomial_label(symbols: Sequence[str], mono: Tuple[int, ...]) -> str:
    return "".join(symbols[k] for k in mono)


def current_algebra(g: GLA, generators: Sequence[Tuple[str, int]], contract: Optional[str] = None,
                    l_names: Optional[Sequence[str]] = None,
                    assign: Optional[Callable[[str, Tuple[str, ...], int], str]] = None,
                    name: str = "") -> GLA:
    """
    g (x) Lambda(generators) with [x(x)a, y(x)b] = [x, y](x)ab.

    Args:
        g: Lie algebra concentrated in degree 0
        generators: (symbol, degree) of the odd exterior generators
        contract: symbol of a degree -1 generator u; the differential is id (x) d/du
        l_names: names of g whose every tensor lies in L; the rest spans A
        assign: alternative splitting rule (g name, monomial symbols, degree) -> "L" or "A"
        name: label of the result

    Returns:
        GLA with basis "x" for x (x) 1 and "x.uv" for x (x) uv
    """
    if any(d != 0 for d in g.space.degrees):
        raise ValidationError("Current algebras need a Lie algebra concentrated in degree 0")
    symbols = [s for s, _ in generators]
    gen_degrees = [d for _, d in generators]
    if any(d % 2 == 0 for d in gen_degrees):
        raise ValidationError("Exterior generators must have odd degree")
    monomials = _monomials(len(generators))
    basis, position = [], {}
    for mono in monomials:
        suffix = _monomial_label(symbols, mono)
        degree = sum(gen_degrees[k] for k in mono)
        for x, label in enumerate(g.space.names):
            position[(x, mono)] = len(basis)
            basis.append((f"{label}.{suffix}" if suffix else label, degree))
    space = GradedSpace(basis, label=name)
    keys = [(x, mono) for mono in monomials for x in range(g.dim)]

    brackets: Dict[Tuple[int, int], Vec] = {}
    for i, (x, s) in enumerate(keys):
        for j in range(i, len(keys)):
            y, t = keys[j]
            product = _multiply_monomials(s, t)
            value = g.bracket_basis(x, y)
            if product is None or not value:
                continue
            mono, sign = product
            brackets[(i, j)] = {position[(z, mono)]: sign * c for z, c in value.items()}

    differential = None
    if contract is not None:
        k = symbols.index(contract)
        if gen_degrees[k] != -1:
            raise ValidationError(f"Contracted generator {contract!r} must have degree -1")
        columns = {}
        for i, (x, s) in enumerate(keys):
            if k in s:
                p = s.index(k)
                rest = s[:p] + s[p + 1:]
                columns[i] = {position[(x, rest)]: Fraction(-1 if p % 2 else 1)}
        differential = LinearMap(space, space, columns, 1)

    splitting = None
    if assign is not None or l_names is not None:
        parts: Dict[str, List[int]] = {"L": [], "A": []}
        l_set = set(l_names or [])
        for i, (x, s) in enumerate(keys):
            label = g.space.names[x]
            if assign is not None:
                side = assign(label, tuple(symbols[k] for k in s), space.degrees[i])
            else:
                side = "L" if label in l_set else "A"
            parts[side].append(i)
        splitting = (parts["L"], parts["A"])
    return GLA(space, brackets, differential, splitting, name)


def sl2() -> GLA:
    return lie_algebra(["e", "h", "f"], {("e", "f"): {"h": 1}, ("h", "e"): {"e": 2}, ("h", "f"): {"f": -2}},
                       name="sl2")


def aff1() -> GLA:
    return lie_algebra(["h", "e"], {("h", "e"): {"e": 1}}, name="aff1")


def heisenberg() -> GLA:
    return lie_algebra(["x", "y", "z"], {("x", "y"): {"z": 1}}, name="heis")


def solvable_r3() -> GLA:
    return lie_algebra(["h", "e", "f"], {("h", "e"): {"e": 1}, ("h", "f"): {"f": 1}}, name="r3")


def _vector(g: GLA, coeffs: Dict[str, Any]) -> Vector:
    return g.space.vector(coeffs)


def _ad(g: GLA, coeffs: Dict[str, Any], label: str) -> Derivation:
    return inner_derivation(g, _vector(g, coeffs), name=label)


# ---------------------------------------------------------------------------
# shipped fixtures

def sl2_degree_zero() -> Fixture:
    g = sl2().with_splitting({"L": ["e"], "A": ["h", "f"]})
    return Fixture("sl2", g, [_vector(g, {"h": 1}), _vector(g, {"e": 1, "f": 1})],
                   [_ad(g, {"h": 1}, "ad_h"), _ad(g, {"e": 1}, "ad_e")],
                   description="sl2 with L = <e>, A = <h, f>")


def broken_sl2() -> Fixture:
    """[h, e] = 3e breaks the Jacobi identity on (e, h, f)"""
    g = lie_algebra(["e", "h", "f"], {("e", "f"): {"h": 1}, ("h", "e"): {"e": 3}, ("h", "f"): {"f": -2}},
                    name="sl2-broken").with_splitting({"L": ["e"], "A": ["h", "f"]})
    return Fixture("sl2-broken", g, description="sl2 with a wrong structure constant")


def aff1_split() -> Fixture:
    g = current_algebra(aff1(), [("u", -1)], contract="u", l_names=["e"], name="aff1-split")
    return Fixture("aff1-split", g,
                   [_vector(g, {"h": 1}), _vector(g, {"e": 1}), _vector(g, {"h.u": 1})],
                   [differential_derivation(g), _ad(g, {"e": 1}, "ad_e"), _ad(g, {"h": 1}, "ad_h")],
                   n_names=["h", "h.u"], description="aff(1) (x) Lambda(u), abelian complement <h, h.u>",
                   abelian_complement=True)


def aff1_sheared(base: Optional[GLA] = None) -> GLA:
    """aff1-split with the complement moved to <h + e, h.u + e.u>; L = <e, e.u> is unchanged"""
    g = base if base is not None else aff1_split().gla
    idx = g.space.index
    new_basis = [
        ("h'", {idx("h"): Fraction(1), idx("e"): Fraction(1)}),
        ("e", {idx("e"): Fraction(1)}),
        ("h.u'", {idx("h.u"): Fraction(1), idx("e.u"): Fraction(1)}),
        ("e.u", {idx("e.u"): Fraction(1)}),
    ]
    return g.change_basis(new_basis, splitting={"L": ["e", "e.u"], "A": ["h'", "h.u'"]}, name="aff1-sheared")


def sl2_split() -> Fixture:
    g = current_algebra(sl2(), [("u", -1)], contract="u", l_names=["e"], name="sl2-split")
    return Fixture("sl2-split", g,
                   [_vector(g, {"h": 1}), _vector(g, {"e": 1, "f": 1}), _vector(g, {"h.u": 1})],
                   [differential_derivation(g), _ad(g, {"e": 1}, "ad_e"), _ad(g, {"h": 1}, "ad_h"),
                    _ad(g, {"e.u": 1}, "ad_e.u")],
                   n_names=["h", "h.u"], description="sl2 (x) Lambda(u), nonabelian complement <h, f, h.u, f.u>")


def sl2_witness() -> Fixture:
    """L = <e> is a cycle of L that bounds in M, so H(L) -> H(M) is not injective"""
    g = current_algebra(sl2(), [("u", -1)], contract="u",
                        assign=lambda x, mono, degree: "L" if (x == "e" and not mono) else "A",
                        name="sl2-witness")
    return Fixture("sl2-witness", g, [_vector(g, {"h": 1}), _vector(g, {"f.u": 1})],
                   [differential_derivation(g), _ad(g, {"e": 1}, "ad_e")],
                   description="sl2 (x) Lambda(u) with L = <e>")


def getzler_sl2() -> Fixture:
    """Degree splitting of sl2 (x) Lambda(u, w), |u| = -1, |w| = 1"""
    g = current_algebra(sl2(), [("u", -1), ("w", 1)], contract="u",
                        assign=lambda x, mono, degree: "L" if degree >= 0 else "A", name="getzler-sl2")
    return Fixture("getzler-sl2", g, [], [differential_derivation(g)],
                   description="sl2 (x) Lambda(u, w) with L = degrees >= 0, A = degree -1")


def nonflat_derivation() -> Fixture:
    """
    y of degree 1 with [y, y] = z, so D = ad_y is odd with D^2 = ad_z / 2 != 0; its brackets
    are expected to fail the square-zero identity.
    """
    names = [("a", -2), ("b", -1), ("c", 0), ("y", 1), ("z", 2)]
    space = GradedSpace(names, label="nonflat")
    idx = space.index
    half = Fraction(1, 2)
    brackets = {
        (idx("y"), idx("y")): {idx("z"): 1},
        (idx("a"), idx("y")): {idx("b"): -1},
        (idx("b"), idx("y")): {idx("c"): half},
        (idx("a"), idx("z")): {idx("c"): -1},
    }
    g = GLA(space, brackets, splitting={"L": ["y", "z"], "A": ["a", "b", "c"]}, name="nonflat")
    return Fixture("nonflat", g, [], [_ad(g, {"y": 1}, "ad_y")],
                   description="odd derivation with nonzero square", abelian_complement=True, flat=False)


FIXTURES: Dict[str, Callable[[], Fixture]] = {
    "sl2": sl2_degree_zero,
    "sl2-broken": broken_sl2,
    "aff1-split": aff1_split,
    "sl2-split": sl2_split,
    "sl2-witness": sl2_witness,
    "getzler-sl2": getzler_sl2,
    "nonflat": nonflat_derivation,
}

# fixtures every theorem and transfer check runs on
SHIPPED = ["aff1-split", "sl2-split", "sl2-witness"]


def get_fixture(name: str) -> Fixture:
    try:
        builder = FIXTURES[name]
    except KeyError:
        raise ValidationError(f"Unknown fixture {name!r}; known: {sorted(FIXTURES)}") from None
    return builder()


def shipped_fixtures() -> List[Fixture]:
    return [get_fixture(name) for name in SHIPPED]


# ---------------------------------------------------------------------------
# associative algebras and complexes for the classical examples

def truncated_polynomials(order: int = 3) -> GradedAlgebra:
    """Q[x]/(x^order) in degree 0"""
    names = ["1"] + [f"x^{k}" if k > 1 else "x" for k in range(1, order)]
    space = GradedSpace([(n, 0) for n in names], label=f"Q[x]/(x^{order})")
    products = {(i, j): {i + j: Fraction(1)} for i in range(order) for j in range(order) if i + j < order}
    return GradedAlgebra(space, products, unit=0, name=space.label)


def matrix_algebra() -> GradedAlgebra:
    """2x2 matrices in the basis 1, H = E11 - E22, E12, E21"""
    space = GradedSpace([("1", 0), ("H", 0), ("E12", 0), ("E21", 0)], label="M2")
    one, h, e, f = range(4)
    half = Fraction(1, 2)
    products: Dict[Tuple[int, int], Vec] = {}
    for k in range(4):
        products[(one, k)] = {k: Fraction(1)}
        products[(k, one)] = {k: Fraction(1)}
    products[(h, h)] = {one: Fraction(1)}
    products[(h, e)] = {e: Fraction(1)}
    products[(e, h)] = {e: Fraction(-1)}
    products[(h, f)] = {f: Fraction(-1)}
    products[(f, h)] = {f: Fraction(1)}
    products[(e, f)] = {one: half, h: half}
    products[(f, e)] = {one: half, h: -half}
    return GradedAlgebra(space, products, unit=one, name="M2")


def euler_operator(algebra: GradedAlgebra, power: int = 1) -> LinearMap:
    """x d/dx on Q[x]/(x^n), raised to `power`; a differential operator of order `power`"""
    space = algebra.space
    return LinearMap(space, space, {k: {k: Fraction(k ** power)} for k in range(1, space.dim)})


def koszul_operators(algebra: GradedAlgebra) -> Dict[str, LinearMap]:
    """A map killing the unit and one that does not"""
    space = algebra.space
    unit = algebra.unit
    others = [k for k in range(space.dim) if k != unit]
    killing = elementary_map(space, others[-1], others[0])
    moving = elementary_map(space, others[0], unit).combine(elementary_map(space, others[-1], others[-1]))
    return {"kills_unit": killing, "moves_unit": moving}


def subcomplex_example() -> Tuple[GradedSpace, LinearMap, List[int]]:
    """V = <c0, c1, w0, w1> with d w0 = w1, d c0 = c1 + w1 and the subcomplex W = <w0, w1>"""
    space = GradedSpace([("c0", 0), ("c1", 1), ("w0", 0), ("w1", 1)], label="V")
    c0, c1, w0, w1 = range(4)
    d = LinearMap(space, space, {w0: {w1: Fraction(1)}, c0: {c1: Fraction(1), w1: Fraction(1)}}, 1)
    return space, d, [w0, w1]


# ---------------------------------------------------------------------------
# random fixtures

_POOL: List[Tuple[Callable[[], GLA], List[str]]] = [
    (sl2, ["e"]),
    (sl2, ["h", "e"]),
    (aff1, ["e"]),
    (aff1, ["h"]),
    (heisenberg, ["x", "z"]),
    (heisenberg, ["z"]),
    (solvable_r3, ["e"]),
    (solvable_r3, ["e", "f"]),
]

_MIX = [-1, 0, 0, 0, 0, 1, 2]
_SHEAR = [-1, 0, 0, 0, 0, 0, 1]


def _random_presentation(base: GLA, rng: random.Random, label: str) -> GLA:
    """Same algebra in a random basis that keeps the span of L; the complement is sheared by L"""
    space = base.space
    l_set = set(base.L)
    new_basis = []
    for i in range(space.dim):
        vector: Vec = {i: Fraction(1)}
        side = base.L if i in l_set else base.A
        for j in side:
            if j != i and space.degrees[j] == space.degrees[i]:
                vec_add(vector, {j: Fraction(rng.choice(_MIX))})
        if i not in l_set:
            for j in base.L:
                if space.degrees[j] == space.degrees[i]:
                    vec_add(vector, {j: Fraction(rng.choice(_SHEAR))})
        new_basis.append((f"{space.names[i]}'", vector))
    names = [n for n, _ in new_basis]
    splitting = {"L": [names[i] for i in base.L], "A": [names[i] for i in base.A]}
    return base.change_basis(new_basis, splitting=splitting, name=label)


def random_split_algebras(seed: int = 0, count: int = 20, max_attempts: int = 4000) -> List[Fixture]:
    """
    Rejection sampler: random current algebras g (x) Lambda(u) in random bases, kept when L and A
    are both subalgebras, D preserves L and every axiom holds.
    """
    rng = random.Random(seed)
    fixtures: List[Fixture] = []
    attempts = 0
    while len(fixtures) < count:
        attempts += 1
        if attempts > max_attempts:
            raise PreconditionError(
                f"Random fixture sampler gave up after {max_attempts} attempts ({len(fixtures)} accepted)")
        make, l_names = rng.choice(_POOL)
        g = make()
        base = current_algebra(g, [("u", -1)], contract="u", l_names=l_names, name=g.name)
        label = f"random-{seed}-{len(fixtures)}"
        try:
            candidate = _random_presentation(base, rng, label)
        except ValidationError:
            continue
        if candidate.closure_violations(candidate.L) or candidate.closure_violations(candidate.A):
            continue
        d = differential_derivation(candidate)
        if not d.preserves_L or not validate_gla(candidate).ok:
            continue
        degree_zero = [i for i in candidate.A if candidate.space.degrees[i] == 0]
        l_zero = [i for i in candidate.L if candidate.space.degrees[i] == 0]
        elements = [Vector(candidate.space, {degree_zero[0]: Fraction(1)})] if degree_zero else []
        derivations = [d]
        if l_zero:
            x = Vector(candidate.space, {k: Fraction(rng.choice([1, 2, -1])) for k in l_zero})
            derivations.append(inner_derivation(candidate, x, name="ad_l"))
        fixtures.append(Fixture(label, candidate, elements, derivations, description=f"random {g.name}"))
    logger.info(f"Sampled {count} random split algebras (seed {seed}) in {attempts} attempts")
    return fixtures


def random_coderivation(space: GradedSpace, degree: int, max_arity: int, rng: random.Random) -> Coderivation:
    """Unreduced coderivation with small random integer coefficients of the right degrees"""
    coefficients = {}
    for arity in range(0, max_arity + 1):
        table = {}
        for word in space.canonical_words(arity):
            target = space.word_degree(word) + degree
            value = {k: Fraction(rng.randint(-2, 2)) for k in space.indices_of_degree(target)}
            value = {k: c for k, c in value.items() if c}
            if value:
                table[word] = value
        coefficients[arity] = TableMap(arity, degree, table)
    return Coderivation(space, degree, coefficients, flavor=Flavor.UNREDUCED, top_arity=max_arity,
                        label="R")
