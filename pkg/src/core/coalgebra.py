"""
Symmetric coalgebra machinery: canonical words, coderivations and coalgebra morphisms
by Taylor coefficients, the Nijenhuis-Richardson product, L-infinity[1] structures,
decalage, twisting by Maurer-Cartan elements and extensions by classifying morphisms
"""

import logging
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import factorial
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Any, Union, Iterable, FrozenSet

from .error_handler import (ValidationError, PreconditionError, TruncationError,
                            NonTerminatingSumError)
from .graded import (GradedSpace, Vector, LinearMap, Vec, vec_add, vec_scale, vec_to_json,
                     vec_reindex)
from .models import Flavor, Report
from .scalars import format_rational

logger = logging.getLogger(__name__)

Word = Tuple[int, ...]
SymVec = Dict[Word, Fraction]


# ---------------------------------------------------------------------------
# canonical words

def insert_back(word: Word, index: int, parities: Sequence[int]) -> Optional[Tuple[Word, int]]:
    """word . e_index brought to canonical form"""
    position = bisect_right(word, index)
    sign = 1
    if parities[index]:
        if position > 0 and word[position - 1] == index:
            return None
        if sum(parities[w] for w in word[position:]) & 1:
            sign = -1
    return word[:position] + (index,) + word[position:], sign


def insert_front(word: Word, index: int, parities: Sequence[int]) -> Optional[Tuple[Word, int]]:
    """e_index . word brought to canonical form"""
    position = bisect_left(word, index)
    sign = 1
    if parities[index]:
        if position < len(word) and word[position] == index:
            return None
        if sum(parities[w] for w in word[:position]) & 1:
            sign = -1
    return word[:position] + (index,) + word[position:], sign


def normalize_indices(indices: Sequence[int], parities: Sequence[int]) -> Optional[Tuple[Word, int]]:
    word: Word = ()
    sign = 1
    for index in indices:
        inserted = insert_back(word, index, parities)
        if inserted is None:
            return None
        word, step = inserted
        sign *= step
    return word, sign


def normalize_word(indices: Sequence[int], space: GradedSpace) -> Optional[Tuple[Word, int]]:
    """(canonical word, Koszul sign) of an arbitrary index list, or None for the zero word"""
    for index in indices:
        if not 0 <= index < space.dim:
            raise ValidationError(f"Index {index} outside a space of dimension {space.dim}")
    return normalize_indices(indices, space.parities)


def unshuffle_sign(positions: Sequence[int], word: Word, parities: Sequence[int]) -> int:
    """Koszul sign of moving the letters at `positions` (increasing) to the front"""
    chosen = set(positions)
    count = 0
    odd_left = 0
    for p, letter in enumerate(word):
        odd = parities[letter]
        if p in chosen:
            if odd:
                count += odd_left
        elif odd:
            odd_left += 1
    return -1 if count & 1 else 1


def sym_add(target: SymVec, source: SymVec, scale: Union[int, Fraction] = 1) -> SymVec:
    if not scale:
        return target
    for word, coeff in source.items():
        value = target.get(word, 0) + scale * coeff
        if value:
            target[word] = value
        else:
            target.pop(word, None)
    return target


def sym_times_vector(sym: SymVec, vector: Vec, parities: Sequence[int]) -> SymVec:
    """sym . vector, vector appended on the right"""
    result: SymVec = {}
    for word, c in sym.items():
        for index, a in vector.items():
            inserted = insert_back(word, index, parities)
            if inserted is None:
                continue
            new_word, sign = inserted
            value = result.get(new_word, 0) + sign * c * a
            if value:
                result[new_word] = value
            else:
                result.pop(new_word, None)
    return result


def symmetric_product(vectors: Sequence[Vec], space: GradedSpace) -> SymVec:
    """v_1 . v_2 . ... . v_k expanded on canonical words"""
    result: SymVec = {(): Fraction(1)}
    for vector in vectors:
        result = sym_times_vector(result, vector, space.parities)
        if not result:
            break
    return result


def sym_power(x: Vec, j: int, space: GradedSpace) -> SymVec:
    return symmetric_product([x] * j, space)


# ---------------------------------------------------------------------------
# multilinear maps

class MultiMap:
    """Graded-symmetric multilinear map read on canonical words"""

    def __init__(self, arity: int, degree: int):
        self.arity = arity
        self.degree = degree

    def value(self, word: Word) -> Vec:
        raise NotImplementedError

    def apply(self, sym: SymVec) -> Vec:
        result: Vec = {}
        for word, coeff in sym.items():
            if len(word) == self.arity:
                vec_add(result, self.value(word), coeff)
        return result

    def entries(self, space: GradedSpace) -> Iterable[Tuple[Word, Vec]]:
        for word in space.canonical_words(self.arity):
            value = self.value(word)
            if value:
                yield word, value


class TableMap(MultiMap):
    """Explicit sparse table; absent words map to zero"""

    def __init__(self, arity: int, degree: int, table: Optional[Dict[Word, Vec]] = None):
        super().__init__(arity, degree)
        self.table: Dict[Word, Vec] = {}
        for word, value in (table or {}).items():
            if len(word) != arity:
                raise ValidationError(f"Word {word} does not have arity {arity}")
            cleaned = {i: Fraction(c) for i, c in value.items() if c}
            if cleaned:
                self.table[tuple(word)] = cleaned

    def value(self, word: Word) -> Vec:
        return self.table.get(word, {})


class RuleMap(MultiMap):
    """Lazily evaluated map; values are memoized and must not be mutated by callers"""

    def __init__(self, arity: int, degree: int, rule: Callable[[Word], Vec]):
        super().__init__(arity, degree)
        self.rule = rule
        self._cache: Dict[Word, Vec] = {}

    def value(self, word: Word) -> Vec:
        cached = self._cache.get(word)
        if cached is None:
            cached = self.rule(word)
            self._cache[word] = cached
        return cached


def _window_min(*windows: Optional[int]) -> Optional[int]:
    known = [w for w in windows if w is not None]
    return min(known) if known else None


def _window_shift(window: Optional[int], amount: int) -> Optional[int]:
    return None if window is None else window - amount


# ---------------------------------------------------------------------------
# coderivations

class Coderivation:
    """
    Coderivation of S(V) (unreduced) or of the reduced S(V) given by Taylor coefficients.

    `max_arity` is the window of known coefficients; None means every coefficient is
    known, which needs `top_arity` (the largest arity that can be nonzero).
    `insertion_bound(support)` may certify how many copies of an element supported on
    `support` a coefficient can absorb before vanishing.
    """

    def __init__(self, space: GradedSpace, degree: int, coefficients: Optional[Dict[int, MultiMap]] = None,
                 max_arity: Optional[int] = None, flavor: Flavor = Flavor.REDUCED,
                 top_arity: Optional[int] = None,
                 insertion_bound: Optional[Callable[[FrozenSet[int]], Optional[int]]] = None,
                 label: str = ""):
        self.space = space
        self.degree = degree
        self.coefficients: Dict[int, MultiMap] = dict(coefficients or {})
        if max_arity is None and top_arity is None:
            top_arity = max(self.coefficients, default=0)
        self.max_arity = max_arity
        self.flavor = flavor
        self.top_arity = top_arity
        self.insertion_bound = insertion_bound
        self.label = label
        self._apply_cache: Dict[Tuple[Word, int], SymVec] = {}
        for arity, multimap in self.coefficients.items():
            if multimap.degree != degree:
                raise ValidationError(
                    f"Coefficient of arity {arity} has degree {multimap.degree}, expected {degree}")
        if flavor == Flavor.REDUCED and self.coefficients.get(0) is not None:
            if any(True for _ in self.coefficients[0].entries(space)):
                raise ValidationError("Reduced coderivations have no arity-0 coefficient")

    @classmethod
    def from_rule(cls, space: GradedSpace, degree: int, rule: Callable[[Word], Vec],
                  max_arity: Optional[int] = None, flavor: Flavor = Flavor.REDUCED,
                  top_arity: Optional[int] = None, insertion_bound=None, label: str = "") -> "Coderivation":
        """Coefficients q_i(word) = rule(word) for every arity in the window"""
        last = top_arity if top_arity is not None else max_arity
        if last is None:
            raise ValidationError("A rule-based coderivation needs a window or a top arity")
        first = 0 if flavor == Flavor.UNREDUCED else 1
        coefficients = {arity: RuleMap(arity, degree, rule) for arity in range(first, last + 1)}
        return cls(space, degree, coefficients, max_arity, flavor, top_arity, insertion_bound, label)

    @classmethod
    def zero(cls, space: GradedSpace, degree: int, flavor: Flavor = Flavor.REDUCED) -> "Coderivation":
        return cls(space, degree, {}, None, flavor, top_arity=0)

    @property
    def is_reduced(self) -> bool:
        return self.flavor == Flavor.REDUCED

    @property
    def window(self) -> Optional[int]:
        return self.max_arity if self.top_arity is None else None

    def coefficient(self, arity: int) -> Optional[MultiMap]:
        if arity == 0 and self.is_reduced:
            return None
        if self.top_arity is not None and arity > self.top_arity:
            return None
        if self.max_arity is not None and arity > self.max_arity and self.top_arity is None:
            raise TruncationError(
                f"Coefficient of arity {arity} requested from {self.label or 'a coderivation'} "
                f"known up to arity {self.max_arity}")
        return self.coefficients.get(arity)

    def value(self, word: Word) -> Vec:
        multimap = self.coefficient(len(word))
        return multimap.value(word) if multimap is not None else {}

    def apply(self, word: Word, min_arity: int = 0) -> SymVec:
        """Q(v_1 . ... . v_n) by the unshuffle formula, with the q_0 term when unreduced"""
        key = (word, min_arity)
        cached = self._apply_cache.get(key)
        if cached is not None:
            return cached
        parities = self.space.parities
        n = len(word)
        start = max(0 if not self.is_reduced else 1, min_arity)
        stop = n if self.top_arity is None else min(n, self.top_arity)
        result: SymVec = {}
        for k in range(start, stop + 1):
            for positions in combinations(range(n), k):
                front = tuple(word[p] for p in positions)
                value = self.value(front)
                if not value:
                    continue
                chosen = set(positions)
                rest = tuple(word[p] for p in range(n) if p not in chosen)
                sign = unshuffle_sign(positions, word, parities)
                for index, coeff in value.items():
                    inserted = insert_front(rest, index, parities)
                    if inserted is None:
                        continue
                    new_word, step = inserted
                    sym_add(result, {new_word: coeff}, sign * step)
        self._apply_cache[key] = result
        return result

    def apply_sym(self, sym: SymVec, min_arity: int = 0) -> SymVec:
        result: SymVec = {}
        for word, coeff in sym.items():
            sym_add(result, self.apply(word, min_arity), coeff)
        return result

    def linear_part(self) -> LinearMap:
        return LinearMap(self.space, self.space,
                         {i: self.value((i,)) for i in range(self.space.dim)}, self.degree)

    def as_unreduced(self) -> "Coderivation":
        """The embedding (q_1, q_2, ...) -> (0, q_1, q_2, ...)"""
        if not self.is_reduced:
            return self
        return Coderivation(self.space, self.degree, self.coefficients, self.max_arity, Flavor.UNREDUCED,
                            self.top_arity, self.insertion_bound, self.label)

    def with_window(self, max_arity: int) -> "Coderivation":
        window = _window_min(self.max_arity, max_arity)
        return Coderivation(self.space, self.degree, self.coefficients, window, self.flavor,
                            self.top_arity, self.insertion_bound, self.label)

    def scaled(self, scale: Union[int, Fraction]) -> "Coderivation":
        return linear_combination(self.space, self.degree, [(scale, self)])

    def __add__(self, other: "Coderivation") -> "Coderivation":
        return linear_combination(self.space, self.degree, [(1, self), (1, other)])

    def __sub__(self, other: "Coderivation") -> "Coderivation":
        return linear_combination(self.space, self.degree, [(1, self), (-1, other)])

    def to_json(self, max_arity: Optional[int] = None) -> Dict[str, Any]:
        return multimaps_to_json(self.space, self.space, self._arities(max_arity), self.value,
                                 {"degree": self.degree, "flavor": self.flavor.value})

    def _arities(self, max_arity: Optional[int]) -> List[int]:
        last = _window_min(self.window, max_arity)
        if last is None:
            last = self.top_arity or 0
        if self.top_arity is not None:
            last = min(last, self.top_arity)
        first = 1 if self.is_reduced else 0
        return list(range(first, last + 1))

    def __repr__(self) -> str:
        return (f"Coderivation(label={self.label!r}, degree={self.degree}, flavor={self.flavor.value}, "
                f"window={self.max_arity}, top={self.top_arity})")


def multimaps_to_json(domain: GradedSpace, codomain: GradedSpace, arities: Sequence[int],
                      value: Callable[[Word], Vec], header: Dict[str, Any]) -> Dict[str, Any]:
    coefficients = []
    for arity in arities:
        entries = []
        for word in domain.canonical_words(arity):
            result = value(word)
            if result:
                entries.append({"word": domain.word_names(word), "value": vec_to_json(codomain, result)})
        if entries:
            coefficients.append({"arity": arity, "entries": entries})
    return dict(header, coefficients=coefficients)


def linear_combination(space: GradedSpace, degree: int,
                       terms: Sequence[Tuple[Union[int, Fraction], Coderivation]]) -> Coderivation:
    """Sum of scaled coderivations of the same degree, evaluated lazily"""
    terms = [(Fraction(c), q) for c, q in terms if c]
    for _, q in terms:
        if q.space != space:
            raise ValidationError("Coderivations live on different spaces")
        if q.degree != degree:
            raise ValidationError(f"Cannot add coderivations of degrees {q.degree} and {degree}")
    if not terms:
        return Coderivation.zero(space, degree)
    flavor = Flavor.REDUCED if all(q.is_reduced for _, q in terms) else Flavor.UNREDUCED
    window = _window_min(*[q.window for _, q in terms])
    tops = [q.top_arity for _, q in terms]
    top = max(tops) if all(t is not None for t in tops) else None

    def rule(word: Word) -> Vec:
        result: Vec = {}
        for c, q in terms:
            vec_add(result, q.value(word), c)
        return result

    return Coderivation.from_rule(space, degree, rule, window, flavor, top)


def nr_product(q: Coderivation, r: Coderivation) -> Coderivation:
    """(Q . R)_i(w) = sum over u in R(w) of c_u q_{|u|}(u)"""
    if q.space != r.space:
        raise ValidationError("Nijenhuis-Richardson product of coderivations on different spaces")
    flavor = Flavor.REDUCED if (q.is_reduced and r.is_reduced) else Flavor.UNREDUCED
    window = _window_min(r.window, _window_shift(q.window, 0 if r.is_reduced else 1))
    top = None
    if q.top_arity is not None and r.top_arity is not None:
        top = max(q.top_arity + r.top_arity - 1, 0)

    def rule(word: Word) -> Vec:
        result: Vec = {}
        for u, c in r.apply(word).items():
            vec_add(result, q.value(u), c)
        return result

    return Coderivation.from_rule(q.space, q.degree + r.degree, rule, window, flavor, top,
                                  label=f"({q.label}.{r.label})")


def nr_bracket(q: Coderivation, r: Coderivation) -> Coderivation:
    """[Q, R] = Q.R - (-1)^{|Q||R|} R.Q"""
    sign = -1 if (q.degree % 2 and r.degree % 2) else 1
    degree = q.degree + r.degree
    result = linear_combination(q.space, degree, [(1, nr_product(q, r)), (-sign, nr_product(r, q))])
    result.label = f"[{q.label},{r.label}]"
    return result


def sigma_section(space: GradedSpace, v: Vector) -> Coderivation:
    """sigma_v: the unreduced coderivation with q_0(1) = v and no other coefficient"""
    if v.space != space:
        raise ValidationError("Vector is not in the given space")
    degree = v.degree if not v.is_zero else 0
    return Coderivation(space, degree, {0: TableMap(0, degree, {(): v.coeffs})}, None,
                        Flavor.UNREDUCED, top_arity=0, label="sigma")


def evaluate_at_unit(q: Coderivation) -> Vector:
    """e(Q) = Q(1) = q_0(1)"""
    if q.is_reduced:
        raise PreconditionError("Evaluation at the unit needs an unreduced coderivation")
    return Vector(q.space, q.value(()))


def reduced_part(q: Coderivation) -> Coderivation:
    """The reduced coderivation whose embedding is Q; Q must lie in the kernel of evaluation at the unit"""
    if not q.is_reduced and not evaluate_at_unit(q).is_zero:
        raise PreconditionError("Only coderivations with Q(1) = 0 come from reduced ones")
    coefficients = {arity: m for arity, m in q.coefficients.items() if arity > 0}
    return Coderivation(q.space, q.degree, coefficients, q.max_arity, Flavor.REDUCED, q.top_arity,
                        q.insertion_bound, q.label)


def corestrict(q: Coderivation, max_arity: Optional[int] = None) -> List[TableMap]:
    """Taylor coefficients q_0..q_N read off the action of Q on words"""
    arities = q._arities(max_arity)
    last = arities[-1] if arities else 0
    result = []
    for arity in range(0, last + 1):
        table = {}
        if not (arity == 0 and q.is_reduced):
            for word in q.space.canonical_words(arity):
                linear = {w[0]: c for w, c in q.apply(word).items() if len(w) == 1}
                if linear:
                    table[word] = linear
        result.append(TableMap(arity, q.degree, table))
    return result


def reconstruct(coeffs: Sequence[MultiMap], flavor: Flavor, space: GradedSpace,
                degree: Optional[int] = None) -> Coderivation:
    """Coderivation from its Taylor coefficients (index = arity)"""
    degrees = {m.degree for m in coeffs if m is not None}
    if degree is not None:
        degrees.add(degree)
    if len(degrees) > 1:
        raise ValidationError(f"Taylor coefficients have inconsistent degrees {sorted(degrees)}")
    degree = degrees.pop() if degrees else 0
    for m in coeffs:
        if isinstance(m, TableMap):
            for word, value in m.table.items():
                expected = space.word_degree(word) + degree
                if any(space.degrees[i] != expected for i in value):
                    raise ValidationError(f"Value on {space.word_names(word)} is not of degree {expected}")
    coefficients = {arity: m for arity, m in enumerate(coeffs) if m is not None}
    if flavor == Flavor.REDUCED:
        coefficients.pop(0, None)
    return Coderivation(space, degree, coefficients, len(coeffs) - 1, flavor)


# ---------------------------------------------------------------------------
# coalgebra morphisms

class CoalgMorphism:
    """Morphism of reduced symmetric coalgebras given by degree-0 Taylor coefficients f_1, f_2, ..."""

    def __init__(self, domain: GradedSpace, codomain: GradedSpace,
                 coefficients: Optional[Dict[int, MultiMap]] = None, max_arity: Optional[int] = None,
                 top_arity: Optional[int] = None,
                 insertion_bound: Optional[Callable[[FrozenSet[int]], Optional[int]]] = None,
                 label: str = ""):
        self.domain = domain
        self.codomain = codomain
        self.coefficients: Dict[int, MultiMap] = dict(coefficients or {})
        if max_arity is None and top_arity is None:
            top_arity = max(self.coefficients, default=1)
        self.max_arity = max_arity
        self.top_arity = top_arity
        self.insertion_bound = insertion_bound
        self.label = label
        self._components: Dict[Tuple[int, Word], SymVec] = {}
        for arity, multimap in self.coefficients.items():
            if multimap.degree != 0:
                raise ValidationError(f"Morphism coefficient of arity {arity} has nonzero degree")

    @classmethod
    def from_rule(cls, domain: GradedSpace, codomain: GradedSpace, rule: Callable[[Word], Vec],
                  max_arity: Optional[int] = None, top_arity: Optional[int] = None,
                  insertion_bound=None, label: str = "") -> "CoalgMorphism":
        last = top_arity if top_arity is not None else max_arity
        if last is None:
            raise ValidationError("A rule-based morphism needs a window or a top arity")
        coefficients = {arity: RuleMap(arity, 0, rule) for arity in range(1, last + 1)}
        return cls(domain, codomain, coefficients, max_arity, top_arity, insertion_bound, label)

    @classmethod
    def strict(cls, linear: LinearMap, label: str = "") -> "CoalgMorphism":
        if linear.degree != 0:
            raise ValidationError("A strict morphism needs a degree-0 linear map")
        return cls.from_rule(linear.source, linear.target, lambda word: linear.column(word[0]),
                             top_arity=1, label=label)

    @property
    def window(self) -> Optional[int]:
        return self.max_arity if self.top_arity is None else None

    def coefficient(self, arity: int) -> Optional[MultiMap]:
        if arity == 0 or (self.top_arity is not None and arity > self.top_arity):
            return None
        if self.max_arity is not None and arity > self.max_arity and self.top_arity is None:
            raise TruncationError(f"Morphism coefficient of arity {arity} outside window {self.max_arity}")
        return self.coefficients.get(arity)

    def value(self, word: Word) -> Vec:
        multimap = self.coefficient(len(word))
        return multimap.value(word) if multimap is not None else {}

    def linear_part(self) -> LinearMap:
        return LinearMap(self.domain, self.codomain, {i: self.value((i,)) for i in range(self.domain.dim)})

    def component(self, k: int, word: Word) -> SymVec:
        """F^k(word): the part of F(word) of word length k"""
        if k == 0:
            return {(): Fraction(1)} if not word else {}
        n = len(word)
        if n < k:
            return {}
        if k == 1:
            return {(index,): coeff for index, coeff in self.value(word).items()}
        key = (k, word)
        cached = self._components.get(key)
        if cached is not None:
            return cached
        domain_parities = self.domain.parities
        codomain_parities = self.codomain.parities
        result: SymVec = {}
        for size in range(1, n - k + 2):
            for others in combinations(range(1, n), size - 1):
                block = (0,) + others
                front = tuple(word[p] for p in block)
                value = self.value(front)
                if not value:
                    continue
                chosen = set(block)
                rest = tuple(word[p] for p in range(n) if p not in chosen)
                tail = self.component(k - 1, rest)
                if not tail:
                    continue
                sign = unshuffle_sign(block, word, domain_parities)
                for index, coeff in value.items():
                    for u, c in tail.items():
                        inserted = insert_front(u, index, codomain_parities)
                        if inserted is None:
                            continue
                        new_word, step = inserted
                        sym_add(result, {new_word: coeff * c}, sign * step)
        self._components[key] = result
        return result

    def apply(self, word: Word) -> SymVec:
        if not word:
            return {(): Fraction(1)}
        result: SymVec = {}
        for k in range(1, len(word) + 1):
            sym_add(result, self.component(k, word))
        return result

    def to_json(self, max_arity: Optional[int] = None) -> Dict[str, Any]:
        last = _window_min(self.window, max_arity)
        if last is None:
            last = self.top_arity or 1
        if self.top_arity is not None:
            last = min(last, self.top_arity)
        return multimaps_to_json(self.domain, self.codomain, range(1, last + 1), self.value,
                                 {"degree": 0, "flavor": "morphism"})


def reconstruct_morphism(coeffs: Sequence[Optional[MultiMap]], domain: GradedSpace,
                         codomain: GradedSpace) -> CoalgMorphism:
    """Morphism from f_1..f_N (index k - 1 holds f_k)"""
    coefficients = {k + 1: m for k, m in enumerate(coeffs) if m is not None}
    return CoalgMorphism(domain, codomain, coefficients, max_arity=len(coeffs))


def identity_morphism(space: GradedSpace) -> CoalgMorphism:
    return CoalgMorphism.strict(LinearMap.identity(space), label="id")


def compose_morphisms(g: CoalgMorphism, f: CoalgMorphism) -> CoalgMorphism:
    """(G o F)_i = sum_k g_k(F^k_i)"""
    if f.codomain != g.domain:
        raise ValidationError("Cannot compose morphisms with mismatched spaces")
    window = _window_min(f.window, g.window)
    top = f.top_arity * g.top_arity if (f.top_arity is not None and g.top_arity is not None) else None

    def rule(word: Word) -> Vec:
        result: Vec = {}
        for k in range(1, len(word) + 1):
            for u, c in f.component(k, word).items():
                vec_add(result, g.value(u), c)
        return result

    return CoalgMorphism.from_rule(f.domain, g.codomain, rule, window, top, label=f"{g.label}o{f.label}")


def check_morphism(f: CoalgMorphism, q: Coderivation, r: Coderivation, max_arity: int,
                   identity: str = "morphism") -> Report:
    """p F Q = p R F on every canonical word of arity <= max_arity"""
    if q.space != f.domain or r.space != f.codomain:
        raise ValidationError("Morphism and structures live on different spaces")
    report = Report(command="check")
    for arity in range(1, max_arity + 1):
        for word in f.domain.canonical_words(arity):
            lhs: Vec = {}
            for u, c in f.apply(word).items():
                vec_add(lhs, r.value(u), c)
            rhs: Vec = {}
            for u, c in q.apply(word).items():
                if u:
                    vec_add(rhs, f.value(u), c)
            report.record(identity, arity, f.domain.word_names(word),
                          vec_to_json(f.codomain, lhs), vec_to_json(f.codomain, rhs), passed=lhs == rhs)
    return report


def coproduct_check(f: CoalgMorphism, max_arity: int) -> Report:
    """Reduced coproduct compatibility: D(F(w)) = (F x F)(D(w))"""
    report = Report(command="check")

    def coproduct(word: Word, parities) -> Dict[Tuple[Word, Word], Fraction]:
        result = {}
        n = len(word)
        for size in range(1, n):
            for positions in combinations(range(n), size):
                chosen = set(positions)
                left = tuple(word[p] for p in positions)
                right = tuple(word[p] for p in range(n) if p not in chosen)
                key = (left, right)
                value = result.get(key, 0) + unshuffle_sign(positions, word, parities)
                if value:
                    result[key] = value
                else:
                    result.pop(key, None)
        return result

    def render(pairs):
        return [[f.codomain.word_names(a), f.codomain.word_names(b), format_rational(c)]
                for (a, b), c in sorted(pairs.items())]

    for arity in range(2, max_arity + 1):
        for word in f.domain.canonical_words(arity):
            lhs: Dict[Tuple[Word, Word], Fraction] = {}
            for u, c in f.apply(word).items():
                for key, s in coproduct(u, f.codomain.parities).items():
                    value = lhs.get(key, 0) + c * s
                    if value:
                        lhs[key] = value
                    else:
                        lhs.pop(key, None)
            rhs: Dict[Tuple[Word, Word], Fraction] = {}
            for (left, right), s in coproduct(word, f.domain.parities).items():
                for a, ca in f.apply(left).items():
                    for b, cb in f.apply(right).items():
                        key = (a, b)
                        value = rhs.get(key, 0) + s * ca * cb
                        if value:
                            rhs[key] = value
                        else:
                            rhs.pop(key, None)
            report.record("coproduct", arity, f.domain.word_names(word), render(lhs), render(rhs),
                          passed=lhs == rhs)
    return report


# ---------------------------------------------------------------------------
# L-infinity[1] algebras

@dataclass
class LInftyAlgebra:
    """Graded space with a degree-1 square-zero coderivation of the reduced symmetric coalgebra"""
    space: GradedSpace
    Q: Coderivation
    name: str = ""

    def __post_init__(self):
        if self.Q.degree != 1:
            raise ValidationError(f"L-infinity[1] structure must have degree 1, got {self.Q.degree}")
        if not self.Q.is_reduced:
            raise ValidationError("L-infinity[1] structure must be reduced")

    def check(self, max_arity: int) -> Report:
        return check_linfty(self.space, self.Q, max_arity)


def check_linfty(space: GradedSpace, q: Coderivation, max_arity: int, identity: str = "QQ") -> Report:
    """(Q.Q)_i = 0 on every canonical word of arity i <= max_arity"""
    report = Report(command="check")
    for arity in range(1, max_arity + 1):
        for word in space.canonical_words(arity):
            value: Vec = {}
            for u, c in q.apply(word).items():
                vec_add(value, q.value(u), c)
            report.record(identity, arity, space.word_names(word), vec_to_json(space, value), [],
                          passed=not value)
    logger.debug(f"check_linfty: {report.total_checks} words, ok={report.ok}")
    return report


def decalage(model, name: str = "", tag: str = "") -> LInftyAlgebra:
    """
    L-infinity[1] structure on s^-1 of a dgla: q_1(s^-1 l) = -s^-1 dl and
    q_2(s^-1 l_1 . s^-1 l_2) = (-1)^{|l_1|} s^-1 [l_1, l_2].

    `model` needs `space`, `bracket_basis(i, j)` and `differential_basis(i)`.
    """
    base = model.space
    space = base.shifted(tag)

    def rule(word: Word) -> Vec:
        if len(word) == 1:
            return vec_scale(model.differential_basis(word[0]), -1)
        i, j = word
        return vec_scale(model.bracket_basis(i, j), -1 if base.parities[i] else 1)

    q = Coderivation.from_rule(space, 1, rule, None, Flavor.REDUCED, top_arity=2, label="decalage")
    return LInftyAlgebra(space, q, name or f"s^-1({getattr(model, 'name', '')})")


def decalage_morphism(phi: LinearMap, source: LInftyAlgebra, target: LInftyAlgebra) -> CoalgMorphism:
    """Strict morphism s^-1 phi between decalages"""
    if phi.source.dim != source.space.dim or phi.target.dim != target.space.dim:
        raise ValidationError("Map does not match the decalage spaces")
    shifted = LinearMap(source.space, target.space, phi.columns, 0)
    return CoalgMorphism.strict(shifted, label="s^-1phi")


# ---------------------------------------------------------------------------
# Maurer-Cartan elements and twisting

def _insertion_length(top_arity: Optional[int], bound, x: Vec, what: str) -> int:
    if top_arity is not None:
        return top_arity
    if bound is not None:
        value = bound(frozenset(x))
        if value is not None:
            return value
    raise NonTerminatingSumError(
        f"No finiteness certificate for inserting this element into {what}")


def _check_degree_zero(space: GradedSpace, x: Vector):
    if x.space != space:
        raise ValidationError("Element is not in the structure's space")
    if any(space.degrees[i] != 0 for i in x.coeffs):
        raise PreconditionError("Maurer-Cartan elements of an L-infinity[1] algebra have degree 0")


def curvature(v: LInftyAlgebra, x: Vector) -> Vector:
    """sum_i (1/i!) q_i(x^i)"""
    _check_degree_zero(v.space, x)
    q = v.Q
    bound = _insertion_length(q.top_arity, q.insertion_bound, x.coeffs, "the structure")
    if q.window is not None and bound > q.window:
        raise TruncationError(f"Curvature needs q_{bound} but the structure is known up to {q.window}")
    result: Vec = {}
    for i in range(1, bound + 1):
        power = sym_power(x.coeffs, i, v.space)
        for word, c in power.items():
            vec_add(result, q.value(word), Fraction(c, factorial(i)))
    return Vector(v.space, result)


def is_maurer_cartan(v: LInftyAlgebra, x: Vector) -> bool:
    return curvature(v, x).is_zero


def twist_coderivation(q: Coderivation, x: Vector) -> Coderivation:
    """q_{x,i}(w) = sum_j (1/j!) q_{i+j}(x^j . w)"""
    space = q.space
    bound = _insertion_length(q.top_arity, q.insertion_bound, x.coeffs, "the coderivation")
    window = _window_shift(q.window, bound)
    if window is not None and window < 1:
        raise TruncationError("Twisting leaves no coefficient inside the window")
    powers = [sym_power(x.coeffs, j, space) for j in range(bound + 1)]

    def rule(word: Word) -> Vec:
        result: Vec = {}
        for j, power in enumerate(powers):
            if not power:
                continue
            weight = Fraction(1, factorial(j))
            for u, c in power.items():
                normalized = normalize_indices(u + word, space.parities)
                if normalized is None:
                    continue
                full, sign = normalized
                vec_add(result, q.value(full), weight * c * sign)
        return result

    return Coderivation.from_rule(space, q.degree, rule, window, q.flavor, q.top_arity,
                                  label=f"{q.label}_x")


def twist_structure(v: LInftyAlgebra, x: Vector, require_mc: bool = True) -> LInftyAlgebra:
    _check_degree_zero(v.space, x)
    if require_mc:
        c = curvature(v, x)
        if not c.is_zero:
            raise PreconditionError(f"Twisting element is not Maurer-Cartan: curvature {c}")
    return LInftyAlgebra(v.space, twist_coderivation(v.Q, x), f"{v.name}_x")


def twist_morphism(f: CoalgMorphism, x: Vector) -> CoalgMorphism:
    """f_{x,i}(w) = sum_j (1/j!) f_{i+j}(x^j . w)"""
    _check_degree_zero(f.domain, x)
    bound = _insertion_length(f.top_arity, f.insertion_bound, x.coeffs, "the morphism")
    window = _window_shift(f.window, bound)
    powers = [sym_power(x.coeffs, j, f.domain) for j in range(bound + 1)]

    def rule(word: Word) -> Vec:
        result: Vec = {}
        for j, power in enumerate(powers):
            weight = Fraction(1, factorial(j))
            for u, c in power.items():
                normalized = normalize_indices(u + word, f.domain.parities)
                if normalized is None:
                    continue
                full, sign = normalized
                vec_add(result, f.value(full), weight * c * sign)
        return result

    return CoalgMorphism.from_rule(f.domain, f.codomain, rule, window, f.top_arity, label=f"{f.label}_x")


def push_mc(f: CoalgMorphism, x: Vector) -> Vector:
    """MC(F)(x) = sum_i (1/i!) f_i(x^i)"""
    _check_degree_zero(f.domain, x)
    bound = _insertion_length(f.top_arity, f.insertion_bound, x.coeffs, "the morphism")
    result: Vec = {}
    for i in range(1, bound + 1):
        for word, c in sym_power(x.coeffs, i, f.domain).items():
            vec_add(result, f.value(word), Fraction(c, factorial(i)))
    return Vector(f.codomain, result)


# ---------------------------------------------------------------------------
# restriction to sub-structures

def _position_map(indices: Sequence[int]) -> Dict[int, int]:
    return {index: k for k, index in enumerate(indices)}


def _restricted_space(space: GradedSpace, indices: Sequence[int], target: Optional[GradedSpace]) -> GradedSpace:
    if target is None:
        return space.subspace(indices)
    if [space.degrees[i] for i in indices] != list(target.degrees):
        raise ValidationError("Restriction target does not match the selected degrees")
    return target


def restrict_coderivation(q: Coderivation, indices: Sequence[int],
                          target: Optional[GradedSpace] = None) -> Coderivation:
    """Restriction to the span of increasing basis indices, which must be a sub-structure"""
    indices = list(indices)
    if indices != sorted(indices):
        raise ValidationError("Restriction indices must be increasing")
    space = _restricted_space(q.space, indices, target)
    position = _position_map(indices)

    def rule(word: Word) -> Vec:
        value = q.value(tuple(indices[k] for k in word))
        try:
            return vec_reindex(value, position)
        except KeyError:
            raise ValidationError(
                f"Value on {space.word_names(word)} leaves the subspace; not a sub-structure") from None

    return Coderivation.from_rule(space, q.degree, rule, q.window, q.flavor, q.top_arity,
                                  label=f"{q.label}|")


def restrict_morphism(f: CoalgMorphism, domain_indices: Sequence[int], codomain_indices: Sequence[int],
                      domain: Optional[GradedSpace] = None, codomain: Optional[GradedSpace] = None) -> CoalgMorphism:
    domain_indices, codomain_indices = list(domain_indices), list(codomain_indices)
    if domain_indices != sorted(domain_indices) or codomain_indices != sorted(codomain_indices):
        raise ValidationError("Restriction indices must be increasing")
    source = _restricted_space(f.domain, domain_indices, domain)
    target = _restricted_space(f.codomain, codomain_indices, codomain)
    position = _position_map(codomain_indices)

    def rule(word: Word) -> Vec:
        value = f.value(tuple(domain_indices[k] for k in word))
        try:
            return vec_reindex(value, position)
        except KeyError:
            raise ValidationError(f"Morphism value on {source.word_names(word)} leaves the codomain") from None

    return CoalgMorphism.from_rule(source, target, rule, f.window, f.top_arity, label=f"{f.label}|")


# ---------------------------------------------------------------------------
# extensions and classifying morphisms

class ClassifyingData:
    """
    Taylor data of a classifying morphism V -> s^-1 Coder(SW).

    `rule(v_word)` returns the unreduced coderivation s f_i(v_1 . ... . v_i) of SW,
    or None for zero.
    """

    def __init__(self, base: GradedSpace, fiber: GradedSpace,
                 rule: Callable[[Word], Optional[Coderivation]], max_arity: Optional[int] = None,
                 top_arity: Optional[int] = None):
        self.base = base
        self.fiber = fiber
        self.rule = rule
        self.max_arity = max_arity
        self.top_arity = top_arity
        self._cache: Dict[Word, Optional[Coderivation]] = {}

    def value(self, word: Word) -> Optional[Coderivation]:
        if self.top_arity is not None and len(word) > self.top_arity:
            return None
        if self.max_arity is not None and len(word) > self.max_arity and self.top_arity is None:
            raise TruncationError(f"Classifying coefficient of arity {len(word)} outside window")
        if word not in self._cache:
            coder = self.rule(word)
            if coder is not None:
                expected = self.base.word_degree(word) + 1
                if coder.degree != expected:
                    raise ValidationError(
                        f"Classifying value on {self.base.word_names(word)} has degree {coder.degree}, "
                        f"expected {expected}")
                if coder.space != self.fiber:
                    raise ValidationError("Classifying value is not a coderivation of the fiber")
            self._cache[word] = coder
        return self._cache[word]


def extension_from_morphism(base: LInftyAlgebra, fiber: LInftyAlgebra, data: ClassifyingData,
                            max_arity: Optional[int] = None, top_arity: Optional[int] = None,
                            insertion_bound=None, name: str = "") -> LInftyAlgebra:
    """
    Structure on V x W: pure V words go to (q_i(v), sf_i(v)_0(1)), pure W words to
    (0, r_j(w)), mixed words to (0, sf_i(v)_j(w)).
    """
    space, offsets = GradedSpace.direct_sum([base.space, fiber.space], label=name)
    split = offsets[1]
    fiber_shift = {k: k + split for k in range(fiber.space.dim)}
    window = max_arity if max_arity is not None else _window_min(base.Q.window, fiber.Q.window, data.max_arity)

    def rule(word: Word) -> Vec:
        cut = bisect_left(word, split)
        v_part, w_part = word[:cut], tuple(k - split for k in word[cut:])
        if not w_part:
            result = dict(base.Q.value(v_part))
            coder = data.value(v_part)
            if coder is not None:
                vec_add(result, vec_reindex(coder.value(()), fiber_shift))
            return result
        if not v_part:
            return vec_reindex(fiber.Q.value(w_part), fiber_shift)
        coder = data.value(v_part)
        if coder is None:
            return {}
        return vec_reindex(coder.value(w_part), fiber_shift)

    if window is None and top_arity is None:
        raise ValidationError("Extension needs a window or a top arity")
    q = Coderivation.from_rule(space, 1, rule, window, Flavor.REDUCED, top_arity, insertion_bound,
                               label="theta")
    algebra = LInftyAlgebra(space, q, name or f"{base.name}x{fiber.name}")
    algebra.split = split
    return algebra


def morphism_from_extension(theta: LInftyAlgebra, split: int, base_space: Optional[GradedSpace] = None,
                            fiber_space: Optional[GradedSpace] = None
                            ) -> Tuple[LInftyAlgebra, LInftyAlgebra, ClassifyingData]:
    """Base structure, fiber structure and classifying data read off an extension"""
    space = theta.space
    base = base_space or space.subspace(range(split))
    fiber = fiber_space or space.subspace(range(split, space.dim))
    base_indices = list(range(split))
    to_fiber = {k + split: k for k in range(fiber.dim)}
    q = theta.Q

    def base_rule(word: Word) -> Vec:
        return {k: c for k, c in q.value(word).items() if k < split}

    def fiber_rule(word: Word) -> Vec:
        value = q.value(tuple(k + split for k in word))
        if any(k < split for k in value):
            raise ValidationError("Fiber is not an ideal of the extension")
        return vec_reindex(value, to_fiber)

    def classifying_rule(v_word: Word) -> Optional[Coderivation]:
        def coder_rule(w_word: Word) -> Vec:
            value = q.value(v_word + tuple(k + split for k in w_word))
            return {to_fiber[k]: c for k, c in value.items() if k >= split}

        window = _window_shift(q.window, len(v_word))
        top = None if q.top_arity is None else max(q.top_arity - len(v_word), 0)
        degree = space.word_degree(v_word) + 1
        return Coderivation.from_rule(fiber, degree, coder_rule, window, Flavor.UNREDUCED, top,
                                      label=f"sf({space.word_names(v_word)})")

    base_q = Coderivation.from_rule(base, 1, base_rule, q.window, Flavor.REDUCED, q.top_arity,
                                    label="base")
    fiber_q = Coderivation.from_rule(fiber, 1, fiber_rule, q.window, Flavor.REDUCED, q.top_arity,
                                     label="fiber")
    data = ClassifyingData(base, fiber, classifying_rule, q.window, q.top_arity)
    logger.debug(f"Read classifying data off an extension split at {split} (base dim {len(base_indices)})")
    return LInftyAlgebra(base, base_q, "base"), LInftyAlgebra(fiber, fiber_q, "fiber"), data


def check_ideal(theta: LInftyAlgebra, split: int, max_arity: int) -> Report:
    """Every coefficient on a word with a fiber letter lands in the fiber"""
    report = Report(command="check")
    space = theta.space
    for arity in range(1, max_arity + 1):
        for word in space.canonical_words(arity):
            if word[-1] < split:
                continue
            value = theta.Q.value(word)
            leak = {k: c for k, c in value.items() if k < split}
            report.record("ideal", arity, space.word_names(word), vec_to_json(space, leak), [],
                          passed=not leak)
    return report
