"""
Graded vector spaces, Koszul signs, graded Lie algebras with differential and splitting,
derivations and finite-dimensional homology over the rationals
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations, combinations_with_replacement, permutations
from typing import Dict, List, Optional, Tuple, Sequence, Iterable, Any, Union, FrozenSet

import sympy

from .error_handler import ValidationError, PreconditionError
from .models import Report
from .scalars import to_rational, format_rational

logger = logging.getLogger(__name__)

Vec = Dict[int, Fraction]


# ---------------------------------------------------------------------------
# sparse vector helpers

def vec_add(target: Vec, source: Vec, scale: Union[int, Fraction] = 1) -> Vec:
    """target += scale * source, in place; zero coefficients are dropped"""
    if not scale:
        return target
    for index, coeff in source.items():
        value = target.get(index, 0) + scale * coeff
        if value:
            target[index] = value
        else:
            target.pop(index, None)
    return target


def vec_scale(source: Vec, scale: Union[int, Fraction]) -> Vec:
    if not scale:
        return {}
    return {index: coeff * scale for index, coeff in source.items()}


def vec_combine(pairs: Iterable[Tuple[Union[int, Fraction], Vec]]) -> Vec:
    result: Vec = {}
    for scale, source in pairs:
        vec_add(result, source, scale)
    return result


def vec_restrict(source: Vec, indices: Iterable[int]) -> Vec:
    keep = set(indices)
    return {index: coeff for index, coeff in source.items() if index in keep}


def vec_reindex(source: Vec, mapping: Dict[int, int]) -> Vec:
    """Rename indices; raises KeyError when an index has no image"""
    return {mapping[index]: coeff for index, coeff in source.items()}


def vec_to_json(space: "GradedSpace", source: Vec) -> List[Dict[str, str]]:
    return [
        {"basis": space.names[index], "coeff": format_rational(source[index])}
        for index in sorted(source)
    ]


def vec_degrees(space: "GradedSpace", source: Vec) -> FrozenSet[int]:
    return frozenset(space.degrees[index] for index in source)


# ---------------------------------------------------------------------------
# graded spaces and vectors

class GradedSpace:
    """Finite ordered basis of (name, degree) pairs; |s^-1 x| = |x| - 1"""

    def __init__(self, basis: Sequence[Tuple[str, int]], label: str = ""):
        names = [str(name) for name, _ in basis]
        if len(set(names)) != len(names):
            duplicates = sorted({name for name in names if names.count(name) > 1})
            raise ValidationError(f"Duplicate basis names: {duplicates}")
        self.names: Tuple[str, ...] = tuple(names)
        self.degrees: Tuple[int, ...] = tuple(int(degree) for _, degree in basis)
        self.parities: Tuple[int, ...] = tuple(degree % 2 for degree in self.degrees)
        self.label = label
        self._index = {name: i for i, name in enumerate(self.names)}
        self._words: Dict[int, List[Tuple[int, ...]]] = {}

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def basis(self) -> List[Tuple[str, int]]:
        return list(zip(self.names, self.degrees))

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise ValidationError(f"Unknown basis element {name!r}") from None

    def has(self, name: str) -> bool:
        return name in self._index

    def degree(self, index: int) -> int:
        return self.degrees[index]

    def indices_of_degree(self, degree: int) -> List[int]:
        return [i for i, d in enumerate(self.degrees) if d == degree]

    def degree_range(self) -> List[int]:
        return sorted(set(self.degrees))

    def shifted(self, tag: str = "") -> "GradedSpace":
        prefix = f"{tag}|" if tag else ""
        return GradedSpace(
            [(f"{prefix}s^-1({name})", degree - 1) for name, degree in self.basis],
            label=f"s^-1({self.label})" if self.label else "",
        )

    def tagged(self, tag: str) -> "GradedSpace":
        return GradedSpace([(f"{tag}|{name}", degree) for name, degree in self.basis], label=self.label)

    def subspace(self, indices: Sequence[int], label: str = "") -> "GradedSpace":
        return GradedSpace([(self.names[i], self.degrees[i]) for i in indices], label=label)

    @staticmethod
    def direct_sum(spaces: Sequence["GradedSpace"], label: str = "") -> Tuple["GradedSpace", List[int]]:
        """Concatenated basis and the offset of each summand"""
        basis: List[Tuple[str, int]] = []
        offsets: List[int] = []
        for space in spaces:
            offsets.append(len(basis))
            basis.extend(space.basis)
        return GradedSpace(basis, label=label), offsets

    def vector(self, coeffs: Dict[str, Any]) -> "Vector":
        return Vector(self, {self.index(name): to_rational(value) for name, value in coeffs.items()})

    def basis_vector(self, name_or_index: Union[str, int]) -> "Vector":
        index = name_or_index if isinstance(name_or_index, int) else self.index(name_or_index)
        return Vector(self, {index: Fraction(1)})

    def canonical_words(self, arity: int) -> List[Tuple[int, ...]]:
        """Sorted words with no repeated odd index, lexicographic order"""
        cached = self._words.get(arity)
        if cached is None:
            cached = [
                word for word in _combinations_with_replacement(self.dim, arity)
                if not _has_repeated_odd(word, self.parities)
            ]
            self._words[arity] = cached
        return cached

    def word_degree(self, word: Sequence[int]) -> int:
        return sum(self.degrees[i] for i in word)

    def word_names(self, word: Sequence[int]) -> List[str]:
        return [self.names[i] for i in word]

    def __eq__(self, other) -> bool:
        return isinstance(other, GradedSpace) and self.names == other.names and self.degrees == other.degrees

    def __hash__(self) -> int:
        return hash((self.names, self.degrees))

    def __repr__(self) -> str:
        return f"GradedSpace(dim={self.dim}, label={self.label!r})"


def _combinations_with_replacement(dim: int, arity: int):
    return combinations_with_replacement(range(dim), arity)


def _has_repeated_odd(word: Sequence[int], parities: Sequence[int]) -> bool:
    return any(word[k] == word[k + 1] and parities[word[k]] for k in range(len(word) - 1))


class Vector:
    """Sparse vector in a GradedSpace"""

    __slots__ = ("space", "coeffs")

    def __init__(self, space: GradedSpace, coeffs: Optional[Vec] = None):
        self.space = space
        self.coeffs: Vec = {i: Fraction(c) for i, c in (coeffs or {}).items() if c}

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def degree(self) -> Optional[int]:
        """Degree of a homogeneous vector, None for zero"""
        degrees = vec_degrees(self.space, self.coeffs)
        if not degrees:
            return None
        if len(degrees) > 1:
            raise ValidationError(f"Vector is not homogeneous: degrees {sorted(degrees)}")
        return next(iter(degrees))

    def is_homogeneous(self) -> bool:
        return len(vec_degrees(self.space, self.coeffs)) <= 1

    def _check(self, other: "Vector"):
        if self.space != other.space:
            raise ValidationError("Vectors live in different spaces")

    def __add__(self, other: "Vector") -> "Vector":
        self._check(other)
        return Vector(self.space, vec_add(dict(self.coeffs), other.coeffs))

    def __sub__(self, other: "Vector") -> "Vector":
        self._check(other)
        return Vector(self.space, vec_add(dict(self.coeffs), other.coeffs, -1))

    def __neg__(self) -> "Vector":
        return Vector(self.space, vec_scale(self.coeffs, -1))

    def __rmul__(self, scale) -> "Vector":
        return Vector(self.space, vec_scale(self.coeffs, to_rational(scale)))

    def __eq__(self, other) -> bool:
        return isinstance(other, Vector) and self.space == other.space and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(tuple(sorted(self.coeffs.items())))

    def to_json(self) -> List[Dict[str, str]]:
        return vec_to_json(self.space, self.coeffs)

    def __repr__(self) -> str:
        terms = " + ".join(f"{format_rational(c)}*{self.space.names[i]}" for i, c in sorted(self.coeffs.items()))
        return f"Vector({terms or '0'})"


# ---------------------------------------------------------------------------
# linear maps

def _to_sympy(value: Fraction) -> sympy.Rational:
    return sympy.Rational(value.numerator, value.denominator)


def _from_sympy(value) -> Fraction:
    value = sympy.Rational(value)
    return Fraction(int(value.p), int(value.q))


def vectors_to_matrix(vectors: Sequence[Vec], dim: int) -> sympy.Matrix:
    """Columns are the given vectors"""
    matrix = sympy.zeros(dim, len(vectors))
    for col, vector in enumerate(vectors):
        for row, coeff in vector.items():
            matrix[row, col] = _to_sympy(coeff)
    return matrix


def column_to_vec(column, rows: Optional[Sequence[int]] = None) -> Vec:
    result: Vec = {}
    for position, value in enumerate(column):
        if value != 0:
            result[rows[position] if rows is not None else position] = _from_sympy(value)
    return result


def rank_of(vectors: Sequence[Vec], dim: int) -> int:
    if not vectors or dim == 0:
        return 0
    return vectors_to_matrix(vectors, dim).rank()


class LinearMap:
    """Sparse linear map given by the images of the source basis"""

    def __init__(self, source: GradedSpace, target: GradedSpace, columns: Optional[Dict[int, Vec]] = None,
                 degree: int = 0):
        self.source = source
        self.target = target
        self.degree = degree
        self.columns: Dict[int, Vec] = {}
        for index, image in (columns or {}).items():
            cleaned = {i: Fraction(c) for i, c in image.items() if c}
            if cleaned:
                self.columns[index] = cleaned

    @classmethod
    def identity(cls, space: GradedSpace) -> "LinearMap":
        return cls(space, space, {i: {i: Fraction(1)} for i in range(space.dim)})

    @classmethod
    def zero(cls, source: GradedSpace, target: GradedSpace, degree: int = 0) -> "LinearMap":
        return cls(source, target, {}, degree)

    @classmethod
    def from_matrix(cls, source: GradedSpace, target: GradedSpace, matrix: sympy.Matrix,
                    degree: int = 0) -> "LinearMap":
        columns = {col: column_to_vec(matrix[:, col]) for col in range(matrix.cols)}
        return cls(source, target, columns, degree)

    def column(self, index: int) -> Vec:
        return self.columns.get(index, {})

    def apply(self, source: Vec) -> Vec:
        result: Vec = {}
        for index, coeff in source.items():
            image = self.columns.get(index)
            if image:
                vec_add(result, image, coeff)
        return result

    def __call__(self, vector: Vector) -> Vector:
        if vector.space != self.source:
            raise ValidationError("Vector is not in the source space of the map")
        return Vector(self.target, self.apply(vector.coeffs))

    def compose(self, inner: "LinearMap") -> "LinearMap":
        """self after inner"""
        if inner.target != self.source:
            raise ValidationError("Cannot compose maps with mismatched spaces")
        columns = {index: self.apply(image) for index, image in inner.columns.items()}
        return LinearMap(inner.source, self.target, columns, self.degree + inner.degree)

    def combine(self, other: "LinearMap", scale: Union[int, Fraction] = 1) -> "LinearMap":
        """self + scale * other"""
        if self.source != other.source or self.target != other.target:
            raise ValidationError("Cannot add maps with mismatched spaces")
        columns = {index: dict(image) for index, image in self.columns.items()}
        for index, image in other.columns.items():
            vec_add(columns.setdefault(index, {}), image, scale)
        return LinearMap(self.source, self.target, columns, self.degree)

    def __add__(self, other: "LinearMap") -> "LinearMap":
        return self.combine(other, 1)

    def __sub__(self, other: "LinearMap") -> "LinearMap":
        return self.combine(other, -1)

    def scaled(self, scale: Union[int, Fraction]) -> "LinearMap":
        return LinearMap(self.source, self.target,
                         {index: vec_scale(image, scale) for index, image in self.columns.items()},
                         self.degree)

    def is_zero(self) -> bool:
        return not self.columns

    def __eq__(self, other) -> bool:
        return (isinstance(other, LinearMap) and self.source == other.source
                and self.target == other.target and self.columns == other.columns)

    def degree_violations(self) -> List[int]:
        """Source indices whose image is not of degree |x| + degree"""
        bad = []
        for index, image in self.columns.items():
            expected = self.source.degrees[index] + self.degree
            if any(self.target.degrees[i] != expected for i in image):
                bad.append(index)
        return bad

    def to_matrix(self) -> sympy.Matrix:
        return vectors_to_matrix([self.column(i) for i in range(self.source.dim)], self.target.dim)

    def block(self, source_indices: Sequence[int], target_indices: Sequence[int]) -> sympy.Matrix:
        """Matrix of the component from span(source_indices) to span(target_indices)"""
        row_of = {index: row for row, index in enumerate(target_indices)}
        matrix = sympy.zeros(len(target_indices), len(source_indices))
        for col, index in enumerate(source_indices):
            for target_index, coeff in self.column(index).items():
                row = row_of.get(target_index)
                if row is not None:
                    matrix[row, col] = _to_sympy(coeff)
        return matrix

    def to_json(self) -> List[Dict[str, Any]]:
        return [
            {"basis": self.source.names[index], "value": vec_to_json(self.target, self.columns[index])}
            for index in sorted(self.columns)
        ]


# ---------------------------------------------------------------------------
# permutations and signs

@dataclass(frozen=True)
class Permutation:
    """Images of 1..n; `images[k-1]` is sigma(k)"""
    images: Tuple[int, ...]

    def __post_init__(self):
        if sorted(self.images) != list(range(1, len(self.images) + 1)):
            raise ValidationError(f"Not a permutation of 1..{len(self.images)}: {self.images}")

    @property
    def size(self) -> int:
        return len(self.images)

    def __call__(self, k: int) -> int:
        return self.images[k - 1]

    def compose(self, inner: "Permutation") -> "Permutation":
        """(self o inner)(k) = self(inner(k))"""
        if inner.size != self.size:
            raise ValidationError("Permutations of different sizes")
        return Permutation(tuple(self(inner(k)) for k in range(1, self.size + 1)))

    def inverse(self) -> "Permutation":
        result = [0] * self.size
        for k, image in enumerate(self.images, start=1):
            result[image - 1] = k
        return Permutation(tuple(result))

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(1, n + 1)))


def koszul_parity(order: Sequence[int], parities: Sequence[int]) -> int:
    """Number mod 2 of odd-odd inversions of the sequence `order` (0-based positions)"""
    count = 0
    n = len(order)
    for p in range(n):
        if not parities[order[p]]:
            continue
        for q in range(p + 1, n):
            if order[p] > order[q] and parities[order[q]]:
                count += 1
    return count & 1


def koszul_sign(sigma: Permutation, degrees: Sequence[int]) -> int:
    """Sign with v_sigma(1) . ... . v_sigma(n) = sign * v_1 . ... . v_n"""
    if sigma.size != len(degrees):
        raise ValidationError(f"Permutation of size {sigma.size} against {len(degrees)} degrees")
    order = [image - 1 for image in sigma.images]
    return -1 if koszul_parity(order, [d % 2 for d in degrees]) else 1


def unshuffles(i: int, j: int) -> List[Permutation]:
    """All (i, j)-unshuffles in lexicographic order of their first block"""
    n = i + j
    result = []
    for front in combinations(range(1, n + 1), i):
        chosen = set(front)
        back = tuple(k for k in range(1, n + 1) if k not in chosen)
        result.append(Permutation(front + back))
    return result


@lru_cache(maxsize=None)
def signed_permutations(parities: Tuple[int, ...]) -> Tuple[Tuple[Tuple[int, ...], int], ...]:
    """Every ordering of positions 0..n-1 with its Koszul sign for the given parities"""
    result = []
    for order in permutations(range(len(parities))):
        result.append((order, -1 if koszul_parity(order, parities) else 1))
    return tuple(result)


# ---------------------------------------------------------------------------
# graded Lie algebras

def _splitting_sets(space: GradedSpace, splitting) -> Optional[Tuple[Tuple[int, ...], Tuple[int, ...]]]:
    if splitting is None:
        return None
    if isinstance(splitting, dict):
        l_part, a_part = splitting.get("L", []), splitting.get("A", [])
    else:
        l_part, a_part = splitting
    def to_index(x):
        return x if isinstance(x, int) else space.index(x)

    l_indices = sorted(to_index(x) for x in l_part)
    a_indices = sorted(to_index(x) for x in a_part)
    if set(l_indices) & set(a_indices) or sorted(l_indices + a_indices) != list(range(space.dim)):
        raise ValidationError("Splitting must assign every basis element to exactly one of L, A")
    return tuple(l_indices), tuple(a_indices)


class GLA:
    """
    Graded Lie algebra given by structure constants on a finite basis.

    Brackets are stored for i <= j; [e_j, e_i] is derived by graded antisymmetry.
    An optional degree-1 differential and an optional basis-aligned splitting
    M = L + A ride along.
    """

    def __init__(self, space: GradedSpace, brackets: Optional[Dict[Tuple[int, int], Vec]] = None,
                 differential: Optional[LinearMap] = None, splitting=None, name: str = ""):
        self.space = space
        self.name = name or space.label
        self._upper: Dict[Tuple[int, int], Vec] = {}
        for (i, j), value in (brackets or {}).items():
            cleaned = {k: Fraction(c) for k, c in value.items() if c}
            if i > j:
                i, j = j, i
                cleaned = vec_scale(cleaned, -self._sign(i, j))
            previous = self._upper.get((i, j))
            if previous is not None and previous != cleaned:
                raise ValidationError(
                    f"Inconsistent bracket entries for [{space.names[i]}, {space.names[j]}]")
            if cleaned:
                self._upper[(i, j)] = cleaned
        if differential is not None and (differential.source != space or differential.target != space):
            raise ValidationError("Differential must be an endomap of the algebra")
        self.differential = differential
        self.splitting = _splitting_sets(space, splitting)
        self._row_cache: Dict[int, Dict[int, Vec]] = {}

    def _sign(self, i: int, j: int) -> int:
        return -1 if (self.space.parities[i] and self.space.parities[j]) else 1

    @property
    def dim(self) -> int:
        return self.space.dim

    def degree(self, index: int) -> int:
        return self.space.degrees[index]

    def bracket_basis(self, i: int, j: int) -> Vec:
        """[e_i, e_j]; the returned dict is shared and must not be mutated"""
        if i <= j:
            return self._upper.get((i, j), {})
        value = self._upper.get((j, i))
        if not value:
            return {}
        return vec_scale(value, -self._sign(i, j))

    def bracket_with_basis(self, x: Vec, j: int) -> Vec:
        """[x, e_j]"""
        result: Vec = {}
        for i, coeff in x.items():
            value = self.bracket_basis(i, j)
            if value:
                vec_add(result, value, coeff)
        return result

    def bracket(self, x: Vec, y: Vec) -> Vec:
        result: Vec = {}
        for j, coeff in y.items():
            vec_add(result, self.bracket_with_basis(x, j), coeff)
        return result

    def differential_basis(self, index: int) -> Vec:
        if self.differential is None:
            return {}
        return self.differential.column(index)

    def apply_differential(self, x: Vec) -> Vec:
        if self.differential is None:
            return {}
        return self.differential.apply(x)

    # splitting -----------------------------------------------------------

    @property
    def has_splitting(self) -> bool:
        return self.splitting is not None

    def _require_splitting(self):
        if self.splitting is None:
            raise PreconditionError(f"Algebra {self.name!r} has no splitting M = L + A")

    @property
    def L(self) -> Tuple[int, ...]:
        self._require_splitting()
        return self.splitting[0]

    @property
    def A(self) -> Tuple[int, ...]:
        self._require_splitting()
        return self.splitting[1]

    def project(self, x: Vec) -> Vec:
        """P, onto A along L"""
        return vec_restrict(x, self.A)

    def project_perp(self, x: Vec) -> Vec:
        """P_perp = id - P, onto L"""
        return vec_restrict(x, self.L)

    def closure_violations(self, indices: Sequence[int]) -> List[Tuple[int, int]]:
        allowed = set(indices)
        bad = []
        ordered = sorted(allowed)
        for a, i in enumerate(ordered):
            for j in ordered[a:]:
                if any(k not in allowed for k in self.bracket_basis(i, j)):
                    bad.append((i, j))
        return bad

    def normalizes(self, x: Vec, indices: Sequence[int]) -> bool:
        """[x, span(indices)] inside span(indices)"""
        allowed = set(indices)
        return all(k in allowed for j in indices for k in self.bracket_with_basis(x, j))

    # derived algebras -----------------------------------------------------

    def with_differential(self, differential: Optional[LinearMap]) -> "GLA":
        algebra = GLA(self.space, self._upper, differential, None, self.name)
        algebra.splitting = self.splitting
        return algebra

    def without_differential(self) -> "GLA":
        return self.with_differential(None)

    def with_splitting(self, splitting) -> "GLA":
        return GLA(self.space, self._upper, self.differential, splitting, self.name)

    def sub_algebra(self, indices: Sequence[int], name: str = "") -> "GLA":
        """Basis-aligned subalgebra; the differential is restricted when it preserves the span"""
        indices = list(indices)
        position = {index: k for k, index in enumerate(indices)}
        violations = self.closure_violations(indices)
        if violations:
            i, j = violations[0]
            raise ValidationError(
                f"Span is not bracket-closed: [{self.space.names[i]}, {self.space.names[j]}]")
        space = self.space.subspace(indices, label=name)
        brackets = {}
        for a, i in enumerate(indices):
            for j in indices[a:]:
                value = self.bracket_basis(i, j)
                if value:
                    brackets[(position[i], position[j])] = vec_reindex(value, position)
        differential = None
        if self.differential is not None:
            columns = {}
            for i in indices:
                image = self.differential.column(i)
                if any(k not in position for k in image):
                    raise ValidationError(f"Differential does not preserve the span of {name or 'subalgebra'}")
                columns[position[i]] = vec_reindex(image, position)
            differential = LinearMap(space, space, columns, 1)
        return GLA(space, brackets, differential, None, name)

    def change_basis(self, new_basis: Sequence[Tuple[str, Vec]], splitting=None, name: str = "") -> "GLA":
        """
        Same algebra presented in another basis.

        Args:
            new_basis: (name, vector in the old basis) for each new basis element; vectors must
                be homogeneous and linearly independent
            splitting: splitting in terms of the new names

        Returns:
            GLA in the new basis; `transition` holds the old-coordinates matrix of the new basis
        """
        dim = self.dim
        if len(new_basis) != dim:
            raise ValidationError(f"Change of basis needs {dim} vectors, got {len(new_basis)}")
        degrees = []
        for label, vector in new_basis:
            found = vec_degrees(self.space, vector)
            if len(found) != 1:
                raise ValidationError(f"New basis vector {label!r} is zero or not homogeneous")
            degrees.append(next(iter(found)))
        space = GradedSpace([(label, degree) for (label, _), degree in zip(new_basis, degrees)], label=name)
        transition = vectors_to_matrix([vector for _, vector in new_basis], dim)
        if transition.rank() != dim:
            raise ValidationError("New basis vectors are linearly dependent")
        inverse = transition.inv()

        def to_new(vector: Vec) -> Vec:
            column = inverse * vectors_to_matrix([vector], dim)
            return column_to_vec(column)

        vectors = [vector for _, vector in new_basis]
        brackets = {}
        for i in range(dim):
            for j in range(i, dim):
                value = self.bracket(vectors[i], vectors[j])
                if value:
                    brackets[(i, j)] = to_new(value)
        differential = None
        if self.differential is not None:
            differential = LinearMap(space, space,
                                     {i: to_new(self.differential.apply(vectors[i])) for i in range(dim)}, 1)
        algebra = GLA(space, brackets, differential, splitting, name or self.name)
        algebra.transition = transition
        return algebra

    def transport_map(self, new: "GLA", linear: LinearMap) -> LinearMap:
        """Express an endomap of this algebra in the basis of `new` (built by change_basis)"""
        transition = new.transition
        matrix = transition.inv() * linear.to_matrix() * transition
        return LinearMap.from_matrix(new.space, new.space, matrix, linear.degree)

    def to_json(self) -> Dict[str, Any]:
        result: Dict[str, Any] = {
            "name": self.name,
            "basis": [{"name": n, "degree": d} for n, d in self.space.basis],
            "bracket": [
                {"left": self.space.names[i], "right": self.space.names[j],
                 "value": vec_to_json(self.space, value)}
                for (i, j), value in sorted(self._upper.items())
            ],
        }
        if self.differential is not None:
            result["differential"] = self.differential.to_json()
        if self.splitting is not None:
            result["splitting"] = {"L": self.space.word_names(self.L), "A": self.space.word_names(self.A)}
        return result

    def __repr__(self) -> str:
        return f"GLA(name={self.name!r}, dim={self.dim})"


def apply_bracket(g: GLA, x: Vector, y: Vector) -> Vector:
    if x.space != g.space or y.space != g.space:
        raise ValidationError("Bracket arguments are not in the algebra")
    return Vector(g.space, g.bracket(x.coeffs, y.coeffs))


def projections(g: GLA) -> Tuple[LinearMap, LinearMap]:
    """(P, P_perp) as linear endomaps"""
    g._require_splitting()
    p = LinearMap(g.space, g.space, {i: {i: Fraction(1)} for i in g.A})
    p_perp = LinearMap(g.space, g.space, {i: {i: Fraction(1)} for i in g.L})
    return p, p_perp


def validate_gla(g: GLA, require_closed_complement: bool = True) -> Report:
    """Checks every axiom on basis elements and lists every violated instance"""
    report = Report(command="validate")
    space = g.space
    names = space.names
    dim = g.dim

    for i in range(dim):
        for j in range(i, dim):
            value = g.bracket_basis(i, j)
            expected = space.degrees[i] + space.degrees[j]
            report.record("bracket_degree", 2, [names[i], names[j]],
                          sorted(vec_degrees(space, value)), [expected],
                          passed=all(space.degrees[k] == expected for k in value))
        if not space.parities[i]:
            value = g.bracket_basis(i, i)
            report.record("antisymmetry", 2, [names[i], names[i]],
                          vec_to_json(space, value), [], passed=not value)

    for i in range(dim):
        for j in range(i, dim):
            for k in range(j, dim):
                ek = {k: Fraction(1)}
                lhs = g.bracket({i: Fraction(1)}, g.bracket({j: Fraction(1)}, ek))
                rhs = g.bracket(g.bracket_basis(i, j), ek)
                vec_add(rhs, g.bracket({j: Fraction(1)}, g.bracket({i: Fraction(1)}, ek)),
                        g._sign(i, j))
                report.record("jacobi", 3, [names[i], names[j], names[k]],
                              vec_to_json(space, lhs), vec_to_json(space, rhs))

    if g.differential is not None:
        d = g.differential
        report.record("differential_degree", 1, [], d.degree, 1, passed=d.degree == 1)
        for i in d.degree_violations():
            report.fail("differential_degree", 1, [names[i]])
        square = d.compose(d)
        for i in range(dim):
            report.record("differential_square", 1, [names[i]],
                          vec_to_json(space, square.column(i)), [], passed=not square.column(i))
        derivation = Derivation(g, d, 1, "d")
        _record_leibniz(report, derivation, "differential_leibniz")

    if g.splitting is not None:
        for i, j in g.closure_violations(g.L):
            report.fail("L_closed", 2, [names[i], names[j]], vec_to_json(space, g.bracket_basis(i, j)))
        complement_violations = g.closure_violations(g.A)
        if require_closed_complement:
            for i, j in complement_violations:
                report.fail("A_closed", 2, [names[i], names[j]], vec_to_json(space, g.bracket_basis(i, j)))
        elif complement_violations:
            report.notes.append("A is not bracket-closed; only transfer-based brackets are available")
        if g.differential is not None:
            for i in g.L:
                leak = g.project(g.differential.column(i))
                report.record("PDP_equals_PD", 1, [names[i]], vec_to_json(space, leak), [], passed=not leak)

    logger.debug(f"validate_gla({g.name}): {report.total_checks} checks, ok={report.ok}")
    return report


def _record_leibniz(report: Report, derivation: "Derivation", identity: str):
    space = derivation.gla.space
    violations = derivation.leibniz_violations()
    for (i, j), lhs, rhs in violations:
        report.fail(identity, 2, [space.names[i], space.names[j]],
                    vec_to_json(space, lhs), vec_to_json(space, rhs))
    if not violations:
        report.record(identity, 2, [], None, None, passed=True)


# ---------------------------------------------------------------------------
# derivations

@dataclass(frozen=True)
class Derivation:
    """Derivation of a GLA given by its matrix"""
    gla: GLA
    matrix: LinearMap
    degree: int
    name: str = "D"

    def apply(self, x: Vec) -> Vec:
        return self.matrix.apply(x)

    def __call__(self, x: Vector) -> Vector:
        return self.matrix(x)

    @property
    def preserves_L(self) -> bool:
        """D(L) inside L, equivalently P D P = P D"""
        return all(not self.gla.project(self.matrix.column(i)) for i in self.gla.L)

    def leibniz_violations(self) -> List[Tuple[Tuple[int, int], Vec, Vec]]:
        g = self.gla
        bad = []
        for i in range(g.dim):
            ei = {i: Fraction(1)}
            for j in range(i, g.dim):
                ej = {j: Fraction(1)}
                lhs = self.apply(g.bracket_basis(i, j))
                rhs = g.bracket(self.matrix.column(i), ej)
                sign = -1 if (self.degree % 2 and g.space.parities[i]) else 1
                vec_add(rhs, g.bracket(ei, self.matrix.column(j)), sign)
                if lhs != rhs:
                    bad.append(((i, j), lhs, rhs))
        return bad

    def bracket(self, other: "Derivation") -> "Derivation":
        """[D1, D2] = D1 D2 - (-1)^{|D1||D2|} D2 D1"""
        sign = -1 if (self.degree % 2 and other.degree % 2) else 1
        matrix = self.matrix.compose(other.matrix).combine(other.matrix.compose(self.matrix), -sign)
        return Derivation(self.gla, matrix, self.degree + other.degree, f"[{self.name},{other.name}]")

    def combine(self, other: "Derivation", scale: Union[int, Fraction] = 1) -> "Derivation":
        return Derivation(self.gla, self.matrix.combine(other.matrix, scale), self.degree, self.name)

    def is_square_zero(self) -> bool:
        return self.matrix.compose(self.matrix).is_zero()

    def restricted_to(self, sub: GLA, indices: Sequence[int]) -> LinearMap:
        """Matrix of D on a basis-aligned invariant subspace, in the subalgebra's basis"""
        position = {index: k for k, index in enumerate(indices)}
        columns = {}
        for index in indices:
            image = self.matrix.column(index)
            if any(k not in position for k in image):
                raise PreconditionError(f"{self.name} does not preserve the subspace")
            columns[position[index]] = vec_reindex(image, position)
        return LinearMap(sub.space, sub.space, columns, self.degree)


def inner_derivation(g: GLA, x: Vector, name: str = "") -> Derivation:
    """ad_x = [x, -]"""
    degree = x.degree if not x.is_zero else 0
    columns = {j: g.bracket_with_basis(x.coeffs, j) for j in range(g.dim)}
    return Derivation(g, LinearMap(g.space, g.space, columns, degree), degree, name or "ad")


def differential_derivation(g: GLA) -> Derivation:
    if g.differential is None:
        raise PreconditionError(f"Algebra {g.name!r} has no differential")
    return Derivation(g, g.differential, 1, "d")


# ---------------------------------------------------------------------------
# homology

@dataclass
class HomologyData:
    """Per-degree homology dimensions with cycle and boundary bases"""
    dimensions: Dict[int, int] = field(default_factory=dict)
    cycles: Dict[int, List[Vec]] = field(default_factory=dict)
    boundaries: Dict[int, List[Vec]] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.dimensions.values())


def _degree_block(space: GradedSpace, d: LinearMap, degree: int) -> Tuple[sympy.Matrix, List[int], List[int]]:
    source = space.indices_of_degree(degree)
    target = space.indices_of_degree(degree + d.degree)
    return d.block(source, target), source, target


def homology(space: GradedSpace, d: LinearMap) -> HomologyData:
    """Homology of a finite complex by exact rank computations"""
    if not d.compose(d).is_zero():
        raise PreconditionError("Differential does not square to zero")
    data = HomologyData()
    for degree in space.degree_range():
        block, source, _ = _degree_block(space, d, degree)
        cycles = [column_to_vec(v, source) for v in block.nullspace()] if block.rows else \
            [{i: Fraction(1)} for i in source]
        incoming, in_source, in_target = _degree_block(space, d, degree - d.degree)
        boundaries = [column_to_vec(v, in_target) for v in incoming.columnspace()] if in_source and in_target else []
        data.cycles[degree] = cycles
        data.boundaries[degree] = boundaries
        data.dimensions[degree] = len(cycles) - len(boundaries)
    return data


def homology_map_is_iso(source: GradedSpace, d_source: LinearMap, target: GradedSpace, d_target: LinearMap,
                        phi: LinearMap) -> bool:
    """Does the chain map phi induce an isomorphism in homology?"""
    if not d_target.compose(phi).combine(phi.compose(d_source), -1).is_zero():
        raise PreconditionError("Map is not a chain map")
    h_source = homology(source, d_source)
    h_target = homology(target, d_target)
    degrees = set(h_source.dimensions) | set(h_target.dimensions)
    for degree in sorted(degrees):
        dim_source = h_source.dimensions.get(degree, 0)
        dim_target = h_target.dimensions.get(degree + phi.degree, 0)
        if dim_source != dim_target:
            return False
        if dim_source == 0:
            continue
        boundaries = h_target.boundaries.get(degree + phi.degree, [])
        images = [phi.apply(z) for z in h_source.cycles.get(degree, [])]
        induced_rank = rank_of(images + boundaries, target.dim) - rank_of(boundaries, target.dim)
        if induced_rank != dim_source:
            return False
    return True


@dataclass
class HypothesisCheck:
    """Injectivity of H(L) -> H(M) against surjectivity of H(P): H(M) -> H(A, PD)"""
    injective: bool
    surjective: bool
    witness: Optional[Vector] = None

    @property
    def agree(self) -> bool:
        return self.injective == self.surjective


def check_homology_criterion(g: GLA) -> HypothesisCheck:
    """Decide whether H(L, D) -> H(M, D) is injective, with a witness cycle when it is not"""
    if g.differential is None:
        raise PreconditionError("Hypothesis check needs a differential")
    g._require_splitting()
    d = g.differential
    space = g.space
    l_set, a_set = set(g.L), set(g.A)
    injective, surjective = True, True
    witness = None

    for degree in space.degree_range():
        sources = space.indices_of_degree(degree)
        # injectivity in degree + 1: d(ker Pd) against d(L)
        d_of_l = [d.column(i) for i in sources if i in l_set]
        pd = LinearMap(space, space, {i: g.project(d.column(i)) for i in sources}, 1)
        block = pd.block(sources, [i for i in space.indices_of_degree(degree + 1) if i in a_set])
        kernel = [column_to_vec(v, sources) for v in block.nullspace()] if block.rows else \
            [{i: Fraction(1)} for i in sources]
        d_of_kernel = [d.apply(v) for v in kernel]
        base_rank = rank_of(d_of_l, space.dim)
        if rank_of(d_of_kernel, space.dim) != base_rank:
            injective = False
            if witness is None:
                for candidate in d_of_kernel:
                    if rank_of(d_of_l + [candidate], space.dim) > base_rank:
                        witness = Vector(space, candidate)
                        break

        # surjectivity in this degree: P(Z_M) + PD(A) against ker(PD | A)
        a_here = [i for i in sources if i in a_set]
        if not a_here:
            continue
        a_block = pd.block(a_here, [i for i in space.indices_of_degree(degree + 1) if i in a_set])
        z_a = len(a_block.nullspace()) if a_block.rows else len(a_here)
        d_block = d.block(sources, space.indices_of_degree(degree + 1))
        z_m = [column_to_vec(v, sources) for v in d_block.nullspace()] if d_block.rows else \
            [{i: Fraction(1)} for i in sources]
        b_a = [g.project(d.column(i)) for i in space.indices_of_degree(degree - 1) if i in a_set]
        spanned = rank_of([g.project(z) for z in z_m] + b_a, space.dim)
        if spanned != z_a:
            surjective = False

    result = HypothesisCheck(injective, surjective, witness)
    if not result.agree:
        logger.error(f"H(i) injectivity ({injective}) disagrees with H(P) surjectivity ({surjective})")
    return result


# ---------------------------------------------------------------------------
# matrix Lie algebras

class MatrixLieAlgebra(GLA):
    """
    Graded Lie algebra spanned by chosen endomorphisms of a graded space.

    Commutators [f, g] = fg - (-1)^{|f||g|} gf are decomposed in the chosen basis by an
    exact left inverse; a commutator outside the span is a ValidationError.
    """

    def __init__(self, ambient: GradedSpace, elements: Sequence[Tuple[str, LinearMap]], splitting=None,
                 name: str = ""):
        self.ambient = ambient
        self.elements = [linear for _, linear in elements]
        dim = ambient.dim
        flat = [self._flatten(linear) for linear in self.elements]
        matrix = vectors_to_matrix(flat, dim * dim)
        if matrix.rank() != len(flat):
            raise ValidationError("Endomorphisms of a matrix Lie algebra must be linearly independent")
        left_inverse = (matrix.T * matrix).inv() * matrix.T
        self._rows: List[Vec] = [column_to_vec(left_inverse[row, :]) for row in range(left_inverse.rows)]
        self._flat = flat

        space = GradedSpace([(label, linear.degree) for (label, linear) in elements], label=name)
        brackets = {}
        for i, f in enumerate(self.elements):
            for j in range(i, len(self.elements)):
                value = self.decompose(self.commutator(f, self.elements[j]))
                if value:
                    brackets[(i, j)] = value
        super().__init__(space, brackets, None, splitting, name)

    def _flatten(self, linear: LinearMap) -> Vec:
        dim = self.ambient.dim
        flat: Vec = {}
        for col, image in linear.columns.items():
            for row, coeff in image.items():
                flat[row * dim + col] = coeff
        return flat

    @staticmethod
    def commutator(f: LinearMap, g: LinearMap) -> LinearMap:
        sign = -1 if (f.degree % 2 and g.degree % 2) else 1
        return f.compose(g).combine(g.compose(f), -sign)

    def decompose(self, linear: LinearMap) -> Vec:
        flat = self._flatten(linear)
        coeffs: Vec = {}
        for k, row in enumerate(self._rows):
            value = sum((row.get(i, 0) * c for i, c in flat.items()), Fraction(0))
            if value:
                coeffs[k] = value
        rebuilt = vec_combine((c, self._flat[k]) for k, c in coeffs.items())
        if rebuilt != flat:
            raise ValidationError("Endomorphism is not in the span of the matrix Lie algebra")
        return coeffs

    def realize(self, coeffs: Vec) -> LinearMap:
        result = LinearMap.zero(self.ambient, self.ambient)
        degree = None
        for k, c in sorted(coeffs.items()):
            result = result.combine(self.elements[k], c)
            degree = self.elements[k].degree
        result.degree = degree or 0
        return result


def matrix_lie_algebra(ambient: GradedSpace, elements: Sequence[Tuple[str, LinearMap]], splitting=None,
                       name: str = "") -> MatrixLieAlgebra:
    return MatrixLieAlgebra(ambient, elements, splitting, name)


def elementary_map(space: GradedSpace, row: int, col: int) -> LinearMap:
    """E_{row,col}: e_col -> e_row, of degree |e_row| - |e_col|"""
    return LinearMap(space, space, {col: {row: Fraction(1)}}, space.degrees[row] - space.degrees[col])


# ---------------------------------------------------------------------------
# associative algebras

class GradedAlgebra:
    """Unital graded associative algebra given by a multiplication table"""

    def __init__(self, space: GradedSpace, products: Dict[Tuple[int, int], Vec], unit: int, name: str = ""):
        self.space = space
        self.products = {key: {k: Fraction(c) for k, c in value.items() if c} for key, value in products.items()}
        self.unit = unit
        self.name = name

    def product_basis(self, i: int, j: int) -> Vec:
        return self.products.get((i, j), {})

    def multiply(self, x: Vec, y: Vec) -> Vec:
        result: Vec = {}
        for i, a in x.items():
            for j, b in y.items():
                value = self.product_basis(i, j)
                if value:
                    vec_add(result, value, a * b)
        return result

    def jordan(self, x: Vec, y: Vec, degree_x: int, degree_y: int) -> Vec:
        """x o y = (xy + (-1)^{|x||y|} yx) / 2"""
        sign = -1 if (degree_x % 2 and degree_y % 2) else 1
        result = vec_scale(self.multiply(x, y), Fraction(1, 2))
        return vec_add(result, self.multiply(y, x), Fraction(sign, 2))

    def left_multiplication(self, index: int) -> LinearMap:
        columns = {j: self.product_basis(index, j) for j in range(self.space.dim)}
        return LinearMap(self.space, self.space, columns, self.space.degrees[index])

    def validate(self) -> Report:
        report = Report(command="validate")
        names = self.space.names
        dim = self.space.dim
        unit = {self.unit: Fraction(1)}
        for i in range(dim):
            ei = {i: Fraction(1)}
            report.record("unit", 1, [names[i]], vec_to_json(self.space, self.multiply(unit, ei)),
                          vec_to_json(self.space, ei), passed=self.multiply(unit, ei) == ei == self.multiply(ei, unit))
            for j in range(dim):
                value = self.product_basis(i, j)
                expected = self.space.degrees[i] + self.space.degrees[j]
                report.record("product_degree", 2, [names[i], names[j]], sorted(vec_degrees(self.space, value)),
                              [expected], passed=all(self.space.degrees[k] == expected for k in value))
                for k in range(dim):
                    ek = {k: Fraction(1)}
                    lhs = self.multiply(self.product_basis(i, j), ek)
                    rhs = self.multiply(ei, self.product_basis(j, k))
                    report.record("associativity", 3, [names[i], names[j], names[k]],
                                  vec_to_json(self.space, lhs), vec_to_json(self.space, rhs))
        return report
