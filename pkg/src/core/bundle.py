"""
Algebra bundles: the JSON input of every command

A bundle holds a graded Lie algebra (basis, bracket, optional differential and splitting), named
derivations and elements, and the optional extras the commands need: a default arity, a
derivation selection, the basis names of a second algebra N and, for associative inputs, a
multiplication table with its unit.
"""

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from .error_handler import BracketsIOError, BundleParseError, PreconditionError, ValidationError
from .graded import (GLA, GradedAlgebra, GradedSpace, LinearMap, Derivation, Vector, Vec, vec_to_json,
                     differential_derivation)
from .scalars import parse_rational

logger = logging.getLogger(__name__)

Source = Union[Vector, Derivation, LinearMap]


@dataclass
class AlgebraBundle:
    """Parsed bundle; `gla` is None for associative bundles, which carry `algebra` instead"""
    name: str
    gla: Optional[GLA]
    derivations: Dict[str, Derivation] = field(default_factory=dict)
    elements: Dict[str, Vector] = field(default_factory=dict)
    max_arity: Optional[int] = None
    derivation_selection: List[str] = field(default_factory=list)
    n_names: List[str] = field(default_factory=list)
    algebra: Optional[GradedAlgebra] = None
    operators: Dict[str, LinearMap] = field(default_factory=dict)
    path: str = ""

    @property
    def is_associative(self) -> bool:
        return self.algebra is not None

    @property
    def n_indices(self) -> List[int]:
        return [self.gla.space.index(name) for name in self.n_names]

    def require_gla(self) -> GLA:
        if self.gla is None:
            raise PreconditionError("This command needs a Lie algebra bundle, not an associative one")
        return self.gla

    def differential(self) -> Optional[Derivation]:
        if self.gla is None or self.gla.differential is None:
            return None
        return differential_derivation(self.gla)

    def selected_derivations(self) -> List[Derivation]:
        """The derivation selection, or every named derivation when none is given"""
        names = self.derivation_selection or sorted(self.derivations)
        return [self.derivations[name] for name in names]

    def resolve_source(self, name: str) -> Source:
        """A named derivation, "d" for the differential, a named element or a basis element"""
        if self.is_associative:
            try:
                return self.operators[name]
            except KeyError:
                raise PreconditionError(
                    f"Source {name!r} not found; operators: {sorted(self.operators)}") from None
        gla = self.require_gla()
        if name in self.derivations:
            return self.derivations[name]
        if name == "d" and gla.differential is not None:
            return differential_derivation(gla)
        if name in self.elements:
            return self.elements[name]
        if gla.space.has(name):
            return gla.space.basis_vector(name)
        known = sorted(self.derivations) + sorted(self.elements)
        raise PreconditionError(f"Source {name!r} not found; derivations and elements: {known}")

    def to_json(self) -> Dict[str, Any]:
        """Bundle in the input format; parse_bundle(bundle.to_json()) rebuilds it"""
        if self.is_associative:
            space = self.algebra.space
            result: Dict[str, Any] = {
                "name": self.name,
                "associative": True,
                "basis": [{"name": n, "degree": d} for n, d in space.basis],
                "product": [
                    {"left": space.names[i], "right": space.names[j], "value": vec_to_json(space, value)}
                    for (i, j), value in sorted(self.algebra.products.items()) if value
                ],
                "unit": space.names[self.algebra.unit],
            }
            if self.operators:
                result["derivations"] = {
                    name: {"degree": op.degree, "matrix": op.to_json()} for name, op in sorted(self.operators.items())}
        else:
            result = self.gla.to_json()
            result["name"] = self.name
            if self.derivations:
                result["derivations"] = {
                    name: {"degree": d.degree, "matrix": d.matrix.to_json()}
                    for name, d in sorted(self.derivations.items())}
            if self.elements:
                result["elements"] = {name: m.to_json() for name, m in sorted(self.elements.items())}
            if self.n_names:
                result["second_algebra"] = list(self.n_names)
        if self.max_arity is not None:
            result["max_arity"] = self.max_arity
        if self.derivation_selection:
            result["derivation_selection"] = list(self.derivation_selection)
        return result


# ---------------------------------------------------------------------------
# field parsers; every error names the offending JSON path

def _reject_duplicates(pairs):
    result = {}
    for key, value in pairs:
        if key in result:
            raise BundleParseError(f"Duplicate key {key!r}")
        result[key] = value
    return result


def _expect(value: Any, kind, path: str, what: str):
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise BundleParseError(f"Expected {what}", path)
    return value


def _rational(value: Any, path: str) -> Fraction:
    if isinstance(value, bool) or isinstance(value, float):
        raise BundleParseError(f"Expected an exact rational \"p/q\", got {value!r}", path)
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return parse_rational(value)
        except (ValueError, ZeroDivisionError) as e:
            raise BundleParseError(str(e), path) from None
    raise BundleParseError(f"Expected an exact rational, got {type(value).__name__}", path)


def _name(space: GradedSpace, value: Any, path: str) -> int:
    _expect(value, str, path, "a basis name")
    if not space.has(value):
        raise BundleParseError(f"Unknown basis element {value!r}", path)
    return space.index(value)


def _vector(space: GradedSpace, items: Any, path: str) -> Vec:
    _expect(items, list, path, "a list of {basis, coeff}")
    result: Vec = {}
    for k, item in enumerate(items):
        where = f"{path}[{k}]"
        _expect(item, dict, where, "an object {basis, coeff}")
        if "basis" not in item or "coeff" not in item:
            raise BundleParseError("Entries need 'basis' and 'coeff'", where)
        index = _name(space, item["basis"], f"{where}.basis")
        if index in result:
            raise BundleParseError(f"Basis element {item['basis']!r} listed twice", where)
        coeff = _rational(item["coeff"], f"{where}.coeff")
        if coeff:
            result[index] = coeff
    return result


def _basis(raw: Any, path: str) -> GradedSpace:
    _expect(raw, list, path, "a list of {name, degree}")
    basis = []
    for k, item in enumerate(raw):
        where = f"{path}[{k}]"
        _expect(item, dict, where, "an object {name, degree}")
        name = _expect(item.get("name"), str, f"{where}.name", "a string")
        degree = _expect(item.get("degree"), int, f"{where}.degree", "an integer degree")
        basis.append((name, degree))
    try:
        return GradedSpace(basis)
    except ValidationError as e:
        raise BundleParseError(str(e), path) from None


def _table(space: GradedSpace, raw: Any, path: str) -> Dict[tuple, Vec]:
    _expect(raw, list, path, "a list of {left, right, value}")
    table = {}
    for k, item in enumerate(raw):
        where = f"{path}[{k}]"
        _expect(item, dict, where, "an object {left, right, value}")
        i = _name(space, item.get("left"), f"{where}.left")
        j = _name(space, item.get("right"), f"{where}.right")
        if (i, j) in table:
            raise BundleParseError(f"Entry for ({item['left']}, {item['right']}) given twice", where)
        table[(i, j)] = _vector(space, item.get("value"), f"{where}.value")
    return table


def _matrix(space: GradedSpace, raw: Any, path: str, degree: Optional[int]) -> LinearMap:
    """List of {basis, value}: the image of each listed basis element"""
    _expect(raw, list, path, "a list of {basis, value}")
    columns: Dict[int, Vec] = {}
    for k, item in enumerate(raw):
        where = f"{path}[{k}]"
        _expect(item, dict, where, "an object {basis, value}")
        index = _name(space, item.get("basis"), f"{where}.basis")
        if index in columns:
            raise BundleParseError(f"Image of {item['basis']!r} given twice", where)
        columns[index] = _vector(space, item.get("value"), f"{where}.value")
    if degree is None:
        found = {space.degrees[t] - space.degrees[s] for s, image in columns.items() for t in image}
        if len(found) > 1:
            raise BundleParseError(f"Map is not homogeneous (degrees {sorted(found)})", path)
        degree = found.pop() if found else 0
    linear = LinearMap(space, space, columns, degree)
    bad = linear.degree_violations()
    if bad:
        raise BundleParseError(f"Image of {space.names[bad[0]]!r} does not have degree shift {degree}", path)
    return linear


def _names(space: GradedSpace, raw: Any, path: str) -> List[str]:
    _expect(raw, list, path, "a list of basis names")
    seen = []
    for k, value in enumerate(raw):
        _name(space, value, f"{path}[{k}]")
        if value in seen:
            raise BundleParseError(f"Name {value!r} listed twice", f"{path}[{k}]")
        seen.append(value)
    return seen


def _operators(space: GradedSpace, raw: Any, path: str) -> Dict[str, LinearMap]:
    _expect(raw, dict, path, "an object of named maps")
    result = {}
    for name, entry in sorted(raw.items()):
        where = f"{path}.{name}"
        _expect(entry, dict, where, "an object {degree, matrix}")
        degree = entry.get("degree")
        if degree is not None:
            _expect(degree, int, f"{where}.degree", "an integer degree")
        result[name] = _matrix(space, entry.get("matrix"), f"{where}.matrix", degree)
    return result


# ---------------------------------------------------------------------------
# bundles

def parse_bundle(raw: Dict[str, Any], path: str = "") -> AlgebraBundle:
    """Build a bundle from decoded JSON; raises BundleParseError naming the offending field"""
    _expect(raw, dict, "$", "a JSON object")
    if "basis" not in raw:
        raise BundleParseError("Missing required field", "basis")
    space = _basis(raw["basis"], "basis")
    name = raw.get("name") or (Path(path).stem if path else "bundle")
    max_arity = raw.get("max_arity")
    if max_arity is not None:
        _expect(max_arity, int, "max_arity", "an integer")
        if max_arity < 1:
            raise BundleParseError("Must be at least 1", "max_arity")

    if raw.get("associative"):
        if "product" not in raw or "unit" not in raw:
            raise BundleParseError("Associative bundles need 'product' and 'unit'", "associative")
        products = _table(space, raw["product"], "product")
        unit = _name(space, raw["unit"], "unit")
        algebra = GradedAlgebra(space, products, unit, name=name)
        operators = _operators(space, raw.get("derivations", {}), "derivations")
        return AlgebraBundle(name, None, max_arity=max_arity, algebra=algebra, operators=operators, path=path)

    brackets = _table(space, raw.get("bracket", []), "bracket")
    differential = None
    if raw.get("differential") is not None:
        differential = _matrix(space, raw["differential"], "differential", 1)
    splitting = None
    if raw.get("splitting") is not None:
        split = _expect(raw["splitting"], dict, "splitting", "an object {L, A}")
        splitting = {"L": _names(space, split.get("L", []), "splitting.L"),
                     "A": _names(space, split.get("A", []), "splitting.A")}
    try:
        gla = GLA(space, brackets, differential, splitting, name)
    except ValidationError as e:
        field_name = "splitting" if "Splitting" in str(e) else "bracket"
        raise BundleParseError(str(e), field_name) from None

    derivations = {}
    for label, linear in _operators(space, raw.get("derivations", {}), "derivations").items():
        derivations[label] = Derivation(gla, linear, linear.degree, label)
    elements = {}
    raw_elements = _expect(raw.get("elements", {}), dict, "elements", "an object of named vectors")
    for label, items in sorted(raw_elements.items()):
        elements[label] = Vector(space, _vector(space, items, f"elements.{label}"))

    selection = []
    if raw.get("derivation_selection") is not None:
        selection = _expect(raw["derivation_selection"], list, "derivation_selection", "a list of names")
        for k, label in enumerate(selection):
            if label not in derivations:
                raise BundleParseError(f"Unknown derivation {label!r}", f"derivation_selection[{k}]")
    n_names = []
    if raw.get("second_algebra") is not None:
        n_names = _names(space, raw["second_algebra"], "second_algebra")

    bundle = AlgebraBundle(name, gla, derivations, elements, max_arity, list(selection), n_names, path=path)
    logger.debug(f"Parsed bundle {name}: dim {space.dim}, {len(derivations)} derivations")
    return bundle


def load_bundle(path: Union[str, Path]) -> AlgebraBundle:
    """Read and parse a bundle file"""
    path = Path(path)
    try:
        with open(path, "r") as f:
            text = f.read()
    except OSError as e:
        raise BracketsIOError(f"Cannot read bundle: {e.strerror}", str(path)) from None
    try:
        raw = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as e:
        raise BundleParseError(f"Invalid JSON at line {e.lineno} column {e.colno}: {e.msg}", "$") from None
    return parse_bundle(raw, str(path))


def save_bundle(bundle: AlgebraBundle, path: Union[str, Path]) -> str:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            json.dump(bundle.to_json(), f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as e:
        raise BracketsIOError(f"Cannot write bundle: {e.strerror}", str(path)) from None
    return str(path)
