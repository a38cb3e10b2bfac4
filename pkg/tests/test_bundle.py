import copy
from fractions import Fraction

import pytest

from src.core.bundle import load_bundle, parse_bundle, save_bundle
from src.core.error_handler import BracketsIOError, BundleParseError, ErrorCategory, PreconditionError, error_handler
from src.core.graded import Derivation, Vector


def test_parse_aff1(aff1_bundle_dict):
    bundle = parse_bundle(aff1_bundle_dict)
    gla = bundle.gla
    assert bundle.name == "aff1"
    assert gla.space.names == ("h", "e")
    assert gla.bracket_basis(0, 1) == {1: 1}
    assert gla.L == (1,) and gla.A == (0,)
    assert bundle.elements["m0"].coeffs == {0: Fraction(1, 2)}
    assert bundle.derivations["ad_h"].degree == 0
    assert not bundle.is_associative


def test_resolve_source(aff1_bundle_dict):
    bundle = parse_bundle(aff1_bundle_dict)
    assert isinstance(bundle.resolve_source("ad_h"), Derivation)
    assert bundle.resolve_source("m0").coeffs == {0: Fraction(1, 2)}
    basis = bundle.resolve_source("e")
    assert isinstance(basis, Vector) and basis.coeffs == {1: 1}
    with pytest.raises(PreconditionError):
        bundle.resolve_source("d")


@pytest.mark.parametrize("coeff", [0.5, True, [1]])
def test_inexact_coefficients_are_rejected(aff1_bundle_dict, coeff):
    raw = copy.deepcopy(aff1_bundle_dict)
    raw["elements"]["m0"][0]["coeff"] = coeff
    with pytest.raises(BundleParseError) as info:
        parse_bundle(raw)
    assert info.value.path == "elements.m0[0].coeff"


def test_unknown_basis_name(aff1_bundle_dict):
    raw = copy.deepcopy(aff1_bundle_dict)
    raw["bracket"][0]["right"] = "f"
    with pytest.raises(BundleParseError) as info:
        parse_bundle(raw)
    assert str(info.value) == "bracket[0].right: Unknown basis element 'f'"


def test_missing_basis():
    with pytest.raises(BundleParseError) as info:
        parse_bundle({"name": "empty"})
    assert info.value.path == "basis"


def test_inhomogeneous_derivation(aff1_bundle_dict):
    raw = copy.deepcopy(aff1_bundle_dict)
    raw["basis"][1]["degree"] = 1
    raw["bracket"] = []
    raw["derivations"]["ad_h"] = {"matrix": [{"basis": "h", "value": [{"basis": "h", "coeff": 1}]},
                                             {"basis": "e", "value": [{"basis": "h", "coeff": 1}]}]}
    with pytest.raises(BundleParseError) as info:
        parse_bundle(raw)
    assert info.value.path == "derivations.ad_h.matrix"


def test_unknown_selection(aff1_bundle_dict):
    raw = copy.deepcopy(aff1_bundle_dict)
    raw["derivation_selection"] = ["ad_e"]
    with pytest.raises(BundleParseError) as info:
        parse_bundle(raw)
    assert info.value.path == "derivation_selection[0]"


def test_invalid_json(write_bundle):
    path = write_bundle('{\n  "name": "x",\n  "basis": [\n}')
    with pytest.raises(BundleParseError) as info:
        load_bundle(path)
    assert "Invalid JSON at line 4 column 1" in str(info.value)


def test_duplicate_keys(write_bundle):
    path = write_bundle('{"name": "x", "basis": [], "name": "y"}')
    with pytest.raises(BundleParseError, match="Duplicate key 'name'"):
        load_bundle(path)


def test_missing_file(tmp_path):
    with pytest.raises(BracketsIOError, match="Cannot read bundle") as info:
        load_bundle(tmp_path / "absent.json")
    assert info.value.category == ErrorCategory.IO
    assert not isinstance(info.value, BundleParseError)


def test_save_and_reload(aff1_bundle_dict, tmp_path):
    raw = copy.deepcopy(aff1_bundle_dict)
    raw["max_arity"] = 3
    raw["derivation_selection"] = ["ad_h"]
    bundle = parse_bundle(raw)
    path = save_bundle(bundle, tmp_path / "out" / "aff1.json")
    again = load_bundle(path)
    assert again.gla.space.names == bundle.gla.space.names
    assert again.gla.bracket_basis(0, 1) == bundle.gla.bracket_basis(0, 1)
    assert again.gla.A == bundle.gla.A
    assert again.max_arity == 3
    assert again.derivation_selection == ["ad_h"]
    assert again.elements["m0"].coeffs == bundle.elements["m0"].coeffs
    assert again.derivations["ad_h"].matrix == bundle.derivations["ad_h"].matrix


def test_associative_bundle(write_bundle):
    raw = {
        "name": "dual-numbers",
        "associative": True,
        "basis": [{"name": "1", "degree": 0}, {"name": "x", "degree": 0}],
        "product": [
            {"left": "1", "right": "1", "value": [{"basis": "1", "coeff": 1}]},
            {"left": "1", "right": "x", "value": [{"basis": "x", "coeff": 1}]},
            {"left": "x", "right": "1", "value": [{"basis": "x", "coeff": 1}]},
        ],
        "unit": "1",
        "derivations": {"D": {"degree": 0, "matrix": [{"basis": "x", "value": [{"basis": "x", "coeff": 1}]}]}},
    }
    bundle = load_bundle(write_bundle(raw))
    assert bundle.is_associative
    assert bundle.algebra.validate().ok
    assert bundle.resolve_source("D").degree == 0
    with pytest.raises(PreconditionError):
        bundle.require_gla()
    again = parse_bundle(bundle.to_json())
    assert again.algebra.products == bundle.algebra.products


def test_parse_errors_become_diagnostics(aff1_bundle_dict):
    raw = copy.deepcopy(aff1_bundle_dict)
    raw["splitting"]["A"] = ["q"]
    with pytest.raises(BundleParseError) as raised:
        parse_bundle(raw)
    info = error_handler.handle_error(raised.value, {"command": "validate"})
    diagnostic = info.to_diagnostic()
    assert diagnostic["category"] == ErrorCategory.PARSE.value
    assert diagnostic["message"] == "splitting.A[0]: Unknown basis element 'q'"
    assert info.context["field"] == "splitting.A[0]"
    assert diagnostic["suggestions"]
