import pytest

from src.core.bundle import parse_bundle
from src.core.error_handler import PreconditionError
from src.core.fixtures import get_fixture, random_split_algebras, sl2
from src.core.models import Suite
from src.core.suites import (Subject, brackets_report, cocone_report, fiber_model_report, koszul_report,
                             linfty_suite, run_suite, theorem_suite, validate_report)
from src.core.verification import VerificationManager

DUAL_NUMBERS = {
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


def test_validate_report(aff1_bundle_dict):
    report = validate_report(parse_bundle(aff1_bundle_dict))
    assert report.ok
    assert report.data["dimension"] == 2
    broken = validate_report(get_fixture("sl2-broken").to_bundle())
    assert not broken.ok
    assert ("jacobi", 3) in broken.failed


def test_validate_report_flags_bad_derivation(aff1_bundle_dict):
    aff1_bundle_dict["derivations"]["bad"] = {
        "degree": 0, "matrix": [{"basis": "h", "value": [{"basis": "h", "coeff": 1}]}]}
    report = validate_report(parse_bundle(aff1_bundle_dict))
    assert not report.ok
    assert ("bad.leibniz", 2) in report.failed


def test_theorem_suite_on_fixture(aff1):
    report = run_suite(Subject.from_fixture(aff1), Suite.THEOREMS, 2)
    assert report.ok
    assert report.data["subjects"] == ["aff1-split"]
    assert any(identity.startswith("theorems.aff1-split.oracle.") for identity, _ in report.passed)


def test_theorem_suite_on_open_complement():
    g = sl2().with_splitting({"L": ["h"], "A": ["e", "f"]})
    subject = Subject("open", g, [g.space.vector({"e": 1, "f": 1})], [])
    report = theorem_suite(subject, 2)
    assert report.ok
    assert any("A is not a subalgebra" in note for note in report.notes)
    assert ("generalized_phi_1", 1) in report.passed


def test_nonflat_derivation_is_reported_as_expected():
    report = linfty_suite(Subject.from_fixture(get_fixture("nonflat")), 2)
    assert report.ok
    assert report.passed[("phi_D_squared_nonzero", 1)] == 1


def test_examples_suite_records_separation(sl2_fixture):
    report = run_suite(Subject.from_fixture(sl2_fixture), Suite.EXAMPLES, 2)
    assert report.ok
    separations = report.data["examples.sl2.inner_vs_element"]
    assert list(separations.values()) == [{"arity": 1, "word": ["f"]}]


def test_random_fixtures_are_seeded():
    first = random_split_algebras(seed=5, count=2)
    second = random_split_algebras(seed=5, count=2)
    assert [f.name for f in first] == ["random-5-0", "random-5-1"]
    assert [f.gla.to_json() for f in first] == [f.gla.to_json() for f in second]
    for fixture in first:
        report = theorem_suite(Subject.from_fixture(fixture), 3)
        assert report.ok
        assert any(arity == 3 for _, arity in report.passed)


def test_reports_are_reproducible(aff1):
    manager = VerificationManager()
    digests = {manager.digest(run_suite(Subject.from_fixture(aff1), Suite.LINFTY, 2, workers=w)) for w in (1, 2)}
    assert len(digests) == 1


def test_brackets_report_via_transfer():
    g = sl2().with_splitting({"L": ["h"], "A": ["e", "f"]})
    report = brackets_report(g, g.space.vector({"e": 1}), 2, via_transfer=True)
    assert report.ok
    assert [entry["name"] for entry in report.data["complement"]] == ["e", "f"]


def test_brackets_report_closed_form(sl2_fixture):
    report = brackets_report(sl2_fixture.gla, sl2_fixture.derivations[0], 2)
    assert report.ok
    assert ("low_arity_formulas", 2) in report.passed


def test_koszul_report():
    report = koszul_report(parse_bundle(DUAL_NUMBERS), "D", 2)
    assert report.ok
    assert report.data["order"]["bound"] == 1


def test_cocone_and_fiber_model_reports(aff1):
    subject = Subject.from_fixture(aff1)
    cocone = cocone_report(subject, 2, with_second_algebra=True)
    assert cocone.ok
    assert "fiber_model" in cocone.data
    fiber = fiber_model_report(subject, 2)
    assert fiber.ok
    assert ("diagram.strict_section", 1) in fiber.passed


def test_fiber_model_report_needs_differential(sl2_fixture):
    with pytest.raises(PreconditionError):
        fiber_model_report(Subject.from_fixture(sl2_fixture), 2)
