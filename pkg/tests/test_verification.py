import json

from src.core.graded import GradedSpace
from src.core.models import Report
from src.core.verification import VerificationManager, failing_words


def sample_report(order=("b", "a")):
    report = Report(command="check")
    for name in order:
        report.record(name, 1, ["x"], None, None, passed=True)
    report.record("jacobi", 3, ["e", "h", "f"], [{"basis": "e", "coeff": "1"}], [], passed=False)
    report.notes.append("one note")
    return report


def test_record_keeps_only_failures():
    report = sample_report()
    assert not report.ok
    assert report.total_checks == 3
    assert len(report.checks) == 1
    assert failing_words(report) == [("jacobi", 3, ["e", "h", "f"])]
    assert failing_words(report, "antisymmetry") == []


def test_merge_prefixes_identities():
    outer = Report(command="check")
    outer.merge(sample_report(), prefix="sl2.")
    assert ("sl2.jacobi", 3) in outer.failed
    assert outer.checks[0].identity == "sl2.jacobi"
    assert outer.notes == ["one note"]


def test_rendering_is_deterministic():
    manager = VerificationManager()
    first, second = sample_report(("a", "b")), sample_report(("b", "a"))
    second.timing_ms = 12.5
    assert manager.render(first) == manager.render(second)
    assert manager.digest(first) == manager.digest(second)
    assert len(manager.digest(first)) == 64
    payload = json.loads(manager.render(first))
    assert payload["ok"] is False
    assert [entry["identity"] for entry in payload["summary"]] == ["a", "b", "jacobi"]
    assert payload["checks"][0]["pass"] is False


def test_timing_only_when_asked():
    report = sample_report()
    report.timing_ms = 3.14159
    assert "timing_ms" not in json.loads(VerificationManager().render(report))
    assert json.loads(VerificationManager(include_timing=True).render(report))["timing_ms"] == 3.142


def test_compare_vectors_and_maps():
    space = GradedSpace([("v", 0), ("w", 1)], label="V")
    manager = VerificationManager()
    report = Report(command="check")
    assert manager.compare_vectors(report, "same", space, 1, ["v"], {0: 1}, {0: 1})
    assert not manager.compare_maps(report, "maps", space, space, [1], lambda w: {w[0]: 1}, lambda w: {0: 1})
    assert failing_words(report) == [("maps", 1, ["w"])]


def test_text_summary():
    text = VerificationManager().text_summary(sample_report())
    lines = text.splitlines()
    assert lines[0] == "check: FAILED (3 checks)"
    assert "  FAIL jacobi arity 3 on e, h, f" in lines
    assert lines[-1] == "  note: one note"


def test_save_report(tmp_path):
    manager = VerificationManager()
    path = tmp_path / "nested" / "report.json"
    assert manager.save_report(sample_report(), path) == str(path)
    assert json.loads(path.read_text())["command"] == "check"


def many_failures(count):
    report = Report(command="validate")
    for k in range(count):
        report.record("jacobi", 3, [f"x{k:03d}"], [], [{"basis": "x", "coeff": "1"}], passed=False)
    return report


def test_failures_are_never_dropped():
    report = Report(command="check")
    report.merge(many_failures(120), prefix="big.")
    assert len(report.checks) == 120
    payload = json.loads(VerificationManager().render(report))
    assert len(payload["checks"]) == 120
    assert "notes" not in payload


def test_configured_listing_limit_is_noted():
    manager = VerificationManager(max_failures=10)
    payload = json.loads(manager.render(many_failures(60)))
    assert len(payload["checks"]) == 10
    assert payload["checks"][0]["word"] == ["x000"]
    assert payload["notes"] == ["50 further violations omitted"]
    assert payload["summary"][0]["failed"] == 60
    text = manager.text_summary(many_failures(60))
    assert text.count("FAIL jacobi") == 10
    assert "note: 50 further violations omitted" in text
