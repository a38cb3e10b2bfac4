import json

import pytest

from src.cli.cli_interface import CLIInterface

SL2_OPEN = {
    "name": "sl2-open",
    "basis": [{"name": "e", "degree": 0}, {"name": "h", "degree": 0}, {"name": "f", "degree": 0}],
    "bracket": [
        {"left": "e", "right": "f", "value": [{"basis": "h", "coeff": 1}]},
        {"left": "h", "right": "e", "value": [{"basis": "e", "coeff": 2}]},
        {"left": "h", "right": "f", "value": [{"basis": "f", "coeff": -2}]},
    ],
    "splitting": {"L": ["h"], "A": ["e", "f"]},
    "elements": {"m": [{"basis": "e", "coeff": 1}, {"basis": "f", "coeff": "1/3"}]},
}


def run(argv):
    return CLIInterface(configure_logging=False).run(argv)


def output_json(capsys):
    return json.loads(capsys.readouterr().out)


def test_validate_bundle(write_bundle, aff1_bundle_dict, capsys):
    assert run(["validate", write_bundle(aff1_bundle_dict)]) == 0
    payload = output_json(capsys)
    assert payload["ok"] is True
    assert payload["command"] == "validate"
    assert "timing_ms" not in payload


def test_validate_broken_fixture(capsys):
    assert run(["validate", "--fixture", "sl2-broken"]) == 1
    payload = output_json(capsys)
    assert payload["ok"] is False
    assert payload["checks"][0]["word"] == ["e", "h", "f"]


def test_bad_bundle_gives_diagnostic(write_bundle, aff1_bundle_dict, capsys):
    aff1_bundle_dict["elements"]["m0"][0]["coeff"] = 0.5
    assert run(["validate", write_bundle(aff1_bundle_dict)]) == 1
    payload = output_json(capsys)
    assert payload["ok"] is False
    assert payload["error"]["category"] == "parse"
    assert payload["error"]["message"].startswith("elements.m0[0].coeff:")


def test_brackets_of_fixture_derivation(capsys):
    assert run(["brackets", "--fixture", "sl2", "--source", "ad_e", "--arity", "2"]) == 0
    payload = output_json(capsys)
    assert payload["data"]["brackets"]["source"] == "ad_e"
    assert [entry["name"] for entry in payload["data"]["complement"]] == ["h", "f"]


def test_open_complement_needs_transfer(write_bundle, capsys):
    path = write_bundle(SL2_OPEN)
    assert run(["brackets", path, "--source", "m", "--arity", "2"]) == 1
    error = output_json(capsys)["error"]
    assert error["category"] == "precondition"
    assert any("--via-transfer" in hint for hint in error["suggestions"])
    assert run(["brackets", path, "--source", "m", "--arity", "2", "--via-transfer"]) == 0
    assert output_json(capsys)["ok"] is True


def test_unknown_source(write_bundle, aff1_bundle_dict, capsys):
    assert run(["brackets", write_bundle(aff1_bundle_dict), "--source", "nothing"]) == 1
    assert output_json(capsys)["error"]["category"] == "precondition"


def test_check_suite_on_fixture(capsys):
    assert run(["check", "--fixture", "aff1-split", "--suite", "linfty", "--arity", "2"]) == 0
    assert output_json(capsys)["data"]["subjects"] == ["aff1-split"]


def test_fault_injection_is_detected(capsys):
    assert run(["transfer-check", "--fixture", "sl2-split", "--arity", "3", "--fault-bernoulli"]) == 1
    payload = output_json(capsys)
    assert payload["ok"] is False
    assert all(check["arity"] >= 3 for check in payload["checks"])


def test_cocone_and_fiber_model(capsys):
    assert run(["cocone", "--fixture", "aff1-split", "--arity", "2", "--with-second-algebra"]) == 0
    assert "fiber_model" in output_json(capsys)["data"]
    assert run(["fiber-model", "--fixture", "sl2-witness", "--arity", "2"]) == 0
    assert output_json(capsys)["command"] == "fiber-model"


def test_text_format_and_output_file(tmp_path, capsys):
    target = tmp_path / "report.txt"
    assert run(["validate", "--fixture", "aff1-split", "--format", "text", "--output", str(target)]) == 0
    assert capsys.readouterr().out == ""
    assert target.read_text().startswith("validate: OK")


def test_json_report_written_to_new_directory(tmp_path, capsys):
    target = tmp_path / "reports" / "aff1.json"
    assert run(["validate", "--fixture", "aff1-split", "--output", str(target)]) == 0
    assert capsys.readouterr().out == ""
    assert json.loads(target.read_text())["ok"] is True


def test_bundle_and_fixture_are_exclusive(write_bundle, aff1_bundle_dict, capsys):
    assert run(["validate", write_bundle(aff1_bundle_dict), "--fixture", "sl2"]) == 1
    assert output_json(capsys)["error"]["category"] == "precondition"


def test_arity_must_be_positive(capsys):
    assert run(["brackets", "--fixture", "sl2", "--source", "ad_h", "--arity", "0"]) == 1
    assert output_json(capsys)["error"]["category"] == "configuration"


def test_no_command():
    assert run([]) == 1


def test_unknown_fixture_is_rejected_by_parser():
    with pytest.raises(SystemExit):
        run(["validate", "--fixture", "nope"])


def test_missing_bundle_is_an_io_error(tmp_path, capsys):
    assert run(["validate", str(tmp_path / "missing.json")]) == 1
    error = output_json(capsys)["error"]
    assert error["category"] == "io"
    assert error["message"].endswith("Cannot read bundle: No such file or directory")
    assert error["suggestions"]
    assert "details" not in error


def test_unwritable_output_is_an_io_error(tmp_path, capsys):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert run(["validate", "--fixture", "aff1-split", "--output", str(blocker / "sub" / "r.json")]) == 1
    error = output_json(capsys)["error"]
    assert error["category"] == "io"
    assert any("writable" in hint for hint in error["suggestions"])


def test_verbose_diagnostic_carries_details(tmp_path, capsys):
    assert run(["-v", "validate", str(tmp_path / "missing.json")]) == 1
    details = output_json(capsys)["error"]["details"]
    assert "Error Type: BracketsIOError" in details
    assert f"Path: {tmp_path / 'missing.json'}" in details


def test_configured_failure_limit(tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"output": {"max_failures": 0}}))
    assert run(["--config", str(config), "validate", "--fixture", "sl2-broken"]) == 1
    payload = output_json(capsys)
    assert payload["checks"] == []
    assert payload["notes"][-1].endswith("further violations omitted")
