import json
import os
import sys

import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from src.core.fixtures import aff1_split, get_fixture, sl2_degree_zero, sl2_split  # noqa: E402


@pytest.fixture
def sl2_fixture():
    return sl2_degree_zero()


@pytest.fixture
def sl2_gla(sl2_fixture):
    return sl2_fixture.gla


@pytest.fixture
def aff1():
    return aff1_split()


@pytest.fixture
def sl2_current():
    return sl2_split()


@pytest.fixture
def witness():
    return get_fixture("sl2-witness")


@pytest.fixture
def aff1_bundle_dict():
    """aff(1) with L = <e>, A = <h> as raw bundle JSON"""
    return {
        "name": "aff1",
        "basis": [{"name": "h", "degree": 0}, {"name": "e", "degree": 0}],
        "bracket": [{"left": "h", "right": "e", "value": [{"basis": "e", "coeff": "1"}]}],
        "splitting": {"L": ["e"], "A": ["h"]},
        "derivations": {
            "ad_h": {"degree": 0, "matrix": [{"basis": "e", "value": [{"basis": "e", "coeff": 1}]}]},
        },
        "elements": {"m0": [{"basis": "h", "coeff": "1/2"}]},
    }


@pytest.fixture
def write_bundle(tmp_path):
    def write(payload, name="bundle.json"):
        path = tmp_path / name
        if isinstance(payload, str):
            path.write_text(payload)
        else:
            path.write_text(json.dumps(payload))
        return str(path)

    return write
