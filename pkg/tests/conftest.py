import json
from pathlib import Path

import pytest

from foliagraph.form_field import builtin
from foliagraph.graph_core import parse_configuration
from foliagraph.leaf_space import analyze

FIXTURES = Path(__file__).parent / "fixtures"


def load_fixture(name: str):
    return parse_configuration(json.loads((FIXTURES / f"{name}.json").read_text()))


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def branch2_graph():
    return analyze(builtin("branch2").sample())


@pytest.fixture(scope="session")
def branch3_graph():
    return analyze(builtin("branch3").sample())
