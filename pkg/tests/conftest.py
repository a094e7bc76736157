import pathlib

import pytest

from bproc import compile_model, parse_bpmn, parse_dmn

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def load_fixture(name: str, *dmn_names: str):
    """(ProcessModel, [DecisionTable]) for a bundled .bpmn plus its .dmn files."""
    model = parse_bpmn((FIXTURES / f"{name}.bpmn").read_bytes())
    tables = []
    for dmn_name in dmn_names:
        tables.extend(parse_dmn((FIXTURES / f"{dmn_name}.dmn").read_bytes()))
    return model, tables


def compile_fixture(name: str, *dmn_names: str, sample_seed: int = 0):
    model, tables = load_fixture(name, *dmn_names)
    return compile_model(model, tables, sample_seed=sample_seed)


@pytest.fixture(scope="session")
def shipment():
    return compile_fixture("shipment", "shipment", sample_seed=42)


@pytest.fixture(scope="session")
def shipment_parsed():
    return load_fixture("shipment", "shipment")


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES
