import json
from pathlib import Path

import pytest

from toolnoise.catalog import parse_catalog

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"


@pytest.fixture(scope="session")
def demo_catalog_bytes() -> bytes:
    return (FIXTURES / "demo_catalog.json").read_bytes()


@pytest.fixture(scope="session")
def demo_cases(demo_catalog_bytes):
    return parse_catalog(demo_catalog_bytes)


@pytest.fixture(scope="session")
def demo_answers():
    return json.loads((FIXTURES / "demo_answers.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES
