import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from trialmatch.annotate import load_abbreviations, load_gazetteer, load_triggers
from trialmatch.index import load_stopwords

FIXTURES = Path(__file__).parent.parent / "fixtures"


@pytest.fixture(scope="session")
def gazetteer():
    return load_gazetteer()


@pytest.fixture(scope="session")
def triggers():
    return load_triggers()


@pytest.fixture(scope="session")
def abbreviations():
    return load_abbreviations()


@pytest.fixture(scope="session")
def stopwords():
    return load_stopwords()


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES
