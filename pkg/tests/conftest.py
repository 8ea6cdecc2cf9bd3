from pathlib import Path

import pytest

from esdp.repository import MinedRepository
from esdp.seq_miner import mine_prefixspan
from esdp.tools import corpus_items, extract_corpus
from esdp.transactions import build_sequence_db

FIXTURES = Path(__file__).parent / "fixtures"
ASTPARSER_DIR = FIXTURES / "astparser"
SEARCH_TEST = FIXTURES / "search" / "SearchTest.java"
CREATED = "2024-01-01T00:00:00+00:00"

ASTPARSER = "org.eclipse.jdt.core.dom.ASTParser"


@pytest.fixture(autouse=True)
def _isolated_env(monkeypatch):
    monkeypatch.delenv("ESDP_REPO", raising=False)
    monkeypatch.delenv("SOURCE_DATE_EPOCH", raising=False)


@pytest.fixture(scope="session")
def astparser_items():
    return corpus_items(extract_corpus([ASTPARSER_DIR]))


@pytest.fixture(scope="session")
def astparser_db(astparser_items):
    return build_sequence_db(astparser_items, corpus_label="astparser")


@pytest.fixture(scope="session")
def astparser_repo(astparser_db):
    patterns = mine_prefixspan(astparser_db, 2)
    return MinedRepository.from_patterns(patterns, "astparser", CREATED, 2)


@pytest.fixture
def search_test_source():
    return SEARCH_TEST.read_text(encoding="utf-8")


@pytest.fixture
def parser_context_source():
    return (ASTPARSER_DIR / "ParserConfigurations.java").read_text(encoding="utf-8")
