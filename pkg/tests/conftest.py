import pytest

from support import acyclic_setup, figure1_database


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for name in (
        "COVER_ENGINE_DEBUG",
        "COVER_ENGINE_LOG_LEVEL",
        "COVER_ENGINE_LOG_FILE",
        "COVER_ENGINE_MAX_ORACLE_EDGES",
        "COVER_ENGINE_MAX_PLAN_NODES",
        "COVER_ENGINE_MAX_BLOCK_NODES",
    ):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def figure1():
    database = figure1_database()
    query, decomposition = acyclic_setup(database)
    return query, decomposition, database
