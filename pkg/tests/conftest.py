"""Shared fixtures: bundled catalog, corpus, golds, demo databases."""

from __future__ import annotations

from pathlib import Path

import pytest

from t2s import (
    GoldItem,
    SchemaCatalog,
    build_demo_fixtures,
    bundled_corpus_path,
    bundled_schema_ids,
    load_bundled_schema,
    load_corpus,
)

GOLDENS = Path(__file__).parent / "goldens"


def golden(relpath: str) -> str:
    return (GOLDENS / relpath).read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def catalog() -> SchemaCatalog:
    return SchemaCatalog.from_schemas(
        load_bundled_schema(name) for name in bundled_schema_ids()
    )


@pytest.fixture(scope="session")
def corpus_points(catalog):
    return load_corpus(bundled_corpus_path(), catalog)


@pytest.fixture(scope="session")
def golds(corpus_points):
    return [
        GoldItem(id=str(i), db_id=p.schema_id, query=p.gold_sql)
        for i, p in enumerate(corpus_points)
    ]


@pytest.fixture(scope="session")
def fixtures_dir(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("dbs")
    build_demo_fixtures(root)
    return root
