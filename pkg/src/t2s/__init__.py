"""Backend-agnostic text-to-SQL orchestration and evaluation toolkit.

The package turns natural-language questions plus database schemas into
SQL through pluggable generation backends, validates and iteratively
refines the output, and scores predictions with exact-set-match and
execution-based accuracy over SQLite fixtures.
"""

from .errors import (
    BackendError,
    BackendProtocolError,
    BackendTransportError,
    ConfigError,
    CorpusError,
    EvaluationError,
    ExtractionError,
    PromptBudgetError,
    PromptError,
    SchemaError,
    ScriptExhaustedError,
    SqlSyntaxError,
    T2SError,
)
from .schema import (
    Column,
    ColumnRef,
    DatabaseSchema,
    SchemaCatalog,
    Table,
    load_schema,
    load_spider_schemas,
    resolve_column,
    resolve_table,
)
from .corpus import (
    ExamplePoint,
    TrainingString,
    format_training_point,
    inline_schema_text,
    load_corpus,
    parse_training_string,
    preprocess,
    save_corpus,
    split_corpus,
)
from .prompting import (
    CostModel,
    CostReport,
    PromptSpec,
    RenderedPrompt,
    STRATEGIES,
    Target,
    estimate_cost,
    estimate_tokens,
    render,
    select_examples,
    token_overlap,
)
from .backend import (
    GenerationOutcome,
    GenerationRequest,
    HttpBackend,
    ScriptedBackend,
    Token,
    mock_from_script,
)
from .extraction import ExtractionResult, extract_sql
from .sql import (
    Query,
    ValidationReport,
    apply_substitutions,
    canonical_sql,
    canonicalize,
    parse_sql,
    suggest_repairs,
    validate,
    validate_sql,
)
from .pipeline import (
    ConfidenceScore,
    RefinementPolicy,
    RunRecord,
    RunSummary,
    load_records,
    run_batch,
    run_one,
    save_records,
    score_confidence,
    summarize,
)
from .evaluation import (
    EvalReport,
    EvalVerdict,
    GoldItem,
    emit_report,
    evaluate_run,
    exact_set_match,
    execution_match,
    fixture_path,
    load_golds,
)
from .fixtures import (
    build_demo_fixtures,
    build_fixture,
    bundled_corpus_path,
    bundled_schema_ids,
    load_bundled_schema,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "T2SError", "ConfigError", "SchemaError", "CorpusError", "PromptError",
    "PromptBudgetError", "BackendError", "BackendTransportError",
    "BackendProtocolError", "ScriptExhaustedError", "ExtractionError",
    "SqlSyntaxError", "EvaluationError",
    # schema
    "Column", "Table", "ColumnRef", "DatabaseSchema", "SchemaCatalog",
    "load_schema", "load_spider_schemas", "resolve_table", "resolve_column",
    # corpus
    "ExamplePoint", "TrainingString", "preprocess", "format_training_point",
    "parse_training_string", "inline_schema_text", "load_corpus",
    "save_corpus", "split_corpus",
    # prompting
    "STRATEGIES", "Target", "PromptSpec", "RenderedPrompt", "render",
    "select_examples", "token_overlap", "estimate_tokens", "CostModel",
    "CostReport", "estimate_cost",
    # backend
    "GenerationRequest", "GenerationOutcome", "Token", "HttpBackend",
    "ScriptedBackend", "mock_from_script",
    # extraction
    "ExtractionResult", "extract_sql",
    # sql analysis
    "Query", "parse_sql", "canonicalize", "canonical_sql", "validate",
    "validate_sql", "suggest_repairs", "apply_substitutions",
    "ValidationReport",
    # pipeline
    "ConfidenceScore", "score_confidence", "RefinementPolicy", "RunRecord",
    "RunSummary", "run_one", "run_batch", "summarize", "save_records",
    "load_records",
    # evaluation
    "GoldItem", "EvalVerdict", "EvalReport", "exact_set_match",
    "execution_match", "evaluate_run", "emit_report", "load_golds",
    "fixture_path",
    # fixtures
    "build_demo_fixtures", "build_fixture", "bundled_corpus_path",
    "bundled_schema_ids", "load_bundled_schema",
]
