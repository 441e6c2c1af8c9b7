"""Command-line front end.

Subcommands cover corpus preparation, prompt rendering, generation through
the refinement loop, standalone validation, evaluation, and cost
estimation. Exit codes: 0 success, 1 usage or configuration problem,
2 data problem, 3 backend transport failure. Every command is
deterministic for fixed inputs, seed, and script.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .backend import (
    Backend,
    BackendTransportError,
    GenerationOutcome,
    GenerationRequest,
    HttpBackend,
    mock_from_script,
)
from .corpus import ExamplePoint, load_corpus, preprocess, save_corpus, split_corpus
from .errors import (
    ConfigError,
    CorpusError,
    PromptError,
    SchemaError,
    T2SError,
)
from .evaluation import evaluate_run, load_golds, emit_report
from .fixtures import build_demo_fixtures, bundled_corpus_path, bundled_schema_ids, load_bundled_schema
from .pipeline import (
    AttemptRecord,
    RefinementPolicy,
    RunRecord,
    STATUS_ACCEPTED,
    load_records,
    run_batch,
    save_records,
)
from .prompting import (
    CostModel,
    PromptSpec,
    SELECT_FIRST_K,
    SELECTION_MODES,
    STRATEGIES,
    Target,
    ZERO_SHOT,
    estimate_cost,
    render,
    select_examples,
)
from .schema import SchemaCatalog, load_schema, load_spider_schemas, serialize
from .sql import apply_substitutions, suggest_repairs, validate_sql

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_TRANSPORT = 3

REPORT_FORMATS = ("json", "csv", "text")


class _CliError(click.ClickException):
    """ClickException with an explicit process exit code."""

    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code


def _exit_code_for(exc: T2SError) -> int:
    if isinstance(exc, BackendTransportError):
        return EXIT_TRANSPORT
    if isinstance(exc, (ConfigError, PromptError)):
        return EXIT_USAGE
    # schema/corpus/evaluation/extraction/syntax and backend payload
    # problems all mean the supplied data cannot be used
    return EXIT_DATA


def _raise_cli(exc: T2SError):
    raise _CliError(str(exc), _exit_code_for(exc)) from exc


class _Group(click.Group):
    """Group whose usage errors exit 1 instead of click's default 2."""

    def main(self, *args, standalone_mode: bool = True, **kwargs):
        if not standalone_mode:
            return super().main(*args, standalone_mode=False, **kwargs)
        try:
            rv = super().main(*args, standalone_mode=False, **kwargs)
        except click.UsageError as exc:
            exc.show()
            sys.exit(EXIT_USAGE)
        except click.ClickException as exc:
            exc.show()
            sys.exit(exc.exit_code)
        except click.exceptions.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_USAGE)
        sys.exit(rv if isinstance(rv, int) else EXIT_OK)


@click.group(cls=_Group, name="t2s")
@click.version_option(__version__, prog_name="t2s")
def main():
    """Text-to-SQL orchestration and evaluation toolkit."""


def _load_catalog(schemas: str) -> SchemaCatalog:
    """Build a catalog from a directory of schema files or a single file.

    A single .json file may be either one native schema document or a
    whole-benchmark table list; the distinction is sniffed from the JSON
    shape.
    """
    path = Path(schemas)
    try:
        if path.is_dir():
            return SchemaCatalog.from_dir(path)
        parsed = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise SchemaError(f"cannot read schemas from {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    if isinstance(parsed, list):
        return load_spider_schemas(parsed)
    return SchemaCatalog.from_schemas([load_schema(parsed)])


def _write_or_echo(text: str, out: str | None):
    if out is None:
        click.echo(text, nl=not text.endswith("\n"))
    else:
        Path(out).write_text(text, encoding="utf-8")


# -- prepare -----------------------------------------------------------------


@main.command()
@click.option("--questions", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Question/SQL dataset (JSON array or JSON Lines).")
@click.option("--tables", "schemas", type=click.Path(exists=True), default=None,
              help="Schema source: benchmark table list, native schema file, or directory.")
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@click.option("--split", type=float, default=None, help="Train fraction in (0, 1); writes two extra files.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--strict", is_flag=True, help="Fail on the first malformed record instead of skipping it.")
@click.option("--demo", is_flag=True, help="Materialize the bundled demo corpus, schemas, and fixtures.")
def prepare(questions, schemas, out_dir, split, seed, strict, demo):
    """Normalize a dataset into corpus JSONL plus native schema files."""
    out_root = Path(out_dir)
    try:
        if demo:
            _prepare_demo(out_root)
            points = load_corpus(bundled_corpus_path())
        else:
            if questions is None or schemas is None:
                raise ConfigError("prepare needs --questions and --tables unless --demo is given")
            catalog = _load_catalog(schemas)
            schema_dir = out_root / "schemas"
            schema_dir.mkdir(parents=True, exist_ok=True)
            for name in catalog.names():
                doc = json.dumps(serialize(catalog.get(name)), indent=2, sort_keys=True)
                (schema_dir / f"{name}.json").write_text(doc + "\n", encoding="utf-8")
            points = _ingest(Path(questions), catalog, strict)
            out_root.mkdir(parents=True, exist_ok=True)
            save_corpus(points, out_root / "corpus.jsonl")
        if split is not None:
            train, held = split_corpus(points, split, seed)
            save_corpus(train, out_root / "corpus.train.jsonl")
            save_corpus(held, out_root / "corpus.heldout.jsonl")
            click.echo(f"split: {len(train)} train / {len(held)} held out (seed {seed})")
    except T2SError as exc:
        _raise_cli(exc)
    counts: dict[str, int] = {}
    for point in points:
        counts[point.schema_id] = counts.get(point.schema_id, 0) + 1
    click.echo(f"{len(points)} points across {len(counts)} databases")
    for name in sorted(counts):
        click.echo(f"  {name}: {counts[name]}")


def _prepare_demo(out_root: Path):
    out_root.mkdir(parents=True, exist_ok=True)
    schema_dir = out_root / "schemas"
    schema_dir.mkdir(exist_ok=True)
    for db_id in bundled_schema_ids():
        doc = json.dumps(serialize(load_bundled_schema(db_id)), indent=2, sort_keys=True)
        (schema_dir / f"{db_id}.json").write_text(doc + "\n", encoding="utf-8")
    corpus_text = bundled_corpus_path().read_text(encoding="utf-8")
    (out_root / "corpus.jsonl").write_text(corpus_text, encoding="utf-8")
    golds = []
    for i, point in enumerate(load_corpus(bundled_corpus_path())):
        golds.append(json.dumps(
            {"id": str(i), "db_id": point.schema_id, "query": point.gold_sql},
            ensure_ascii=False, sort_keys=True,
        ))
    (out_root / "golds.jsonl").write_text("\n".join(golds) + "\n", encoding="utf-8")
    built = build_demo_fixtures(out_root / "fixtures")
    click.echo(f"demo fixtures: {len(built)} databases under {out_root / 'fixtures'}")


_FIELD_ALIASES = {
    "question": "question",
    "instruction": "question",
    "db_id": "db_id",
    "schema_id": "db_id",
    "query": "query",
    "gold_sql": "query",
}


def _ingest(path: Path, catalog: SchemaCatalog, strict: bool) -> list[ExamplePoint]:
    """Lenient record-by-record load: malformed records are listed, and
    skipped unless --strict."""
    text = path.read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("["):
        try:
            raw_records = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{path}: invalid JSON: {exc}") from exc
    else:
        raw_records = []
        for line_no, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                raw_records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}: line {line_no} is invalid JSON: {exc}") from exc
    if not raw_records:
        raise CorpusError(f"{path}: no records found")

    points: list[ExamplePoint] = []
    bad = 0
    for i, record in enumerate(raw_records):
        try:
            fields: dict[str, str] = {}
            if not isinstance(record, dict):
                raise CorpusError("record is not an object")
            for key, value in record.items():
                slot = _FIELD_ALIASES.get(key)
                if slot is not None and slot not in fields:
                    fields[slot] = value
            missing = [k for k in ("question", "db_id", "query") if k not in fields]
            if missing:
                raise CorpusError(f"missing field(s) {', '.join(missing)}")
            if fields["db_id"] not in catalog:
                raise CorpusError(f"unknown db_id {fields['db_id']!r}")
            points.append(ExamplePoint(
                instruction=preprocess(str(fields["question"])),
                schema_id=str(fields["db_id"]),
                gold_sql=str(fields["query"]).strip(),
            ))
        except T2SError as exc:
            if strict:
                raise CorpusError(f"{path}: record {i}: {exc}") from exc
            bad += 1
            click.echo(f"skipping record {i}: {exc}", err=True)
    if bad:
        click.echo(f"skipped {bad} malformed record(s)", err=True)
    return points


# -- render ------------------------------------------------------------------


@main.command()
@click.option("--schemas", type=click.Path(exists=True), required=True)
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Example pool; required whenever k > 0.")
@click.option("--question", required=True)
@click.option("--db-id", required=True)
@click.option("--strategy", type=click.Choice(STRATEGIES), default="few_shot", show_default=True)
@click.option("--k", type=int, default=None, help="Example count [default: 2, or 0 for zero_shot].")
@click.option("--select", "select_mode", type=click.Choice(SELECTION_MODES), default=SELECT_FIRST_K,
              show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--clarify", multiple=True, help="Extra directive line(s) for the target block.")
@click.option("--max-input-tokens", type=int, default=512, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def render_cmd(schemas, corpus_path, question, db_id, strategy, k, select_mode, seed,
               clarify, max_input_tokens, out):
    """Render one prompt and print it (or write it to --out)."""
    try:
        catalog = _load_catalog(schemas)
        if k is None:
            k = 0 if strategy == ZERO_SHOT else 2
        examples: list[ExamplePoint] = []
        if k > 0:
            if corpus_path is None:
                raise ConfigError("--corpus is required when k > 0")
            pool = load_corpus(corpus_path, catalog)
            examples = select_examples(pool, question, k, select_mode, seed)
        spec = PromptSpec(
            strategy=strategy,
            target=Target(instruction=question, schema_id=db_id),
            examples=tuple(examples),
            clarifications=tuple(clarify),
            max_input_tokens=max_input_tokens,
        )
        prompt = render(spec, catalog)
    except T2SError as exc:
        _raise_cli(exc)
    _write_or_echo(prompt.text + "\n", out)
    click.echo(f"[{prompt.strategy}] ~{prompt.token_estimate} tokens", err=True)


main.add_command(render_cmd, name="render")


# -- generate ----------------------------------------------------------------


def _load_targets(path: Path) -> list[tuple[str, Target]]:
    """Read targets as JSONL/JSON-array records with question + db_id and
    an optional id (defaults to the record index)."""
    text = path.read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("["):
        try:
            raw_records = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{path}: invalid JSON: {exc}") from exc
    else:
        raw_records = []
        for line_no, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                raw_records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}: line {line_no} is invalid JSON: {exc}") from exc
    targets: list[tuple[str, Target]] = []
    for i, record in enumerate(raw_records):
        if not isinstance(record, dict):
            raise CorpusError(f"{path}: record {i} is not an object")
        question = record.get("question", record.get("instruction"))
        db_id = record.get("db_id", record.get("schema_id"))
        if not question or not db_id:
            raise CorpusError(f"{path}: record {i} needs question and db_id")
        run_id = str(record.get("id", i))
        targets.append((run_id, Target(instruction=str(question), schema_id=str(db_id))))
    if not targets:
        raise CorpusError(f"{path}: no targets found")
    return targets


class _TransportWatch:
    """Backend proxy that remembers whether any call failed in transport."""

    def __init__(self, inner: Backend):
        self._inner = inner
        self.transport_failures = 0

    def generate(self, request: GenerationRequest) -> GenerationOutcome:
        try:
            return self._inner.generate(request)
        except BackendTransportError:
            self.transport_failures += 1
            raise


@main.command()
@click.option("--schemas", type=click.Path(exists=True), required=True)
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--targets", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--backend", "backend_kind", type=click.Choice(("mock", "http")), default="mock",
              show_default=True)
@click.option("--script", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Scripted responses for --backend mock: a JSON array, or one array per target.")
@click.option("--strategy", type=click.Choice(STRATEGIES), default="few_shot", show_default=True)
@click.option("--k", type=int, default=None, help="Example count [default: 2, or 0 for zero_shot].")
@click.option("--select", "select_mode", type=click.Choice(SELECTION_MODES), default=SELECT_FIRST_K,
              show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--max-input-tokens", type=int, default=512, show_default=True)
@click.option("--max-output-tokens", type=int, default=256, show_default=True)
@click.option("--threshold", type=float, default=-1.0, show_default=True,
              help="Mean-logprob acceptance gate.")
@click.option("--max-attempts", type=int, default=5, show_default=True)
@click.option("--temperature", type=float, default=0.0, show_default=True)
@click.option("--temperature-bump", type=float, default=0.0, show_default=True,
              help="Temperature increase per retry.")
@click.option("--parallelism", type=int, default=1, show_default=True)
@click.option("--verbose-prompts", is_flag=True, help="Store full prompt text in the records.")
def generate(schemas, corpus_path, targets, out, backend_kind, script, strategy, k,
             select_mode, seed, max_input_tokens, max_output_tokens, threshold,
             max_attempts, temperature, temperature_bump, parallelism, verbose_prompts):
    """Run targets through generation and refinement; write run records."""
    try:
        # backend config is checked before any data is read
        watch: _TransportWatch | None = None
        backend_factory = None
        if backend_kind == "http":
            watch = _TransportWatch(HttpBackend())
        else:
            if script is None:
                raise ConfigError("--backend mock needs --script")
            try:
                entries = json.loads(Path(script).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read script {script}: {exc}") from exc
            if isinstance(entries, list) and entries and isinstance(entries[0], list):
                # one response array per target
                scripts = list(entries)
                for part in scripts:
                    mock_from_script(part)  # validate each array up front

                def backend_factory(index: int) -> Backend:
                    if index >= len(scripts):
                        raise ConfigError(
                            f"script holds {len(scripts)} per-target arrays but "
                            f"target {index} was requested"
                        )
                    return mock_from_script(scripts[index])
            else:
                watch = _TransportWatch(mock_from_script(entries))

        catalog = _load_catalog(schemas)
        pool = load_corpus(corpus_path, catalog)
        target_rows = _load_targets(Path(targets))
        policy = RefinementPolicy(
            threshold=threshold,
            max_attempts=max_attempts,
            temperature_bump=temperature_bump,
        )
        if k is None:
            k = 0 if strategy == ZERO_SHOT else 2
        specs = []
        for _, target in target_rows:
            examples = select_examples(pool, target.instruction, k, select_mode, seed) if k else []
            specs.append(PromptSpec(
                strategy=strategy,
                target=target,
                examples=tuple(examples),
                max_input_tokens=max_input_tokens,
            ))
        records, summary = run_batch(
            specs,
            catalog,
            pool,
            backend=watch,
            policy=policy,
            backend_factory=backend_factory,
            run_ids=[run_id for run_id, _ in target_rows],
            parallelism=parallelism,
            verbose_prompts=verbose_prompts,
            base_temperature=temperature,
            max_output_tokens=max_output_tokens,
        )
        save_records(records, out)
    except T2SError as exc:
        _raise_cli(exc)
    click.echo(
        f"{summary.total} runs: {summary.accepted} accepted, "
        f"{summary.exhausted} exhausted, {summary.aborted} aborted"
    )
    for attempts_used in sorted(summary.attempt_histogram):
        click.echo(f"  {summary.attempt_histogram[attempts_used]} run(s) took {attempts_used} attempt(s)")
    if watch is not None and watch.transport_failures:
        raise _CliError(
            f"{watch.transport_failures} run(s) aborted on backend transport failures",
            EXIT_TRANSPORT,
        )


# -- validate ----------------------------------------------------------------


@main.command()
@click.option("--schemas", type=click.Path(exists=True), required=True)
@click.option("--db-id", required=True)
@click.option("--sql", default=None, help="Query text; omit to read stdin.")
@click.option("--apply-repairs", is_flag=True, help="Print the query with suggested substitutions applied.")
def validate(schemas, db_id, sql, apply_repairs):
    """Check one query's syntax and schema alignment."""
    try:
        catalog = _load_catalog(schemas)
        schema = catalog.get(db_id)
        if sql is None:
            sql = click.get_text_stream("stdin").read()
        if not sql.strip():
            raise ConfigError("no SQL given (pass --sql or pipe a query on stdin)")
        report = validate_sql(sql, schema)
    except T2SError as exc:
        _raise_cli(exc)
    if not report.syntax_ok:
        click.echo(f"syntax error: {report.error}")
        return
    if report.aligned:
        click.echo("aligned")
        return
    click.echo(f"not aligned: {len(report.issues)} issue(s)")
    for issue in report.issues:
        click.echo(f"  {issue.describe()}")
    plan = suggest_repairs(report)
    if plan.directive:
        click.echo(f"directive: {plan.directive}")
    if apply_repairs and plan.substitutions:
        click.echo(f"repaired: {apply_substitutions(sql.strip(), plan)}")


# -- evaluate ----------------------------------------------------------------


def _self_check_records(golds) -> list[RunRecord]:
    """Score every gold against itself: one synthetic accepted run each."""
    records = []
    for gold in golds:
        attempt = AttemptRecord(
            prompt_digest="",
            raw_text=gold.query,
            extracted_sql=gold.query,
            validation=None,
            confidence=None,
            accepted=True,
        )
        records.append(RunRecord(
            id=gold.id,
            schema_id=gold.db_id,
            instruction="(self-check)",
            status=STATUS_ACCEPTED,
            final_sql=gold.query,
            attempts=(attempt,),
        ))
    return records


@main.command()
@click.option("--records", "records_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--golds", "golds_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--fixtures", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--format", "fmt", type=click.Choice(REPORT_FORMATS), default="text", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.option("--ignore-literals", is_flag=True, help="Compare literal values as wildcards.")
@click.option("--self-check", is_flag=True, help="Evaluate every gold against itself.")
def evaluate(records_path, golds_path, fixtures, fmt, out, ignore_literals, self_check):
    """Score run records against golds; emit a report."""
    try:
        golds = load_golds(golds_path)
        if self_check:
            records = _self_check_records(golds)
        else:
            if records_path is None:
                raise ConfigError("evaluate needs --records unless --self-check is given")
            records = load_records(records_path)
        report = evaluate_run(records, golds, fixtures, ignore_literals=ignore_literals)
        document = emit_report(report, fmt)
    except T2SError as exc:
        _raise_cli(exc)
    _write_or_echo(document, out)
    if out is not None:
        click.echo(f"wrote {fmt} report to {out}")


# -- cost --------------------------------------------------------------------


@main.command()
@click.option("--E", "corpus_size", type=int, required=True, help="Example pool size.")
@click.option("--k", type=int, required=True, help="Examples per prompt.")
@click.option("--Le", "example_tokens", type=int, required=True, help="Tokens per example.")
@click.option("--Lq", "question_tokens", type=int, required=True, help="Tokens in the question.")
@click.option("--t", "attempts", type=int, default=1, show_default=True, help="Refinement attempts.")
@click.option("--format", "fmt", type=click.Choice(("text", "json")), default="text", show_default=True)
def cost(corpus_size, k, example_tokens, question_tokens, attempts, fmt):
    """Print the prompt-size and attention cost estimate."""
    try:
        model = CostModel(
            corpus_size=corpus_size,
            k=k,
            example_tokens=example_tokens,
            question_tokens=question_tokens,
            attempts=attempts,
        )
        report = estimate_cost(model)
    except T2SError as exc:
        _raise_cli(exc)
    if fmt == "json":
        click.echo(json.dumps(report.as_dict(), indent=2, sort_keys=True))
        return
    click.echo(f"L = k*Le + Lq = {k}*{example_tokens} + {question_tokens} = {report.prompt_tokens} tokens")
    click.echo(f"per-layer token-pair ops = L^2 = {report.per_layer_token_pair_ops}")
    click.echo(f"total over t={attempts} attempt(s) = {report.total_ops_over_attempts}")
    click.echo(f"example selection over E={corpus_size} scales as {report.selection_cost_class}")


if __name__ == "__main__":
    main()
