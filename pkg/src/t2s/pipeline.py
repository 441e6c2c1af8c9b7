"""Generation orchestration: render, generate, extract, validate, score,
and retry with corrective prompt augmentation.

A run makes up to max_attempts backend calls.  An attempt is accepted as
soon as extraction succeeds, the query aligns with the schema, and the
confidence score (when the backend reports token logprobs) clears the
threshold.  Rejected attempts grow the next prompt: first with a repair
directive naming canonical schema identifiers, then additionally with
one more corpus example per retry.
"""

from __future__ import annotations

import json
import logging
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from .backend import FINISH_ERROR, Backend, GenerationOutcome, GenerationRequest
from .corpus import ExamplePoint
from .errors import (
    BackendError,
    ConfigError,
    ExtractionError,
    PromptBudgetError,
    T2SError,
)
from .extraction import extract_sql
from .prompting import (
    FEW_SHOT,
    ZERO_SHOT,
    PromptSpec,
    RenderedPrompt,
    render,
    token_overlap,
)
from .schema import DatabaseSchema, SchemaCatalog
from .sql import Issue, ValidationReport, suggest_repairs, validate_sql

_LOG = logging.getLogger(__name__)

STATUS_ACCEPTED = "accepted"
STATUS_EXHAUSTED = "exhausted"
STATUS_ABORTED = "aborted"
STATUSES = (STATUS_ACCEPTED, STATUS_EXHAUSTED, STATUS_ABORTED)


@dataclass(frozen=True)
class ConfidenceScore:
    """Mean token log-probability of one generated sequence."""

    value: float
    token_count: int

    def __post_init__(self):
        if self.token_count < 1:
            raise ValueError("token_count must be at least 1")
        if self.value > 0.0:
            raise ValueError("mean log-probability cannot be positive")


def score_confidence(outcome: GenerationOutcome) -> ConfidenceScore:
    """Arithmetic mean of the outcome's token log-probabilities."""
    logprobs = outcome.logprobs
    if not logprobs:
        raise ValueError("no tokens to score")
    # statistics.mean keeps exact decimal ratios that sum()/len() loses
    # to float accumulation
    return ConfidenceScore(
        value=statistics.mean(logprobs), token_count=len(logprobs)
    )


@dataclass(frozen=True)
class RefinementPolicy:
    """Knobs for the retry loop."""

    threshold: float = -1.0
    max_attempts: int = 5
    clarify_from_attempt: int = 2
    extra_example_from_attempt: int = 3
    temperature_bump: float = 0.0

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ConfigError("max_attempts must be at least 1")
        if self.clarify_from_attempt < 1:
            raise ConfigError("clarify_from_attempt must be at least 1")
        if self.extra_example_from_attempt < self.clarify_from_attempt:
            raise ConfigError(
                "extra_example_from_attempt cannot precede clarify_from_attempt"
            )
        if self.temperature_bump < 0.0:
            raise ConfigError("temperature_bump must be non-negative")


@dataclass(frozen=True)
class AttemptRecord:
    """Everything observed during one backend call."""

    prompt_digest: str
    raw_text: str
    extracted_sql: str | None
    validation: ValidationReport | None
    confidence: ConfidenceScore | None
    accepted: bool
    prompt_text: str | None = None


@dataclass(frozen=True)
class RunRecord:
    """Full history of one target's refinement loop."""

    id: str
    schema_id: str
    instruction: str
    status: str
    final_sql: str | None
    attempts: tuple[AttemptRecord, ...]
    error: str | None = None

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"status must be one of {STATUSES}")
        object.__setattr__(self, "attempts", tuple(self.attempts))
        n_accepted = sum(1 for a in self.attempts if a.accepted)
        if self.status == STATUS_ACCEPTED:
            if n_accepted != 1 or self.final_sql is None:
                raise ValueError(
                    "accepted runs record exactly one accepted attempt and a final_sql"
                )
        else:
            if n_accepted != 0 or self.final_sql is not None:
                raise ValueError(
                    f"{self.status} runs record no accepted attempt and no final_sql"
                )


def _judge(
    prompt: RenderedPrompt,
    outcome: GenerationOutcome,
    schema: DatabaseSchema,
    policy: RefinementPolicy,
    verbose_prompts: bool,
) -> AttemptRecord:
    prompt_text = prompt.text if verbose_prompts else None
    if outcome.finish == FINISH_ERROR:
        return AttemptRecord(
            prompt_digest=prompt.digest,
            raw_text=outcome.raw_text,
            extracted_sql=None,
            validation=None,
            confidence=None,
            accepted=False,
            prompt_text=prompt_text,
        )
    try:
        extracted = extract_sql(outcome.raw_text).sql
    except ExtractionError:
        return AttemptRecord(
            prompt_digest=prompt.digest,
            raw_text=outcome.raw_text,
            extracted_sql=None,
            validation=None,
            confidence=None,
            accepted=False,
            prompt_text=prompt_text,
        )
    validation = validate_sql(extracted, schema)
    confidence = None
    if outcome.logprobs:
        confidence = score_confidence(outcome)
    else:
        _LOG.warning(
            "backend returned no token logprobs; gating on validation only"
        )
    accepted = validation.aligned and (
        confidence is None or confidence.value >= policy.threshold
    )
    return AttemptRecord(
        prompt_digest=prompt.digest,
        raw_text=outcome.raw_text,
        extracted_sql=extracted,
        validation=validation,
        confidence=confidence,
        accepted=accepted,
        prompt_text=prompt_text,
    )


def _repair_directive(
    attempt: AttemptRecord, schema: DatabaseSchema
) -> str:
    report = attempt.validation
    if report is None:
        report = ValidationReport(
            syntax_ok=False,
            aligned=False,
            issues=(),
            error="no SQL extracted",
            schema=schema,
        )
    if report.aligned:
        return ""
    return suggest_repairs(report).directive


def _pick_extra_example(
    spec: PromptSpec, corpus: Sequence[ExamplePoint], catalog: SchemaCatalog
) -> ExamplePoint | None:
    """Most instruction-similar unused example whose gold is schema-clean."""
    used = set(spec.examples)
    ranked = sorted(
        range(len(corpus)),
        key=lambda i: (
            -token_overlap(spec.target.instruction, corpus[i].instruction),
            i,
        ),
    )
    for index in ranked:
        candidate = corpus[index]
        if candidate in used:
            continue
        if candidate.schema_id not in catalog:
            continue
        report = validate_sql(
            candidate.gold_sql, catalog.get(candidate.schema_id)
        )
        if report.aligned:
            return candidate
    return None


def _augment(
    spec: PromptSpec,
    attempt: AttemptRecord,
    schema: DatabaseSchema,
    corpus: Sequence[ExamplePoint],
    catalog: SchemaCatalog,
    next_attempt: int,
    policy: RefinementPolicy,
) -> PromptSpec:
    clarifications = list(spec.clarifications)
    if next_attempt >= policy.clarify_from_attempt:
        directive = _repair_directive(attempt, schema)
        if directive and directive not in clarifications:
            clarifications.append(directive)
    examples = spec.examples
    strategy = spec.strategy
    if next_attempt >= policy.extra_example_from_attempt:
        extra = _pick_extra_example(spec, corpus, catalog)
        if extra is not None:
            examples = examples + (extra,)
            if strategy == ZERO_SHOT:
                # an augmented prompt carries examples by definition
                strategy = FEW_SHOT
    return PromptSpec(
        strategy=strategy,
        target=spec.target,
        examples=examples,
        k=len(examples),
        preamble=spec.preamble,
        clarifications=tuple(clarifications),
        max_input_tokens=spec.max_input_tokens,
    )


def run_one(
    spec: PromptSpec,
    catalog: SchemaCatalog,
    corpus: Sequence[ExamplePoint],
    backend: Backend,
    policy: RefinementPolicy | None = None,
    *,
    run_id: str = "0",
    verbose_prompts: bool = False,
    base_temperature: float = 0.0,
    max_output_tokens: int = 256,
) -> RunRecord:
    """Drive one target through the refinement loop."""
    if policy is None:
        policy = RefinementPolicy()
    target = spec.target
    schema = catalog.get(target.schema_id)
    attempts: list[AttemptRecord] = []

    def finish(status: str, final_sql: str | None, error: str | None = None):
        assert len(attempts) <= policy.max_attempts
        return RunRecord(
            id=run_id,
            schema_id=target.schema_id,
            instruction=target.instruction,
            status=status,
            final_sql=final_sql,
            attempts=tuple(attempts),
            error=error,
        )

    current = spec
    for attempt_no in range(1, policy.max_attempts + 1):
        try:
            prompt = render(current, catalog)
        except PromptBudgetError as exc:
            return finish(
                STATUS_ABORTED,
                None,
                f"prompt budget exceeded at attempt {attempt_no}: "
                f"{exc} ({exc.overflow} tokens over)",
            )
        request = GenerationRequest(
            prompt=prompt.text,
            max_output_tokens=max_output_tokens,
            temperature=base_temperature
            + policy.temperature_bump * (attempt_no - 1),
        )
        try:
            outcome = backend.generate(request)
        except BackendError as exc:
            return finish(
                STATUS_ABORTED, None, f"attempt {attempt_no}: {exc}"
            )
        attempt = _judge(prompt, outcome, schema, policy, verbose_prompts)
        attempts.append(attempt)
        if attempt.accepted:
            return finish(STATUS_ACCEPTED, attempt.extracted_sql)
        if attempt_no < policy.max_attempts:
            current = _augment(
                current, attempt, schema, corpus, catalog, attempt_no + 1, policy
            )
    return finish(STATUS_EXHAUSTED, None)


@dataclass
class RunSummary:
    """Batch-level tallies."""

    total: int
    accepted: int
    exhausted: int
    aborted: int
    attempt_histogram: dict[int, int]

    def as_dict(self) -> dict:
        return {
            "total": self.total,
            "accepted": self.accepted,
            "exhausted": self.exhausted,
            "aborted": self.aborted,
            "attempt_histogram": {
                str(k): v for k, v in sorted(self.attempt_histogram.items())
            },
        }


def summarize(records: Sequence[RunRecord]) -> RunSummary:
    histogram: dict[int, int] = {}
    for record in records:
        histogram[len(record.attempts)] = histogram.get(len(record.attempts), 0) + 1
    return RunSummary(
        total=len(records),
        accepted=sum(1 for r in records if r.status == STATUS_ACCEPTED),
        exhausted=sum(1 for r in records if r.status == STATUS_EXHAUSTED),
        aborted=sum(1 for r in records if r.status == STATUS_ABORTED),
        attempt_histogram=histogram,
    )


def run_batch(
    specs: Sequence[PromptSpec],
    catalog: SchemaCatalog,
    corpus: Sequence[ExamplePoint],
    backend: Backend | None = None,
    policy: RefinementPolicy | None = None,
    *,
    backend_factory: Callable[[int], Backend] | None = None,
    run_ids: Sequence[str] | None = None,
    parallelism: int = 1,
    verbose_prompts: bool = False,
    base_temperature: float = 0.0,
    max_output_tokens: int = 256,
) -> tuple[list[RunRecord], RunSummary]:
    """Run many targets, preserving input order in the results.

    backend_factory, when given, binds one backend per target index so
    scripted runs stay deterministic under any parallelism; otherwise the
    shared backend must tolerate concurrent calls.
    """
    if parallelism < 1:
        raise ConfigError("parallelism must be at least 1")
    if backend is None and backend_factory is None:
        raise ConfigError("run_batch needs a backend or a backend_factory")
    if run_ids is None:
        run_ids = [str(i) for i in range(len(specs))]
    if len(run_ids) != len(specs):
        raise ConfigError("run_ids and specs must have equal length")

    def work(index: int) -> RunRecord:
        spec = specs[index]
        bound = backend_factory(index) if backend_factory is not None else backend
        try:
            return run_one(
                spec,
                catalog,
                corpus,
                bound,
                policy,
                run_id=run_ids[index],
                verbose_prompts=verbose_prompts,
                base_temperature=base_temperature,
                max_output_tokens=max_output_tokens,
            )
        except T2SError as exc:
            # one bad run never sinks the batch
            return RunRecord(
                id=run_ids[index],
                schema_id=spec.target.schema_id,
                instruction=spec.target.instruction,
                status=STATUS_ABORTED,
                final_sql=None,
                attempts=(),
                error=str(exc),
            )

    if not specs:
        return [], summarize([])
    if parallelism == 1:
        records = [work(i) for i in range(len(specs))]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            records = list(pool.map(work, range(len(specs))))
    return records, summarize(records)


# -- serialization ----------------------------------------------------------


def _validation_to_dict(report: ValidationReport | None) -> dict | None:
    if report is None:
        return None
    return {
        "syntax_ok": report.syntax_ok,
        "aligned": report.aligned,
        "issues": [
            {
                "kind": issue.kind,
                "offending": issue.offending,
                "suggestion": issue.suggestion,
            }
            for issue in report.issues
        ],
        "error": report.error,
    }


def _validation_from_dict(data: dict | None) -> ValidationReport | None:
    if data is None:
        return None
    return ValidationReport(
        syntax_ok=data["syntax_ok"],
        aligned=data["aligned"],
        issues=tuple(
            Issue(
                kind=issue["kind"],
                offending=issue["offending"],
                suggestion=issue.get("suggestion"),
            )
            for issue in data.get("issues", ())
        ),
        error=data.get("error"),
    )


def attempt_to_dict(attempt: AttemptRecord) -> dict:
    confidence = None
    if attempt.confidence is not None:
        confidence = {
            "value": attempt.confidence.value,
            "token_count": attempt.confidence.token_count,
        }
    return {
        "prompt_digest": attempt.prompt_digest,
        "raw_text": attempt.raw_text,
        "extracted_sql": attempt.extracted_sql,
        "validation": _validation_to_dict(attempt.validation),
        "confidence": confidence,
        "accepted": attempt.accepted,
        "prompt_text": attempt.prompt_text,
    }


def attempt_from_dict(data: dict) -> AttemptRecord:
    confidence = None
    if data.get("confidence") is not None:
        confidence = ConfidenceScore(
            value=data["confidence"]["value"],
            token_count=data["confidence"]["token_count"],
        )
    return AttemptRecord(
        prompt_digest=data["prompt_digest"],
        raw_text=data["raw_text"],
        extracted_sql=data.get("extracted_sql"),
        validation=_validation_from_dict(data.get("validation")),
        confidence=confidence,
        accepted=data["accepted"],
        prompt_text=data.get("prompt_text"),
    )


def record_to_dict(record: RunRecord) -> dict:
    return {
        "id": record.id,
        "schema_id": record.schema_id,
        "instruction": record.instruction,
        "status": record.status,
        "final_sql": record.final_sql,
        "attempts": [attempt_to_dict(a) for a in record.attempts],
        "error": record.error,
    }


def record_from_dict(data: dict) -> RunRecord:
    return RunRecord(
        id=str(data["id"]),
        schema_id=data["schema_id"],
        instruction=data["instruction"],
        status=data["status"],
        final_sql=data.get("final_sql"),
        attempts=tuple(attempt_from_dict(a) for a in data.get("attempts", ())),
        error=data.get("error"),
    )


def save_records(records: Sequence[RunRecord], path: str | Path) -> int:
    """Write records as JSON Lines; returns the count written."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record_to_dict(record), sort_keys=True))
            handle.write("\n")
    return len(records)


def load_records(path: str | Path) -> list[RunRecord]:
    records = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                records.append(record_from_dict(json.loads(line)))
    return records
