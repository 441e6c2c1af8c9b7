"""Prompt construction: strategies, example selection, budgets, cost model.

Prompts are built from Instruction/Schema/SQL blocks separated by blank
lines, with the target block appended last and its SQL left blank:

    Instruction: <example question>
    Schema: Employees(id, name, department, salary)
    SQL: <example gold SQL>

    Instruction: <target question>
    Schema: Employees(id, name, department, salary)
    SQL:

Five strategies are supported. zero_shot renders the target block alone.
few_shot prefixes k example blocks. structured_few_shot additionally opens
with the stored persona preamble. schema_aware_few_shot renders the
target's Schema line in the detailed dict style, including declared keys.
instruction_focused_few_shot opens with the preamble and restates explicit
comparator/aggregate phrases from the target instruction on a Constraints
line.
"""

from __future__ import annotations

import hashlib
import random
import re
from dataclasses import dataclass, field
from importlib import resources

from .corpus import ExamplePoint, inline_schema_text
from .errors import PromptBudgetError, PromptError
from .schema import DatabaseSchema, SchemaCatalog

ZERO_SHOT = "zero_shot"
FEW_SHOT = "few_shot"
STRUCTURED_FEW_SHOT = "structured_few_shot"
SCHEMA_AWARE_FEW_SHOT = "schema_aware_few_shot"
INSTRUCTION_FOCUSED_FEW_SHOT = "instruction_focused_few_shot"

STRATEGIES = (
    ZERO_SHOT,
    FEW_SHOT,
    STRUCTURED_FEW_SHOT,
    SCHEMA_AWARE_FEW_SHOT,
    INSTRUCTION_FOCUSED_FEW_SHOT,
)

# Strategies that open with the stored persona preamble.
_PREAMBLE_STRATEGIES = (STRUCTURED_FEW_SHOT, INSTRUCTION_FOCUSED_FEW_SHOT)

SELECT_FIRST_K = "first_k"
SELECT_SEEDED_RANDOM = "seeded_random"
SELECT_TOKEN_OVERLAP = "token_overlap"
SELECTION_MODES = (SELECT_FIRST_K, SELECT_SEEDED_RANDOM, SELECT_TOKEN_OVERLAP)

DEFAULT_MAX_INPUT_TOKENS = 512

# Verbatim comparator / aggregate phrases restated by the
# instruction-focused strategy. Matched positionally, deduplicated.
_CONSTRAINT_PHRASE = re.compile(
    r"""
    \b(?:more|greater|higher|larger|less|fewer|lower|smaller)\ than\ \w+
    | \bat\ (?:least|most)\ \w+
    | \babove\ \w+
    | \bbelow\ \w+
    | \bbetween\ \w+\ and\ \w+
    | \bnumber\ of\b
    | \b(?:average|total|sum|count|maximum|minimum|highest|lowest|distinct)\b
    """,
    re.IGNORECASE | re.VERBOSE,
)


def estimate_tokens(text: str) -> int:
    """Whitespace-delimited token count; the budget currency everywhere."""
    return len(text.split())


def default_preamble() -> str:
    """The persona preamble asset, verbatim."""
    return (
        resources.files("t2s")
        .joinpath("data/preamble.txt")
        .read_text(encoding="utf-8")
    )


@dataclass(frozen=True)
class Target:
    """The question a prompt is built for: instruction plus its database."""

    instruction: str
    schema_id: str

    def __post_init__(self):
        if not self.instruction.strip():
            raise PromptError("target instruction must be non-empty")
        if not self.schema_id:
            raise PromptError("target schema_id must be non-empty")


@dataclass(frozen=True)
class PromptSpec:
    """A fully specified prompt: strategy, examples, target, and budget.

    k always equals len(examples); passing k=None derives it. zero_shot
    requires k == 0. clarifications are extra directive lines rendered in
    the target block, between the Instruction and Schema lines.
    """

    strategy: str
    target: Target
    examples: tuple[ExamplePoint, ...] = ()
    k: int | None = None
    preamble: str | None = None
    clarifications: tuple[str, ...] = ()
    max_input_tokens: int = DEFAULT_MAX_INPUT_TOKENS

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise PromptError(
                f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}"
            )
        object.__setattr__(self, "examples", tuple(self.examples))
        if self.k is None:
            object.__setattr__(self, "k", len(self.examples))
        if self.k != len(self.examples):
            raise PromptError(
                f"k={self.k} does not match the {len(self.examples)} examples supplied"
            )
        if self.strategy == ZERO_SHOT and self.k != 0:
            raise PromptError("zero_shot prompts take no examples")
        if self.max_input_tokens < 1:
            raise PromptError("max_input_tokens must be positive")


@dataclass(frozen=True)
class RenderedPrompt:
    """Final prompt text with its token estimate and originating strategy."""

    text: str
    token_estimate: int
    strategy: str

    @property
    def digest(self) -> str:
        """Hex SHA-256 of the prompt text, used in run records."""
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()


def compact_schema_text(schema: DatabaseSchema) -> str:
    """One-line table(col, ...) rendering used on example Schema lines."""
    return ", ".join(
        f"{table.name}({', '.join(table.column_names())})" for table in schema.tables
    )


def extract_constraint_phrases(instruction: str) -> tuple[str, ...]:
    """Comparator/aggregate phrases from an instruction, verbatim, in order."""
    seen: list[str] = []
    for match in _CONSTRAINT_PHRASE.finditer(instruction):
        phrase = match.group(0)
        if phrase not in seen:
            seen.append(phrase)
    return tuple(seen)


def _example_block(point: ExamplePoint, schema: DatabaseSchema) -> str:
    return (
        f"Instruction: {point.instruction}\n"
        f"Schema: {compact_schema_text(schema)}\n"
        f"SQL: {point.gold_sql}"
    )


def _target_block(spec: PromptSpec, schema: DatabaseSchema) -> str:
    lines = [f"Instruction: {spec.target.instruction}"]
    lines.extend(spec.clarifications)
    if spec.strategy == INSTRUCTION_FOCUSED_FEW_SHOT:
        phrases = extract_constraint_phrases(spec.target.instruction)
        if phrases:
            lines.append("Constraints: " + "; ".join(phrases))
    if spec.strategy == SCHEMA_AWARE_FEW_SHOT:
        schema_line = inline_schema_text(schema, include_keys=True)
    else:
        schema_line = compact_schema_text(schema)
    lines.append(f"Schema: {schema_line}")
    lines.append("SQL:")
    return "\n".join(lines)


def render(spec: PromptSpec, catalog: SchemaCatalog) -> RenderedPrompt:
    """Render a prompt spec to its final text.

    Pure and byte-deterministic. Blocks are joined by blank lines, examples
    in spec order, target last. Raises PromptBudgetError (naming the
    overflow) when the estimate exceeds the budget; prompts are never
    silently truncated.
    """
    blocks: list[str] = []
    preamble = spec.preamble
    if preamble is None and spec.strategy in _PREAMBLE_STRATEGIES:
        preamble = default_preamble()
    if preamble:
        blocks.append(preamble.rstrip("\n"))
    for point in spec.examples:
        blocks.append(_example_block(point, catalog.get(point.schema_id)))
    blocks.append(_target_block(spec, catalog.get(spec.target.schema_id)))
    text = "\n\n".join(blocks)

    token_estimate = estimate_tokens(text)
    if token_estimate > spec.max_input_tokens:
        overflow = token_estimate - spec.max_input_tokens
        raise PromptBudgetError(
            f"prompt estimate of {token_estimate} tokens exceeds the "
            f"{spec.max_input_tokens}-token budget by {overflow}",
            overflow=overflow,
        )
    return RenderedPrompt(text=text, token_estimate=token_estimate, strategy=spec.strategy)


def token_overlap(a: str, b: str) -> float:
    """Jaccard similarity of the whitespace token sets of two strings."""
    tokens_a = set(a.split())
    tokens_b = set(b.split())
    union = tokens_a | tokens_b
    if not union:
        return 0.0
    return len(tokens_a & tokens_b) / len(union)


def select_examples(
    corpus: list[ExamplePoint],
    target_instruction: str,
    k: int,
    mode: str = SELECT_FIRST_K,
    seed: int = 0,
) -> list[ExamplePoint]:
    """Choose k corpus examples deterministically.

    first_k takes the corpus prefix; seeded_random samples with the given
    seed; token_overlap ranks by Jaccard similarity between instruction
    token sets, descending, ties broken by corpus order.
    """
    if not 0 <= k <= len(corpus):
        raise PromptError(f"k={k} is out of range for a corpus of {len(corpus)}")
    if mode == SELECT_FIRST_K:
        return list(corpus[:k])
    if mode == SELECT_SEEDED_RANDOM:
        return random.Random(seed).sample(corpus, k)
    if mode == SELECT_TOKEN_OVERLAP:
        ranked = sorted(
            range(len(corpus)),
            key=lambda i: (-token_overlap(target_instruction, corpus[i].instruction), i),
        )
        return [corpus[i] for i in ranked[:k]]
    raise PromptError(f"unknown selection mode {mode!r}; expected one of {SELECTION_MODES}")


@dataclass(frozen=True)
class CostModel:
    """Token bookkeeping for the quadratic-attention cost estimate.

    corpus_size is the selection pool size E; k examples of example_tokens
    (L_e) each join a question of question_tokens (L_q); attempts is the
    refinement bound t. sql_tokens, attention_heads, and hidden_dim are
    carried for reporting but do not enter the totals.
    """

    corpus_size: int
    k: int
    example_tokens: int
    question_tokens: int
    attempts: int = 1
    sql_tokens: int = 0
    attention_heads: int | None = None
    hidden_dim: int | None = None

    def __post_init__(self):
        for name in ("corpus_size", "k", "example_tokens", "question_tokens", "sql_tokens"):
            if getattr(self, name) < 0:
                raise PromptError(f"{name} must be non-negative")
        if self.attempts < 1:
            raise PromptError("attempts must be at least 1")


@dataclass(frozen=True)
class CostReport:
    """Exact integer cost figures derived from a CostModel."""

    prompt_tokens: int
    per_layer_token_pair_ops: int
    total_ops_over_attempts: int
    selection_cost_class: str = field(default="O(E)")

    def as_dict(self) -> dict:
        return {
            "prompt_tokens": self.prompt_tokens,
            "per_layer_token_pair_ops": self.per_layer_token_pair_ops,
            "total_ops_over_attempts": self.total_ops_over_attempts,
            "selection_cost_class": self.selection_cost_class,
        }


def estimate_cost(model: CostModel) -> CostReport:
    """Integer cost report: L = k*L_e + L_q, L^2 per layer, t*L^2 over attempts.

    Example selection itself scans the pool once, hence the linear O(E)
    class in the report.
    """
    prompt_tokens = model.k * model.example_tokens + model.question_tokens
    per_layer = prompt_tokens * prompt_tokens
    return CostReport(
        prompt_tokens=prompt_tokens,
        per_layer_token_pair_ops=per_layer,
        total_ops_over_attempts=model.attempts * per_layer,
    )
