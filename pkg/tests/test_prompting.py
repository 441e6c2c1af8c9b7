"""Prompt construction: strategies, budgets, selection, and the cost model."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from t2s import (
    CostModel,
    ExamplePoint,
    PromptBudgetError,
    PromptError,
    PromptSpec,
    Target,
    estimate_cost,
    estimate_tokens,
    render,
    select_examples,
    token_overlap,
)
from t2s.prompting import (
    SELECTION_MODES,
    STRATEGIES,
    default_preamble,
    extract_constraint_phrases,
)

from conftest import golden
from oracles import oracle_jaccard, oracle_word_count

SALES_NAMES = ExamplePoint(
    instruction="Find the names of employees working in the Sales department.",
    schema_id="employees",
    gold_sql="SELECT name FROM Employees WHERE department = 'Sales';",
)
BELOW_40K = ExamplePoint(
    instruction="Retrieve employees with a salary below 40k.",
    schema_id="employees",
    gold_sql="SELECT name FROM Employees WHERE salary < 40000;",
)
HR_AVERAGE = ExamplePoint(
    instruction="Find the average salary of employees in the HR department.",
    schema_id="employees",
    gold_sql="SELECT AVG(salary) FROM Employees WHERE department = 'HR';",
)
ABOVE_50K = Target(
    instruction="List all employees earning more than 50k.",
    schema_id="employees",
)
SALES_TOTAL = Target(
    instruction="Find the total salary of all employees in the Sales department.",
    schema_id="employees",
)


class TestGoldens:
    def test_two_shot_prompt(self, catalog):
        spec = PromptSpec(
            strategy="few_shot",
            target=ABOVE_50K,
            examples=(SALES_NAMES, BELOW_40K),
        )
        rendered = render(spec, catalog)
        assert rendered.text + "\n" == golden("prompts/employees_two_shot.txt")
        assert rendered.strategy == "few_shot"
        assert rendered.token_estimate == estimate_tokens(rendered.text)

    def test_zero_shot_prompt(self, catalog):
        spec = PromptSpec(strategy="zero_shot", target=SALES_TOTAL)
        rendered = render(spec, catalog)
        assert rendered.text + "\n" == golden("prompts/sales_total_zero_shot.txt")

    def test_refined_prompt_adds_one_example(self, catalog):
        spec = PromptSpec(
            strategy="few_shot",
            target=SALES_TOTAL,
            examples=(HR_AVERAGE,),
        )
        rendered = render(spec, catalog)
        assert rendered.text + "\n" == golden("prompts/sales_total_refined.txt")

    def test_rendering_is_byte_deterministic(self, catalog):
        spec = PromptSpec(
            strategy="schema_aware_few_shot",
            target=ABOVE_50K,
            examples=(SALES_NAMES,),
        )
        first = render(spec, catalog)
        second = render(spec, catalog)
        assert first.text == second.text
        assert first.digest == second.digest
        assert len(first.digest) == 64


class TestLayout:
    def test_blocks_joined_by_blank_lines(self, catalog):
        spec = PromptSpec(
            strategy="few_shot", target=ABOVE_50K, examples=(SALES_NAMES, BELOW_40K)
        )
        text = render(spec, catalog).text
        blocks = text.split("\n\n")
        assert len(blocks) == 3
        assert blocks[-1].endswith("SQL:")

    def test_examples_keep_spec_order(self, catalog):
        forward = render(
            PromptSpec(
                strategy="few_shot", target=ABOVE_50K, examples=(SALES_NAMES, BELOW_40K)
            ),
            catalog,
        ).text
        backward = render(
            PromptSpec(
                strategy="few_shot", target=ABOVE_50K, examples=(BELOW_40K, SALES_NAMES)
            ),
            catalog,
        ).text
        assert forward != backward
        assert forward.index(SALES_NAMES.gold_sql) < forward.index(BELOW_40K.gold_sql)

    def test_preamble_attaches_to_persona_strategies_only(self, catalog):
        persona_first_line = default_preamble().splitlines()[0]
        for strategy in STRATEGIES:
            examples = () if strategy == "zero_shot" else (SALES_NAMES,)
            spec = PromptSpec(strategy=strategy, target=ABOVE_50K, examples=examples)
            text = render(spec, catalog).text
            expected = strategy in ("structured_few_shot", "instruction_focused_few_shot")
            assert text.startswith(persona_first_line) is expected

    def test_explicit_preamble_wins_and_is_rstripped(self, catalog):
        spec = PromptSpec(
            strategy="zero_shot", target=ABOVE_50K, preamble="Answer with SQL.\n\n"
        )
        text = render(spec, catalog).text
        assert text.startswith("Answer with SQL.\n\nInstruction:")

    def test_empty_preamble_suppresses_persona(self, catalog):
        spec = PromptSpec(
            strategy="structured_few_shot",
            target=ABOVE_50K,
            examples=(SALES_NAMES,),
            preamble="",
        )
        assert render(spec, catalog).text.startswith("Instruction:")

    def test_clarifications_sit_between_instruction_and_schema(self, catalog):
        spec = PromptSpec(
            strategy="zero_shot",
            target=ABOVE_50K,
            clarifications=("Use the exact table names.", "Return one statement."),
        )
        lines = render(spec, catalog).text.splitlines()
        assert lines[0].startswith("Instruction:")
        assert lines[1] == "Use the exact table names."
        assert lines[2] == "Return one statement."
        assert lines[3].startswith("Schema:")
        assert lines[4] == "SQL:"

    def test_constraints_line_only_for_instruction_focused(self, catalog):
        focused = render(
            PromptSpec(
                strategy="instruction_focused_few_shot",
                target=ABOVE_50K,
                examples=(SALES_NAMES,),
            ),
            catalog,
        ).text
        assert "Constraints: more than 50k" in focused
        plain = render(
            PromptSpec(strategy="few_shot", target=ABOVE_50K, examples=(SALES_NAMES,)),
            catalog,
        ).text
        assert "Constraints:" not in plain

    def test_constraints_line_omitted_when_no_phrases(self, catalog):
        spec = PromptSpec(
            strategy="instruction_focused_few_shot",
            target=Target(instruction="Show every city.", schema_id="geo"),
        )
        assert "Constraints:" not in render(spec, catalog).text

    def test_schema_aware_inlines_keyed_dict(self, catalog):
        spec = PromptSpec(
            strategy="schema_aware_few_shot",
            target=Target(instruction="q", schema_id="entrepreneur"),
        )
        text = render(spec, catalog).text
        assert "Schema: {'database': 'entrepreneur'" in text
        assert "'primary_keys':" in text
        assert "'foreign_keys':" in text
        # the compact one-line form is reserved for the non-keyed strategies
        assert "entrepreneur(" not in text


class TestConstraintPhrases:
    def test_phrases_in_order_and_deduplicated(self):
        phrases = extract_constraint_phrases(
            "Count the number of employees with more than 10 sales "
            "and more than 10 returns, at least 2 years."
        )
        # aggregate words are captured verbatim; repeats collapse
        assert phrases == ("Count", "number of", "more than 10", "at least 2")

    def test_no_match_is_empty(self):
        assert extract_constraint_phrases("Show all cities.") == ()


class TestBudget:
    def test_overflow_is_reported_exactly(self, catalog):
        spec = PromptSpec(strategy="zero_shot", target=SALES_TOTAL, max_input_tokens=7)
        base = render(
            PromptSpec(strategy="zero_shot", target=SALES_TOTAL), catalog
        ).token_estimate
        with pytest.raises(PromptBudgetError) as exc_info:
            render(spec, catalog)
        assert exc_info.value.overflow == base - 7
        assert str(base) in str(exc_info.value)

    def test_exact_fit_is_allowed(self, catalog):
        base = render(
            PromptSpec(strategy="zero_shot", target=SALES_TOTAL), catalog
        ).token_estimate
        spec = PromptSpec(
            strategy="zero_shot", target=SALES_TOTAL, max_input_tokens=base
        )
        assert render(spec, catalog).token_estimate == base


class TestSpecValidation:
    def test_unknown_strategy(self):
        with pytest.raises(PromptError, match="unknown strategy"):
            PromptSpec(strategy="chain", target=ABOVE_50K)

    def test_k_derived_from_examples(self):
        spec = PromptSpec(
            strategy="few_shot", target=ABOVE_50K, examples=(SALES_NAMES,)
        )
        assert spec.k == 1

    def test_k_mismatch_rejected(self):
        with pytest.raises(PromptError, match="does not match"):
            PromptSpec(
                strategy="few_shot", target=ABOVE_50K, examples=(SALES_NAMES,), k=2
            )

    def test_zero_shot_takes_no_examples(self):
        with pytest.raises(PromptError, match="zero_shot"):
            PromptSpec(strategy="zero_shot", target=ABOVE_50K, examples=(SALES_NAMES,))

    def test_budget_must_be_positive(self):
        with pytest.raises(PromptError, match="max_input_tokens"):
            PromptSpec(strategy="zero_shot", target=ABOVE_50K, max_input_tokens=0)

    def test_target_validation(self):
        with pytest.raises(PromptError, match="instruction"):
            Target(instruction=" ", schema_id="geo")


class TestTokenEstimate:
    @settings(max_examples=200)
    @given(st.text(alphabet=st.sampled_from(list("ab \t\nxy.,")), max_size=60))
    def test_matches_word_count_oracle(self, text):
        assert estimate_tokens(text) == oracle_word_count(text)

    @settings(max_examples=200)
    @given(
        st.text(alphabet=st.sampled_from(list("abc xyz,")), max_size=40),
        st.text(alphabet=st.sampled_from(list("abc xyz,")), max_size=40),
    )
    def test_overlap_matches_jaccard_oracle(self, a, b):
        assert token_overlap(a, b) == pytest.approx(oracle_jaccard(a, b))


class TestSelection:
    def test_first_k(self, corpus_points):
        assert select_examples(corpus_points, "q", 3) == corpus_points[:3]

    def test_seeded_random_is_deterministic(self, corpus_points):
        a = select_examples(corpus_points, "q", 4, mode="seeded_random", seed=7)
        b = select_examples(corpus_points, "q", 4, mode="seeded_random", seed=7)
        c = select_examples(corpus_points, "q", 4, mode="seeded_random", seed=8)
        assert a == b
        assert a != c
        assert all(p in corpus_points for p in a)
        assert len(set(id(p) for p in a)) == 4

    def test_token_overlap_ranks_by_similarity_then_index(self, corpus_points):
        target = "what is the biggest city in wyoming"
        chosen = select_examples(
            corpus_points, target, len(corpus_points), mode="token_overlap"
        )
        scored = [
            (oracle_jaccard(target, p.instruction), i)
            for i, p in enumerate(corpus_points)
        ]
        expected_order = sorted(range(len(scored)), key=lambda i: (-scored[i][0], i))
        assert chosen == [corpus_points[i] for i in expected_order]

    def test_k_out_of_range(self, corpus_points):
        with pytest.raises(PromptError, match="out of range"):
            select_examples(corpus_points, "q", len(corpus_points) + 1)
        with pytest.raises(PromptError, match="out of range"):
            select_examples(corpus_points, "q", -1)

    def test_unknown_mode(self, corpus_points):
        with pytest.raises(PromptError, match="unknown selection mode"):
            select_examples(corpus_points, "q", 1, mode="best")
        assert set(SELECTION_MODES) == {"first_k", "seeded_random", "token_overlap"}


class TestCostModel:
    def test_worked_example(self):
        model = CostModel(
            corpus_size=1000, k=5, example_tokens=300, question_tokens=30, attempts=3
        )
        report = estimate_cost(model)
        assert report.prompt_tokens == 1530
        assert report.per_layer_token_pair_ops == 2_340_900
        assert report.total_ops_over_attempts == 7_022_700
        assert report.selection_cost_class == "O(E)"
        assert report.as_dict() == {
            "prompt_tokens": 1530,
            "per_layer_token_pair_ops": 2_340_900,
            "total_ops_over_attempts": 7_022_700,
            "selection_cost_class": "O(E)",
        }

    def test_validation(self):
        with pytest.raises(PromptError, match="non-negative"):
            CostModel(corpus_size=-1, k=0, example_tokens=0, question_tokens=0)
        with pytest.raises(PromptError, match="attempts"):
            CostModel(
                corpus_size=1, k=0, example_tokens=0, question_tokens=0, attempts=0
            )

    @settings(max_examples=200)
    @given(
        k=st.integers(min_value=0, max_value=50),
        le=st.integers(min_value=0, max_value=2000),
        lq=st.integers(min_value=0, max_value=500),
        t=st.integers(min_value=1, max_value=8),
    )
    def test_quadratic_law(self, k, le, lq, t):
        report = estimate_cost(
            CostModel(
                corpus_size=10,
                k=k,
                example_tokens=le,
                question_tokens=lq,
                attempts=t,
            )
        )
        length = k * le + lq
        assert report.prompt_tokens == length
        assert report.per_layer_token_pair_ops == length**2
        assert report.total_ops_over_attempts == t * length**2
