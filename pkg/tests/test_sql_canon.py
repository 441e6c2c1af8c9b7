"""Canonicalization: idempotence and the equivalence-class invariances."""

import random

from t2s import canonical_sql, parse_sql
from t2s.sql.canon import canonicalize
from t2s.sql.nodes import sql_text

from ast_gen import (
    flip_comparators,
    perturb_text,
    random_query,
    rename_aliases,
    shuffle_connectives,
)


class TestIdempotence:
    def test_ast_level(self):
        rng = random.Random(4104)
        for trial in range(250):
            query = random_query(rng)
            once = canonicalize(query)
            assert canonicalize(once) == once, sql_text(query)

    def test_string_level(self):
        rng = random.Random(4105)
        for trial in range(250):
            text = sql_text(random_query(rng))
            once = canonical_sql(text)
            assert canonical_sql(once) == once, text

    def test_masked_idempotence(self):
        rng = random.Random(4106)
        for trial in range(200):
            query = random_query(rng)
            once = canonicalize(query, mask_literals=True)
            assert canonicalize(once, mask_literals=True) == once, sql_text(query)


class TestInvariances:
    def test_case_whitespace_semicolon(self):
        rng = random.Random(4107)
        for trial in range(250):
            text = sql_text(random_query(rng))
            perturbed = perturb_text(text, rng)
            assert canonical_sql(perturbed) == canonical_sql(text), perturbed

    def test_alias_renaming(self):
        rng = random.Random(4108)
        for trial in range(250):
            query = random_query(rng)
            renamed = rename_aliases(query, suffix=str(trial % 7))
            assert canonical_sql(sql_text(renamed)) == canonical_sql(
                sql_text(query)
            ), sql_text(query)

    def test_connective_and_in_list_order(self):
        rng = random.Random(4109)
        for trial in range(250):
            query = random_query(rng)
            shuffled = shuffle_connectives(query, rng)
            assert canonical_sql(sql_text(shuffled)) == canonical_sql(
                sql_text(query)
            ), sql_text(query)

    def test_comparator_flips(self):
        rng = random.Random(4110)
        for trial in range(250):
            query = random_query(rng)
            flipped = flip_comparators(query, rng)
            assert canonical_sql(sql_text(flipped)) == canonical_sql(
                sql_text(query)
            ), sql_text(query)

    def test_all_perturbations_stacked(self):
        rng = random.Random(4111)
        for trial in range(200):
            query = random_query(rng)
            variant = shuffle_connectives(
                flip_comparators(rename_aliases(query, "9"), rng), rng
            )
            assert canonical_sql(perturb_text(sql_text(variant), rng)) == canonical_sql(
                sql_text(query)
            ), sql_text(query)


class TestSpotChecks:
    def test_alias_relabeling_is_positional(self):
        # first-declared source gets t1 regardless of the spelled alias
        a = canonical_sql(
            "SELECT x.name FROM emp AS x JOIN dept AS y ON x.id = y.id"
        )
        b = canonical_sql(
            "SELECT p.name FROM emp AS p JOIN dept AS q ON p.id = q.id"
        )
        assert a == b

    def test_join_order_is_structural(self):
        a = canonical_sql("SELECT a FROM emp AS x JOIN dept AS y ON x.id = y.id")
        b = canonical_sql("SELECT a FROM dept AS y JOIN emp AS x ON x.id = y.id")
        assert a != b

    def test_sole_source_qualifier_dropped(self):
        assert canonical_sql("SELECT emp.name FROM emp") == canonical_sql(
            "SELECT name FROM emp"
        )

    def test_keyword_case_and_semicolon(self):
        assert canonical_sql("select NAME from EMP;") == canonical_sql(
            "SELECT name FROM emp"
        )

    def test_and_order(self):
        assert canonical_sql("SELECT a FROM t WHERE x = 1 AND y = 2") == canonical_sql(
            "SELECT a FROM t WHERE y = 2 AND x = 1"
        )

    def test_comparator_flip(self):
        assert canonical_sql("SELECT a FROM t WHERE x > 5") == canonical_sql(
            "SELECT a FROM t WHERE 5 < x"
        )

    def test_literal_masking(self):
        masked = canonical_sql("SELECT a FROM t WHERE x = 5 LIMIT 3", mask_literals=True)
        assert masked == canonical_sql(
            "SELECT a FROM t WHERE x = 9 LIMIT 7", mask_literals=True
        )
        unmasked = canonical_sql("SELECT a FROM t WHERE x = 5 LIMIT 3")
        assert unmasked != canonical_sql("SELECT a FROM t WHERE x = 9 LIMIT 7")

    def test_canonical_output_reparses(self):
        rng = random.Random(4112)
        for trial in range(100):
            text = canonical_sql(sql_text(random_query(rng)))
            assert sql_text(parse_sql(text)) == text
