"""Statement recovery from raw completions."""

import random
import re

import pytest

from t2s import ExtractionError, extract_sql

from conftest import golden

WORD = re.compile(r"\w+")


def _words(text: str) -> set[str]:
    return {w.lower() for w in WORD.findall(text)}


class TestGoldenRaws:
    def test_prompt_echo_with_escape_artifacts(self):
        raw = golden("extraction/entrepreneur_raw.txt")
        clean = golden("extraction/entrepreneur_clean.txt").rstrip("\n")
        result = extract_sql(raw)
        assert result.sql == clean
        assert result.backslashes_removed == 6
        assert result.discarded_prefix_len > 0

    def test_quote_wrapped_single_line(self):
        raw = golden("extraction/singer_raw.txt")
        clean = golden("extraction/singer_clean.txt").rstrip("\n")
        result = extract_sql(raw)
        assert result.sql == clean
        assert result.backslashes_removed == 2
        assert result.discarded_suffix_len > 0


class TestRegionSelection:
    def test_last_response_marker_wins(self):
        raw = (
            "# Response:\nSELECT bad FROM echo;\n\n"
            "# Response:\nSELECT good FROM target;"
        )
        assert extract_sql(raw).sql == "SELECT good FROM target;"

    def test_marker_label_variants(self):
        for marker in ("# Response:", "#Response:", "# response", "## Response :"):
            raw = f"SELECT echoed FROM prompt;\n{marker}\nSELECT x FROM t;"
            assert extract_sql(raw).sql == "SELECT x FROM t;", marker

    def test_last_sql_label_wins_inside_region(self):
        raw = (
            "Instruction: a\nSQL: SELECT one FROM examples;\n\n"
            "Instruction: b\nSQL: SELECT two FROM target;"
        )
        assert extract_sql(raw).sql == "SELECT two FROM target;"

    def test_sql_label_without_statement_falls_back(self):
        # nothing follows the label; the statement before it is still found
        raw = "SELECT x FROM t;\nSQL:"
        assert extract_sql(raw).sql == "SELECT x FROM t;"

    def test_subquery_never_shadows_enclosing_statement(self):
        raw = (
            "SELECT city_name FROM city WHERE population = "
            "( SELECT MAX ( population ) FROM city ) AND state_name = \"wyoming\";"
        )
        assert extract_sql(raw).sql == raw

    def test_union_operand_never_shadows_first_branch(self):
        raw = "SELECT a FROM t UNION SELECT b FROM u;"
        assert extract_sql(raw).sql == raw

    def test_last_full_statement_wins(self):
        raw = "SELECT a FROM t;\nSELECT b FROM u;"
        assert extract_sql(raw).sql == "SELECT b FROM u;"

    def test_with_keyword_anchors(self):
        raw = "notes\nWITH top AS (SELECT a FROM t) SELECT a FROM top;"
        assert extract_sql(raw).sql == (
            "WITH top AS (SELECT a FROM t) SELECT a FROM top;"
        )


class TestTermination:
    def test_semicolon_inside_quotes_is_not_a_terminator(self):
        raw = "SELECT name FROM t WHERE note = 'stop; go' AND x = 1; trailing"
        assert extract_sql(raw).sql == "SELECT name FROM t WHERE note = 'stop; go' AND x = 1;"

    def test_code_fence_line_terminates_unterminated_statement(self):
        raw = "```sql\nSELECT a FROM t\n```\nexplanation"
        assert extract_sql(raw).sql == "SELECT a FROM t"

    def test_trailing_quotes_stripped_only_without_semicolon(self):
        assert extract_sql('SELECT a FROM t"').sql == "SELECT a FROM t"
        kept = extract_sql('prefix "SELECT a FROM t WHERE x = 1;"')
        assert kept.sql == "SELECT a FROM t WHERE x = 1;"

    def test_newline_runs_flatten_to_single_spaces(self):
        raw = "SELECT a,\n       b\n\nFROM   t\nWHERE x = 1;"
        assert extract_sql(raw).sql == "SELECT a, b FROM t WHERE x = 1;"


class TestBookkeeping:
    def test_discard_lengths_are_exact_in_backslash_free_coordinates(self):
        raw = "noise \\n# Response: SELECT a FROM t; -- done"
        cleaned = raw.replace("\\", "")
        result = extract_sql(raw)
        assert result.backslashes_removed == 1
        assert result.discarded_prefix_len == cleaned.index("SELECT")
        assert result.discarded_suffix_len == len(cleaned) - cleaned.index(";") - 1

    def test_no_statement_raises(self):
        with pytest.raises(ExtractionError):
            extract_sql("no sql here, sorry")
        with pytest.raises(ExtractionError):
            extract_sql("# Response:\n")


CLEAN_POOL = (
    "SELECT name FROM Employees WHERE salary > 50000;",
    "SELECT AVG(salary) FROM Employees WHERE department = 'HR';",
    "SELECT country FROM singer WHERE age > 20 GROUP BY country;",
    "SELECT p.date_of_birth FROM people p JOIN entrepreneur e "
    "ON p.people_id = e.people_id WHERE e.company != 'Tillman Ernser';",
    'SELECT city_name FROM city WHERE population = ( SELECT MAX ( population ) '
    'FROM city WHERE state_name = "wyoming" ) AND state_name = "wyoming";',
    "SELECT DISTINCT t1.authorid FROM author AS t1 JOIN writes AS t2 "
    "ON t1.authorid = t2.authorid WHERE t1.authorname = 'brian curless';",
)

PREFIXES = (
    "",
    "Here is the answer.\n",
    "# Instruction:\n'find the rows'\\n\n\n",
    "# Schema:\n{'database': 'demo', 'metadata': []}\\n\n",
    "#Response:\n",
    "# Response:\n\"",
    "## Response :\nSQL: ",
)

# junk after a terminated statement; quote wraps only ever follow a semicolon
TERMINATED_SUFFIXES = ("", "\n", '"\n', "\\\")\n", "\n```\n", "\n-- end of answer\n", "'\n")
# an unterminated statement runs to end of text or a fence line, nothing else
UNTERMINATED_SUFFIXES = ("", "\n", "\n```\nexplanation\n")


def _perturb(rng: random.Random, clean: str) -> str:
    """Wrap a clean statement in realistic completion noise."""
    body = clean
    # escape existing quote characters with backslashes, removal restores them
    if rng.random() < 0.5:
        body = body.replace("'", "\\'")
    if rng.random() < 0.3:
        body = body.replace('"', '\\"')
    # break some spaces into newline runs, sometimes with a trailing backslash
    pieces = body.split(" ")
    out = [pieces[0]]
    for piece in pieces[1:]:
        roll = rng.random()
        if roll < 0.15:
            out.append("\n" + piece)
        elif roll < 0.2:
            out.append("\\\n  " + piece)
        else:
            out.append(" " + piece)
    body = "".join(out)
    if rng.random() < 0.3 and body.endswith(";"):
        body = body[:-1]
        suffix = rng.choice(UNTERMINATED_SUFFIXES)
    else:
        suffix = rng.choice(TERMINATED_SUFFIXES)
    return rng.choice(PREFIXES) + body + suffix


class TestPerturbations:
    def test_recovery_idempotence_and_identifier_conservation(self):
        rng = random.Random(20260822)
        for trial in range(500):
            clean = rng.choice(CLEAN_POOL)
            raw = _perturb(rng, clean)
            result = extract_sql(raw)
            # recovered statement matches the original up to the semicolon
            assert result.sql.rstrip(";") == clean.rstrip(";"), raw
            # running extraction on its own output changes nothing
            again = extract_sql(result.sql)
            assert again.sql == result.sql
            assert again.backslashes_removed == 0
            # nothing is invented: every output word appears in the input
            assert _words(result.sql) <= _words(raw.replace("\\", "")), raw
