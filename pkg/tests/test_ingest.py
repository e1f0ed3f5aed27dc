import json

from hypothesis import given, strategies as st

from mathcurate.ingest import (
    OMNIMATH_NO_SOLUTION_SENTINEL,
    RejectSink,
    answer_filter,
    clean_aops,
    clean_omnimath,
    extract_boxed,
    filter_asymptote,
    load_jsonl,
)
from mathcurate.records import Decision, Source, make_record


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


class TestLoadJsonl:
    def test_valid_lines_in_order(self, tmp_path):
        path = tmp_path / "in.jsonl"
        write_lines(path, [json.dumps({"problem": f"p{i}", "solution": f"s{i}"}) for i in range(3)])
        records = list(load_jsonl(path, "gsm8k"))
        assert [r.problem for r in records] == ["p0", "p1", "p2"]
        assert all(r.source is Source.GSM8K for r in records)

    def test_missing_problem_goes_to_reject_sink(self, tmp_path):
        path = tmp_path / "in.jsonl"
        write_lines(path, [json.dumps({"problem": "ok"}), json.dumps({"solution": "only"})])
        sink = RejectSink()
        records = list(load_jsonl(path, "gsm8k", reject_sink=sink))
        assert len(records) == 1
        assert sink.entries == [{"line": 2, "reason": "missing field: problem"}]

    def test_bad_json_and_empty_problem_rejected_with_line_numbers(self, tmp_path):
        path = tmp_path / "in.jsonl"
        write_lines(path, ["{not json", json.dumps({"problem": "  "}), json.dumps({"problem": "ok"})])
        sink = RejectSink()
        records = list(load_jsonl(path, "harp", reject_sink=sink))
        assert [r.problem for r in records] == ["ok"]
        assert [e["line"] for e in sink.entries] == [1, 2]

    def test_empty_file(self, tmp_path):
        path = tmp_path / "in.jsonl"
        path.write_text("", encoding="utf-8")
        sink = RejectSink()
        assert list(load_jsonl(path, "gsm8k", reject_sink=sink)) == []
        assert len(sink) == 0

    def test_answer_and_extras_preserved(self, tmp_path):
        path = tmp_path / "in.jsonl"
        write_lines(path, [json.dumps({"problem": "p", "answer": " 42 ", "level": 3})])
        (record,) = load_jsonl(path, "math")
        assert record.final_answer == "42"
        assert record.meta["level"] == "3"

    def test_final_answer_alias(self, tmp_path):
        path = tmp_path / "in.jsonl"
        write_lines(path, [json.dumps({"problem": "p", "final_answer": "7"})])
        (record,) = load_jsonl(path, "math")
        assert record.final_answer == "7"


class TestAsymptoteFilter:
    def test_figure_code_drops(self):
        record = make_record("harp", "As shown. [asy] draw((0,0)--(1,1)); [/asy]")
        verdict = filter_asymptote(record)
        assert verdict.decision is Decision.DROP
        assert "offset 10" in verdict.detail

    def test_plain_problem_keeps(self):
        record = make_record("harp", "Find the area of the triangle.")
        assert filter_asymptote(record).decision is Decision.KEEP

    def test_match_is_case_sensitive(self):
        record = make_record("harp", "uses [ASY] markup")
        assert filter_asymptote(record).decision is Decision.KEEP


class TestOmnimathCleaner:
    def test_sentinel_solution_drops(self):
        record = make_record("omni_math", "Some problem.", OMNIMATH_NO_SOLUTION_SENTINEL)
        _, verdict = clean_omnimath(record)
        assert verdict.decision is Decision.DROP

    def test_italic_attribution_removed(self):
        record = make_record("omni_math", "Find all primes. [i] J. Doe [/i]")
        cleaned, verdict = clean_omnimath(record)
        assert verdict.decision is Decision.KEEP
        assert cleaned.problem == "Find all primes."

    def test_trailing_name_parens_removed(self):
        record = make_record("omni_math", "Evaluate the sum. (Karl Czakler)")
        cleaned, _ = clean_omnimath(record)
        assert cleaned.problem == "Evaluate the sum."

    def test_math_parens_survive(self):
        text = "Let $(a, b)$ satisfy $(a+b)^2 = 4$. Find $ab$. (Answer in units)"
        record = make_record("omni_math", text)
        cleaned, _ = clean_omnimath(record)
        assert cleaned.problem == text

    def test_scoring_sentence_removed(self):
        text = (
            "Compute the value of $x$. If the correct answer is X and your answer is Y, "
            "you get points based on the difference."
        )
        record = make_record("omni_math", text)
        cleaned, _ = clean_omnimath(record)
        assert cleaned.problem == "Compute the value of $x$."

    def test_unchanged_keeps_identity(self):
        record = make_record("omni_math", "Just a problem with no junk.")
        cleaned, verdict = clean_omnimath(record)
        assert cleaned.problem == record.problem
        assert verdict.detail == "unchanged"

    def test_idempotent(self):
        record = make_record("omni_math", "Find all primes. [i] J. Doe [/i] (Ann Author)")
        once, _ = clean_omnimath(record)
        twice, _ = clean_omnimath(once)
        assert once.problem == twice.problem


class TestAopsCleaner:
    def test_proposed_by_stripped_to_sentence_end(self):
        record = make_record("aops_forum", "Find m+n. Proposed by A. Person")
        assert clean_aops(record).problem == "Find m+n."

    def test_point_annotation_stripped(self):
        record = make_record("aops_forum", "(1 point) Compute 2+2.")
        assert clean_aops(record).problem == "Compute 2+2."

    def test_trailing_year_stripped(self):
        record = make_record("aops_forum", "Evaluate the product. [2003]")
        assert clean_aops(record).problem == "Evaluate the product."

    def test_untouched_text_is_identical(self):
        text = "Let $n$ be a positive integer. Compute $n^2$."
        record = make_record("aops_forum", text)
        assert clean_aops(record).problem == text

    def test_idempotent(self):
        record = make_record("aops_forum", "(2 points) Find x. Proposed by J. Q. Author. [1999]")
        once = clean_aops(record)
        assert clean_aops(once).problem == once.problem


class TestExtractBoxed:
    def test_nested_fraction(self):
        out = extract_boxed("This simplifies to \\boxed{\\frac{1}{64}}.")
        assert out.contents == ("\\frac{1}{64}",)

    def test_tuple_answer(self):
        out = extract_boxed("the answer is \\boxed{(a, b, c) = (8, 3, 1)}")
        assert out.contents == ("(a, b, c) = (8, 3, 1)",)

    def test_no_box(self):
        out = extract_boxed("no box here")
        assert out.contents == ()
        assert out.malformed == ()

    def test_two_boxes_counted(self):
        out = extract_boxed("\\boxed{1} and \\boxed{2}")
        assert out.contents == ("1", "2")

    def test_escaped_braces_are_literal(self):
        out = extract_boxed("\\boxed{\\{1, 2\\}}")
        assert out.contents == ("\\{1, 2\\}",)

    def test_unbalanced_is_malformed_not_fatal(self):
        out = extract_boxed("\\boxed{\\frac{1}{2350")
        assert out.contents == ()
        assert out.malformed == (0,)

    def test_malformed_then_valid_recovers(self):
        out = extract_boxed("\\boxed{1 \\boxed{2}")
        assert out.contents == ("2",)
        assert len(out.malformed) == 1

    def test_spans_reinsert_to_original(self):
        text = "First \\boxed{x^{2}} then \\boxed{\\frac{a}{b}} done"
        out = extract_boxed(text)
        rebuilt = list(text)
        for content, (start, end) in zip(out.contents, out.spans):
            assert text[start:end] == content
            rebuilt[start:end] = list(content)
        assert "".join(rebuilt) == text

    def test_spans_ordered_and_disjoint(self):
        out = extract_boxed("\\boxed{a} \\boxed{b} \\boxed{c}")
        spans = list(out.spans)
        assert spans == sorted(spans)
        for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
            assert e1 <= s2


@given(st.lists(st.text(alphabet="ab{}\\ ", max_size=8), max_size=4))
def test_extract_boxed_counts_balanced_regions(fragments):
    """Text built from n well-formed boxed regions yields exactly n contents."""
    pieces = []
    expected = []
    for frag in fragments:
        content = frag.replace("{", "").replace("}", "").replace("\\", "")
        expected.append(content)
        pieces.append("\\boxed{" + content + "} filler")
    text = " ".join(pieces)
    out = extract_boxed(text)
    assert list(out.contents) == expected


class TestAnswerFilter:
    def test_single_extraction_sets_answer(self):
        record = make_record("cn_k12", "What is $u_5$?", "Therefore \\boxed{53}")
        updated, verdict = answer_filter(record, extract_boxed(record.solution))
        assert verdict.decision is Decision.KEEP
        assert updated.final_answer == "53"

    def test_zero_extractions_drop(self):
        record = make_record("cn_k12", "p", "no box")
        _, verdict = answer_filter(record, extract_boxed(record.solution))
        assert verdict.decision is Decision.DROP

    def test_two_extractions_drop(self):
        record = make_record("cn_k12", "p", "\\boxed{1} and \\boxed{2}")
        _, verdict = answer_filter(record, extract_boxed(record.solution))
        assert verdict.decision is Decision.DROP

    def test_whitespace_only_box_drops(self):
        record = make_record("cn_k12", "p", "Thus \\boxed{  }")
        _, verdict = answer_filter(record, extract_boxed(record.solution))
        assert verdict.decision is Decision.DROP
        assert "empty boxed answer" in verdict.detail

    def test_preparsed_answer_passes_through(self):
        record = make_record("harp", "p", "solution without box").replace(final_answer="42")
        updated, verdict = answer_filter(record, extract_boxed(record.solution))
        assert verdict.decision is Decision.KEEP
        assert updated.final_answer == "42"
