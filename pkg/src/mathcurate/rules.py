"""Deterministic regular-expression filters plus the language gate.

Every detector is a pure function of its text inputs. The pattern catalog is
exported so reports can cite exactly which sub-pattern fired.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass

from .records import Decision, FilterId, FilterVerdict, Method, ProblemRecord


@dataclass(frozen=True)
class RuleMatch:
    filter_id: FilterId
    pattern_name: str
    span: tuple[int, int]


# --- shared helpers ---------------------------------------------------------

_SENTENCE_BREAK = re.compile(r"[.!?](?=\s)")


def final_segment(text: str) -> str:
    """Last line of a multi-line text, else the last sentence.

    A sentence terminator must be followed by whitespace, so decimals such
    as 2.5 do not split sentences. A single trailing terminator is ignored
    when locating the break.
    """
    t = text.rstrip()
    if not t:
        return ""
    if "\n" in t:
        return t[t.rfind("\n") + 1 :].strip()
    core = t[:-1] if t[-1] in ".!?" else t
    breaks = list(_SENTENCE_BREAK.finditer(core))
    if breaks:
        return t[breaks[-1].end() :].strip()
    return t


# --- multiple choice --------------------------------------------------------

_SHAPE_NOUNS = (
    "rectangle|triangle|square|quadrilateral|polygon|pentagon|hexagon|heptagon|"
    "octagon|parallelogram|trapezoid|trapezium|rhombus|circle|semicircle|cube|"
    "cuboid|prism|pyramid|tetrahedron|sphere|cylinder|cone|angle|segment|line|"
    "arc|chord|diagonal|solid|vertices|vertex|points?"
)
_SHAPE_BEFORE = re.compile(rf"\b(?i:{_SHAPE_NOUNS})s?\s+\$?([A-Z]{{3,}})\b")
_SHAPE_AFTER = re.compile(rf"\b([A-Z]{{3,}})\$?\s+(?i:{_SHAPE_NOUNS})\b")
_MULTI_DIGIT = re.compile(r"\d{2,}")


def _mask_span(chars: list[str], start: int, end: int) -> None:
    for i in range(start, end):
        chars[i] = "#"


def mask_choice_distractors(problem: str) -> str:
    """Blank out shape labels (letter runs next to geometric nouns) and plain
    multi-digit numbers before option detection; length is preserved so match
    spans still index the original text."""
    chars = list(problem)
    for pattern in (_SHAPE_BEFORE, _SHAPE_AFTER):
        for m in pattern.finditer(problem):
            _mask_span(chars, m.start(1), m.end(1))
    for m in _MULTI_DIGIT.finditer(problem):
        _mask_span(chars, m.start(), m.end())
    return "".join(chars)


def _label_patterns(label: str, numeric: bool) -> list[re.Pattern]:
    escaped = re.escape(label)
    guard = r"(?<!\d)" if numeric else r"(?<![A-Za-z])"
    return [
        re.compile(rf"\(\s*{escaped}\s*\)"),
        re.compile(rf"{guard}{escaped}\)"),
        re.compile(rf"{guard}{escaped}\.(?=\s)"),
    ]

_LETTER_LABELS = ["A", "B", "C", "D", "E"]
_NUMBER_LABELS = ["1", "2", "3", "4"]
_LABEL_FORM_NAMES = ("paren", "rparen", "period")
_MC_LETTER_FORMS = {
    name: [_label_patterns(lab, numeric=False)[i] for lab in _LETTER_LABELS]
    for i, name in enumerate(_LABEL_FORM_NAMES)
}
_MC_NUMBER_FORMS = {
    name: [_label_patterns(lab, numeric=True)[i] for lab in _NUMBER_LABELS]
    for i, name in enumerate(_LABEL_FORM_NAMES)
}


def _ascending_chain(
    text: str, patterns: list[re.Pattern], required: int
) -> tuple[int, int] | None:
    """Positions of labels 0..required-1 in ascending text order, extended
    greedily over any further labels; None when the chain is incomplete."""
    pos = 0
    first_start = None
    last_end = None
    found = 0
    for pattern in patterns:
        m = pattern.search(text, pos)
        if m is None:
            break
        if first_start is None:
            first_start = m.start()
        last_end = m.end()
        pos = m.end()
        found += 1
    if found >= required:
        return (first_start, last_end)
    return None


def detect_multiple_choice(problem: str) -> RuleMatch | None:
    """Match option lists: labeled letters A..C(+) or labeled numbers 1..4,
    occurring in ascending order, after masking shape labels and plain
    multi-digit numbers."""
    masked = mask_choice_distractors(problem)
    for form_name, patterns in _MC_LETTER_FORMS.items():
        span = _ascending_chain(masked, patterns, required=3)
        if span:
            return RuleMatch(FilterId.MULTIPLE_CHOICE, f"letter_options_{form_name}", span)
    for form_name, patterns in _MC_NUMBER_FORMS.items():
        span = _ascending_chain(masked, patterns, required=4)
        if span:
            return RuleMatch(FilterId.MULTIPLE_CHOICE, f"number_options_{form_name}", span)
    return None


# --- true/false and yes/no ---------------------------------------------------

_TRUE_FALSE = re.compile(r"(?i)\b(?:true|false)\b")
_YES_NO = re.compile(r"(?i)\b(?:yes|no)\b")
_YN_OPENER = re.compile(r"(?i)^(?:is|are|do|does|can)\b")


def _scan_answer_then_solution(record: ProblemRecord) -> tuple[str, str] | None:
    if record.final_answer:
        return record.final_answer, "answer"
    if record.solution:
        return final_segment(record.solution), "solution_final_line"
    return None


def detect_true_false(record: ProblemRecord) -> RuleMatch | None:
    """Match "true"/"false" as a whole word in the answer, else in the final
    line of the solution."""
    scanned = _scan_answer_then_solution(record)
    if scanned is None:
        return None
    text, where = scanned
    m = _TRUE_FALSE.search(text)
    if m:
        return RuleMatch(FilterId.TRUE_FALSE, f"{where}_true_false", m.span())
    return None


def detect_yes_no(record: ProblemRecord) -> RuleMatch | None:
    """Match "yes"/"no" in the answer or solution final line, or a final
    problem sentence opening with an interrogative (is/are/do/does/can)."""
    scanned = _scan_answer_then_solution(record)
    if scanned is not None:
        text, where = scanned
        m = _YES_NO.search(text)
        if m:
            return RuleMatch(FilterId.YES_NO, f"{where}_yes_no", m.span())
    tail = final_segment(record.problem)
    m = _YN_OPENER.search(tail)
    if m:
        offset = record.problem.rstrip().rfind(tail)
        return RuleMatch(
            FilterId.YES_NO, "question_interrogative_opener", (offset + m.start(), offset + m.end())
        )
    return None


# --- multi-part ---------------------------------------------------------------

_ROMANS = ["I", "II", "III", "IV", "V", "VI", "VII", "VIII", "IX", "X", "XI", "XII"]
_CIRCLED = [chr(0x2460 + i) for i in range(12)]  # circled 1..12
_UNICODE_ROMANS = [chr(0x2160 + i) for i in range(12)]  # unicode numeral 1..12


def _marker_patterns(labels: list[str], numeric: bool, form: str) -> list[re.Pattern]:
    out = []
    for label in labels:
        escaped = re.escape(label)
        if form == "paren":
            out.append(re.compile(rf"\(\s*{escaped}\s*\)"))
        elif form == "period":
            guard = r"(?<![\dA-Za-z])" if numeric else r"(?<![A-Za-z])"
            out.append(re.compile(rf"{guard}{escaped}\.(?=\s)"))
        else:  # bare (unambiguous symbol sets only)
            out.append(re.compile(escaped))
    return out

_MULTI_PART_FAMILIES: dict[str, list[re.Pattern]] = {
    "numbered_paren": _marker_patterns(["1", "2", "3", "4"], True, "paren"),
    "numbered_period": _marker_patterns(["1", "2", "3", "4"], True, "period"),
    "roman_paren": _marker_patterns(_ROMANS, False, "paren"),
    "roman_period": _marker_patterns(_ROMANS, False, "period"),
    "unicode_roman": _marker_patterns(_UNICODE_ROMANS, False, "bare"),
    "circled_digit": _marker_patterns(_CIRCLED, False, "bare"),
}
_FREEFORM_FAMILIES = {"unicode_roman", "circled_digit"}


def _sentence_initial(text: str, start: int) -> bool:
    prefix = text[:start].rstrip()
    return not prefix or prefix[-1] in ".!?"


def detect_multi_part(problem: str) -> RuleMatch | None:
    """Match ordered part markers: (1)..(2), 1. .. 2., roman numerals, or
    circled digits.

    The opening marker must begin a sentence (start of text, after a newline,
    or after ./?/!), which keeps inline enumerations such as "can be: (1)
    triangle; (2) rectangle" from firing; later markers may follow any list
    separator.
    """
    for family, patterns in _MULTI_PART_FAMILIES.items():
        freeform = family in _FREEFORM_FAMILIES
        pos = 0
        first = None
        while first is None:
            m = patterns[0].search(problem, pos)
            if m is None:
                break
            if freeform or _sentence_initial(problem, m.start()):
                first = m
            else:
                pos = m.end()
        if first is None:
            continue
        span = _ascending_chain(problem[first.start() :], patterns, required=2)
        if span:
            return RuleMatch(
                FilterId.MULTI_PART, family, (first.start() + span[0], first.start() + span[1])
            )
    return None


# --- proof -------------------------------------------------------------------

_PROOF_PHRASES = re.compile(r"(?i)prove that|a proof")


def detect_proof(problem: str) -> RuleMatch | None:
    """Match the literal phrases "prove that" or "a proof" (case-insensitive)."""
    m = _PROOF_PHRASES.search(problem)
    if m:
        name = "prove_that" if m.group().lower().startswith("prove") else "a_proof"
        return RuleMatch(FilterId.PROOF, name, m.span())
    return None


# --- hyperlink -----------------------------------------------------------------

_URL_SCHEME = re.compile(r"(?i)\b[a-z][a-z0-9+.-]*://\S+")
_URL_WWW = re.compile(r"(?i)\bwww\.[a-z0-9-]+(?:\.[a-z0-9-]+)+\S*")


def detect_hyperlink(problem: str) -> RuleMatch | None:
    """Match URLs in scheme://host or www.host form."""
    m = _URL_SCHEME.search(problem)
    if m:
        return RuleMatch(FilterId.HYPERLINK, "url_scheme", m.span())
    m = _URL_WWW.search(problem)
    if m:
        return RuleMatch(FilterId.HYPERLINK, "url_www", m.span())
    return None


# --- language gate --------------------------------------------------------------

_MATH_REGIONS = [
    re.compile(r"\$\$.*?\$\$", re.DOTALL),
    re.compile(r"\$[^$]*\$"),
    re.compile(r"\\\[.*?\\\]", re.DOTALL),
    re.compile(r"\\\(.*?\\\)", re.DOTALL),
]
_LATEX_COMMAND_ARGS = re.compile(r"\\[a-zA-Z]+\*?\s*(?:\{[^{}]*\})+")
_LATEX_COMMAND = re.compile(r"\\[a-zA-Z]+\*?")

# Digits, ASCII punctuation, and common math symbols do not count toward the
# residue that the language classifier sees.
SPECIAL_CHARS = set(string.punctuation) | set(string.digits) | set("±×÷≤≥≠≈∼∞√∑∏∫∂∇∈∉⊂⊃⊆⊇∪∩∧∨¬∀∃→←↔⇒⇐⇔·∙°′″‴")


def strip_latex(text: str) -> str:
    """Remove math regions and LaTeX commands, leaving prose."""
    for pattern in _MATH_REGIONS:
        text = pattern.sub(" ", text)
    previous = None
    while previous != text:
        previous = text
        text = _LATEX_COMMAND_ARGS.sub(" ", text)
    text = _LATEX_COMMAND.sub(" ", text)
    return text.replace("{", " ").replace("}", " ")


def language_residue(text: str) -> str:
    """Prose left after removing LaTeX, digits, and special characters."""
    stripped = strip_latex(text)
    kept = [c for c in stripped if c not in SPECIAL_CHARS]
    return re.sub(r"\s+", " ", "".join(kept)).strip()


def language_gate(problem: str, classifier) -> FilterVerdict:
    """Keep short-residue problems unconditionally; otherwise keep iff the
    classifier's top label is English. Classifier failures flag for retry."""
    residue = language_residue(problem)
    weight = len(residue.replace(" ", ""))
    if weight < 10:
        return FilterVerdict(
            FilterId.LANGUAGE, Method.MODEL, Decision.KEEP, detail=f"short residue ({weight} chars)"
        )
    try:
        label = classifier.top_language(residue)
    except Exception as exc:  # classifier outage must never drop records
        return FilterVerdict(
            FilterId.LANGUAGE, Method.MODEL, Decision.FLAG, detail=f"classifier failure: {exc}"
        )
    if label.lower() in ("en", "eng", "english"):
        return FilterVerdict(FilterId.LANGUAGE, Method.MODEL, Decision.KEEP, detail=f"language={label}")
    return FilterVerdict(FilterId.LANGUAGE, Method.MODEL, Decision.DROP, detail=f"language={label}")


# --- catalog --------------------------------------------------------------------


def pattern_catalog() -> dict[str, dict[str, str]]:
    """filter_id -> pattern_name -> expression, for report citations."""
    catalog: dict[str, dict[str, str]] = {
        FilterId.MULTIPLE_CHOICE.value: {
            "mask_shape_before": _SHAPE_BEFORE.pattern,
            "mask_shape_after": _SHAPE_AFTER.pattern,
            "mask_multi_digit": _MULTI_DIGIT.pattern,
        },
        FilterId.TRUE_FALSE.value: {
            "answer_true_false": _TRUE_FALSE.pattern,
            "solution_final_line_true_false": _TRUE_FALSE.pattern,
        },
        FilterId.YES_NO.value: {
            "answer_yes_no": _YES_NO.pattern,
            "solution_final_line_yes_no": _YES_NO.pattern,
            "question_interrogative_opener": _YN_OPENER.pattern,
        },
        FilterId.MULTI_PART.value: {},
        FilterId.PROOF.value: {
            "prove_that": "(?i)prove that",
            "a_proof": "(?i)a proof",
        },
        FilterId.HYPERLINK.value: {
            "url_scheme": _URL_SCHEME.pattern,
            "url_www": _URL_WWW.pattern,
        },
        FilterId.LANGUAGE.value: {
            "latex_command": _LATEX_COMMAND_ARGS.pattern,
            "special_chars": "".join(sorted(SPECIAL_CHARS)),
        },
    }
    mc = catalog[FilterId.MULTIPLE_CHOICE.value]
    for form_name in _LABEL_FORM_NAMES:
        mc[f"letter_options_{form_name}"] = " .. ".join(
            p.pattern for p in _MC_LETTER_FORMS[form_name][:3]
        )
        mc[f"number_options_{form_name}"] = " .. ".join(
            p.pattern for p in _MC_NUMBER_FORMS[form_name]
        )
    for family, patterns in _MULTI_PART_FAMILIES.items():
        catalog[FilterId.MULTI_PART.value][family] = " .. ".join(p.pattern for p in patterns[:2])
    return catalog


RULE_DETECTORS = {
    FilterId.MULTIPLE_CHOICE: lambda record: detect_multiple_choice(record.problem),
    FilterId.TRUE_FALSE: detect_true_false,
    FilterId.YES_NO: detect_yes_no,
    FilterId.MULTI_PART: lambda record: detect_multi_part(record.problem),
    FilterId.PROOF: lambda record: detect_proof(record.problem),
}
