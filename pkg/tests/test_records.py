import pytest
from hypothesis import given, strategies as st

from mathcurate.records import (
    Decision,
    FilterId,
    FilterVerdict,
    Method,
    ProvenanceLedger,
    RecordError,
    Source,
    Status,
    append_verdict,
    make_record,
)


def keep(detail=""):
    return FilterVerdict(FilterId.PROOF, Method.RULE, Decision.KEEP, detail=detail)


def drop(detail="matched"):
    return FilterVerdict(FilterId.PROOF, Method.RULE, Decision.DROP, detail=detail)


def test_make_record_basic():
    record = make_record("gsm8k", "Find x.", None)
    assert record.status is Status.ACTIVE
    assert record.final_answer is None
    assert record.source is Source.GSM8K
    assert record.meta == {}


def test_make_record_deterministic_id():
    a = make_record("gsm8k", "Find x.", None)
    b = make_record("gsm8k", "Find x.", None)
    assert a.id == b.id


def test_make_record_id_depends_on_all_three_inputs():
    base = make_record("gsm8k", "Find x.", "x = 1")
    assert make_record("harp", "Find x.", "x = 1").id != base.id
    assert make_record("gsm8k", "Find y.", "x = 1").id != base.id
    assert make_record("gsm8k", "Find x.", "x = 2").id != base.id


def test_make_record_empty_problem_rejected():
    with pytest.raises(RecordError, match="empty problem"):
        make_record("harp", "", None)
    with pytest.raises(RecordError, match="harp"):
        make_record("harp", "   ", None)


def test_meta_mutation_does_not_change_id():
    record = make_record("cn_k12", "Compute 1+1.")
    tagged = record.with_meta(domain_omni="Algebra")
    assert tagged.id == record.id
    assert record.meta == {}


def test_append_keep_then_drop():
    ledger = ProvenanceLedger(record_id="r1")
    append_verdict(ledger, keep())
    assert len(ledger.verdicts) == 1
    assert ledger.status is Status.ACTIVE
    append_verdict(ledger, drop())
    assert ledger.status is Status.DROPPED


def test_append_after_drop_errors():
    ledger = ProvenanceLedger(record_id="r1")
    append_verdict(ledger, drop())
    with pytest.raises(RecordError, match="already dropped"):
        append_verdict(ledger, keep())


def test_drop_requires_detail():
    with pytest.raises(RecordError):
        FilterVerdict(FilterId.PROOF, Method.RULE, Decision.DROP, detail="")


def test_sequences_strictly_increase():
    ledger = ProvenanceLedger(record_id="r1")
    append_verdict(ledger, keep())
    append_verdict(ledger, keep())
    assert [v.sequence for v in ledger.verdicts] == [0, 1]
    with pytest.raises(RecordError, match="strictly increasing"):
        append_verdict(ledger, FilterVerdict(FilterId.PROOF, Method.RULE, Decision.KEEP, sequence=1))


@given(st.lists(st.sampled_from(["keep", "flag"]), max_size=8), st.booleans())
def test_replay_status_matches_final_status(prefix, ends_in_drop):
    ledger = ProvenanceLedger(record_id="r1")
    for kind in prefix:
        decision = Decision.KEEP if kind == "keep" else Decision.FLAG
        append_verdict(ledger, FilterVerdict(FilterId.PROOF, Method.RULE, decision, detail="x"))
    if ends_in_drop:
        append_verdict(ledger, drop())
    expected = Status.DROPPED if ends_in_drop else Status.ACTIVE
    assert ledger.status is expected
    assert ledger.replay_status() is expected
