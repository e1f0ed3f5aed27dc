import numpy as np

from mathcurate.clients import (
    CachedModelClient,
    HeuristicLanguageClassifier,
    MockEmbeddingClient,
    MockModelClient,
    ReplyCache,
    ScriptedModelClient,
    parallel_map,
    prompt_fingerprint,
)
from mathcurate.dedup import SignatureCache
from mathcurate.mocks import build_mock_model
from mathcurate.model_filters import sample_labeled, combine, ClassificationOutcome, Parsed
from mathcurate.records import FilterId, ProvenanceLedger, append_verdict, make_record


def test_mock_model_identical_inputs_identical_replies():
    a = MockModelClient(seed=3)
    b = MockModelClient(seed=3)
    assert a.complete("prompt", key="classify:proof:r1") == b.complete(
        "prompt", key="classify:proof:r1"
    )
    different_seed = MockModelClient(seed=4)
    replies_a = [a.complete("p", key=f"classify:proof:r{i}") for i in range(50)]
    replies_c = [different_seed.complete("p", key=f"classify:proof:r{i}") for i in range(50)]
    assert replies_a != replies_c


def test_mock_model_true_false_tokens():
    client = MockModelClient(seed=0, positive_rate=1.0)
    assert client.complete("p", key="classify:true_false:r") == "true"
    assert client.complete("p", key="classify:proof:r") == "yes"


def test_built_mock_rollout_replies_are_boxed_and_stable():
    client = build_mock_model(seed=1)
    first = client.complete("solve it", key="rollout:small:r1:0")
    second = client.complete("solve it", key="rollout:small:r1:0")
    assert first == second
    assert "\\boxed{" in first
    assert first != client.complete("solve it", key="rollout:small:r1:1")


def test_built_mock_reformulation_transcript_parses():
    from mathcurate.prompts import render_reformulation_prompt
    from mathcurate.reformulate import parse_key_info, parse_reformulated

    client = build_mock_model(seed=1)
    mc_prompt = render_reformulation_prompt("Choose: (A) 1 (B) 2 (C) 3")
    reply = client.complete(mc_prompt, key="reformulate:rid")
    info = parse_key_info(reply)
    assert info.is_multiple_choice is True
    text = parse_reformulated(reply)
    assert text != "N/A"

    open_prompt = render_reformulation_prompt("Compute the value of $x$.")
    reply = client.complete(open_prompt, key="reformulate:rid2")
    assert parse_key_info(reply).is_multiple_choice is False
    assert parse_reformulated(reply) == "N/A"


def test_scripted_client_priority_and_default():
    client = ScriptedModelClient(
        script=[("needle", "matched")], by_key={"k1": "keyed"}, default="fallback"
    )
    assert client.complete("has needle inside", key="k1") == "keyed"
    assert client.complete("has needle inside", key="other") == "matched"
    assert client.complete("nothing", key="other") == "fallback"


def test_reply_cache_roundtrip(tmp_path):
    path = tmp_path / "replies.jsonl"
    cache = ReplyCache(path)
    cache.put("k", "v")
    assert ReplyCache(path).get("k") == "v"


def test_cached_client_invalidates_on_prompt_change(tmp_path):
    calls = []

    class Inner:
        def complete(self, prompt, key=""):
            calls.append(prompt)
            return prompt.upper()

    client = CachedModelClient(Inner(), ReplyCache(tmp_path / "c.jsonl"))
    client.complete("alpha", key="k")
    client.complete("alpha", key="k")
    client.complete("beta", key="k")  # same key, edited prompt -> live call
    assert calls == ["alpha", "beta"]
    assert prompt_fingerprint("alpha") != prompt_fingerprint("beta")


def test_mock_embeddings_deterministic_unit_norm():
    client = MockEmbeddingClient(dim=16, seed=5)
    [a], [b] = client.embed(["same text"]), client.embed(["same text"])
    assert a == b
    assert abs(np.linalg.norm(a) - 1.0) < 1e-9
    [c] = client.embed(["other text"])
    assert c != a


def test_heuristic_language_classifier():
    classifier = HeuristicLanguageClassifier()
    assert classifier.top_language("Find the smallest prime factor.") == "en"
    assert classifier.top_language("Найдите наименьший простой делитель числа.") == "other"
    assert classifier.top_language("123 + 456") == "en"


def test_parallel_map_preserves_order():
    items = list(range(200))
    serial = parallel_map(lambda x: x * x, items, workers=1)
    threaded = parallel_map(lambda x: x * x, items, workers=8)
    assert serial == threaded == [x * x for x in items]


def test_signature_cache_roundtrip(tmp_path):
    path = tmp_path / "signatures.jsonl"
    cache = SignatureCache(path)
    cache.put("rid", "fp", (1, 2, 3))
    assert cache.get("rid", "fp") == (1, 2, 3)
    assert cache.get("rid", "other-fp") is None
    assert SignatureCache(path).get("rid", "fp") == (1, 2, 3)


def test_sample_labeled_export():
    records = [make_record("cn_k12", f"problem {i}") for i in range(4)]
    ledgers = []
    for i, record in enumerate(records):
        ledger = ProvenanceLedger(record_id=record.id)
        parsed = Parsed.POSITIVE if i % 2 else Parsed.NEGATIVE
        append_verdict(ledger, combine(None, ClassificationOutcome(FilterId.PROOF, "r", parsed)))
        ledgers.append(ledger)
    rows = sample_labeled(records, ledgers, FilterId.PROOF, per_side=10)
    assert sum(1 for r in rows if r["classified"] == "positive") == 2
    assert sum(1 for r in rows if r["classified"] == "negative") == 2
