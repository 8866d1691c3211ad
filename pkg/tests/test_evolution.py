import json
import random

import pytest

from mockkit import plain_cosine_distance, random_store, triples_reply
from wts import (
    CachingEmbedder,
    Confidence,
    DkgStore,
    Evidence,
    FeedbackVerdict,
    HashEmbedder,
    MockLlm,
    Mode,
    PipelineConfig,
    PipelineResult,
    Question,
    ReasonedAnswer,
    Triple,
    Verdict,
    evolve,
    mastership_evolve,
    redundancy_check,
    triple_text,
)

Q = Question(id="q1", text="what encircles the artery")


def embedder():
    return CachingEmbedder(HashEmbedder(seed=42))


def cfg(mode=Mode.APPRENTICESHIP, redundancy_gap=0.1):
    return PipelineConfig(mode=mode, redundancy_gap=redundancy_gap)


def result_with(answer="generated answer", accumulated=()):
    return PipelineResult(
        answer=ReasonedAnswer(Confidence.POSITIVE, answer, "s"),
        depth_used=2,
        accumulated=tuple(accumulated),
        trigger=None,
        evidence=Evidence.INHERENT_ONLY,
    )


# -- redundancy_check ---------------------------------------------------------------


def test_check_empty_store_keeps():
    res = redundancy_check(Triple("a", "r", "b"), DkgStore(), 0.1, embedder())
    assert res.keep


def test_check_exact_duplicate_skips():
    store = DkgStore()
    store.add_triple(Triple("a", "r", "b"))
    res = redundancy_check(Triple("A", "R", "B"), store, 0.1, embedder())
    assert not res.keep
    assert res.reason == "exact"


def test_check_similar_skips_with_argmin():
    store = DkgStore()
    near = Triple("heart", "pumps blood", "around")
    store.add_triple(Triple("bone", "supports", "tissue"))
    store.add_triple(near)
    # same text split differently: identical embedding, distance exactly 0
    candidate = Triple("heart pumps", "blood", "around")
    res = redundancy_check(candidate, store, 0.1, embedder())
    assert not res.keep
    assert res.reason == "similar"
    assert res.existing == near
    assert res.distance == pytest.approx(0.0, abs=1e-12)


def test_check_gap_zero_boundary():
    store = DkgStore()
    store.add_triple(Triple("bone", "supports", "tissue"))
    # distinct text, distance strictly positive: kept even at gap 0
    res = redundancy_check(Triple("heart", "pumps", "blood"), store, 0.0, embedder())
    assert res.keep
    # a candidate whose full text equals an existing triple's text embeds
    # identically and is skipped even at gap 0
    res = redundancy_check(Triple("bone supports", "tissue", "tissue"), store, 0.0, embedder())
    assert res.keep  # "bone supports tissue tissue" is a different text
    res = redundancy_check(Triple("bone", "supports", "tissue"), store, 0.0, embedder())
    assert res.reason == "exact"


# -- evolve -----------------------------------------------------------------------------


def test_evolve_no_candidates_leaves_store_unchanged():
    store = DkgStore()
    llm = MockLlm([("generate", triples_reply())])
    record = evolve(store, Q, "gold", [], cfg(), embedder(), llm)
    assert record.candidates == []
    assert record.added == []
    assert len(store) == 0


def test_evolve_adds_novel_and_skips_exact():
    store = DkgStore()
    store.add_triple(Triple("a", "r", "b"))
    llm = MockLlm([("generate", triples_reply(("a", "r", "b"), ("nerve", "innervates", "muscle")))])
    record = evolve(store, Q, "gold", [], cfg(), embedder(), llm)
    assert record.skipped_exact == [Triple("a", "r", "b")]
    assert record.added_triples == [Triple("nerve", "innervates", "muscle")]
    assert store.contains_exact(Triple("nerve", "innervates", "muscle"))


def test_evolve_twice_is_idempotent():
    reply = triples_reply(("heart", "pumps", "blood"), ("lung", "exchanges", "gas"))
    store = DkgStore()
    first = evolve(store, Q, "gold", [], cfg(), embedder(), MockLlm([("generate", reply)]))
    assert len(first.added) == 2
    second = evolve(store, Q, "gold", [], cfg(), embedder(), MockLlm([("generate", reply)]))
    assert second.added == []
    assert len(second.skipped_exact) == 2
    assert len(store) == 2


def test_evolve_partition_invariant_randomized():
    rng = random.Random(23)
    for seed in range(10):
        store = random_store(rng, rng.randint(0, 40))
        size_before = len(store)
        candidates = []
        for _ in range(rng.randint(0, 8)):
            t = store.triples()[rng.randrange(len(store))] if store.triples() and rng.random() < 0.4 else None
            if t is None:
                candidates.append((f"h{rng.randrange(30)}", "relates", f"t{rng.randrange(30)}"))
            else:
                candidates.append((t.head, t.relation, t.tail))
        llm = MockLlm([("generate", triples_reply(*candidates))])
        record = evolve(store, Q, "gold", [], cfg(), embedder(), llm)
        assert len(record.candidates) == (
            len(record.added) + len(record.skipped_exact) + len(record.skipped_similar)
        )
        assert len(store) == size_before + len(record.added)
        assert len(store) >= size_before  # growth only


def test_intra_batch_screening_in_generation_order():
    store = DkgStore()
    first = ("heart", "pumps blood", "around")
    near_duplicate = ("heart pumps", "blood", "around")  # same text as first
    llm = MockLlm([("generate", triples_reply(first, near_duplicate))])
    record = evolve(store, Q, "gold", [], cfg(), embedder(), llm)
    assert record.added_triples == [Triple(*first)]
    assert len(record.skipped_similar) == 1
    candidate, existing, distance = record.skipped_similar[0]
    assert candidate == Triple(*near_duplicate)
    assert existing == Triple(*first)  # screened against the batch-mate, not the store
    assert distance == pytest.approx(0.0, abs=1e-12)


def test_evolve_screening_soundness_brute_force():
    rng = random.Random(31)
    emb = embedder()
    store = random_store(rng, 60)
    before = store.triples()
    candidates = [(f"c{i}", "relates", f"d{i % 4}") for i in range(10)]
    llm = MockLlm([("generate", triples_reply(*candidates))])
    record = evolve(store, Q, "gold", [], cfg(redundancy_gap=0.3), emb, llm)
    committed: list[Triple] = []
    for added in record.added_triples:
        pool = before + committed
        for other in pool:
            d = plain_cosine_distance(
                emb.embed(triple_text(added)).values.tolist(),
                emb.embed(triple_text(other)).values.tolist(),
            )
            assert d > 0.3, f"{added} within gap of {other}"
        committed.append(added)


def test_evolve_unavailable_generation_is_empty_record():
    store = DkgStore()
    store.add_triple(Triple("a", "r", "b"))
    llm = MockLlm()  # generate queue empty -> ScriptExhausted inside evolve
    record = evolve(store, Q, "gold", [], cfg(), embedder(), llm)
    assert record.candidates == []
    assert len(store) == 1


def test_evolve_writes_audit_log(tmp_path):
    audit = tmp_path / "audit.jsonl"
    store = DkgStore()
    llm = MockLlm([("generate", triples_reply(("a", "r", "b")))])
    evolve(store, Q, "gold", [], cfg(), embedder(), llm, audit_path=audit)
    llm2 = MockLlm([("generate", triples_reply(("a", "r", "b")))])
    evolve(store, Q, "gold", [], cfg(), embedder(), llm2, audit_path=audit)
    lines = [json.loads(line) for line in audit.read_text().splitlines()]
    assert len(lines) == 2
    assert lines[0]["added"][0]["head"] == "a"
    assert lines[1]["added"] == []
    assert lines[1]["skipped_exact"] == [{"head": "a", "relation": "r", "tail": "b"}]


# -- mastership -------------------------------------------------------------------------


def test_mastership_positive_uses_generated_answer_as_gold():
    store = DkgStore()
    llm = MockLlm([("generate", triples_reply(("new", "fact", "here")))])
    record = mastership_evolve(
        store,
        Q,
        result_with(answer="the model answer"),
        FeedbackVerdict(Verdict.POSITIVE),
        cfg(mode=Mode.MASTERSHIP),
        embedder(),
        llm,
    )
    assert len(record.added) == 1
    assert "answer: the model answer and entity" in llm.calls[0].user


def test_mastership_negative_harvests_question_only():
    store = DkgStore()
    llm = MockLlm([("generate", triples_reply())])
    mastership_evolve(
        store,
        Q,
        result_with(),
        FeedbackVerdict(Verdict.NEGATIVE),
        cfg(mode=Mode.MASTERSHIP),
        embedder(),
        llm,
    )
    assert "answer:  and entity" in llm.calls[0].user  # empty gold


def test_mastership_no_feedback_behaves_as_negative():
    store = DkgStore()
    llm = MockLlm([("generate", triples_reply())])
    mastership_evolve(
        store, Q, result_with(), FeedbackVerdict(None),
        cfg(mode=Mode.MASTERSHIP), embedder(), llm,
    )
    assert "answer:  and entity" in llm.calls[0].user


def test_mastership_requires_mode():
    with pytest.raises(ValueError):
        mastership_evolve(
            DkgStore(), Q, result_with(), FeedbackVerdict(None), cfg(), embedder(), MockLlm()
        )


def test_feedback_verdict_validation():
    with pytest.raises(ValueError):
        FeedbackVerdict("maybe")
