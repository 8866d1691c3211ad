import random

import pytest

from mockkit import entity_reply, random_store, reason_reply, score_reply
from wts import (
    CachingEmbedder,
    DatasetKind,
    DkgStore,
    Evidence,
    EvolutionTrigger,
    GenParams,
    HashEmbedder,
    MockLlm,
    PipelineConfig,
    Question,
    RetrievalStrategy,
    Triple,
    answer_question,
    evidence_of,
    prune,
    triple_text,
    update_frontier,
)
from wts.pipeline import RetrievalState, retrieve_depth

Q = Question(id="q", text="what does the heart pump")
MCQ = Question(
    id="mcq", text="pick one", options=("a", "b"), kind=DatasetKind.MULTIPLE_CHOICE
)


def embedder():
    return CachingEmbedder(HashEmbedder(seed=42))


def cfg(**kwargs):
    defaults = dict(max_depth=3, max_hop=1, strategy=RetrievalStrategy.EM_QSR)
    defaults.update(kwargs)
    return PipelineConfig(**defaults)


def state_for(frontier):
    return RetrievalState(frontier=list(frontier), visited=set(frontier))


# -- config and question validation -----------------------------------------------


def test_config_rejects_hop_not_below_depth():
    with pytest.raises(ValueError):
        PipelineConfig(max_depth=2, max_hop=2)
    with pytest.raises(ValueError):
        PipelineConfig(max_depth=1, max_hop=1)


def test_config_rejects_bad_values():
    with pytest.raises(ValueError):
        PipelineConfig(prune_width=0)
    with pytest.raises(ValueError):
        PipelineConfig(similarity_gap=-0.1)
    with pytest.raises(ValueError):
        PipelineConfig(max_entities=0)


def test_question_requires_options_for_choice_kinds():
    with pytest.raises(ValueError):
        Question(id="x", text="t", kind=DatasetKind.MULTIPLE_CHOICE)
    with pytest.raises(ValueError):
        Question(id="x", text="t", options=("a",), gold_answer=3,
                 kind=DatasetKind.MULTIPLE_CHOICE)


# -- trigger table (hand-derived traces) --------------------------------------------


def test_positive_within_hop_no_evolution():
    # D=3, H=1; confident at depth 1 -> stop, no trigger
    llm = MockLlm([("entity", entity_reply("alpha")), ("reason", reason_reply("Yes", 0))])
    result = answer_question(Q, cfg(), DkgStore(), embedder(), llm)
    assert result.depth_used == 1
    assert result.trigger is None
    assert result.accumulated == ()
    assert result.evidence is Evidence.INHERENT_ONLY
    assert llm.remaining("reason") == 0


def test_positive_beyond_hop_triggers_evolution():
    llm = MockLlm(
        [
            ("entity", entity_reply("alpha")),
            ("reason", reason_reply("No")),
            ("reason", reason_reply("Yes", 1)),
        ]
    )
    result = answer_question(Q, cfg(), DkgStore(), embedder(), llm)
    assert result.depth_used == 2
    assert result.trigger is EvolutionTrigger.AFTER_POSITIVE
    assert result.answer.answer == 1


def test_negative_at_final_depth_triggers_evolution():
    llm = MockLlm(
        [("entity", entity_reply("alpha"))] + [("reason", reason_reply("No"))] * 3
    )
    result = answer_question(Q, cfg(), DkgStore(), embedder(), llm)
    assert result.depth_used == 3
    assert result.trigger is EvolutionTrigger.AFTER_NEGATIVE
    assert llm.remaining("reason") == 0


def test_negative_then_positive_at_final_depth():
    llm = MockLlm(
        [("entity", entity_reply("alpha"))]
        + [("reason", reason_reply("No"))] * 2
        + [("reason", reason_reply("Yes", 0))]
    )
    result = answer_question(Q, cfg(), DkgStore(), embedder(), llm)
    assert result.depth_used == 3
    assert result.trigger is EvolutionTrigger.AFTER_POSITIVE


def test_early_exit_prevents_deeper_rounds():
    llm = MockLlm(
        [("entity", entity_reply("alpha")), ("reason", reason_reply("Yes", 0))]
        + [("reason", reason_reply("No"))] * 5
    )
    result = answer_question(Q, cfg(max_depth=4), DkgStore(), embedder(), llm)
    assert result.depth_used == 1
    assert llm.remaining("reason") == 5


def test_malformed_reason_reply_treated_as_negative():
    llm = MockLlm(
        [("entity", entity_reply("alpha"))]
        + [("reason", "garbage")] * 2  # depth 1 retries then gives up -> negative
        + [("reason", reason_reply("Yes", 0))]  # depth 2
    )
    result = answer_question(
        Q, cfg(gen=GenParams(retries=1)), DkgStore(), embedder(), llm
    )
    assert result.depth_used == 2
    assert result.trigger is EvolutionTrigger.AFTER_POSITIVE


# -- retrieve_depth -------------------------------------------------------------------


def test_retrieve_em_returns_frontier_matches():
    store = DkgStore()
    t = Triple("a", "r", "b")
    store.add_triple(t)
    got = retrieve_depth(state_for(["a"]), cfg(strategy=RetrievalStrategy.EM), store, embedder())
    assert got == [t]


def test_retrieve_qsr_keeps_identical_text():
    store = DkgStore()
    t = Triple("heart", "pumps", "blood")
    store.add_triple(t)
    emb = embedder()
    question_vec = emb.embed("heart pumps blood")
    got = retrieve_depth(state_for(["heart"]), cfg(), store, emb, question_vec=question_vec)
    assert got == [t]


def test_retrieve_excludes_accumulated():
    store = DkgStore()
    t = Triple("a", "r", "b")
    store.add_triple(t)
    state = state_for(["a"])
    state.accumulated_keys.add(t)
    got = retrieve_depth(state, cfg(strategy=RetrievalStrategy.EM), store, embedder())
    assert got == []


def test_retrieve_empty_frontier_returns_nothing():
    store = DkgStore()
    store.add_triple(Triple("a", "r", "b"))
    assert retrieve_depth(state_for([]), cfg(strategy=RetrievalStrategy.EM), store, embedder()) == []


def test_strategy_refinement_only_removes():
    rng = random.Random(7)
    emb = embedder()
    for _ in range(20):
        store = random_store(rng, 40)
        entities = [t.head for t in store.triples()[:3]]
        question = Question(id="q", text=" ".join(entities) + " relation query")
        question_vec = emb.embed(question.text)
        entity_vecs = [emb.embed(e) for e in entities]
        em = retrieve_depth(
            state_for(entities), cfg(strategy=RetrievalStrategy.EM), store, emb
        )
        qsr = retrieve_depth(state_for(entities), cfg(), store, emb, question_vec=question_vec)
        esr = retrieve_depth(
            state_for(entities),
            cfg(strategy=RetrievalStrategy.EM_ESR),
            store,
            emb,
            entity_vecs=entity_vecs,
        )
        assert set(qsr) <= set(em)
        assert set(esr) <= set(em)


def test_qsr_orders_by_ascending_distance():
    store = DkgStore()
    near = Triple("heart", "pumps", "blood")
    far = Triple("heart", "supports", "unrelated cartilage fossa")
    store.add_triple(far)
    store.add_triple(near)
    emb = embedder()
    question_vec = emb.embed("heart pumps blood")
    got = retrieve_depth(
        state_for(["heart"]), cfg(similarity_gap=2.0), store, emb, question_vec=question_vec
    )
    assert got[0] == near


# -- prune ---------------------------------------------------------------------------


def test_prune_short_circuits_without_llm():
    llm = MockLlm()  # would raise ScriptExhausted if consulted
    triples = [Triple("a", "r", "b"), Triple("c", "r", "d")]
    assert prune(Q, triples, 5, llm) == triples
    assert llm.calls == []


def test_prune_keeps_top_scores():
    triples = [Triple("a", "r", "b"), Triple("c", "r", "d"), Triple("e", "r", "f")]
    llm = MockLlm([("score", score_reply(list(zip(triples, [0.9, 0.7, 0.2]))))])
    kept = prune(Q, triples, 2, llm)
    assert set(kept) == {triples[0], triples[1]}


def test_prune_tie_break_is_lexicographic():
    triples = [Triple("c", "r", "d"), Triple("a", "r", "b"), Triple("b", "r", "c")]
    llm = MockLlm([("score", score_reply([(t, 0.5) for t in triples]))])
    kept = prune(Q, triples, 1, llm)
    assert kept == [Triple("a", "r", "b")]
    assert triple_text(kept[0]) == min(triple_text(t) for t in triples)


def test_prune_permutation_invariant():
    rng = random.Random(13)
    triples = [Triple(f"h{i}", "r", f"t{i}") for i in range(6)]
    scores = [0.1, 0.9, 0.4, 0.9, 0.3, 0.6]
    reply = score_reply(list(zip(triples, scores)))
    baseline = prune(Q, triples, 3, MockLlm([("score", reply)]))
    for _ in range(5):
        shuffled = triples[:]
        rng.shuffle(shuffled)
        assert prune(Q, shuffled, 3, MockLlm([("score", reply)])) == baseline


def test_prune_fallback_keeps_input_prefix():
    triples = [Triple(f"h{i}", "r", f"t{i}") for i in range(4)]
    llm = MockLlm([("score", "junk")])
    kept = prune(Q, triples, 2, llm, params=GenParams(retries=0))
    assert kept == triples[:2]


def test_prune_output_size():
    triples = [Triple(f"h{i}", "r", f"t{i}") for i in range(5)]
    llm = MockLlm([("score", score_reply([(t, 0.5) for t in triples]))])
    assert len(prune(Q, triples, 3, llm)) == 3
    assert prune(Q, [], 3, MockLlm()) == []


# -- update_frontier --------------------------------------------------------------------


def test_update_frontier_definitional():
    state = state_for(["a"])
    assert update_frontier(state, [Triple("a", "r", "b")]) == ["b"]
    assert state.visited == {"a", "b"}


def test_update_frontier_self_loop_gives_empty():
    state = state_for(["a"])
    assert update_frontier(state, [Triple("a", "r", "a")]) == []


def test_update_frontier_skips_visited():
    state = RetrievalState(frontier=["b"], visited={"a", "b"})
    assert update_frontier(state, [Triple("b", "r", "c")]) == ["c"]


# -- loop invariants ----------------------------------------------------------------------


def _scripted_run(seed: int, depth: int = 3):
    rng = random.Random(seed)
    store = random_store(rng, rng.randint(10, 60))
    entities = rng.sample(store.entities(), min(3, len(store.entities())))
    llm = MockLlm(
        [("entity", entity_reply(*entities))]
        + [("score", '{"triples": []}')] * depth
        + [("reason", reason_reply("No"))] * depth
    )
    question = Question(id=f"q{seed}", text=" ".join(entities))
    config = cfg(max_depth=depth, prune_width=2, similarity_gap=2.0)
    return answer_question(question, config, store, embedder(), llm)


def test_no_entity_revisit_and_no_duplicate_accumulation():
    for seed in range(10):
        result = _scripted_run(seed)
        seen_entities = set()
        for frontier in result.frontiers:
            assert not (set(frontier) & seen_entities)
            seen_entities |= set(frontier)
        assert len(set(result.accumulated)) == len(result.accumulated)


def test_store_never_mutated_by_answering():
    rng = random.Random(5)
    store = random_store(rng, 30)
    before = store.items()
    entities = store.entities()[:2]
    llm = MockLlm(
        [("entity", entity_reply(*entities))]
        + [("score", '{"triples": []}')] * 3
        + [("reason", reason_reply("No"))] * 3
    )
    answer_question(Question(id="q", text="anything"), cfg(similarity_gap=2.0, prune_width=2),
                    store, embedder(), llm)
    assert store.items() == before


def test_evidence_reflects_accumulation():
    result = _scripted_run(3)
    expected = Evidence.TRIPLES_USED if result.accumulated else Evidence.INHERENT_ONLY
    assert result.evidence is expected
    assert evidence_of(result) is expected


def test_empty_store_run_is_inherent_only():
    llm = MockLlm(
        [("entity", entity_reply("alpha"))] + [("reason", reason_reply("No"))] * 2
    )
    result = answer_question(Q, cfg(max_depth=2), DkgStore(), embedder(), llm)
    assert result.evidence is Evidence.INHERENT_ONLY
    assert result.accumulated == ()
