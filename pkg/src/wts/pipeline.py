"""Iterative retrieve-prune-reason control loop over the knowledge graph.

One question is answered in depth-bounded rounds. Each round pulls the
triples touching the current entity frontier out of the store (exact
match), optionally refines them by embedding similarity, keeps the most
relevant ones via model scoring, folds them into the cumulative knowledge
set, and asks the model for an answer plus a confidence flag. A positive
confidence exits early; otherwise the frontier advances to the entities
newly discovered this round and the loop deepens, up to the depth limit.

The result carries an evolution trigger: a confident answer reached only
after more than ``max_hop`` rounds signals under-connected knowledge, and a
still-negative answer at the depth limit signals missing knowledge. In
both cases the caller is expected to grow the graph; the loop itself never
writes to the store.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

from .embedding import (
    DEFAULT_SIMILARITY_GAP,
    Embedder,
    EmbeddingVector,
    cosine_distance,
    similarity_filter,
    triple_text,
)
from .errors import MalformedReplyError
from .kg_store import DkgStore, Triple
from .llm_gateway import (
    Confidence,
    GenParams,
    LlmClient,
    ReasonedAnswer,
    extract_entities,
    reason,
    score_triples,
)

logger = logging.getLogger(__name__)

DEFAULT_REDUNDANCY_GAP = 0.1


class DatasetKind(Enum):
    MULTIPLE_CHOICE = "multiple_choice"
    TRUE_FALSE = "true_false"
    GENERATION = "generation"


@dataclass(frozen=True)
class Question:
    """One task instance, optionally with answer options and a gold answer."""

    id: str
    text: str
    options: tuple[str, ...] | None = None
    gold_answer: int | str | None = None
    kind: DatasetKind = DatasetKind.GENERATION

    def __post_init__(self):
        if self.options is not None:
            object.__setattr__(self, "options", tuple(self.options))
        if self.kind in (DatasetKind.MULTIPLE_CHOICE, DatasetKind.TRUE_FALSE):
            if not self.options:
                raise ValueError(f"{self.kind.value} question {self.id!r} has no options")
            if isinstance(self.gold_answer, int) and not (
                0 <= self.gold_answer < len(self.options)
            ):
                raise ValueError(
                    f"gold answer index {self.gold_answer} out of range for {self.id!r}"
                )


class RetrievalStrategy(Enum):
    """How exact-match hits are refined before pruning.

    EM keeps every hit; EM_ESR keeps hits within the similarity gap of any
    extracted topic entity; EM_QSR keeps hits within the gap of the whole
    question.
    """

    EM = "em"
    EM_ESR = "em-esr"
    EM_QSR = "em-qsr"


class Mode(Enum):
    APPRENTICESHIP = "apprenticeship"
    MASTERSHIP = "mastership"


@dataclass(frozen=True)
class PipelineConfig:
    """All loop tunables.

    ``max_hop`` must stay below ``max_depth``: it separates confident
    answers that needed little digging (no evolution) from those that
    needed deep digging (evolve to densify the graph).
    """

    max_entities: int = 5
    max_depth: int = 3
    prune_width: int = 5
    max_hop: int = 1
    similarity_gap: float = DEFAULT_SIMILARITY_GAP
    redundancy_gap: float = DEFAULT_REDUNDANCY_GAP
    strategy: RetrievalStrategy = RetrievalStrategy.EM_QSR
    gen: GenParams = field(default_factory=GenParams)
    mode: Mode = Mode.APPRENTICESHIP
    domain: str = "general"

    def __post_init__(self):
        if self.max_entities < 1:
            raise ValueError("max_entities must be >= 1")
        if not (1 <= self.max_hop < self.max_depth):
            raise ValueError("max_hop must satisfy 1 <= max_hop < max_depth")
        if self.prune_width < 1:
            raise ValueError("prune_width must be >= 1")
        if self.similarity_gap < 0:
            raise ValueError("similarity_gap must be >= 0")
        if self.redundancy_gap < 0:
            raise ValueError("redundancy_gap must be >= 0")


@dataclass
class RetrievalState:
    """Mutable per-question loop state.

    ``visited`` is the union of every frontier assigned so far, including
    the current one, so no entity is ever expanded twice.
    """

    frontier: list[str]
    visited: set[str]
    depth: int = 1
    accumulated: list[Triple] = field(default_factory=list)
    accumulated_keys: set[Triple] = field(default_factory=set)
    per_depth: list[tuple[list[Triple], list[Triple]]] = field(default_factory=list)


class EvolutionTrigger(Enum):
    AFTER_POSITIVE = "after_positive"
    AFTER_NEGATIVE = "after_negative"


class Evidence(Enum):
    INHERENT_ONLY = "inherent_only"
    TRIPLES_USED = "triples_used"


@dataclass(frozen=True)
class PipelineResult:
    answer: ReasonedAnswer
    depth_used: int
    accumulated: tuple[Triple, ...]
    trigger: EvolutionTrigger | None
    evidence: Evidence
    frontiers: tuple[tuple[str, ...], ...] = ()


def evidence_of(result: PipelineResult) -> Evidence:
    """Whether the exit-time knowledge set contributed anything at all."""
    return Evidence.TRIPLES_USED if result.accumulated else Evidence.INHERENT_ONLY


def retrieve_depth(
    state: RetrievalState,
    cfg: PipelineConfig,
    store: DkgStore,
    embedder: Embedder,
    question_vec: EmbeddingVector | None = None,
    entity_vecs: list[EmbeddingVector] | None = None,
) -> list[Triple]:
    """Gather this depth's candidate triples for the current frontier.

    Exact match over the frontier entities comes first, minus anything
    already accumulated; the configured strategy then refines by embedding
    distance. Under a similarity strategy the survivors come back ordered
    by ascending distance, so a prefix of the list is always the most
    similar subset.
    """
    raw: list[Triple] = []
    seen = set(state.accumulated_keys)
    for entity in state.frontier:
        for triple in store.exact_match(entity):
            if triple not in seen:
                seen.add(triple)
                raw.append(triple)
    if not raw or cfg.strategy is RetrievalStrategy.EM:
        return raw

    vectors = {t: embedder.embed(triple_text(t)) for t in raw}
    if cfg.strategy is RetrievalStrategy.EM_QSR:
        if question_vec is None:
            raise ValueError("EM_QSR requires the question embedding")
        kept = similarity_filter(
            question_vec, [(t, vectors[t]) for t in raw], cfg.similarity_gap
        )
        distances = {t: cosine_distance(question_vec, vectors[t]) for t in kept}
    else:
        if not entity_vecs:
            return []
        distances = {}
        for t in raw:
            best = min(cosine_distance(ev, vectors[t]) for ev in entity_vecs)
            if best <= cfg.similarity_gap:
                distances[t] = best
        kept = [t for t in raw if t in distances]
    return sorted(kept, key=lambda t: distances[t])


def prune(
    question: Question,
    candidates: list[Triple],
    width: int,
    llm: LlmClient,
    domain: str = "general",
    params: GenParams | None = None,
) -> list[Triple]:
    """Keep the ``width`` most relevant candidates by model-assigned score.

    Small candidate sets short-circuit without a model call. Every kept
    score is at least every dropped score, and equal scores resolve by
    triple text so the outcome is independent of candidate order. If the
    model never produces a usable reply, the first ``width`` candidates
    are kept as given (the caller supplies them most-similar-first).
    """
    if width < 1:
        raise ValueError("width must be >= 1")
    if len(candidates) <= width:
        return list(candidates)
    try:
        ranked = score_triples(llm, question, candidates, domain=domain, params=params)
    except MalformedReplyError:
        logger.warning(
            "relevance scoring failed for %s; keeping first %d candidates", question.id, width
        )
        return list(candidates[:width])
    return [st.triple for st in ranked[:width]]


def update_frontier(state: RetrievalState, pruned: list[Triple]) -> list[str]:
    """Advance to the entities first seen in this depth's kept triples."""
    new_frontier: list[str] = []
    for triple in pruned:
        for entity in (triple.head, triple.tail):
            if entity not in state.visited:
                state.visited.add(entity)
                new_frontier.append(entity)
    state.frontier = new_frontier
    return new_frontier


def answer_question(
    question: Question,
    cfg: PipelineConfig,
    store: DkgStore,
    embedder: Embedder,
    llm: LlmClient,
) -> PipelineResult:
    """Run the full loop for one question. Never mutates the store.

    Per depth d = 1..max_depth: retrieve, prune, accumulate, advance the
    frontier, reason over the cumulative triples. Exit on the first
    positive confidence or at the depth limit. The trigger field encodes
    the evolution decision: positive beyond ``max_hop`` or negative at the
    final depth ask for graph growth; a quick positive answer does not.

    A reasoning reply that stays malformed through its retries is treated
    as negative confidence so the loop digs deeper instead of failing.
    """
    entities = extract_entities(
        llm, question, max_entities=cfg.max_entities, domain=cfg.domain, params=cfg.gen
    )
    question_vec = (
        embedder.embed(question.text) if cfg.strategy is RetrievalStrategy.EM_QSR else None
    )
    entity_vecs = (
        [embedder.embed(e) for e in entities]
        if cfg.strategy is RetrievalStrategy.EM_ESR
        else None
    )

    state = RetrievalState(frontier=list(entities), visited=set(entities))
    frontiers: list[tuple[str, ...]] = [tuple(entities)]
    answer: ReasonedAnswer | None = None
    trigger: EvolutionTrigger | None = None
    depth_used = cfg.max_depth

    for depth in range(1, cfg.max_depth + 1):
        state.depth = depth
        raw = retrieve_depth(state, cfg, store, embedder, question_vec, entity_vecs)
        pruned = prune(
            question, raw, cfg.prune_width, llm, domain=cfg.domain, params=cfg.gen
        )
        for triple in pruned:
            if triple not in state.accumulated_keys:
                state.accumulated_keys.add(triple)
                state.accumulated.append(triple)
        state.per_depth.append((raw, pruned))
        new_frontier = update_frontier(state, pruned)
        if new_frontier:
            frontiers.append(tuple(new_frontier))

        try:
            answer = reason(llm, question, state.accumulated, domain=cfg.domain, params=cfg.gen)
        except MalformedReplyError as exc:
            logger.warning(
                "unusable reasoning reply at depth %d for %s: %r",
                depth,
                question.id,
                exc.raw[:200],
            )
            answer = ReasonedAnswer(Confidence.NEGATIVE, "", "")

        if answer.confidence is Confidence.POSITIVE:
            depth_used = depth
            trigger = None if depth <= cfg.max_hop else EvolutionTrigger.AFTER_POSITIVE
            break
        if depth == cfg.max_depth:
            depth_used = depth
            trigger = EvolutionTrigger.AFTER_NEGATIVE

    assert answer is not None
    accumulated = tuple(state.accumulated)
    return PipelineResult(
        answer=answer,
        depth_used=depth_used,
        accumulated=accumulated,
        trigger=trigger,
        evidence=Evidence.TRIPLES_USED if accumulated else Evidence.INHERENT_ONLY,
        frontiers=tuple(frontiers),
    )
