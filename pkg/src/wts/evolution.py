"""Growing the knowledge graph from answered questions.

Candidate triples are generated by the model from (question, gold answer,
retrieved context), screened for redundancy, and committed as one batch.
Screening is two-stage: exact duplicates are dropped outright, and
candidates whose text embedding sits within the redundancy gap of any
existing triple are dropped as near-duplicates. Candidates are screened in
generation order and each accepted one immediately joins the comparison
set, so a batch cannot smuggle in two near-identical facts.

In the autonomous (mastership) mode there is no gold answer; a human
verdict decides whether the model's own answer is trusted as gold for
harvesting, or whether generation falls back to the question alone.

Every evolution writes an audit record; with an audit path configured the
records append to a JSONL log.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .embedding import Embedder, EmbeddingVector, cosine_distance, triple_text
from .errors import ScriptExhaustedError, UpstreamServiceError
from .kg_store import DkgStore, Triple
from .llm_gateway import LlmClient, generate_triples
from .pipeline import Mode, PipelineConfig, PipelineResult, Question

logger = logging.getLogger(__name__)


class Verdict:
    POSITIVE = "positive"
    NEGATIVE = "negative"


@dataclass(frozen=True)
class FeedbackVerdict:
    """One human verdict on an answered question; ``None`` means no feedback."""

    verdict: str | None
    session_id: str | None = None

    def __post_init__(self):
        if self.verdict not in (Verdict.POSITIVE, Verdict.NEGATIVE, None):
            raise ValueError(f"unknown verdict {self.verdict!r}")


@dataclass(frozen=True)
class RedundancyResult:
    """Outcome of screening one candidate against existing triples."""

    keep: bool
    reason: str | None = None  # "exact" or "similar" when not kept
    existing: Triple | None = None
    distance: float | None = None


@dataclass
class EvolutionRecord:
    """Full account of one evolution: every candidate lands in exactly one
    of added / skipped_exact / skipped_similar."""

    question_id: str
    candidates: list[Triple] = field(default_factory=list)
    added: list[int] = field(default_factory=list)
    added_triples: list[Triple] = field(default_factory=list)
    skipped_exact: list[Triple] = field(default_factory=list)
    skipped_similar: list[tuple[Triple, Triple, float]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "candidates": [t.as_dict() for t in self.candidates],
            "added": [
                {"id": i, **t.as_dict()} for i, t in zip(self.added, self.added_triples)
            ],
            "skipped_exact": [t.as_dict() for t in self.skipped_exact],
            "skipped_similar": [
                {
                    "candidate": cand.as_dict(),
                    "existing": existing.as_dict(),
                    "distance": distance,
                }
                for cand, existing, distance in self.skipped_similar
            ],
        }


def _screen(
    candidate: Triple,
    existing: Sequence[Triple],
    exact_keys: set[Triple],
    gap: float,
    embedder: Embedder,
    vectors: dict[Triple, EmbeddingVector],
) -> RedundancyResult:
    if candidate in exact_keys:
        return RedundancyResult(keep=False, reason="exact")
    if not existing:
        return RedundancyResult(keep=True)
    candidate_vec = embedder.embed(triple_text(candidate))
    best_triple: Triple | None = None
    best_distance = float("inf")
    for other in existing:
        vec = vectors.get(other)
        if vec is None:
            vec = embedder.embed(triple_text(other))
            vectors[other] = vec
        distance = cosine_distance(vec, candidate_vec)
        if distance < best_distance:
            best_distance = distance
            best_triple = other
    if best_distance <= gap:
        return RedundancyResult(
            keep=False, reason="similar", existing=best_triple, distance=best_distance
        )
    return RedundancyResult(keep=True)


def redundancy_check(
    triple: Triple,
    store: DkgStore,
    redundancy_gap: float,
    embedder: Embedder,
) -> RedundancyResult:
    """Screen one candidate against the current store contents.

    Exact duplication wins over similarity; the similarity branch reports
    the closest existing triple and its distance. The gap is inclusive, so
    a distance of exactly the threshold still skips.
    """
    existing = store.triples()
    return _screen(triple, existing, set(existing), redundancy_gap, embedder, {})


def append_audit(record: EvolutionRecord, path: str | Path) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record.as_dict(), ensure_ascii=False) + "\n")


def evolve(
    store: DkgStore,
    question: Question,
    gold_answer: str | None,
    context: Sequence[Triple],
    cfg: PipelineConfig,
    embedder: Embedder,
    llm: LlmClient,
    audit_path: str | Path | None = None,
) -> EvolutionRecord:
    """Generate, screen, and commit new triples for one answered question.

    Survivors are committed atomically after the whole batch is screened;
    a model failure yields an empty-candidate record and leaves the store
    untouched.
    """
    record = EvolutionRecord(question_id=question.id)
    try:
        record.candidates = generate_triples(
            llm, question, gold_answer or "", context, domain=cfg.domain, params=cfg.gen
        )
    except (ScriptExhaustedError, UpstreamServiceError) as exc:
        logger.warning("triple generation unavailable for %s: %s", question.id, exc)
        return record

    existing = store.triples()
    exact_keys = set(existing)
    vectors: dict[Triple, EmbeddingVector] = {}
    accepted: list[Triple] = []
    for candidate in record.candidates:
        result = _screen(
            candidate, existing, exact_keys, cfg.redundancy_gap, embedder, vectors
        )
        if result.keep:
            accepted.append(candidate)
            existing.append(candidate)
            exact_keys.add(candidate)
        elif result.reason == "exact":
            record.skipped_exact.append(candidate)
        else:
            assert result.existing is not None and result.distance is not None
            record.skipped_similar.append((candidate, result.existing, result.distance))

    if accepted:
        record.added = store.add_batch(accepted)
        record.added_triples = list(accepted)
    if audit_path is not None:
        append_audit(record, audit_path)
    return record


def mastership_evolve(
    store: DkgStore,
    question: Question,
    result: PipelineResult,
    feedback: FeedbackVerdict,
    cfg: PipelineConfig,
    embedder: Embedder,
    llm: LlmClient,
    audit_path: str | Path | None = None,
) -> EvolutionRecord:
    """Feedback-driven evolution for the autonomous mode.

    A positive verdict promotes the generated answer to gold; a negative
    or missing verdict harvests from the question alone.
    """
    if cfg.mode is not Mode.MASTERSHIP:
        raise ValueError("mastership_evolve requires mastership mode")
    if feedback.verdict == Verdict.POSITIVE:
        gold = str(result.answer.answer)
    else:
        gold = ""
    return evolve(
        store,
        question,
        gold,
        list(result.accumulated),
        cfg,
        embedder,
        llm,
        audit_path=audit_path,
    )
