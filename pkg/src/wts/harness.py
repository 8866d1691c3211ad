"""Dataset loading, metrics, and batch runs over an evolving store.

Batch runs process questions strictly in file order because every answered
question may grow the graph used by the next one; the order is recorded in
the report for reproducibility. The report collects per-question logs, a
rolling accuracy series, the graph-size trajectory, a retrieval-depth
histogram, and timings, and is written out as JSON plus one CSV per series.

Generation-style answers are scored with a greedy token-matching
precision/recall/F1 over a pluggable token embedder. This is deliberately
labeled "greedy-match score" in reports: the formulas are the usual
greedy-matching ones, but the token vectors come from whatever embedder is
configured, not from any particular pretrained model.
"""

from __future__ import annotations

import csv
import json
import logging
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .embedding import Embedder, cosine_distance
from .errors import (
    DatasetFormatError,
    EmptyInputError,
    KindMismatchError,
    LengthMismatchError,
    WtsError,
)
from .evolution import FeedbackVerdict, evolve, mastership_evolve
from .kg_store import DkgStore, normalize_text
from .llm_gateway import LlmClient
from .pipeline import (
    DatasetKind,
    Mode,
    PipelineConfig,
    PipelineResult,
    Question,
    answer_question,
)

logger = logging.getLogger(__name__)

SOURCES = ("chatdoctor", "pubmedqa", "medmcqa", "sciq", "scienceqa", "simpleqa", "custom")

KIND_BY_SOURCE = {
    "chatdoctor": DatasetKind.GENERATION,
    "pubmedqa": DatasetKind.TRUE_FALSE,
    "medmcqa": DatasetKind.MULTIPLE_CHOICE,
    "sciq": DatasetKind.MULTIPLE_CHOICE,
    "scienceqa": DatasetKind.MULTIPLE_CHOICE,
    "simpleqa": DatasetKind.MULTIPLE_CHOICE,
}

# Retrieval depth that works best per source; used when the config does not
# pin one explicitly.
DEFAULT_DEPTH_BY_SOURCE = {
    "chatdoctor": 2,
    "pubmedqa": 3,
    "medmcqa": 4,
    "sciq": 2,
    "scienceqa": 3,
    "simpleqa": 3,
}
FALLBACK_DEPTH = 3

PUBMEDQA_OPTIONS = ("yes", "no", "maybe")


@dataclass(frozen=True)
class DatasetRecord:
    question: Question
    source: str


def default_depth(source: str) -> int:
    return DEFAULT_DEPTH_BY_SOURCE.get(source, FALLBACK_DEPTH)


def _gold_from_record(record: dict, options: tuple[str, ...] | None, line_no: int):
    if "answer_index" in record:
        index = record["answer_index"]
        if not isinstance(index, int) or isinstance(index, bool):
            raise DatasetFormatError(line_no, "answer_index must be an integer")
        if options is None or not (0 <= index < len(options)):
            raise DatasetFormatError(line_no, f"answer_index {index} out of range")
        return index
    if "answer" in record:
        answer = record["answer"]
        if options is not None:
            key = normalize_text(str(answer))
            normalized_options = [normalize_text(o) for o in options]
            if key in normalized_options:
                return normalized_options.index(key)
            raise DatasetFormatError(
                line_no, f"answer {answer!r} does not match any option"
            )
        return str(answer)
    return None


def load_dataset(path: str | Path, source: str) -> list[DatasetRecord]:
    """Read a JSONL question file, validating each record against the source.

    Records carry ``id``, ``question``, optional ``options``, and a gold
    answer as ``answer_index`` (option position) or ``answer`` (option text
    or free text). True/false sources without explicit options get the
    standard yes/no/maybe set.
    """
    if source not in SOURCES:
        raise ValueError(f"unknown source {source!r}; expected one of {SOURCES}")
    records: list[DatasetRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(line_no, f"invalid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise DatasetFormatError(line_no, "record is not an object")
            missing = [k for k in ("id", "question") if k not in record]
            if missing:
                raise DatasetFormatError(line_no, f"missing keys: {', '.join(missing)}")

            options = record.get("options")
            if options is not None:
                if not isinstance(options, list) or not all(isinstance(o, str) for o in options):
                    raise DatasetFormatError(line_no, "options must be a list of strings")
                options = tuple(options)

            kind = KIND_BY_SOURCE.get(source)
            if kind is None:  # custom: infer from the record shape
                kind = DatasetKind.MULTIPLE_CHOICE if options else DatasetKind.GENERATION
            if kind is DatasetKind.TRUE_FALSE and options is None:
                options = PUBMEDQA_OPTIONS
            if kind is DatasetKind.MULTIPLE_CHOICE and options is None:
                raise KindMismatchError(
                    f"line {line_no}: source {source!r} requires options"
                )
            if kind is DatasetKind.GENERATION and options is not None:
                raise KindMismatchError(
                    f"line {line_no}: source {source!r} is free-form but has options"
                )

            gold = _gold_from_record(record, options, line_no)
            try:
                question = Question(
                    id=str(record["id"]),
                    text=str(record["question"]),
                    options=options,
                    gold_answer=gold,
                    kind=kind,
                )
            except ValueError as exc:
                raise DatasetFormatError(line_no, str(exc)) from exc
            records.append(DatasetRecord(question=question, source=source))
    return records


# -- metrics -------------------------------------------------------------------


def accuracy(predictions: Sequence[int | None], golds: Sequence[int]) -> float:
    """Share of predictions equal to their gold label."""
    if len(predictions) != len(golds):
        raise LengthMismatchError(
            f"{len(predictions)} predictions vs {len(golds)} golds"
        )
    if not predictions:
        raise EmptyInputError("nothing to score")
    correct = sum(1 for p, g in zip(predictions, golds) if p == g)
    return correct / len(predictions)


@dataclass(frozen=True)
class GreedyMatchScore:
    precision: float
    recall: float
    f1: float


def tokenize(text: str) -> list[str]:
    return normalize_text(text).split()


def greedy_match_score(
    candidate_tokens: Sequence[str],
    reference_tokens: Sequence[str],
    token_embedder: Embedder,
) -> GreedyMatchScore:
    """Greedy token-matching precision/recall/F1 over embedded tokens.

    Recall averages, over reference tokens, the best cosine similarity
    against any candidate token; precision mirrors that over candidate
    tokens; F1 is their harmonic mean (0 when both are 0). Values are
    clamped to [0, 1] since signed embeddings can push a lone token's best
    match slightly negative.
    """
    if not candidate_tokens or not reference_tokens:
        raise EmptyInputError("both token lists must be non-empty")
    candidate_vecs = [token_embedder.embed(tok) for tok in candidate_tokens]
    reference_vecs = [token_embedder.embed(tok) for tok in reference_tokens]

    def best_similarity(vec, others):
        return max(1.0 - cosine_distance(vec, other) for other in others)

    recall = sum(best_similarity(rv, candidate_vecs) for rv in reference_vecs) / len(
        reference_vecs
    )
    precision = sum(best_similarity(cv, reference_vecs) for cv in candidate_vecs) / len(
        candidate_vecs
    )
    precision = min(max(precision, 0.0), 1.0)
    recall = min(max(recall, 0.0), 1.0)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return GreedyMatchScore(precision=precision, recall=recall, f1=f1)


_LEADING_INT = re.compile(r"[-+]?\d+")


def map_answer_to_index(answer: int | str, options: Sequence[str]) -> int | None:
    """Interpret a model answer as an option index.

    Integer answers are taken as indices; text answers match option text
    exactly (after normalization), falling back to the first integer found
    in the text. Returns None when nothing fits.
    """
    if isinstance(answer, bool):
        return None
    if isinstance(answer, int):
        return answer if 0 <= answer < len(options) else None
    text = normalize_text(str(answer))
    normalized_options = [normalize_text(o) for o in options]
    if text in normalized_options:
        return normalized_options.index(text)
    match = _LEADING_INT.search(text)
    if match:
        index = int(match.group())
        if 0 <= index < len(options):
            return index
    return None


# -- batch runs ------------------------------------------------------------------


@dataclass
class QuestionLog:
    question_id: str
    answer: int | str | None = None
    correct: bool | None = None
    match_f1: float | None = None
    depth_used: int | None = None
    evidence: str | None = None
    trigger: str | None = None
    elapsed_s: float = 0.0
    added_triples: int = 0
    errored: bool = False
    error: str | None = None
    verdict: str | None = None

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class RunReport:
    mode: str
    source: str
    max_depth: int
    question_order: list[str] = field(default_factory=list)
    per_question: list[QuestionLog] = field(default_factory=list)
    accuracy_series: list[float | None] = field(default_factory=list)
    kg_size_series: list[int] = field(default_factory=list)
    depth_histogram: dict[int, int] = field(default_factory=dict)
    verdict_tallies: dict[str, int] = field(default_factory=dict)
    totals: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "source": self.source,
            "max_depth": self.max_depth,
            "question_order": self.question_order,
            "per_question": [log.as_dict() for log in self.per_question],
            "accuracy_series": self.accuracy_series,
            "kg_size_series": self.kg_size_series,
            "depth_histogram": {str(k): v for k, v in self.depth_histogram.items()},
            "verdict_tallies": self.verdict_tallies,
            "totals": self.totals,
        }


def _gold_text(question: Question) -> str:
    if isinstance(question.gold_answer, int) and question.options:
        return question.options[question.gold_answer]
    return str(question.gold_answer or "")


def _score_log(log: QuestionLog, question: Question, result: PipelineResult, embedder: Embedder):
    log.answer = result.answer.answer
    log.depth_used = result.depth_used
    log.evidence = result.evidence.value
    log.trigger = result.trigger.value if result.trigger else None
    if question.kind is DatasetKind.GENERATION:
        gold = str(question.gold_answer or "")
        predicted = str(result.answer.answer)
        if gold and predicted:
            tokens_gold = tokenize(gold)
            tokens_pred = tokenize(predicted)
            if tokens_gold and tokens_pred:
                log.match_f1 = greedy_match_score(tokens_pred, tokens_gold, embedder).f1
    elif isinstance(question.gold_answer, int) and question.options:
        predicted = map_answer_to_index(result.answer.answer, question.options)
        log.correct = predicted == question.gold_answer


def _run(
    records: Sequence[DatasetRecord],
    cfg: PipelineConfig,
    store: DkgStore,
    embedder: Embedder,
    llm: LlmClient,
    feedback_source: Callable[[DatasetRecord, PipelineResult], FeedbackVerdict] | None,
    audit_path: str | Path | None,
) -> RunReport:
    report = RunReport(
        mode=cfg.mode.value,
        source=records[0].source if records else "custom",
        max_depth=cfg.max_depth,
    )
    correct_count = 0
    scoreable = 0
    for record in records:
        question = record.question
        report.question_order.append(question.id)
        log = QuestionLog(question_id=question.id)
        started = time.perf_counter()
        try:
            result = answer_question(question, cfg, store, embedder, llm)
            _score_log(log, question, result, embedder)
            if cfg.mode is Mode.MASTERSHIP:
                verdict = (
                    feedback_source(record, result) if feedback_source else FeedbackVerdict(None)
                )
                log.verdict = verdict.verdict or "none"
                report.verdict_tallies[log.verdict] = (
                    report.verdict_tallies.get(log.verdict, 0) + 1
                )
                evo = mastership_evolve(
                    store, question, result, verdict, cfg, embedder, llm, audit_path
                )
                log.added_triples = len(evo.added)
            elif result.trigger is not None:
                evo = evolve(
                    store,
                    question,
                    _gold_text(question),
                    list(result.accumulated),
                    cfg,
                    embedder,
                    llm,
                    audit_path,
                )
                log.added_triples = len(evo.added)
        except WtsError as exc:
            log.errored = True
            log.error = f"{type(exc).__name__}: {exc}"
            logger.warning("question %s errored: %s", question.id, log.error)
        log.elapsed_s = time.perf_counter() - started

        if log.correct is not None:
            scoreable += 1
            if log.correct:
                correct_count += 1
        report.per_question.append(log)
        report.accuracy_series.append(correct_count / scoreable if scoreable else None)
        report.kg_size_series.append(store.stats().triple_count)

    if scoreable == 0:
        report.accuracy_series = []  # nothing scoreable, no series to report
    report.depth_histogram = {depth: 0 for depth in range(1, cfg.max_depth + 1)}
    for log in report.per_question:
        if log.depth_used is not None:
            report.depth_histogram[log.depth_used] += 1
    match_scores = [log.match_f1 for log in report.per_question if log.match_f1 is not None]
    report.totals = {
        "questions": len(records),
        "answered": sum(1 for log in report.per_question if not log.errored),
        "errored": sum(1 for log in report.per_question if log.errored),
        "scoreable": scoreable,
        "correct": correct_count,
        "accuracy": correct_count / scoreable if scoreable else None,
        "mean_match_f1": sum(match_scores) / len(match_scores) if match_scores else None,
        "triples_added": sum(log.added_triples for log in report.per_question),
        "elapsed_s": sum(log.elapsed_s for log in report.per_question),
    }
    return report


def run_apprenticeship(
    records: Sequence[DatasetRecord],
    cfg: PipelineConfig,
    store: DkgStore,
    embedder: Embedder,
    llm: LlmClient,
    audit_path: str | Path | None = None,
) -> RunReport:
    """Answer each record in order, evolving with its gold answer on trigger.

    Every record must carry a gold answer; the store state left by record
    i is the one record i+1 retrieves from. Per-record failures are logged
    and excluded from the accuracy denominator, and the run continues.
    """
    if cfg.mode is not Mode.APPRENTICESHIP:
        raise ValueError("run_apprenticeship requires apprenticeship mode")
    for record in records:
        if record.question.gold_answer is None:
            raise ValueError(f"record {record.question.id!r} has no gold answer")
    return _run(records, cfg, store, embedder, llm, None, audit_path)


def run_mastership(
    records: Sequence[DatasetRecord],
    cfg: PipelineConfig,
    store: DkgStore,
    embedder: Embedder,
    llm: LlmClient,
    feedback_source: Callable[[DatasetRecord, PipelineResult], FeedbackVerdict] | None = None,
    audit_path: str | Path | None = None,
) -> RunReport:
    """Answer each record without gold answers, evolving per verdict.

    ``feedback_source`` supplies one verdict per answered question; absent
    or None verdicts harvest from the question alone.
    """
    if cfg.mode is not Mode.MASTERSHIP:
        raise ValueError("run_mastership requires mastership mode")
    return _run(records, cfg, store, embedder, llm, feedback_source, audit_path)


# -- report output ----------------------------------------------------------------


def emit_report(report: RunReport, out_dir: str | Path) -> dict[str, Path]:
    """Write the JSON report and one CSV per series into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    paths["report"] = out / "report.json"
    paths["report"].write_text(
        json.dumps(report.as_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )

    def write_csv(name: str, header: list[str], rows) -> None:
        path = out / name
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        paths[name.removesuffix(".csv")] = path

    write_csv(
        "accuracy_series.csv",
        ["index", "accuracy"],
        [
            (i, "" if value is None else f"{value:.6f}")
            for i, value in enumerate(report.accuracy_series)
        ],
    )
    write_csv(
        "kg_size_series.csv",
        ["index", "triple_count"],
        list(enumerate(report.kg_size_series)),
    )
    write_csv(
        "depth_histogram.csv",
        ["depth", "count"],
        sorted(report.depth_histogram.items()),
    )
    write_csv(
        "timings.csv",
        ["index", "question_id", "elapsed_s"],
        [
            (i, log.question_id, f"{log.elapsed_s:.6f}")
            for i, log in enumerate(report.per_question)
        ],
    )
    return paths
