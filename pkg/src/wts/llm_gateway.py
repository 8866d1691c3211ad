"""All language-model interactions behind one small client interface.

Four prompt families drive the engine: entity extraction from a question,
relevance scoring of candidate triples, answering with retrieved triples,
and generating new triples from an answered question. Every prompt demands
JSON output; replies are parsed leniently (code fences and surrounding
prose are tolerated) and re-asked on parse failure until the retry budget
runs out.

``RemoteLlm`` speaks the OpenAI-compatible chat-completions protocol so any
conforming server works. ``MockLlm`` replays a fixed script and exists so
the whole engine can run deterministically offline.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from collections import deque
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Protocol, Sequence

import httpx

from .errors import (
    MalformedReplyError,
    ScriptExhaustedError,
    UpstreamServiceError,
)
from .kg_store import Triple, normalize_text

if TYPE_CHECKING:  # pragma: no cover
    from .pipeline import Question

logger = logging.getLogger(__name__)

ENV_API_KEY = "WTS_LLM_API_KEY"
ENV_BASE_URL = "WTS_LLM_BASE_URL"
ENV_MODEL = "WTS_LLM_MODEL"

# Prompt templates. The bracketed domain word is configurable; the wording
# otherwise stays fixed because the mock client classifies prompts by it.
ENTITY_SYSTEM = (
    "You are a {domain} assistant to carry out {domain_cap} Name Entity Recognition "
    "from a question and output JSON with only one key entity, like "
    "{{entities: [entity1, entity2,...]}}"
)
ENTITY_USER = "Get at most {max_entities} meaningful entities in the question: {question}."

SCORE_SYSTEM = (
    "You are a {domain} expert to score the triples based on the relevance of the "
    "question and output JSON with only one key triple like "
    "{{ triples: [{{ triple: {{ head: xxx, relation: xxx, tail: xxx }}, score: xxx }},...] }}. "
    "The score is between 0 and 1, and the order is from high to low."
)
SCORE_USER = "Based on the question: {question}, score the triples: {triples}."

REASON_SYSTEM = (
    "You are a {domain} expert to answer questions based on your own knowledge and "
    "the given information and give confidence [Yes/No]. The output should be a JSON "
    "with three keys confidence, answer, and support_info like "
    "{{confidence: xxx, answer: xxx, support_info: xxx}}"
)
REASON_USER_OPTIONS = (
    "Based on your own knowledge and the <knowledge triple>, choose one of the "
    "<Option> to answer the question. knowledge triple: {triples}, Q: {question}, "
    "Option: {options}, A: ?"
)
REASON_USER_FREE = (
    "Based on your own knowledge and the <knowledge triple>, answer the question. "
    "knowledge triple: {triples}, Q: {question}, A: ?"
)

GENERATE_SYSTEM = (
    "You are a {domain} expert to extract general {domain} knowledge from question "
    "and answer to create {domain} knowledge graph triples. The output should be a "
    "JSON with only one key: triples like this: {{ triples: [<triple1>, <triple2>, ...] }}, "
    "and each triple should be like: {{ head: xxx, relation: xxx, tail: xxx }}."
)
GENERATE_USER = (
    "Based on the question: {question}, answer: {answer} and entity: {entity}, "
    "extract and output triples."
)

REQUIRED_KEYS = {
    "entities": ("entities",),
    "scores": ("triples",),
    "reason": ("confidence", "answer", "support_info"),
    "triples": ("triples",),
}


class Confidence(Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


@dataclass(frozen=True)
class GenParams:
    """Generation knobs; retries counts re-asks after a malformed reply."""

    temperature: float = 0.2
    max_tokens: int = 2048
    retries: int = 3

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")


@dataclass(frozen=True)
class ReasonedAnswer:
    """Parsed answering reply: confidence flag, answer payload, support text."""

    confidence: Confidence
    answer: int | str
    support_info: str = ""


@dataclass(frozen=True)
class ScoredTriple:
    triple: Triple
    relevance: float


class LlmClient(Protocol):
    def complete(self, system_prompt: str, user_prompt: str, params: GenParams) -> str: ...


# -- reply parsing -----------------------------------------------------------

_FENCE = re.compile(r"```[a-zA-Z0-9_-]*")
_BARE_KEY = re.compile(r"([{,]\s*)([A-Za-z_][A-Za-z0-9_]*)\s*:")
_BARE_WORD = re.compile(r":\s*(?!true\b|false\b|null\b)([A-Za-z][A-Za-z0-9 _\-\'\.]*?)\s*(?=[,}\]])")


def _scan_objects(text: str, required: Sequence[str]) -> dict | None:
    decoder = json.JSONDecoder()
    idx = text.find("{")
    while idx != -1:
        try:
            value, _ = decoder.raw_decode(text, idx)
        except ValueError:
            value = None
        if isinstance(value, dict) and all(key in value for key in required):
            return value
        idx = text.find("{", idx + 1)
    return None


def parse_json_reply(raw: str, schema: str) -> dict:
    """Extract the first JSON object carrying the schema's required keys.

    Code fences and leading/trailing prose are stripped. A lenient second
    pass quotes bare keys and bare word values, which covers replies such
    as ``{answer: 0}`` that near-JSON models tend to produce.
    """
    required = REQUIRED_KEYS[schema]
    text = _FENCE.sub(" ", raw)
    found = _scan_objects(text, required)
    if found is None:
        lenient = _BARE_KEY.sub(r'\1"\2":', text)
        found = _scan_objects(lenient, required)
        if found is None:
            lenient = _BARE_WORD.sub(r': "\1"', lenient)
            found = _scan_objects(lenient, required)
    if found is None:
        raise MalformedReplyError(
            f"expected a JSON object with keys {list(required)}", raw=raw
        )
    return found


def _complete_parsed(llm: LlmClient, system: str, user: str, params: GenParams, schema: str, convert):
    """Ask, parse, convert; re-ask on malformed replies up to the budget.

    Exactly ``params.retries + 1`` completions are attempted before the
    last ``MalformedReplyError`` propagates.
    """
    last: MalformedReplyError | None = None
    for _ in range(params.retries + 1):
        raw = llm.complete(system, user, params)
        try:
            return convert(parse_json_reply(raw, schema))
        except MalformedReplyError as exc:
            if not exc.raw:
                exc.raw = raw
            last = exc
            logger.debug("malformed %s reply, retrying: %r", schema, raw[:200])
    assert last is not None
    raise last


def _render_triples(triples: Sequence[Triple]) -> str:
    return json.dumps([t.as_dict() for t in triples], ensure_ascii=False)


# -- gateway operations ------------------------------------------------------


def extract_entities(
    llm: LlmClient,
    question: "Question",
    max_entities: int = 5,
    domain: str = "general",
    params: GenParams | None = None,
) -> list[str]:
    """Ask the model for the question's topic entities.

    Entities come back normalized, deduplicated, and truncated to
    ``max_entities``.
    """
    if max_entities < 1:
        raise ValueError("max_entities must be >= 1")
    params = params or GenParams()
    system = ENTITY_SYSTEM.format(domain=domain, domain_cap=domain.capitalize())
    user = ENTITY_USER.format(max_entities=max_entities, question=question.text)

    def convert(parsed: dict) -> list[str]:
        value = parsed["entities"]
        if not isinstance(value, list):
            raise MalformedReplyError("entities is not a list")
        seen: dict[str, None] = {}
        for item in value:
            entity = normalize_text(str(item))
            if entity:
                seen.setdefault(entity, None)
        return list(seen)[:max_entities]

    return _complete_parsed(llm, system, user, params, "entities", convert)


def score_triples(
    llm: LlmClient,
    question: "Question",
    triples: Sequence[Triple],
    domain: str = "general",
    params: GenParams | None = None,
) -> list[ScoredTriple]:
    """Ask the model to rate each triple's relevance to the question.

    Every input triple gets a score: clamped to [0, 1] if present in the
    reply, 0 if the reply omitted it. The result is sorted by descending
    relevance with ties broken by triple text, so downstream truncation is
    independent of input order.
    """
    if not triples:
        raise ValueError("score_triples requires at least one triple")
    params = params or GenParams()
    system = SCORE_SYSTEM.format(domain=domain)
    user = SCORE_USER.format(question=question.text, triples=_render_triples(triples))

    def convert(parsed: dict) -> list[ScoredTriple]:
        value = parsed["triples"]
        if not isinstance(value, list):
            raise MalformedReplyError("triples is not a list")
        scores: dict[Triple, float] = {}
        for member in value:
            if not isinstance(member, dict):
                continue
            body = member.get("triple") if isinstance(member.get("triple"), dict) else member
            try:
                key = Triple(body["head"], body["relation"], body["tail"])
                score = float(member["score"])
            except Exception:
                continue
            scores.setdefault(key, min(max(score, 0.0), 1.0))
        ranked = [ScoredTriple(t, scores.get(t, 0.0)) for t in triples]
        ranked.sort(key=lambda st: (-st.relevance, st.triple.head, st.triple.relation, st.triple.tail))
        return ranked

    return _complete_parsed(llm, system, user, params, "scores", convert)


_POSITIVE_WORDS = {"yes", "positive", "true"}
_NEGATIVE_WORDS = {"no", "negative", "false"}


def reason(
    llm: LlmClient,
    question: "Question",
    triples: Sequence[Triple],
    domain: str = "general",
    params: GenParams | None = None,
) -> ReasonedAnswer:
    """Answer the question from model knowledge plus the given triples.

    An empty triple list is fine; the prompt is still sent with an empty
    knowledge section. The confidence flag is parsed case-insensitively
    from yes/no/positive/negative variants.
    """
    params = params or GenParams()
    system = REASON_SYSTEM.format(domain=domain)
    if question.options:
        user = REASON_USER_OPTIONS.format(
            triples=_render_triples(triples),
            question=question.text,
            options=json.dumps(list(question.options), ensure_ascii=False),
        )
    else:
        user = REASON_USER_FREE.format(
            triples=_render_triples(triples), question=question.text
        )

    def convert(parsed: dict) -> ReasonedAnswer:
        word = str(parsed["confidence"]).strip().lower()
        if word in _POSITIVE_WORDS:
            confidence = Confidence.POSITIVE
        elif word in _NEGATIVE_WORDS:
            confidence = Confidence.NEGATIVE
        else:
            raise MalformedReplyError(f"unrecognized confidence {parsed['confidence']!r}")
        answer = parsed["answer"]
        if isinstance(answer, bool):
            answer = str(answer)
        elif isinstance(answer, float):
            answer = int(answer) if answer.is_integer() else str(answer)
        elif not isinstance(answer, (int, str)):
            answer = str(answer)
        return ReasonedAnswer(
            confidence=confidence,
            answer=answer,
            support_info=str(parsed.get("support_info", "")),
        )

    return _complete_parsed(llm, system, user, params, "reason", convert)


def generate_triples(
    llm: LlmClient,
    question: "Question",
    gold_answer: str,
    context_triples: Sequence[Triple],
    domain: str = "general",
    params: GenParams | None = None,
) -> list[Triple]:
    """Harvest candidate triples from an answered question.

    ``gold_answer`` may be empty (question-only harvesting). Malformed
    members of the reply are dropped individually; a reply that stays
    unparseable through all retries yields an empty list so that graph
    growth degrades to a no-op instead of failing the question.
    """
    params = params or GenParams()
    entities: dict[str, None] = {}
    for t in context_triples:
        entities.setdefault(t.head, None)
        entities.setdefault(t.tail, None)
    system = GENERATE_SYSTEM.format(domain=domain)
    user = GENERATE_USER.format(
        question=question.text,
        answer=gold_answer,
        entity=json.dumps(list(entities), ensure_ascii=False),
    )

    def convert(parsed: dict) -> list[Triple]:
        value = parsed["triples"]
        if not isinstance(value, list):
            raise MalformedReplyError("triples is not a list")
        out: list[Triple] = []
        for member in value:
            if not isinstance(member, dict):
                continue
            body = member.get("triple") if isinstance(member.get("triple"), dict) else member
            try:
                out.append(Triple(body["head"], body["relation"], body["tail"]))
            except Exception:
                continue
        return out

    try:
        return _complete_parsed(llm, system, user, params, "triples", convert)
    except MalformedReplyError as exc:
        logger.warning("triple generation gave up after retries: %r", exc.raw[:200])
        return []


# -- clients -----------------------------------------------------------------


@dataclass(frozen=True)
class MockCall:
    kind: str
    system: str
    user: str


class MockLlm:
    """Scripted client replaying canned replies per prompt class.

    The script is an ordered list of ``(kind, reply)`` pairs where kind is
    one of entity/score/reason/generate; each class keeps its own cursor.
    Prompts are classified by the fixed key phrases of the templates.
    Every received call is recorded in ``calls`` for assertions.
    """

    KINDS = ("entity", "score", "reason", "generate")

    def __init__(self, script: Iterable[tuple[str, str]] = ()):
        self._queues: dict[str, deque[str]] = {kind: deque() for kind in self.KINDS}
        self.calls: list[MockCall] = []
        self._lock = threading.Lock()
        for kind, reply in script:
            self.add(kind, reply)

    def add(self, kind: str, reply: str) -> "MockLlm":
        if kind not in self._queues:
            raise ValueError(f"unknown prompt class {kind!r}")
        self._queues[kind].append(reply)
        return self

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "MockLlm":
        """Load a script file of ``{"match": kind, "reply": text}`` lines."""
        mock = cls()
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                try:
                    mock.add(record["match"], record["reply"])
                except (KeyError, TypeError) as exc:
                    raise ValueError(f"bad script line {line_no}: {exc}") from exc
        return mock

    @staticmethod
    def classify(system_prompt: str, user_prompt: str) -> str:
        text = f"{system_prompt}\n{user_prompt}"
        if "meaningful entities" in text:
            return "entity"
        if "score the triples" in text:
            return "score"
        if "extract and output triples" in text:
            return "generate"
        return "reason"

    def complete(self, system_prompt: str, user_prompt: str, params: GenParams) -> str:
        kind = self.classify(system_prompt, user_prompt)
        with self._lock:
            self.calls.append(MockCall(kind, system_prompt, user_prompt))
            queue = self._queues[kind]
            if not queue:
                raise ScriptExhaustedError(f"no scripted replies left for class {kind!r}")
            return queue.popleft()

    def remaining(self, kind: str) -> int:
        with self._lock:
            return len(self._queues[kind])


class RemoteLlm:
    """OpenAI-compatible chat-completions client.

    Posts ``{model, messages, temperature, max_tokens}`` and returns the
    first choice's message content. Transient failures (network errors,
    429, 5xx) are retried with exponential backoff; everything else raises
    ``UpstreamServiceError`` immediately.
    """

    TRANSIENT_STATUS = (429, 500, 502, 503, 504)

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str = "",
        timeout: float = 60.0,
        transport_retries: int = 3,
        backoff: float = 0.5,
        client: httpx.Client | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.transport_retries = transport_retries
        self.backoff = backoff
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = client or httpx.Client(timeout=timeout, headers=headers)

    @classmethod
    def from_env(cls, **kwargs) -> "RemoteLlm":
        base_url = os.environ.get(ENV_BASE_URL, "").strip()
        model = os.environ.get(ENV_MODEL, "").strip()
        if not base_url or not model:
            raise UpstreamServiceError(
                f"remote model requires {ENV_BASE_URL} and {ENV_MODEL} to be set"
            )
        return cls(base_url, model, api_key=os.environ.get(ENV_API_KEY, ""), **kwargs)

    def complete(self, system_prompt: str, user_prompt: str, params: GenParams) -> str:
        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": system_prompt},
                {"role": "user", "content": user_prompt},
            ],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        }
        last_error: Exception | None = None
        for attempt in range(self.transport_retries + 1):
            try:
                response = self._client.post(f"{self.base_url}/chat/completions", json=payload)
                if response.status_code in self.TRANSIENT_STATUS:
                    last_error = UpstreamServiceError(
                        f"chat endpoint returned {response.status_code}"
                    )
                elif response.status_code != 200:
                    raise UpstreamServiceError(
                        f"chat endpoint returned {response.status_code}: {response.text[:200]}"
                    )
                else:
                    body = response.json()
                    try:
                        return body["choices"][0]["message"]["content"]
                    except (KeyError, IndexError, TypeError) as exc:
                        raise UpstreamServiceError(f"unexpected chat payload: {exc}") from exc
            except httpx.TransportError as exc:
                last_error = exc
            if attempt < self.transport_retries:
                time.sleep(self.backoff * (2**attempt))
        raise UpstreamServiceError(
            f"chat request failed after {self.transport_retries + 1} attempts: {last_error}"
        )
