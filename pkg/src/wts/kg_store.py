"""Triple store with an entity index for exact-match retrieval.

The store keeps (head, relation, tail) facts, deduplicated under text
normalization, and an inverted index from entity text to the triples in
which it appears as head or tail. Relations take part in duplicate
detection but are not indexed: retrieval is entity-driven.

Concurrency model: many readers, one serialized writer. All mutation and
all index reads go through a single re-entrant lock, so readers always see
a consistent index and query results are handed out as fresh snapshots.

Persistence is JSON Lines, one object per triple:
``{"id": int, "head": str, "relation": str, "tail": str}``. The format is
append-friendly; ids are stable across save/load and never reused.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import EmptyFieldError, StoreFormatError


def normalize_text(text: str) -> str:
    """Lowercase, trim, and collapse internal whitespace runs.

    Unicode-aware: casing uses ``str.lower`` and any whitespace character
    counts as a separator.
    """
    return " ".join(str(text).lower().split())


@dataclass(frozen=True)
class Triple:
    """One knowledge fact: subject entity, relation, object entity.

    Fields are normalized at construction, so equality and hashing are
    normalization-insensitive. Construction fails if any field normalizes
    to the empty string.
    """

    head: str
    relation: str
    tail: str

    def __post_init__(self):
        for name in ("head", "relation", "tail"):
            value = normalize_text(getattr(self, name))
            if not value:
                raise EmptyFieldError(f"triple field {name!r} is empty after normalization")
            object.__setattr__(self, name, value)

    def as_dict(self) -> dict[str, str]:
        return {"head": self.head, "relation": self.relation, "tail": self.tail}


@dataclass(frozen=True)
class AddResult:
    """Outcome of an insert: the triple's id, and whether it was new."""

    triple_id: int
    created: bool


@dataclass(frozen=True)
class StoreStats:
    triple_count: int
    entity_count: int
    relation_count: int


class DkgStore:
    """In-memory triple set plus entity index, with JSONL persistence."""

    def __init__(self):
        self._lock = threading.RLock()
        self._by_id: dict[int, Triple] = {}
        self._id_by_triple: dict[Triple, int] = {}
        self._entity_index: dict[str, set[int]] = {}
        self._next_id = 1

    def __len__(self) -> int:
        with self._lock:
            return len(self._by_id)

    # -- writes ------------------------------------------------------------

    def add_triple(self, triple: Triple) -> AddResult:
        """Insert ``triple`` unless an identical one is already stored.

        Returns the existing id with ``created=False`` on a duplicate; the
        store is left unchanged in that case.
        """
        with self._lock:
            existing = self._id_by_triple.get(triple)
            if existing is not None:
                return AddResult(triple_id=existing, created=False)
            triple_id = self._next_id
            self._next_id += 1
            self._insert(triple_id, triple)
            return AddResult(triple_id=triple_id, created=True)

    def add_batch(self, triples: Iterable[Triple]) -> list[int]:
        """Insert several triples atomically: all of them or none.

        Raises ``ValueError`` (after rolling back) if any member is already
        stored or appears twice in the batch; callers are expected to have
        screened duplicates already.
        """
        with self._lock:
            added: list[int] = []
            try:
                for triple in triples:
                    if triple in self._id_by_triple:
                        raise ValueError(f"duplicate triple in batch: {triple}")
                    triple_id = self._next_id
                    self._next_id += 1
                    self._insert(triple_id, triple)
                    added.append(triple_id)
            except Exception:
                for triple_id in added:
                    self._remove_unlocked(triple_id)
                raise
            return added

    def remove_triple(self, triple_id: int) -> bool:
        """Admin-only delete; the question-answering write path never removes.

        Freed ids are not reused.
        """
        with self._lock:
            return self._remove_unlocked(triple_id)

    def _insert(self, triple_id: int, triple: Triple) -> None:
        self._by_id[triple_id] = triple
        self._id_by_triple[triple] = triple_id
        for entity in (triple.head, triple.tail):
            self._entity_index.setdefault(entity, set()).add(triple_id)

    def _remove_unlocked(self, triple_id: int) -> bool:
        triple = self._by_id.pop(triple_id, None)
        if triple is None:
            return False
        del self._id_by_triple[triple]
        for entity in (triple.head, triple.tail):
            ids = self._entity_index.get(entity)
            if ids is not None:
                ids.discard(triple_id)
                if not ids:
                    del self._entity_index[entity]
        return True

    # -- reads -------------------------------------------------------------

    def exact_match(self, entity: str) -> list[Triple]:
        """All stored triples having ``entity`` as head or tail.

        The query text is normalized before lookup; an unknown entity
        yields an empty list, not an error. Results are ordered by id so
        repeated calls are deterministic.
        """
        key = normalize_text(entity)
        if not key:
            raise EmptyFieldError("entity query is empty after normalization")
        with self._lock:
            ids = self._entity_index.get(key)
            if not ids:
                return []
            return [self._by_id[i] for i in sorted(ids)]

    def contains_exact(self, triple: Triple) -> bool:
        with self._lock:
            return triple in self._id_by_triple

    def get(self, triple_id: int) -> Triple | None:
        with self._lock:
            return self._by_id.get(triple_id)

    def triples(self) -> list[Triple]:
        """Snapshot of all triples in id order."""
        with self._lock:
            return [self._by_id[i] for i in sorted(self._by_id)]

    def items(self) -> list[tuple[int, Triple]]:
        with self._lock:
            return [(i, self._by_id[i]) for i in sorted(self._by_id)]

    def entities(self) -> list[str]:
        with self._lock:
            return sorted(self._entity_index)

    def stats(self) -> StoreStats:
        with self._lock:
            return StoreStats(
                triple_count=len(self._by_id),
                entity_count=len(self._entity_index),
                relation_count=len({t.relation for t in self._by_id.values()}),
            )

    # -- persistence ---------------------------------------------------------

    def save(self, path: str | Path) -> None:
        """Write the store as JSONL, one triple per line, in id order."""
        with self._lock:
            rows = self.items()
        with open(path, "w", encoding="utf-8") as fh:
            for triple_id, triple in rows:
                record = {"id": triple_id, **triple.as_dict()}
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "DkgStore":
        """Rebuild a store from a file written by :meth:`save`.

        Ids are restored verbatim; the id counter resumes past the highest
        seen. Malformed records raise ``StoreFormatError`` with the
        offending line number.
        """
        store = cls()
        max_id = 0
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise StoreFormatError(line_no, f"invalid JSON: {exc}") from exc
                if not isinstance(record, dict):
                    raise StoreFormatError(line_no, "record is not an object")
                missing = [k for k in ("id", "head", "relation", "tail") if k not in record]
                if missing:
                    raise StoreFormatError(line_no, f"missing keys: {', '.join(missing)}")
                if not isinstance(record["id"], int) or isinstance(record["id"], bool):
                    raise StoreFormatError(line_no, "id must be an integer")
                try:
                    triple = Triple(record["head"], record["relation"], record["tail"])
                except EmptyFieldError as exc:
                    raise StoreFormatError(line_no, str(exc)) from exc
                triple_id = record["id"]
                if triple_id in store._by_id:
                    raise StoreFormatError(line_no, f"duplicate id {triple_id}")
                if triple in store._id_by_triple:
                    raise StoreFormatError(line_no, f"duplicate triple {triple}")
                store._insert(triple_id, triple)
                max_id = max(max_id, triple_id)
        store._next_id = max_id + 1
        return store
