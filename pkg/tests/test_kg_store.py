import json
import random

import pytest

from mockkit import random_store, random_triple
from wts import DkgStore, Triple
from wts.errors import EmptyFieldError, StoreFormatError


def test_first_insertion_gets_id_one():
    store = DkgStore()
    result = store.add_triple(Triple("a", "r", "b"))
    assert result.triple_id == 1
    assert result.created


def test_duplicate_add_is_rejected():
    store = DkgStore()
    first = store.add_triple(Triple("a", "r", "b"))
    second = store.add_triple(Triple("a", "r", "b"))
    assert not second.created
    assert second.triple_id == first.triple_id
    assert store.stats().triple_count == 1


def test_medical_example_triple():
    store = DkgStore()
    triple = Triple("auriculotemporal nerve", "encircle", "middle meningeal artery")
    assert store.add_triple(triple).created
    assert store.exact_match("middle meningeal artery") == [triple]


def test_normalization_applied_at_construction():
    triple = Triple("  Heart ", "PUMPS", "  blood\tcells ")
    assert triple.head == "heart"
    assert triple.relation == "pumps"
    assert triple.tail == "blood cells"


@pytest.mark.parametrize("fields", [("", "r", "b"), ("a", "  ", "b"), ("a", "r", "\t")])
def test_empty_field_rejected(fields):
    with pytest.raises(EmptyFieldError):
        Triple(*fields)


def test_exact_match_empty_store():
    assert DkgStore().exact_match("anything") == []


def test_exact_match_tail_side():
    store = DkgStore()
    triple = Triple("a", "r", "b")
    store.add_triple(triple)
    assert store.exact_match("b") == [triple]


def test_exact_match_normalizes_query():
    store = DkgStore()
    triple = Triple("middle meningeal artery", "r", "b")
    store.add_triple(triple)
    assert store.exact_match("  Middle   Meningeal ARTERY ") == [triple]


def test_exact_match_empty_query_rejected():
    with pytest.raises(EmptyFieldError):
        DkgStore().exact_match("   ")


def test_contains_exact_cases():
    store = DkgStore()
    assert not store.contains_exact(Triple("a", "r", "b"))
    store.add_triple(Triple("a", "r", "b"))
    assert store.contains_exact(Triple("A", "R", "B"))
    assert not store.contains_exact(Triple("a", "r2", "b"))


def test_stats_counts():
    store = DkgStore()
    assert store.stats() == store.stats()
    assert (store.stats().triple_count, store.stats().entity_count, store.stats().relation_count) == (0, 0, 0)
    store.add_triple(Triple("a", "r", "b"))
    s = store.stats()
    assert (s.triple_count, s.entity_count, s.relation_count) == (1, 2, 1)
    store.add_triple(Triple("b", "r", "c"))
    s = store.stats()
    assert (s.triple_count, s.entity_count, s.relation_count) == (2, 3, 1)


def test_entity_count_bounded_by_twice_triples():
    rng = random.Random(5)
    store = random_store(rng, 200)
    s = store.stats()
    assert s.entity_count <= 2 * s.triple_count


def test_save_load_empty(tmp_path):
    path = tmp_path / "empty.jsonl"
    DkgStore().save(path)
    assert len(DkgStore.load(path)) == 0


def test_save_load_roundtrip_random(tmp_path):
    rng = random.Random(17)
    store = random_store(rng, 100)
    path = tmp_path / "store.jsonl"
    store.save(path)
    loaded = DkgStore.load(path)
    assert loaded.items() == store.items()
    # the files themselves agree line for line
    second = tmp_path / "again.jsonl"
    loaded.save(second)
    assert sorted(path.read_text().splitlines()) == sorted(second.read_text().splitlines())


def test_load_record_missing_tail(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(
        json.dumps({"id": 1, "head": "a", "relation": "r", "tail": "b"})
        + "\n"
        + json.dumps({"id": 2, "head": "a", "relation": "r"})
        + "\n"
    )
    with pytest.raises(StoreFormatError) as err:
        DkgStore.load(path)
    assert err.value.line_no == 2


def test_load_rejects_bad_json_and_duplicates(tmp_path):
    path = tmp_path / "broken.jsonl"
    path.write_text("{not json\n")
    with pytest.raises(StoreFormatError):
        DkgStore.load(path)

    path.write_text(
        json.dumps({"id": 1, "head": "a", "relation": "r", "tail": "b"}) + "\n"
        + json.dumps({"id": 1, "head": "c", "relation": "r", "tail": "d"}) + "\n"
    )
    with pytest.raises(StoreFormatError) as err:
        DkgStore.load(path)
    assert err.value.line_no == 2


def test_ids_continue_after_load(tmp_path):
    store = DkgStore()
    store.add_triple(Triple("a", "r", "b"))
    store.add_triple(Triple("b", "r", "c"))
    path = tmp_path / "s.jsonl"
    store.save(path)
    loaded = DkgStore.load(path)
    assert loaded.add_triple(Triple("c", "r", "d")).triple_id == 3


def test_add_idempotent_under_normalization():
    store = DkgStore()
    for _ in range(5):
        store.add_triple(Triple(" A ", "r", "B"))
    assert store.stats().triple_count == 1


def test_exact_match_equals_linear_scan_on_random_stores():
    rng = random.Random(99)
    for round_no in range(10):
        store = random_store(rng, rng.randint(1, 500))
        all_triples = store.triples()
        entities = {t.head for t in all_triples} | {t.tail for t in all_triples}
        probes = rng.sample(sorted(entities), min(10, len(entities))) + ["unknown entity"]
        for entity in probes:
            expected = {t for t in all_triples if entity in (t.head, t.tail)}
            assert set(store.exact_match(entity)) == expected


def test_entity_index_consistent_after_mutations():
    rng = random.Random(3)
    store = DkgStore()
    ids = []
    for _ in range(300):
        result = store.add_triple(random_triple(rng))
        if result.created:
            ids.append(result.triple_id)
    for victim in rng.sample(ids, 40):
        assert store.remove_triple(victim)
    # rebuild the index from scratch and compare against live queries
    rebuilt: dict[str, set[int]] = {}
    for triple_id, triple in store.items():
        rebuilt.setdefault(triple.head, set()).add(triple_id)
        rebuilt.setdefault(triple.tail, set()).add(triple_id)
    for entity in rebuilt:
        got = {t for t in store.exact_match(entity)}
        expected = {store.get(i) for i in rebuilt[entity]}
        assert got == expected
    assert store.entities() == sorted(rebuilt)


def test_removed_id_never_reused():
    store = DkgStore()
    first = store.add_triple(Triple("a", "r", "b")).triple_id
    store.remove_triple(first)
    again = store.add_triple(Triple("a", "r", "b")).triple_id
    assert again != first


def test_add_batch_all_or_nothing():
    store = DkgStore()
    store.add_triple(Triple("a", "r", "b"))
    with pytest.raises(ValueError):
        store.add_batch([Triple("x", "r", "y"), Triple("a", "r", "b")])
    assert store.stats().triple_count == 1
    assert not store.contains_exact(Triple("x", "r", "y"))


def test_concurrent_readers_with_single_writer():
    import threading

    store = DkgStore()
    rng = random.Random(41)
    errors = []
    stop = threading.Event()

    def reader():
        local = random.Random(7)
        while not stop.is_set():
            entity = local.choice(["artery", "nerve", "vein", "unknown thing"])
            try:
                for triple in store.exact_match(entity):
                    # every returned triple must actually touch the entity
                    if entity not in (triple.head, triple.tail):
                        errors.append(f"torn read for {entity}: {triple}")
                store.stats()
            except Exception as exc:  # noqa: BLE001 - collected for the assert
                errors.append(repr(exc))

    readers = [threading.Thread(target=reader) for _ in range(4)]
    for t in readers:
        t.start()
    for _ in range(500):
        store.add_triple(random_triple(rng))
    stop.set()
    for t in readers:
        t.join()
    assert errors == []
    s = store.stats()
    assert s.entity_count <= 2 * s.triple_count
