import json

import pytest
from fastapi.testclient import TestClient

from ontoforge.corpus import Triple
from ontoforge.review import (
    DecisionConflictError,
    DuplicateRunError,
    ReviewEntry,
    ReviewStore,
    UnknownRunError,
    context_excerpt,
    create_app,
    entries_from_run,
)


def five_entries():
    return [
        ReviewEntry(Triple(f"s{i}", f"o{i}", "affects", "doc"), context=f"ctx {i}")
        for i in range(5)
    ]


def make_store(tmp_path, **kwargs):
    kwargs.setdefault("clock", lambda: "2026-02-03T04:05:06Z")
    return ReviewStore(tmp_path / "store", **kwargs)


class TestCreateReview:
    def test_one_pending_item_per_unique_triple(self, tmp_path):
        store = make_store(tmp_path)
        state = store.create_review("r1", five_entries())
        assert len(state.item_order) == 5
        assert all(state.items[i].status == "pending" for i in state.item_order)

    def test_duplicates_are_collapsed(self, tmp_path):
        store = make_store(tmp_path)
        entries = five_entries() + five_entries()
        state = store.create_review("r1", entries)
        assert len(state.item_order) == 5

    def test_duplicate_run_id_rejected(self, tmp_path):
        store = make_store(tmp_path)
        store.create_review("r1", five_entries())
        with pytest.raises(DuplicateRunError):
            store.create_review("r1", five_entries())


class TestDecide:
    def test_accept(self, tmp_path):
        store = make_store(tmp_path)
        store.create_review("r1", five_entries())
        item = store.decide("r1", "item-0001", "accept", reviewer="alex")
        assert item.status == "accepted"
        assert item.reviewer == "alex"
        assert item.decided_at == "2026-02-03T04:05:06Z"

    def test_edit_stores_edited_triple(self, tmp_path):
        store = make_store(tmp_path)
        store.create_review("r1", [ReviewEntry(Triple("cast iron", "mechanical strength", "has property", "d"))])
        edited = Triple("cast iron", "mechanical strength", "lacks", "d")
        item = store.decide("r1", "item-0001", "edit", edited_triple=edited)
        assert item.status == "edited"
        assert item.edited_triple == edited

    def test_second_decision_conflicts(self, tmp_path):
        store = make_store(tmp_path)
        store.create_review("r1", five_entries())
        store.decide("r1", "item-0001", "accept")
        with pytest.raises(DecisionConflictError):
            store.decide("r1", "item-0001", "reject")

    def test_unknown_ids(self, tmp_path):
        store = make_store(tmp_path)
        store.create_review("r1", five_entries())
        with pytest.raises(UnknownRunError):
            store.decide("ghost", "item-0001", "accept")

    def test_decision_durable_before_response(self, tmp_path):
        store = make_store(tmp_path)
        store.create_review("r1", five_entries())
        store.decide("r1", "item-0001", "accept")
        events_file = tmp_path / "store" / "r1.events.jsonl"
        events = [json.loads(l) for l in events_file.read_text().splitlines()]
        assert events[0]["item_id"] == "item-0001" and events[0]["action"] == "accept"


class TestReplay:
    def test_replay_after_each_event_prefix(self, tmp_path):
        """Kill-and-replay: any prefix of the event log reconstructs state exactly."""
        store = make_store(tmp_path)
        store.create_review("r1", five_entries())
        decisions = [
            ("item-0001", "accept", None),
            ("item-0002", "reject", None),
            ("item-0003", "edit", Triple("s2", "o2", "renamed", "doc")),
            ("item-0004", "accept", None),
        ]
        snapshots = []
        for item_id, action, edited in decisions:
            store.decide("r1", item_id, action, reviewer="x", edited_triple=edited)
            snapshots.append({i: store.get_run("r1").items[i] for i in store.get_run("r1").item_order})

        events_file = tmp_path / "store" / "r1.events.jsonl"
        all_events = events_file.read_text().splitlines()
        assert len(all_events) == 4
        for prefix_len in range(len(all_events) + 1):
            events_file.write_text("\n".join(all_events[:prefix_len]) + ("\n" if prefix_len else ""))
            reloaded = ReviewStore(tmp_path / "store")
            state = reloaded.get_run("r1")
            if prefix_len == 0:
                assert all(state.items[i].status == "pending" for i in state.item_order)
            else:
                assert {i: state.items[i] for i in state.item_order} == snapshots[prefix_len - 1]

    def test_fresh_store_replays_decisions(self, tmp_path):
        store = make_store(tmp_path)
        store.create_review("r1", five_entries())
        store.decide("r1", "item-0002", "accept")
        reloaded = ReviewStore(tmp_path / "store")
        assert reloaded.get_run("r1").items["item-0002"].status == "accepted"
        with pytest.raises(DecisionConflictError):
            reloaded.decide("r1", "item-0002", "reject")


class TestExportAndStats:
    def decide_mixed(self, store):
        store.create_review("r1", five_entries())
        store.decide("r1", "item-0001", "accept")
        store.decide("r1", "item-0002", "accept")
        store.decide("r1", "item-0003", "edit", edited_triple=Triple("e", "f", "edited rel", "doc"))
        store.decide("r1", "item-0004", "reject")
        # item-0005 stays pending

    def test_export_partitions_items(self, tmp_path):
        store = make_store(tmp_path)
        self.decide_mixed(store)
        exported = store.export_accepted("r1")
        assert len(exported) == 3  # 2 accepted + 1 edited
        assert Triple("e", "f", "edited rel", "doc") in exported
        state = store.get_run("r1")
        statuses = [state.items[i].status for i in state.item_order]
        assert sorted(statuses) == ["accepted", "accepted", "edited", "pending", "rejected"]
        # exported + rejected + pending partition the item set
        assert len(exported) + statuses.count("rejected") + statuses.count("pending") == 5

    def test_all_rejected_exports_empty(self, tmp_path):
        store = make_store(tmp_path)
        store.create_review("r1", five_entries())
        for i in range(1, 6):
            store.decide("r1", f"item-{i:04d}", "reject")
        assert store.export_accepted("r1") == []

    def test_stats_acceptance_rate(self, tmp_path):
        store = make_store(tmp_path)
        self.decide_mixed(store)
        stats = store.stats("r1")
        assert stats["decided"] == 4
        assert stats["acceptance_rate"] == pytest.approx(3 / 4)

    def test_stats_not_applicable_when_nothing_decided(self, tmp_path):
        store = make_store(tmp_path)
        store.create_review("r1", five_entries())
        assert store.stats("r1")["acceptance_rate"] is None

    def test_rate_analogue_93_of_100(self, tmp_path):
        store = make_store(tmp_path)
        entries = [ReviewEntry(Triple(f"s{i}", f"o{i}", "r", "d")) for i in range(100)]
        store.create_review("r1", entries)
        for i in range(1, 94):
            store.decide("r1", f"item-{i:04d}", "accept")
        for i in range(94, 101):
            store.decide("r1", f"item-{i:04d}", "reject")
        assert store.stats("r1")["acceptance_rate"] == pytest.approx(0.93)


class TestContextExcerpt:
    def test_window_around_subject(self):
        text = "x" * 300 + " molten metal " + "y" * 300
        excerpt = context_excerpt(text, "molten metal")
        assert "molten metal" in excerpt
        assert excerpt.startswith("…") and excerpt.endswith("…")
        assert len(excerpt) < 300

    def test_absent_subject_falls_back_to_head(self):
        assert context_excerpt("short text", "ghost") == "short text"


class TestEntriesFromRun:
    def test_context_attached_and_deduped(self, gold, train):
        from ontoforge.extract import DocPrediction, ExtractionRun, gold_triples_for_item

        item = gold.items[0]
        triples = gold.triples_for(item.doc.id)
        run = ExtractionRun(
            strategy="icl",
            task="relations",
            model="m",
            params={},
            predictions=[DocPrediction(doc_id=item.doc.id, triples=triples + triples)],
        )
        entries = entries_from_run(run, gold)
        assert len(entries) == len(triples)
        assert all(e.triple.subject.casefold() in e.context.casefold() for e in entries)


class TestHttpApi:
    @pytest.fixture
    def client(self, tmp_path):
        store = make_store(tmp_path)
        return TestClient(create_app(store))

    def create(self, client):
        body = {
            "run_id": "r1",
            "triples": [
                {"subject": f"s{i}", "object": f"o{i}", "relation": "affects", "source_doc": "d", "context": f"ctx {i}"}
                for i in range(3)
            ],
        }
        response = client.post("/runs", json=body)
        assert response.status_code == 201
        return response.json()

    def test_create_and_list(self, client):
        created = self.create(client)
        assert created == {"run_id": "r1", "total": 3}
        runs = client.get("/runs").json()["runs"]
        assert runs[0]["run_id"] == "r1" and runs[0]["pending"] == 3

    def test_duplicate_create_conflicts(self, client):
        self.create(client)
        response = client.post("/runs", json={"run_id": "r1", "triples": []})
        assert response.status_code == 409

    def test_items_pagination_and_filter(self, client):
        self.create(client)
        page = client.get("/runs/r1/items", params={"page": 1, "page_size": 2}).json()
        assert len(page["items"]) == 2 and page["total"] == 3
        client.post(
            "/runs/r1/items/item-0001/decision",
            json={"action": "accept", "reviewer": "x"},
        )
        pending = client.get("/runs/r1/items", params={"status": "pending"}).json()
        assert pending["total"] == 2

    def test_decision_flow_and_conflict(self, client):
        self.create(client)
        ok = client.post(
            "/runs/r1/items/item-0001/decision", json={"action": "accept", "reviewer": "x"}
        )
        assert ok.status_code == 200 and ok.json()["status"] == "accepted"
        conflict = client.post(
            "/runs/r1/items/item-0001/decision", json={"action": "reject", "reviewer": "x"}
        )
        assert conflict.status_code == 409

    def test_edit_and_export(self, client):
        self.create(client)
        client.post(
            "/runs/r1/items/item-0001/decision",
            json={
                "action": "edit",
                "reviewer": "x",
                "edited_triple": {"subject": "s0", "object": "o0", "relation": "lacks", "source_doc": "d"},
            },
        )
        client.post("/runs/r1/items/item-0002/decision", json={"action": "accept"})
        client.post("/runs/r1/items/item-0003/decision", json={"action": "reject"})
        exported = client.get("/runs/r1/export", params={"status": "accepted"}).json()
        relations = sorted(t["relation"] for t in exported["triples"])
        assert relations == ["affects", "lacks"]

    def test_stats_endpoint(self, client):
        self.create(client)
        client.post("/runs/r1/items/item-0001/decision", json={"action": "accept"})
        stats = client.get("/runs/r1/stats").json()
        assert stats["accepted"] == 1 and stats["pending"] == 2
        assert stats["acceptance_rate"] == 1.0

    def test_unknown_run_404(self, client):
        assert client.get("/runs/ghost/stats").status_code == 404
        assert client.get("/runs/ghost/items").status_code == 404

    def test_bad_action_422(self, client):
        self.create(client)
        response = client.post("/runs/r1/items/item-0001/decision", json={"action": "maybe"})
        assert response.status_code == 422
