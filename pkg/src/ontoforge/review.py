"""Expert-validation service: triples in, accept/reject/edit decisions out.

State is an append-only event log per review run, folded over the initial
item set. Every decision is flushed and fsynced to disk before the caller
gets a response, so replaying the log after a crash reconstructs the exact
state. Decisions are immutable: a second decision on the same item is a
conflict, never an overwrite.

The HTTP layer is deliberately thin; all behavior lives in ReviewStore so the
durability and partition properties are testable without a server. There is
no authentication: the service is meant to run on a trusted network.
"""

# No `from __future__ import annotations` here: FastAPI must resolve the
# closure-local pydantic request models at runtime.

import json
import os
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from .corpus import Dataset, Triple

ACTIONS = ("accept", "reject", "edit")
_STATUS_BY_ACTION = {"accept": "accepted", "reject": "rejected", "edit": "edited"}


class ReviewError(Exception):
    pass


class UnknownRunError(ReviewError):
    pass


class UnknownItemError(ReviewError):
    pass


class DuplicateRunError(ReviewError):
    pass


class DecisionConflictError(ReviewError):
    """The item already carries a decision."""


@dataclass(frozen=True)
class ReviewItem:
    id: str
    triple: Triple
    context_excerpt: str
    status: str = "pending"
    edited_triple: Triple | None = None
    reviewer: str = ""
    decided_at: str = ""

    def __post_init__(self):
        if self.status not in ("pending", "accepted", "rejected", "edited"):
            raise ValueError(f"unknown status {self.status!r}")
        if (self.edited_triple is not None) != (self.status == "edited"):
            raise ValueError("edited_triple present iff status is edited")


@dataclass
class ReviewRunState:
    run_id: str
    items: dict[str, ReviewItem] = field(default_factory=dict)
    item_order: list[str] = field(default_factory=list)
    event_count: int = 0

    def counters(self) -> dict[str, int]:
        out = {"pending": 0, "accepted": 0, "rejected": 0, "edited": 0}
        for item_id in self.item_order:
            out[self.items[item_id].status] += 1
        out["total"] = len(self.item_order)
        return out


def _triple_dict(t: Triple) -> dict:
    return {"subject": t.subject, "object": t.object, "relation": t.relation, "source_doc": t.source_doc}


def _triple_from(d: dict) -> Triple:
    return Triple(d["subject"], d["object"], d["relation"], d.get("source_doc", ""))


def apply_event(state: ReviewRunState, event: dict) -> ReviewItem:
    """Fold one decision event into the state. Pure apart from the state mutation."""
    item_id = event["item_id"]
    if item_id not in state.items:
        raise UnknownItemError(f"unknown item {item_id!r} in run {state.run_id!r}")
    item = state.items[item_id]
    if item.status != "pending":
        raise DecisionConflictError(f"item {item_id!r} already {item.status}")
    action = event["action"]
    if action not in ACTIONS:
        raise ReviewError(f"unknown action {action!r}")
    edited = _triple_from(event["edited_triple"]) if action == "edit" else None
    if action == "edit" and edited is None:
        raise ReviewError("edit decision requires edited_triple")
    updated = replace(
        item,
        status=_STATUS_BY_ACTION[action],
        edited_triple=edited,
        reviewer=event.get("reviewer", ""),
        decided_at=event.get("at", ""),
    )
    state.items[item_id] = updated
    state.event_count += 1
    return updated


def context_excerpt(text: str, subject: str, window: int = 120) -> str:
    """A window of the source text around the subject's first occurrence."""
    pos = text.casefold().find(subject.casefold())
    if pos < 0:
        return text[: 2 * window] + ("…" if len(text) > 2 * window else "")
    start = max(0, pos - window)
    end = min(len(text), pos + len(subject) + window)
    prefix = "…" if start > 0 else ""
    suffix = "…" if end < len(text) else ""
    return prefix + text[start:end] + suffix


@dataclass(frozen=True)
class ReviewEntry:
    triple: Triple
    context: str = ""


def entries_from_run(run, dataset: Dataset | None = None) -> list[ReviewEntry]:
    """Unique relation triples from an extraction run, with source context."""
    if run.task != "relations":
        raise ReviewError("review runs are created from relation predictions")
    texts = {item.doc.id: item.doc.text for item in dataset.items} if dataset else {}
    entries: list[ReviewEntry] = []
    seen: set[tuple[str, str, str, str]] = set()
    for pred in run.predictions:
        for t in pred.triples or []:
            key = (t.subject, t.object, t.relation, t.source_doc)
            if key in seen:
                continue
            seen.add(key)
            context = ""
            if t.source_doc in texts:
                context = context_excerpt(texts[t.source_doc], t.subject)
            entries.append(ReviewEntry(triple=t, context=context))
    return entries


class ReviewStore:
    """Durable multi-run review state rooted at a directory.

    Per run: ``<run_id>.items.jsonl`` (the immutable initial item set) and
    ``<run_id>.events.jsonl`` (append-only decisions). All mutations are
    serialized through one lock; reads return snapshots.
    """

    def __init__(self, root: str | Path, clock=None):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._clock = clock or (lambda: time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()))
        self._lock = threading.Lock()
        self._runs: dict[str, ReviewRunState] = {}
        self._replay_all()

    # --- persistence ----------------------------------------------------

    def _items_path(self, run_id: str) -> Path:
        return self.root / f"{run_id}.items.jsonl"

    def _events_path(self, run_id: str) -> Path:
        return self.root / f"{run_id}.events.jsonl"

    def _replay_all(self) -> None:
        for items_file in sorted(self.root.glob("*.items.jsonl")):
            run_id = items_file.name[: -len(".items.jsonl")]
            self._runs[run_id] = self._replay_run(run_id)

    def _replay_run(self, run_id: str) -> ReviewRunState:
        state = ReviewRunState(run_id=run_id)
        for line in self._items_path(run_id).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            record = json.loads(line)
            item = ReviewItem(
                id=record["id"],
                triple=_triple_from(record["triple"]),
                context_excerpt=record.get("context_excerpt", ""),
            )
            state.items[item.id] = item
            state.item_order.append(item.id)
        events_path = self._events_path(run_id)
        if events_path.exists():
            for line in events_path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                apply_event(state, json.loads(line))
        return state

    # --- operations -------------------------------------------------------

    def run_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._runs)

    def create_review(self, run_id: str, entries: list[ReviewEntry]) -> ReviewRunState:
        if not run_id or "/" in run_id:
            raise ReviewError(f"invalid run id {run_id!r}")
        with self._lock:
            if run_id in self._runs:
                raise DuplicateRunError(f"run {run_id!r} already exists")
            state = ReviewRunState(run_id=run_id)
            seen: set[tuple[str, str, str, str]] = set()
            lines = []
            for entry in entries:
                t = entry.triple
                key = (t.subject, t.object, t.relation, t.source_doc)
                if key in seen:
                    continue
                seen.add(key)
                item_id = f"item-{len(state.item_order) + 1:04d}"
                item = ReviewItem(id=item_id, triple=t, context_excerpt=entry.context)
                state.items[item_id] = item
                state.item_order.append(item_id)
                lines.append(
                    json.dumps(
                        {"id": item_id, "triple": _triple_dict(t), "context_excerpt": entry.context},
                        ensure_ascii=False,
                    )
                )
            self._items_path(run_id).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
            self._runs[run_id] = state
            return state

    def _state(self, run_id: str) -> ReviewRunState:
        if run_id not in self._runs:
            raise UnknownRunError(f"unknown run {run_id!r}")
        return self._runs[run_id]

    def get_run(self, run_id: str) -> ReviewRunState:
        with self._lock:
            return self._state(run_id)

    def items(self, run_id: str, status: str | None = None) -> list[ReviewItem]:
        with self._lock:
            state = self._state(run_id)
            items = [state.items[i] for i in state.item_order]
        if status:
            items = [i for i in items if i.status == status]
        return items

    def decide(
        self,
        run_id: str,
        item_id: str,
        action: str,
        reviewer: str = "",
        edited_triple: Triple | None = None,
    ) -> ReviewItem:
        """Append the decision durably, then fold it into the state."""
        if action not in ACTIONS:
            raise ReviewError(f"unknown action {action!r}")
        if action == "edit" and edited_triple is None:
            raise ReviewError("edit decision requires edited_triple")
        with self._lock:
            state = self._state(run_id)
            item = state.items.get(item_id)
            if item is None:
                raise UnknownItemError(f"unknown item {item_id!r} in run {run_id!r}")
            if item.status != "pending":
                raise DecisionConflictError(f"item {item_id!r} already {item.status}")
            event = {
                "item_id": item_id,
                "action": action,
                "reviewer": reviewer,
                "at": self._clock(),
            }
            if action == "edit":
                event["edited_triple"] = _triple_dict(edited_triple)
            # Durability before acknowledgment: flush + fsync, then mutate.
            with self._events_path(run_id).open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(event, ensure_ascii=False) + "\n")
                handle.flush()
                os.fsync(handle.fileno())
            return apply_event(state, event)

    def export_accepted(self, run_id: str) -> list[Triple]:
        """Accepted triples as-is; edited items contribute their edited triple."""
        with self._lock:
            state = self._state(run_id)
            out = []
            for item_id in state.item_order:
                item = state.items[item_id]
                if item.status == "accepted":
                    out.append(item.triple)
                elif item.status == "edited":
                    out.append(item.edited_triple)
            return out

    def stats(self, run_id: str) -> dict:
        with self._lock:
            state = self._state(run_id)
            counters = state.counters()
        decided = counters["total"] - counters["pending"]
        rate = (counters["accepted"] + counters["edited"]) / decided if decided else None
        return {**counters, "decided": decided, "acceptance_rate": rate}


# --- HTTP service -------------------------------------------------------------


def item_payload(item: ReviewItem) -> dict:
    return {
        "id": item.id,
        "triple": _triple_dict(item.triple),
        "context_excerpt": item.context_excerpt,
        "status": item.status,
        "edited_triple": _triple_dict(item.edited_triple) if item.edited_triple else None,
        "reviewer": item.reviewer,
        "decided_at": item.decided_at,
    }


def create_app(store: ReviewStore, ui_dir: str | Path | None = None):
    from fastapi import FastAPI, HTTPException, Query
    from fastapi.staticfiles import StaticFiles
    from pydantic import BaseModel

    class TripleBody(BaseModel):
        subject: str
        object: str
        relation: str
        source_doc: str = ""
        context: str = ""

    class CreateRunBody(BaseModel):
        run_id: str
        run_file: str | None = None
        dataset_file: str | None = None
        triples: list[TripleBody] | None = None

    class DecisionBody(BaseModel):
        action: str
        reviewer: str = ""
        edited_triple: TripleBody | None = None

    app = FastAPI(title="ontoforge review service")

    @app.get("/runs")
    def list_runs():
        runs = []
        for run_id in store.run_ids():
            runs.append({"run_id": run_id, **store.stats(run_id)})
        return {"runs": runs}

    @app.post("/runs", status_code=201)
    def create_run(body: CreateRunBody):
        if body.triples is not None:
            entries = [
                ReviewEntry(
                    triple=Triple(t.subject, t.object, t.relation, t.source_doc),
                    context=t.context,
                )
                for t in body.triples
            ]
        elif body.run_file:
            from .corpus import load_dataset
            from .extract import load_run

            run = load_run(body.run_file)
            dataset = load_dataset(body.dataset_file) if body.dataset_file else None
            entries = entries_from_run(run, dataset)
        else:
            raise HTTPException(status_code=422, detail="provide either triples or run_file")
        try:
            state = store.create_review(body.run_id, entries)
        except DuplicateRunError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ReviewError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"run_id": state.run_id, "total": len(state.item_order)}

    @app.get("/runs/{run_id}/items")
    def list_items(
        run_id: str,
        status: str | None = None,
        page: int = Query(default=1, ge=1),
        page_size: int = Query(default=50, ge=1, le=500),
    ):
        try:
            items = store.items(run_id, status)
        except UnknownRunError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        start = (page - 1) * page_size
        window = items[start : start + page_size]
        return {
            "items": [item_payload(i) for i in window],
            "page": page,
            "page_size": page_size,
            "total": len(items),
        }

    @app.post("/runs/{run_id}/items/{item_id}/decision")
    def decide(run_id: str, item_id: str, body: DecisionBody):
        edited = None
        if body.edited_triple is not None:
            t = body.edited_triple
            edited = Triple(t.subject, t.object, t.relation, t.source_doc)
        try:
            item = store.decide(run_id, item_id, body.action, body.reviewer, edited)
        except UnknownRunError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except UnknownItemError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except DecisionConflictError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ReviewError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return item_payload(item)

    @app.get("/runs/{run_id}/stats")
    def run_stats(run_id: str):
        try:
            return store.stats(run_id)
        except UnknownRunError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.get("/runs/{run_id}/export")
    def export(run_id: str, status: str = "accepted"):
        if status != "accepted":
            raise HTTPException(status_code=422, detail="only status=accepted is exportable")
        try:
            triples = store.export_accepted(run_id)
        except UnknownRunError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return {"triples": [_triple_dict(t) for t in triples]}

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app
