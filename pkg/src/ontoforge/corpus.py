"""Core data model and file I/O for documents, annotated datasets, and splits.

A dataset file is line-delimited JSON, one record per line. Record kinds:

    {"kind": "dataset", "name": "train"}                                  (header, once)
    {"kind": "doc", "id": ..., "text": ..., "provenance": ..., "topic": ...}
    {"kind": "span", "doc_id": ..., "start": ..., "end": ..., "concept": ...}
    {"kind": "triple", "subject": ..., "object": ..., "relation": ..., "doc_id": ...}
    {"kind": "synonym", "a": ..., "b": ...}

Span records carry no surface string: the surface is always re-sliced from the
document text, so offsets are the single source of truth. All offsets are
unicode code point positions, never bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path


class TopConcept(Enum):
    """The six expert-defined root categories. Closed set."""

    MATERIALS = "materials"
    PROCESS = "casting-process"
    PROPERTY = "product-property"
    PARAMETER = "casting-parameter"
    DEFECT = "casting-defect"
    EQUIPMENT = "casting-equipment"

    @classmethod
    def from_label(cls, label: str) -> "TopConcept":
        for member in cls:
            if member.value == label:
                return member
        raise ValueError(f"unknown top concept label: {label!r}")


#: Relation name under which synonym pairs travel in triple streams.
SYNONYM_RELATION = "synonym of"

#: Relation name of the injected concept-to-top-concept hierarchy edges.
HIERARCHY_RELATION = "is a"

#: Priority used when a consolidated group mixes concepts (materials wins).
CONCEPT_PRIORITY = [
    TopConcept.MATERIALS,
    TopConcept.PROCESS,
    TopConcept.PROPERTY,
    TopConcept.PARAMETER,
    TopConcept.DEFECT,
    TopConcept.EQUIPMENT,
]


class Provenance(Enum):
    PAPER = "paper"
    BOOK = "book"
    DISTILLED = "distilled"
    OTHER = "other"


class CorpusError(Exception):
    """Base class for dataset format and invariant errors."""


class DatasetFormatError(CorpusError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class InvariantError(CorpusError):
    pass


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    provenance: Provenance = Provenance.OTHER
    topic: TopConcept | None = None


@dataclass(frozen=True)
class TermSpan:
    """A concept-labeled term occurrence, half-open [start, end) into the doc text."""

    start: int
    end: int
    surface: str
    concept: TopConcept


@dataclass(frozen=True)
class AnnotatedText:
    """A document plus its non-overlapping term spans, kept sorted by start."""

    doc: Document
    spans: tuple[TermSpan, ...] = ()

    def __post_init__(self):
        ordered = tuple(sorted(self.spans, key=lambda s: (s.start, s.end)))
        object.__setattr__(self, "spans", ordered)
        text = self.doc.text
        prev_end = 0
        for span in ordered:
            if not (0 <= span.start < span.end <= len(text)):
                raise InvariantError(
                    f"doc {self.doc.id!r}: span offsets [{span.start}, {span.end}) out of range"
                )
            if span.start < prev_end:
                raise InvariantError(
                    f"doc {self.doc.id!r}: overlapping spans at offset {span.start}"
                )
            if text[span.start : span.end] != span.surface:
                raise InvariantError(
                    f"doc {self.doc.id!r}: surface {span.surface!r} does not match "
                    f"text slice {text[span.start:span.end]!r}"
                )
            prev_end = span.end

    @property
    def surfaces(self) -> list[str]:
        return [s.surface for s in self.spans]

    def term_list(self) -> list[str]:
        """Span surfaces in order of appearance, first occurrence only."""
        seen: set[str] = set()
        out = []
        for s in self.spans:
            if s.surface not in seen:
                seen.add(s.surface)
                out.append(s.surface)
        return out


@dataclass(frozen=True)
class Triple:
    """Directed (subject, object, relation) over term surfaces.

    Storage keeps every triple directed; symmetric relations like "affects" are
    a concern for matching, not for the data model. When a triple is created
    from annotated data, the earlier-occurring term must be the subject; use
    :func:`ordered_triple` for that. Model output is stored as produced.
    """

    subject: str
    object: str
    relation: str
    source_doc: str = ""
    directed: bool = True

    def __post_init__(self):
        for name in ("subject", "object", "relation"):
            if not getattr(self, name):
                raise InvariantError(f"triple field {name!r} must be non-empty")


def ordered_triple(text: str, term_a: str, term_b: str, relation: str, doc_id: str) -> Triple:
    """Build a gold triple, ordering subject/object by first occurrence in *text*.

    Occurrence lookup is case-insensitive; positions are only compared, never
    used to slice.
    """
    hay = text.casefold()
    pos_a, pos_b = hay.find(term_a.casefold()), hay.find(term_b.casefold())
    if pos_a < 0 or pos_b < 0:
        raise InvariantError(f"doc {doc_id!r}: terms {term_a!r}/{term_b!r} not found in text")
    if pos_b < pos_a:
        term_a, term_b = term_b, term_a
    return Triple(subject=term_a, object=term_b, relation=relation, source_doc=doc_id)


def synonym_pair(a: str, b: str) -> tuple[str, str]:
    """Canonical (sorted) form of an unordered synonym pair."""
    return (a, b) if a <= b else (b, a)


@dataclass
class Dataset:
    name: str
    items: list[AnnotatedText] = field(default_factory=list)
    triples: list[Triple] = field(default_factory=list)
    synonym_pairs: list[tuple[str, str]] = field(default_factory=list)

    def validate(self) -> None:
        seen_ids: set[str] = set()
        for item in self.items:
            if not item.doc.text:
                raise InvariantError(f"doc {item.doc.id!r}: text must be non-empty")
            if item.doc.id in seen_ids:
                raise InvariantError(f"duplicate document id {item.doc.id!r}")
            seen_ids.add(item.doc.id)
        for t in self.triples:
            if t.source_doc not in seen_ids:
                raise InvariantError(f"triple references unknown doc id {t.source_doc!r}")
        lowered = [item.doc.text.casefold() for item in self.items]
        for a, b in self.synonym_pairs:
            for term in (a, b):
                if not any(term.casefold() in text for text in lowered):
                    raise InvariantError(
                        f"synonym pair member {term!r} not found in any document"
                    )

    def item_by_id(self, doc_id: str) -> AnnotatedText:
        for item in self.items:
            if item.doc.id == doc_id:
                return item
        raise KeyError(doc_id)

    def triples_for(self, doc_id: str) -> list[Triple]:
        return [t for t in self.triples if t.source_doc == doc_id]

    def multi_term_items(self) -> list[AnnotatedText]:
        return [item for item in self.items if len(item.spans) >= 2]


@dataclass(frozen=True)
class StatsReport:
    """Exact counts over a dataset.

    ``triple_count`` includes synonym pairs, matching how triple totals are
    reported for the annotated corpora ("including N synonym pairs").
    """

    item_count: int
    term_count: int
    triple_count: int
    synonym_pair_count: int
    per_concept: dict[str, int]
    multi_term_item_count: int


def dataset_stats(d: Dataset) -> StatsReport:
    per_concept = {c.value: 0 for c in TopConcept}
    term_count = 0
    multi = 0
    for item in d.items:
        term_count += len(item.spans)
        if len(item.spans) >= 2:
            multi += 1
        for span in item.spans:
            per_concept[span.concept.value] += 1
    return StatsReport(
        item_count=len(d.items),
        term_count=term_count,
        triple_count=len(d.triples) + len(d.synonym_pairs),
        synonym_pair_count=len(d.synonym_pairs),
        per_concept=per_concept,
        multi_term_item_count=multi,
    )


def _dump(record: dict) -> str:
    return json.dumps(record, ensure_ascii=False)


def write_dataset(d: Dataset, path: str | Path) -> None:
    d.validate()
    spans_by_doc: dict[str, list[TermSpan]] = {item.doc.id: list(item.spans) for item in d.items}
    lines = [_dump({"kind": "dataset", "name": d.name})]
    for item in d.items:
        doc = item.doc
        lines.append(
            _dump(
                {
                    "kind": "doc",
                    "id": doc.id,
                    "text": doc.text,
                    "provenance": doc.provenance.value,
                    "topic": doc.topic.value if doc.topic else None,
                }
            )
        )
        for span in spans_by_doc[doc.id]:
            lines.append(
                _dump(
                    {
                        "kind": "span",
                        "doc_id": doc.id,
                        "start": span.start,
                        "end": span.end,
                        "concept": span.concept.value,
                    }
                )
            )
    for t in d.triples:
        lines.append(
            _dump(
                {
                    "kind": "triple",
                    "subject": t.subject,
                    "object": t.object,
                    "relation": t.relation,
                    "doc_id": t.source_doc,
                }
            )
        )
    for a, b in d.synonym_pairs:
        lines.append(_dump({"kind": "synonym", "a": a, "b": b}))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _require(record: dict, keys: list[str], lineno: int) -> None:
    for key in keys:
        if key not in record:
            raise DatasetFormatError(f"{record.get('kind', '?')} record missing {key!r}", lineno)


def load_dataset(path: str | Path) -> Dataset:
    name = ""
    docs: list[Document] = []
    span_records: list[tuple[int, dict]] = []
    triples: list[Triple] = []
    pairs: list[tuple[str, str]] = []

    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"malformed JSON ({exc.msg})", lineno) from exc
        if not isinstance(record, dict) or "kind" not in record:
            raise DatasetFormatError("record must be an object with a 'kind' field", lineno)
        kind = record["kind"]
        if kind == "dataset":
            name = record.get("name", "")
        elif kind == "doc":
            _require(record, ["id", "text"], lineno)
            try:
                topic = TopConcept.from_label(record["topic"]) if record.get("topic") else None
                prov = Provenance(record.get("provenance", "other"))
            except ValueError as exc:
                raise DatasetFormatError(str(exc), lineno) from exc
            docs.append(Document(record["id"], record["text"], prov, topic))
        elif kind == "span":
            _require(record, ["doc_id", "start", "end", "concept"], lineno)
            span_records.append((lineno, record))
        elif kind == "triple":
            _require(record, ["subject", "object", "relation", "doc_id"], lineno)
            try:
                triples.append(
                    Triple(record["subject"], record["object"], record["relation"], record["doc_id"])
                )
            except InvariantError as exc:
                raise DatasetFormatError(str(exc), lineno) from exc
        elif kind == "synonym":
            _require(record, ["a", "b"], lineno)
            pairs.append(synonym_pair(record["a"], record["b"]))
        else:
            raise DatasetFormatError(f"unknown record kind {kind!r}", lineno)

    by_id = {doc.id: doc for doc in docs}
    raw_spans: dict[str, list[tuple[int, TermSpan]]] = {doc.id: [] for doc in docs}
    for lineno, record in span_records:
        doc = by_id.get(record["doc_id"])
        if doc is None:
            raise DatasetFormatError(
                f"span references unknown doc id {record['doc_id']!r}", lineno
            )
        start, end = record["start"], record["end"]
        if not (isinstance(start, int) and isinstance(end, int)):
            raise DatasetFormatError("span offsets must be integers", lineno)
        if not (0 <= start < end <= len(doc.text)):
            raise DatasetFormatError(
                f"span offsets [{start}, {end}) out of range for doc {doc.id!r}", lineno
            )
        raw_spans[doc.id].append(
            (lineno, TermSpan(start, end, doc.text[start:end], TopConcept.from_label(record["concept"])))
        )

    items = []
    for doc in docs:
        spans = tuple(span for _, span in raw_spans[doc.id])
        items.append(AnnotatedText(doc=doc, spans=spans))

    dataset = Dataset(name=name, items=items, triples=triples, synonym_pairs=pairs)
    dataset.validate()
    return dataset
