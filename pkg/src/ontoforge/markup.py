"""Inline symbol-pair annotation grammar and the bracketed triple-list grammar.

Term annotation wraps each term with an opening marker and a per-concept
closing marker, e.g. ``molten @@metal$$`` labels "metal" as a material. The
strict parser (:func:`parse_markup`) rejects any malformed marker; the lenient
path (:func:`align_labeled_output`) drops broken markers and re-anchors the
recovered terms onto the original source text, since model output may have
mutated the text around the labels.

Triple lists look like ``[subject: a, object: b, relation: r]; [...]`` and
render the empty list as ``None``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from difflib import SequenceMatcher

from .corpus import AnnotatedText, Document, InvariantError, TermSpan, TopConcept, Triple

DEFAULT_OPEN = "@@"

#: Default close markers. The defect marker is this project's own assignment
#: (the remaining five are conventional for this annotation style); all of
#: them can be overridden via configuration.
DEFAULT_CLOSE = {
    TopConcept.PROCESS: "##",
    TopConcept.MATERIALS: "$$",
    TopConcept.EQUIPMENT: "^^",
    TopConcept.PARAMETER: "&&",
    TopConcept.PROPERTY: "||",
    TopConcept.DEFECT: "%%",
}


class MarkupError(Exception):
    def __init__(self, message: str, position: int | None = None):
        self.position = position
        suffix = f" at offset {position}" if position is not None else ""
        super().__init__(message + suffix)


class AlignmentError(Exception):
    def __init__(self, report: "AlignmentReport", max_drift: float):
        self.report = report
        super().__init__(
            f"alignment drift {report.drift_ratio:.3f} exceeds maximum {max_drift:.3f}"
        )


@dataclass(frozen=True)
class MarkerMap:
    open_marker: str = DEFAULT_OPEN
    close_markers: dict[TopConcept, str] = field(default_factory=lambda: dict(DEFAULT_CLOSE))

    def __post_init__(self):
        markers = [self.open_marker, *self.close_markers.values()]
        if any(not m for m in markers):
            raise ValueError("markers must be non-empty")
        for concept in TopConcept:
            if concept not in self.close_markers:
                raise ValueError(f"close marker missing for concept {concept.value!r}")
        for i, a in enumerate(markers):
            for b in markers[i + 1 :]:
                if a.startswith(b) or b.startswith(a):
                    raise ValueError(f"markers {a!r} and {b!r} overlap (prefix or duplicate)")

    def all_markers(self) -> list[str]:
        return [self.open_marker, *self.close_markers.values()]

    @classmethod
    def from_labels(cls, open_marker: str, close_by_label: dict[str, str]) -> "MarkerMap":
        close = {TopConcept.from_label(k): v for k, v in close_by_label.items()}
        return cls(open_marker=open_marker, close_markers=close)

    def to_labels(self) -> dict[str, str]:
        return {c.value: m for c, m in self.close_markers.items()}


def _close_at(labeled: str, i: int, m: MarkerMap) -> TopConcept | None:
    for concept, marker in m.close_markers.items():
        if labeled.startswith(marker, i):
            return concept
    return None


def parse_markup(labeled: str, m: MarkerMap | None = None, doc_id: str = "parsed") -> AnnotatedText:
    """Parse symbol-pair annotation strictly; offsets refer to the stripped text."""
    m = m or MarkerMap()
    out: list[str] = []
    spans: list[TermSpan] = []
    open_at: int | None = None
    term_start = 0
    i = 0
    while i < len(labeled):
        if labeled.startswith(m.open_marker, i):
            if open_at is not None:
                raise MarkupError("nested open marker", i)
            open_at = i
            term_start = len(out)
            i += len(m.open_marker)
            continue
        concept = _close_at(labeled, i, m)
        if concept is not None:
            marker = m.close_markers[concept]
            if open_at is None:
                raise MarkupError(f"close marker {marker!r} without matching open", i)
            if len(out) == term_start:
                raise MarkupError("empty term between markers", i)
            surface = "".join(out[term_start:])
            spans.append(TermSpan(term_start, len(out), surface, concept))
            open_at = None
            i += len(marker)
            continue
        out.append(labeled[i])
        i += 1
    if open_at is not None:
        raise MarkupError("unmatched open marker", open_at)
    return AnnotatedText(doc=Document(id=doc_id, text="".join(out)), spans=tuple(spans))


def render_markup(a: AnnotatedText, m: MarkerMap | None = None) -> str:
    """Inverse of :func:`parse_markup`; exact round-trip on its output."""
    m = m or MarkerMap()
    for marker in m.all_markers():
        if marker in a.doc.text:
            raise MarkupError(
                f"text contains marker {marker!r}; annotation is unrepresentable"
            )
    out = []
    cursor = 0
    for span in a.spans:
        out.append(a.doc.text[cursor : span.start])
        out.append(m.open_marker)
        out.append(span.surface)
        out.append(m.close_markers[span.concept])
        cursor = span.end
    out.append(a.doc.text[cursor:])
    return "".join(out)


@dataclass
class AlignmentReport:
    """Terms recovered from model-labeled output, re-anchored to the source text."""

    recovered: list[TermSpan]
    dropped: list[tuple[str, TopConcept, str]]
    drift_ratio: float


def _lenient_scan(labeled: str, m: MarkerMap) -> tuple[str, list[tuple[int, int, str, TopConcept]]]:
    """Strip markers, tolerating broken ones; returns stripped text and raw spans."""
    out: list[str] = []
    raw: list[tuple[int, int, str, TopConcept]] = []
    term_start: int | None = None
    i = 0
    while i < len(labeled):
        if labeled.startswith(m.open_marker, i):
            # A second open abandons the pending one; its text is already kept.
            term_start = len(out)
            i += len(m.open_marker)
            continue
        concept = _close_at(labeled, i, m)
        if concept is not None:
            marker = m.close_markers[concept]
            if term_start is not None and len(out) > term_start:
                surface = "".join(out[term_start:])
                raw.append((term_start, len(out), surface, concept))
            term_start = None
            i += len(marker)
            continue
        out.append(labeled[i])
        i += 1
    return "".join(out), raw


def align_labeled_output(
    source: str,
    model_labeled: str,
    m: MarkerMap | None = None,
    max_drift: float = 0.25,
) -> AlignmentReport:
    """Recover source-anchored spans from possibly-mutated labeled model output.

    Mapping strategy per recovered term: exact diff alignment of the stripped
    model text against the source; if the term lies outside a matching region,
    fall back to locating the surface as a substring of the source (first
    occurrence not already claimed by another span). Terms that cannot be
    anchored are reported as dropped rather than failing the whole parse.
    """
    if not source:
        raise ValueError("source text must be non-empty")
    m = m or MarkerMap()
    stripped, raw_spans = _lenient_scan(model_labeled, m)

    matcher = SequenceMatcher(None, stripped, source, autojunk=False)
    blocks = [b for b in matcher.get_matching_blocks() if b.size > 0]
    matched_chars = sum(b.size for b in blocks)
    drift = 1.0 - matched_chars / len(source)

    recovered: list[TermSpan] = []
    claimed: list[tuple[int, int]] = []
    dropped: list[tuple[str, TopConcept, str]] = []

    def overlaps_claimed(s: int, e: int) -> bool:
        return any(not (e <= cs or s >= ce) for cs, ce in claimed)

    for s, e, surface, concept in raw_spans:
        target: tuple[int, int] | None = None
        for block in blocks:
            if block.a <= s and e <= block.a + block.size:
                target = (s - block.a + block.b, e - block.a + block.b)
                break
        if target is None:
            # Substring fallback: first unclaimed occurrence in the source.
            pos = source.find(surface)
            found_any = pos >= 0
            while pos >= 0 and overlaps_claimed(pos, pos + len(surface)):
                pos = source.find(surface, pos + 1)
            if pos >= 0:
                target = (pos, pos + len(surface))
            else:
                dropped.append((surface, concept, "not-in-source" if not found_any else "overlap"))
                continue
        if overlaps_claimed(*target):
            dropped.append((surface, concept, "overlap"))
            continue
        claimed.append(target)
        recovered.append(TermSpan(target[0], target[1], source[target[0] : target[1]], concept))

    recovered.sort(key=lambda sp: (sp.start, sp.end))
    report = AlignmentReport(recovered=recovered, dropped=dropped, drift_ratio=drift)
    if drift > max_drift:
        raise AlignmentError(report, max_drift)
    return report


# --- triple-list grammar ---------------------------------------------------

_ESCAPED = "\\[];,"
_NONE_RE = re.compile(r"\[?\s*none\s*\]?\.?", re.IGNORECASE)
_KEYS = ("subject", "object", "relation")


def _escape_field(value: str) -> str:
    return re.sub(r"([\\\[\];,])", r"\\\1", value)


def _unescape(value: str) -> str:
    return re.sub(r"\\(.)", r"\1", value)


def render_triples(ts: list[Triple]) -> str:
    """Render a triple list; the empty list renders as ``None``.

    Structural characters inside field values (brackets, semicolons, commas,
    backslashes) are backslash-escaped so the output always re-parses.
    """
    if not ts:
        return "None"
    records = [
        f"[subject: {_escape_field(t.subject)}, object: {_escape_field(t.object)}, "
        f"relation: {_escape_field(t.relation)}]"
        for t in ts
    ]
    return "; ".join(records)


def _split_unescaped(text: str, sep: str) -> list[str]:
    parts, buf, escaped = [], [], False
    for ch in text:
        if escaped:
            buf.append(ch)
            escaped = False
        elif ch == "\\":
            buf.append(ch)
            escaped = True
        elif ch == sep:
            parts.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
    parts.append("".join(buf))
    return parts


def parse_triples(raw: str) -> tuple[list[Triple], list[str]]:
    """Lenient triple-list parser: malformed records are skipped with warnings.

    ``source_doc`` is left empty; the caller attaches it. The literal "None"
    (any case, optionally bracketed) yields the empty list.
    """
    text = raw.strip()
    if text.startswith("```"):
        text = re.sub(r"^```[a-zA-Z]*\s*|\s*```$", "", text).strip()
    if not text or _NONE_RE.fullmatch(text):
        return [], []

    triples: list[Triple] = []
    warnings: list[str] = []
    i = 0
    escaped = False
    record_start: int | None = None
    buf: list[str] = []
    while i < len(text):
        ch = text[i]
        if escaped:
            buf.append(ch)
            escaped = False
        elif ch == "\\":
            buf.append(ch)
            escaped = True
        elif ch == "[" and record_start is None:
            record_start = i
            buf = []
        elif ch == "]" and record_start is not None:
            _parse_record("".join(buf), triples, warnings)
            record_start = None
        elif record_start is not None:
            buf.append(ch)
        i += 1
    if record_start is not None:
        warnings.append(f"unterminated record starting at offset {record_start}")
    return triples, warnings


def _parse_record(body: str, triples: list[Triple], warnings: list[str]) -> None:
    fields: dict[str, str] = {}
    for part in _split_unescaped(body, ","):
        if ":" not in part:
            continue
        key, _, value = part.partition(":")
        key = key.strip().lower()
        if key in _KEYS and key not in fields:
            fields[key] = _unescape(value.strip())
    missing = [k for k in _KEYS if not fields.get(k)]
    if missing:
        warnings.append(f"record [{body.strip()}] skipped: missing {', '.join(missing)}")
        return
    triples.append(Triple(fields["subject"], fields["object"], fields["relation"]))
