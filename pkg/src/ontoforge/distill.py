"""Desk-scale knowledge distillation: chunk source documents, build a local
embedding index, retrieve topic-relevant chunks, and prompt the model for
question-answer pairs stored as distilled documents.

Retrieval is exact cosine-similarity search over all chunks; at the corpus
sizes this tool targets there is no reason for an approximate index.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .corpus import Document, Provenance, TopConcept
from .gateway import EmbeddingVector, chat_request

PARAGRAPH_SEP = "\n\n"
_SENTENCE_BOUNDARY = re.compile(r"(?<=[.!?])\s+")

DEFAULT_TOPIC_QUERIES = {
    TopConcept.MATERIALS: "materials: alloys, metals, and other substances used in casting",
    TopConcept.PROCESS: "casting process: methods and techniques for shaping molten metal",
    TopConcept.PROPERTY: "product property: mechanical and physical qualities of cast products",
    TopConcept.PARAMETER: "casting parameter: controllable process settings such as temperature and speed",
    TopConcept.DEFECT: "casting defect: flaws such as porosity, shrinkage, and cracks",
    TopConcept.EQUIPMENT: "casting equipment: machines and tools used in foundry operations",
}

DISTILL_SYSTEM_PROMPT = (
    "You are a casting domain knowledge assistant. Condense the provided context "
    "into focused question and answer pairs that preserve the essential domain "
    "knowledge. Write each pair as two lines, the first starting with 'Q:' and "
    "the second starting with 'A:'."
)


class DistillationError(Exception):
    pass


@dataclass(frozen=True)
class Chunk:
    doc_id: str
    ordinal: int
    text: str


@dataclass
class ChunkIndex:
    entries: list[tuple[Chunk, EmbeddingVector]]

    def __post_init__(self):
        dims = {len(vec.values) for _, vec in self.entries}
        if len(dims) > 1:
            raise ValueError(f"index mixes embedding dimensions: {dims}")


def _split_long_paragraph(paragraph: str, max_chars: int) -> list[str]:
    boundaries = [m.end() for m in _SENTENCE_BOUNDARY.finditer(paragraph)]
    pieces = []
    prev = 0
    for b in boundaries:
        pieces.append(paragraph[prev:b])
        prev = b
    pieces.append(paragraph[prev:])
    pieces = [p for p in pieces if p]

    out: list[str] = []
    buf = ""
    for piece in pieces:
        while len(piece) > max_chars:  # single oversized sentence: hard split
            if buf:
                out.append(buf)
                buf = ""
            out.append(piece[:max_chars])
            piece = piece[max_chars:]
        if len(buf) + len(piece) <= max_chars:
            buf += piece
        else:
            out.append(buf)
            buf = piece
    if buf:
        out.append(buf)
    return out


def chunk_documents(docs: list[Document], max_chars: int = 2000) -> list[Chunk]:
    """Split documents on paragraph boundaries; oversized paragraphs are split
    at sentence boundaries. Concatenating a document's chunk texts in ordinal
    order reproduces the document text with the paragraph separators removed.
    """
    if max_chars < 200:
        raise ValueError("max_chars must be at least 200")
    chunks: list[Chunk] = []
    for doc in docs:
        ordinal = 0
        for paragraph in doc.text.split(PARAGRAPH_SEP):
            if not paragraph:
                continue
            pieces = [paragraph] if len(paragraph) <= max_chars else _split_long_paragraph(paragraph, max_chars)
            for piece in pieces:
                chunks.append(Chunk(doc_id=doc.id, ordinal=ordinal, text=piece))
                ordinal += 1
    return chunks


def build_index(chunks: list[Chunk], gateway, model: str | None = None) -> ChunkIndex:
    if not chunks:
        return ChunkIndex(entries=[])
    vectors = gateway.embed([c.text for c in chunks], model)
    return ChunkIndex(entries=list(zip(chunks, vectors)))


def cosine(u, v) -> float:
    dot = sum(a * b for a, b in zip(u, v))
    nu = math.sqrt(sum(a * a for a in u))
    nv = math.sqrt(sum(b * b for b in v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return dot / (nu * nv)


def retrieve(index: ChunkIndex, query: str, m: int, gateway) -> list[tuple[Chunk, float]]:
    """Exact top-m chunks by cosine similarity; ties break on (doc_id, ordinal)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if not index.entries:
        raise ValueError("index is empty")
    index_model = index.entries[0][1].model
    query_vec = gateway.embed([query], model=index_model)[0]
    if len(query_vec.values) != len(index.entries[0][1].values):
        raise ValueError("query embedding dimension does not match index")
    scored = [
        (chunk, cosine(query_vec.values, vec.values)) for chunk, vec in index.entries
    ]
    scored.sort(key=lambda cs: (-cs[1], cs[0].doc_id, cs[0].ordinal))
    return scored[:m]


_QA_LINE = re.compile(r"^\s*(Q|A)\s*[:.]\s*(.*)$", re.IGNORECASE)


def parse_qa_pairs(reply: str) -> tuple[list[tuple[str, str]], list[str]]:
    """Extract (question, answer) pairs from 'Q:'/'A:' delimited model output."""
    pairs: list[tuple[str, str]] = []
    warnings: list[str] = []
    question: str | None = None
    answer_lines: list[str] = []

    def flush():
        nonlocal question, answer_lines
        if question is not None:
            if answer_lines:
                pairs.append((question, "\n".join(answer_lines).strip()))
            else:
                warnings.append(f"question without answer skipped: {question[:60]!r}")
        question, answer_lines = None, []

    in_answer = False
    for line in reply.splitlines():
        match = _QA_LINE.match(line)
        if match and match.group(1).upper() == "Q":
            flush()
            question = match.group(2).strip()
            in_answer = False
        elif match and match.group(1).upper() == "A":
            if question is None:
                warnings.append(f"answer without question skipped: {line.strip()[:60]!r}")
            else:
                answer_lines.append(match.group(2).strip())
                in_answer = True
        elif in_answer and line.strip():
            answer_lines.append(line.strip())
    flush()
    pairs = [(q, a) for q, a in pairs if q and a]
    return pairs, warnings


def distill_topic(
    index: ChunkIndex,
    topic: TopConcept,
    gateway,
    n_pairs: int = 5,
    top_m: int = 8,
    topic_queries: dict[TopConcept, str] | None = None,
    model: str | None = None,
    id_prefix: str = "distilled",
) -> tuple[list[Document], list[str]]:
    """Retrieve topic-relevant chunks and distill them into QA documents.

    Raises :class:`DistillationError` when the model output yields no
    parseable pair at all; partial output is returned with warnings.
    """
    queries = topic_queries or DEFAULT_TOPIC_QUERIES
    hits = retrieve(index, queries[topic], top_m, gateway)
    context = "\n\n".join(chunk.text for chunk, _ in hits)
    user = (
        f"Context:\n{context}\n\n"
        f"Write {n_pairs} question and answer pairs about {topic.value} "
        "based only on the context above."
    )
    reply = gateway.chat(
        chat_request(DISTILL_SYSTEM_PROMPT, user, model or gateway.chat_model)
    )
    pairs, warnings = parse_qa_pairs(reply)
    if not pairs:
        raise DistillationError(f"no parseable QA pairs in model output for topic {topic.value}")
    documents = [
        Document(
            id=f"{id_prefix}-{topic.value}-{i + 1:03d}",
            text=f"Q: {q}\nA: {a}",
            provenance=Provenance.DISTILLED,
            topic=topic,
        )
        for i, (q, a) in enumerate(pairs)
    ]
    return documents, warnings
