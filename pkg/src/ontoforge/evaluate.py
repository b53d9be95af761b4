"""Score extraction runs against gold annotations.

Matching is greedy one-to-one on normalized keys, per document, with predicted
duplicates collapsed by default so a repeated easy term cannot inflate the
true-positive count. Synonym predictions (relation "synonym of") are routed to
a dedicated unordered-pair tally and excluded from the triple counts, mirroring
how the report separates the two; injected "is a" hierarchy edges are never
model predictions and are excluded from triple evaluation as well.

Zero-shot term runs carry no offsets, so they are scored precision-only:
recall and F1 are reported as not applicable (None).
"""

from __future__ import annotations

import json
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .corpus import HIERARCHY_RELATION, SYNONYM_RELATION, Dataset, TopConcept

if TYPE_CHECKING:  # avoid a circular import; evaluate only reads run attributes
    from .extract import ExtractionRun

_WS_RUN = re.compile(r"\s+")

MAX_ERROR_EXAMPLES = 20


def normalize(s: str) -> str:
    """Casefold, collapse whitespace, and strip surrounding punctuation."""
    s = _WS_RUN.sub(" ", s.casefold()).strip()
    start, end = 0, len(s)
    while start < end and unicodedata.category(s[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(s[end - 1]).startswith("P"):
        end -= 1
    return s[start:end].strip()


@dataclass(frozen=True)
class MatchConfig:
    term_mode: str = "surface"        # "surface" or "strict" (surface + concept)
    triple_mode: str = "full"         # "full" or "terms_only"
    dedupe_predictions: bool = True

    def __post_init__(self):
        if self.term_mode not in ("surface", "strict"):
            raise ValueError(f"unknown term_mode {self.term_mode!r}")
        if self.triple_mode not in ("full", "terms_only"):
            raise ValueError(f"unknown triple_mode {self.triple_mode!r}")


@dataclass
class MatchCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    per_concept: dict[str, list[int]] = field(default_factory=dict)

    def add_concept(self, concept: TopConcept, slot: int) -> None:
        row = self.per_concept.setdefault(concept.value, [0, 0, 0])
        row[slot] += 1


def _term_key(surface: str, concept: TopConcept, cfg: MatchConfig):
    key = normalize(surface)
    return (key, concept.value) if cfg.term_mode == "strict" else key


def match_terms(
    pred: list[tuple[str, TopConcept]],
    gold: list[tuple[str, TopConcept]],
    cfg: MatchConfig | None = None,
) -> MatchCounts:
    """Greedy one-to-one matching of one document's terms."""
    cfg = cfg or MatchConfig()
    counts = MatchCounts()
    deduped: list[tuple[str, TopConcept]] = []
    seen = set()
    for surface, concept in pred:
        key = _term_key(surface, concept, cfg)
        if cfg.dedupe_predictions and key in seen:
            continue
        seen.add(key)
        deduped.append((surface, concept))

    available = Counter(_term_key(s, c, cfg) for s, c in deduped)
    pred_concept_by_key: dict = {}
    for surface, concept in deduped:
        pred_concept_by_key.setdefault(_term_key(surface, concept, cfg), concept)

    for surface, concept in gold:
        key = _term_key(surface, concept, cfg)
        if available.get(key, 0) > 0:
            available[key] -= 1
            counts.tp += 1
            counts.add_concept(concept, 0)
        else:
            counts.fn += 1
            counts.add_concept(concept, 2)
    for key, remaining in available.items():
        if remaining > 0:
            counts.fp += remaining
            concept = pred_concept_by_key[key]
            counts.per_concept.setdefault(concept.value, [0, 0, 0])[1] += remaining
    return counts


def _triple_key(subject: str, obj: str, relation: str, cfg: MatchConfig):
    if cfg.triple_mode == "terms_only":
        return (normalize(subject), normalize(obj))
    return (normalize(subject), normalize(obj), normalize(relation))


def match_triples(pred, gold, cfg: MatchConfig | None = None) -> MatchCounts:
    """One-to-one matching of (subject, object, relation) triples.

    Accepts anything with subject/object/relation attributes or 3-tuples.
    """
    cfg = cfg or MatchConfig()

    def fields(t):
        if isinstance(t, tuple):
            return t
        return (t.subject, t.object, t.relation)

    counts = MatchCounts()
    pred_keys = []
    seen = set()
    for t in pred:
        key = _triple_key(*fields(t), cfg)
        if cfg.dedupe_predictions and key in seen:
            continue
        seen.add(key)
        pred_keys.append(key)
    available = Counter(pred_keys)
    for t in gold:
        key = _triple_key(*fields(t), cfg)
        if available.get(key, 0) > 0:
            available[key] -= 1
            counts.tp += 1
        else:
            counts.fn += 1
    counts.fp = sum(v for v in available.values() if v > 0)
    return counts


def match_synonyms(
    pred_pairs: list[tuple[str, str]], gold_pairs: list[tuple[str, str]]
) -> tuple[int, int]:
    """Normalized unordered-pair set intersection: (predicted, matched)."""
    pred = {frozenset((normalize(a), normalize(b))) for a, b in pred_pairs}
    gold = {frozenset((normalize(a), normalize(b))) for a, b in gold_pairs}
    return len(pred), len(pred & gold)


def prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    if min(tp, fp, fn) < 0:
        raise ValueError("counts must be non-negative")
    precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
    recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
    return precision, recall, f1


@dataclass
class EvalReport:
    task: str
    strategy: str
    tp: int
    fp: int
    fn: int
    precision: float | None
    recall: float | None
    f1: float | None
    per_concept: dict[str, tuple[int, int, int]] = field(default_factory=dict)
    synonym_predicted: int = 0
    synonym_matched: int = 0
    false_positive_examples: list[str] = field(default_factory=list)
    false_negative_examples: list[str] = field(default_factory=list)
    precision_only: bool = False

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "strategy": self.strategy,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "per_concept": {k: list(v) for k, v in sorted(self.per_concept.items())},
            "synonym": {"predicted": self.synonym_predicted, "matched": self.synonym_matched},
            "false_positive_examples": self.false_positive_examples,
            "false_negative_examples": self.false_negative_examples,
            "precision_only": self.precision_only,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2)


def _fmt(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.3f}"


def format_report(report: EvalReport) -> str:
    lines = [
        f"task: {report.task}   strategy: {report.strategy}",
        f"tp={report.tp} fp={report.fp} fn={report.fn}",
        f"precision={_fmt(report.precision)} recall={_fmt(report.recall)} f1={_fmt(report.f1)}",
    ]
    if report.task == "relations":
        lines.append(
            f"synonym pairs: predicted={report.synonym_predicted} matched={report.synonym_matched}"
        )
    if report.per_concept:
        lines.append("per concept (tp/fp/fn):")
        for concept, (tp, fp, fn) in sorted(report.per_concept.items()):
            lines.append(f"  {concept:<20} {tp}/{fp}/{fn}")
    return "\n".join(lines)


def format_comparison(reports: list[tuple[str, EvalReport]]) -> str:
    """Side-by-side table over several runs of the same task."""
    header = f"{'metric':<12}" + "".join(f"{name:>16}" for name, _ in reports)
    rows = [header, "-" * len(header)]
    for metric in ("tp", "fp", "fn"):
        rows.append(
            f"{metric:<12}" + "".join(f"{getattr(r, metric):>16}" for _, r in reports)
        )
    for metric in ("precision", "recall", "f1"):
        rows.append(
            f"{metric:<12}" + "".join(f"{_fmt(getattr(r, metric)):>16}" for _, r in reports)
        )
    if any(r.task == "relations" for _, r in reports):
        cells = "".join(
            f"{f'{r.synonym_matched}/{r.synonym_predicted}':>16}" for _, r in reports
        )
        rows.append(f"{'syn matched':<12}" + cells)
    return "\n".join(rows)


def _merge_counts(total: MatchCounts, part: MatchCounts) -> None:
    total.tp += part.tp
    total.fp += part.fp
    total.fn += part.fn
    for concept, row in part.per_concept.items():
        existing = total.per_concept.setdefault(concept, [0, 0, 0])
        for i in range(3):
            existing[i] += row[i]


def evaluate_run(run: "ExtractionRun", gold: Dataset, cfg: MatchConfig | None = None) -> EvalReport:
    cfg = cfg or MatchConfig()
    gold_ids = {item.doc.id for item in gold.items}
    for pred in run.predictions:
        if pred.doc_id not in gold_ids:
            raise ValueError(f"run predicts doc {pred.doc_id!r} not present in the gold dataset")

    if run.task == "terms":
        return _evaluate_terms(run, gold, cfg)
    if run.task == "relations":
        return _evaluate_relations(run, gold, cfg)
    raise ValueError(f"unknown run task {run.task!r}")


def _evaluate_terms(run, gold: Dataset, cfg: MatchConfig) -> EvalReport:
    total = MatchCounts()
    fps: list[str] = []
    fns: list[str] = []
    predicted_by_doc: dict[str, list[tuple[str, TopConcept]]] = {}
    for pred in run.predictions:
        if pred.spans is not None:
            predicted_by_doc[pred.doc_id] = [(s.surface, s.concept) for s in pred.spans]
        elif pred.names is not None:
            predicted_by_doc[pred.doc_id] = list(pred.names)
        else:
            predicted_by_doc[pred.doc_id] = []

    precision_only = run.strategy == "zero_shot"
    for item in gold.items:
        pred_terms = predicted_by_doc.get(item.doc.id, [])
        gold_terms = [(s.surface, s.concept) for s in item.spans]
        part = match_terms(pred_terms, gold_terms, cfg)
        _merge_counts(total, part)
        gold_keys = Counter(_term_key(s, c, cfg) for s, c in gold_terms)
        for surface, concept in pred_terms:
            if gold_keys.get(_term_key(surface, concept, cfg), 0) == 0 and len(fps) < MAX_ERROR_EXAMPLES:
                fps.append(f"{item.doc.id}: {surface}")
        pred_keys = Counter(_term_key(s, c, cfg) for s, c in pred_terms)
        for surface, concept in gold_terms:
            if pred_keys.get(_term_key(surface, concept, cfg), 0) == 0 and len(fns) < MAX_ERROR_EXAMPLES:
                fns.append(f"{item.doc.id}: {surface}")

    precision, recall, f1 = prf(total.tp, total.fp, total.fn)
    return EvalReport(
        task="terms",
        strategy=run.strategy,
        tp=total.tp,
        fp=total.fp,
        fn=total.fn,
        precision=precision,
        recall=None if precision_only else recall,
        f1=None if precision_only else f1,
        per_concept={k: tuple(v) for k, v in total.per_concept.items()},
        false_positive_examples=fps,
        false_negative_examples=fns,
        precision_only=precision_only,
    )


def _evaluate_relations(run, gold: Dataset, cfg: MatchConfig) -> EvalReport:
    total = MatchCounts()
    fps: list[str] = []
    fns: list[str] = []
    pred_pairs: list[tuple[str, str]] = []
    predicted_by_doc: dict[str, list] = {}
    for pred in run.predictions:
        triples = pred.triples or []
        kept = []
        for t in triples:
            relation = normalize(t.relation)
            if relation == SYNONYM_RELATION:
                pred_pairs.append((t.subject, t.object))
            elif relation == HIERARCHY_RELATION:
                continue  # injected hierarchy edges are not model predictions
            else:
                kept.append(t)
        predicted_by_doc[pred.doc_id] = kept

    for item in gold.items:
        pred_triples = predicted_by_doc.get(item.doc.id, [])
        gold_triples = gold.triples_for(item.doc.id)
        part = match_triples(pred_triples, gold_triples, cfg)
        _merge_counts(total, part)
        gold_keys = {_triple_key(t.subject, t.object, t.relation, cfg) for t in gold_triples}
        for t in pred_triples:
            if _triple_key(t.subject, t.object, t.relation, cfg) not in gold_keys and len(fps) < MAX_ERROR_EXAMPLES:
                fps.append(f"{item.doc.id}: ({t.subject}, {t.object}, {t.relation})")
        pred_keys = {_triple_key(t.subject, t.object, t.relation, cfg) for t in pred_triples}
        for t in gold_triples:
            if _triple_key(t.subject, t.object, t.relation, cfg) not in pred_keys and len(fns) < MAX_ERROR_EXAMPLES:
                fns.append(f"{item.doc.id}: ({t.subject}, {t.object}, {t.relation})")

    predicted, matched = match_synonyms(pred_pairs, gold.synonym_pairs)
    precision, recall, f1 = prf(total.tp, total.fp, total.fn)
    return EvalReport(
        task="relations",
        strategy=run.strategy,
        tp=total.tp,
        fp=total.fp,
        fn=total.fn,
        precision=precision,
        recall=recall,
        f1=f1,
        per_concept={},
        synonym_predicted=predicted,
        synonym_matched=matched,
        false_positive_examples=fps,
        false_negative_examples=fns,
    )
