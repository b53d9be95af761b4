"""The three extraction strategies over two tasks.

Term extraction asks the model to echo the input with inline markers; relation
extraction feeds a term list plus context and parses the bracketed triple
output. The zero-shot strategy does both in one structured-JSON call and is
name-level only (no offsets). In-context learning prepends retrieved
demonstrations; fine-tuned inference uses the same prompts without them.

Runs are persisted as line-delimited records so any strategy execution can be
replayed, audited, and scored later.
"""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import (
    SYNONYM_RELATION,
    AnnotatedText,
    Dataset,
    Document,
    TermSpan,
    TopConcept,
    Triple,
    ordered_triple,
)
from .distill import cosine
from .evaluate import normalize
from .gateway import ChatRequest, chat_request
from .markup import (
    AlignmentReport,
    MarkerMap,
    MarkupError,
    align_labeled_output,
    parse_triples,
    render_markup,
    render_triples,
)

logger = logging.getLogger(__name__)

STRATEGIES = ("zero_shot", "icl", "fine_tuned")
TASKS = ("terms", "relations")

_CONCEPT_PHRASES = {
    TopConcept.PROCESS: ("a class of casting process", "casting process terms"),
    TopConcept.MATERIALS: ("a type of material used for casting", "material terms"),
    TopConcept.PROPERTY: ("a product property of the cast part", "product property terms"),
    TopConcept.PARAMETER: ("a casting parameter", "casting parameter terms"),
    TopConcept.DEFECT: ("a casting defect", "casting defect terms"),
    TopConcept.EQUIPMENT: ("a piece of casting equipment", "casting equipment terms"),
}

EXAMPLES_INTRO = "Here are some examples."


class ExtractionError(Exception):
    pass


def term_system_prompt(m: MarkerMap, with_examples: bool) -> str:
    parts = ["You are an expert in casting and term extraction."]
    for concept in TopConcept:
        phrase, label = _CONCEPT_PHRASES[concept]
        parts.append(
            f"Given a context, if the context explicitly mentions {phrase}, "
            f"use {m.open_marker} and {m.close_markers[concept]} to label {label}."
        )
    parts.append("Only add labels around terms that are mentioned in the context as related to casting.")
    if with_examples:
        parts.append(EXAMPLES_INTRO)
    return " ".join(parts)


def relation_system_prompt(with_examples: bool) -> str:
    parts = [
        "You are an expert in casting and relation extraction.",
        "Please extract relations between the listed terms from the context as triples.",
        "Do not use any term that is not listed before the context.",
        f'Write each triple as [subject: ..., object: ..., relation: ...], separated by ";". '
        f'Use the relation "{SYNONYM_RELATION}" for synonymous terms. '
        'If no relation holds between any pair of listed terms, reply with "None".',
    ]
    if with_examples:
        parts.append(EXAMPLES_INTRO)
    return " ".join(parts)


def _concept_listing() -> str:
    return "; ".join(
        f"{c.value}: {_CONCEPT_PHRASES[c][0]}" for c in TopConcept
    )


ZERO_SHOT_PROFILES = {
    "cot": (
        "You are an expert in casting and information extraction. "
        "Identify casting domain terms and the relations between them. "
        f"The term categories are: {_concept_listing()}. "
        "Work step by step: first read the whole context; second, list every "
        "casting-related term and assign it one category; third, identify directed "
        "relations between the terms you listed, naming each relation with a verb "
        "or phrase from the context. "
        'Finally reply with only a JSON object of the form {"terms": [{"name": ..., '
        '"concept": ...}], "relations": [{"subject": ..., "object": ..., '
        '"relation": ...}]} and nothing else.'
    ),
    "plain": (
        "You are an expert in casting and information extraction. "
        f"The term categories are: {_concept_listing()}. "
        'Reply with only a JSON object of the form {"terms": [{"name": ..., '
        '"concept": ...}], "relations": [{"subject": ..., "object": ..., '
        '"relation": ...}]}.'
    ),
}


# --- gold rendering helpers -------------------------------------------------


def synonym_triples_for_item(dataset: Dataset, item: AnnotatedText) -> list[Triple]:
    """Serialize the dataset's synonym pairs that belong to *item*.

    A pair belongs to the first item (in dataset order) whose text contains
    both members; subject/object order follows first occurrence in that text.
    """
    out: list[Triple] = []
    for a, b in dataset.synonym_pairs:
        owner = None
        for candidate in dataset.items:
            text = candidate.doc.text.casefold()
            if a.casefold() in text and b.casefold() in text:
                owner = candidate
                break
        if owner is not None and owner.doc.id == item.doc.id:
            out.append(ordered_triple(item.doc.text, a, b, SYNONYM_RELATION, item.doc.id))
    return out


def gold_triples_for_item(dataset: Dataset, item: AnnotatedText) -> list[Triple]:
    """Gold relation output for one item: its triples plus its synonym pairs."""
    return dataset.triples_for(item.doc.id) + synonym_triples_for_item(dataset, item)


# --- demonstrations ---------------------------------------------------------


@dataclass(frozen=True)
class Demonstration:
    input_repr: str
    prompt_input: str
    prompt_output: str


def _relation_input_repr(item: AnnotatedText) -> str:
    return "Terms: " + ", ".join(item.term_list()) + "\n" + item.doc.text


def _demonstration_for(item: AnnotatedText, dataset: Dataset, task: str, m: MarkerMap) -> Demonstration:
    if task == "terms":
        return Demonstration(
            input_repr=item.doc.text,
            prompt_input=item.doc.text,
            prompt_output=render_markup(item, m),
        )
    terms = ", ".join(item.term_list())
    return Demonstration(
        input_repr=_relation_input_repr(item),
        prompt_input=f"Terms: {terms}\nContext: {item.doc.text}",
        prompt_output=render_triples(gold_triples_for_item(dataset, item)),
    )


def select_demonstrations(
    train: Dataset,
    probe: str,
    k: int,
    task: str,
    gateway,
    marker_map: MarkerMap | None = None,
) -> list[Demonstration]:
    """Top-k most similar training items, returned least-similar first so the
    closest demonstration sits adjacent to the test input. Ties break on the
    training item id.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not train.items:
        raise ValueError("training dataset is empty")
    m = marker_map or MarkerMap()
    candidates = train.items if task == "terms" else train.multi_term_items()
    if not candidates:
        raise ValueError(f"no eligible training items for task {task!r}")
    if k > len(candidates):
        logger.warning(
            "requested k=%d but only %d candidates; using all", k, len(candidates)
        )
        k = len(candidates)
    demos = [_demonstration_for(item, train, task, m) for item in candidates]
    vectors = gateway.embed([d.input_repr for d in demos] + [probe])
    probe_vec = vectors[-1]
    scored = [
        (cosine(vec.values, probe_vec.values), item.doc.id, demo)
        for vec, item, demo in zip(vectors, candidates, demos)
    ]
    scored.sort(key=lambda row: (-row[0], row[1]))
    top = scored[:k]
    top.reverse()
    return [demo for _, _, demo in top]


# --- zero-shot --------------------------------------------------------------


@dataclass
class ZeroShotOutput:
    terms: list[tuple[str, TopConcept]] = field(default_factory=list)
    relations: list[tuple[str, str, str]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def _strip_fences(reply: str) -> str:
    text = reply.strip()
    if text.startswith("```"):
        text = re.sub(r"^```[a-zA-Z]*\s*|\s*```$", "", text).strip()
    return text


def _extract_json_object(reply: str) -> dict:
    text = _strip_fences(reply)
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        start, end = text.find("{"), text.rfind("}")
        if start < 0 or end <= start:
            raise ExtractionError(f"no JSON object in model reply: {reply[:120]!r}")
        try:
            data = json.loads(text[start : end + 1])
        except json.JSONDecodeError as exc:
            raise ExtractionError(f"unparseable JSON in model reply: {exc}") from exc
    if not isinstance(data, dict):
        raise ExtractionError("model reply is not a JSON object")
    return data


def extract_zero_shot(
    doc: Document,
    gateway,
    prompt_profile: str = "cot",
    model: str | None = None,
    temperature: float = 0.0,
    max_output_tokens: int = 2048,
) -> ZeroShotOutput:
    if prompt_profile not in ZERO_SHOT_PROFILES:
        raise ValueError(
            f"unknown prompt profile {prompt_profile!r}; shipped profiles: "
            f"{sorted(ZERO_SHOT_PROFILES)}"
        )
    reply = gateway.chat(
        chat_request(
            ZERO_SHOT_PROFILES[prompt_profile],
            doc.text,
            model or gateway.chat_model,
            temperature,
            max_output_tokens,
        )
    )
    data = _extract_json_object(reply)
    out = ZeroShotOutput()
    for entry in data.get("terms", []) or []:
        if not isinstance(entry, dict) or "name" not in entry:
            out.warnings.append(f"malformed term entry skipped: {entry!r}")
            continue
        try:
            concept = TopConcept.from_label(str(entry.get("concept", "")))
        except ValueError:
            out.warnings.append(
                f"term {entry['name']!r} dropped: unknown concept {entry.get('concept')!r}"
            )
            continue
        out.terms.append((str(entry["name"]), concept))
    for entry in data.get("relations", []) or []:
        if (
            not isinstance(entry, dict)
            or not all(entry.get(k) for k in ("subject", "object", "relation"))
        ):
            out.warnings.append(f"malformed relation entry skipped: {entry!r}")
            continue
        out.relations.append((str(entry["subject"]), str(entry["object"]), str(entry["relation"])))
    return out


# --- ICL and fine-tuned inference -------------------------------------------


def _terms_user_prompt(demos: list[Demonstration], doc_text: str) -> str:
    blocks = [f"Input: {d.prompt_input}\nOutput: {d.prompt_output}" for d in demos]
    blocks.append(f"Input: {doc_text}\nOutput:")
    return "\n\n".join(blocks)


def _relations_user_prompt(demos: list[Demonstration], terms: list[str], doc_text: str) -> str:
    blocks = [f"{d.prompt_input}\nTriples: {d.prompt_output}" for d in demos]
    blocks.append(f"Terms: {', '.join(terms)}\nContext: {doc_text}\nTriples:")
    return "\n\n".join(blocks)


def extract_terms_icl(
    doc: Document,
    demos: list[Demonstration],
    gateway,
    marker_map: MarkerMap | None = None,
    max_drift: float = 0.25,
    model: str | None = None,
    temperature: float = 0.0,
    max_output_tokens: int = 2048,
) -> tuple[AnnotatedText, AlignmentReport]:
    if not demos:
        raise ValueError("ICL term extraction requires at least one demonstration")
    m = marker_map or MarkerMap()
    reply = gateway.chat(
        chat_request(
            term_system_prompt(m, with_examples=True),
            _terms_user_prompt(demos, doc.text),
            model or gateway.chat_model,
            temperature,
            max_output_tokens,
        )
    )
    report = align_labeled_output(doc.text, reply, m, max_drift)
    return AnnotatedText(doc=doc, spans=tuple(report.recovered)), report


def extract_terms_finetuned(
    doc: Document,
    model_id: str,
    gateway,
    marker_map: MarkerMap | None = None,
    max_drift: float = 0.25,
    temperature: float = 0.0,
    max_output_tokens: int = 2048,
) -> tuple[AnnotatedText, AlignmentReport]:
    m = marker_map or MarkerMap()
    reply = gateway.chat(
        chat_request(
            term_system_prompt(m, with_examples=False),
            _terms_user_prompt([], doc.text),
            model_id,
            temperature,
            max_output_tokens,
        )
    )
    report = align_labeled_output(doc.text, reply, m, max_drift)
    return AnnotatedText(doc=doc, spans=tuple(report.recovered)), report


def _filter_to_terms(
    triples: list[Triple], terms: list[str], doc_id: str
) -> tuple[list[Triple], list[str]]:
    allowed = {normalize(t) for t in terms}
    kept: list[Triple] = []
    warnings: list[str] = []
    for t in triples:
        missing = [
            side for side in (t.subject, t.object) if normalize(side) not in allowed
        ]
        if missing:
            warnings.append(
                f"triple ({t.subject}, {t.object}, {t.relation}) dropped: "
                f"{', '.join(repr(m) for m in missing)} not in the term list"
            )
            continue
        kept.append(
            Triple(t.subject, t.object, t.relation, source_doc=doc_id)
        )
    return kept, warnings


def extract_relations_icl(
    terms: list[str],
    doc: Document,
    demos: list[Demonstration],
    gateway,
    model: str | None = None,
    temperature: float = 0.0,
    max_output_tokens: int = 2048,
) -> tuple[list[Triple], list[str]]:
    if len(terms) < 2:
        raise ValueError("relation extraction requires at least two terms")
    reply = gateway.chat(
        chat_request(
            relation_system_prompt(with_examples=True),
            _relations_user_prompt(demos, terms, doc.text),
            model or gateway.chat_model,
            temperature,
            max_output_tokens,
        )
    )
    triples, warnings = parse_triples(reply)
    kept, filter_warnings = _filter_to_terms(triples, terms, doc.id)
    return kept, warnings + filter_warnings


def extract_relations_finetuned(
    terms: list[str],
    doc: Document,
    model_id: str,
    gateway,
    temperature: float = 0.0,
    max_output_tokens: int = 2048,
) -> tuple[list[Triple], list[str]]:
    if len(terms) < 2:
        raise ValueError("relation extraction requires at least two terms")
    reply = gateway.chat(
        chat_request(
            relation_system_prompt(with_examples=False),
            _relations_user_prompt([], terms, doc.text),
            model_id,
            temperature,
            max_output_tokens,
        )
    )
    triples, warnings = parse_triples(reply)
    kept, filter_warnings = _filter_to_terms(triples, terms, doc.id)
    return kept, warnings + filter_warnings


# --- fine-tune dataset export -----------------------------------------------


def export_finetune_dataset(
    train: Dataset,
    task: str,
    path: str | Path,
    marker_map: MarkerMap | None = None,
) -> int:
    """Write one chat-format message line per eligible training item.

    Returns the number of lines written. Term annotations that cannot be
    rendered (marker collision) abort with an error naming the item.
    """
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    m = marker_map or MarkerMap()
    lines = []
    if task == "terms":
        system = term_system_prompt(m, with_examples=False)
        for item in train.items:
            try:
                assistant = render_markup(item, m)
            except MarkupError as exc:
                raise ExtractionError(f"item {item.doc.id!r}: {exc}") from exc
            lines.append((system, item.doc.text, assistant))
    else:
        system = relation_system_prompt(with_examples=False)
        for item in train.multi_term_items():
            user = f"Terms: {', '.join(item.term_list())}\nContext: {item.doc.text}"
            assistant = render_triples(gold_triples_for_item(train, item))
            lines.append((system, user, assistant))
    with open(path, "w", encoding="utf-8") as handle:
        for system, user, assistant in lines:
            record = {
                "messages": [
                    {"role": "system", "content": system},
                    {"role": "user", "content": user},
                    {"role": "assistant", "content": assistant},
                ]
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    return len(lines)


# --- runs ---------------------------------------------------------------


@dataclass
class DocPrediction:
    doc_id: str
    spans: list[TermSpan] | None = None          # terms task, offset-level
    names: list[tuple[str, TopConcept]] | None = None   # zero-shot terms, name-level
    triples: list[Triple] | None = None          # relations task


@dataclass
class ExtractionRun:
    strategy: str
    task: str
    model: str
    params: dict
    predictions: list[DocPrediction] = field(default_factory=list)
    warnings: list[tuple[str, str]] = field(default_factory=list)
    failures: list[tuple[str, str]] = field(default_factory=list)
    started: str = ""
    finished: str = ""
    audit_file: str | None = None


@dataclass
class RunParams:
    """Everything a strategy execution needs beyond the dataset itself."""

    k: int = 16
    temperature: float = 0.0
    max_drift: float = 0.25
    max_output_tokens: int = 2048
    prompt_profile: str = "cot"
    model: str | None = None
    model_id: str | None = None          # fine-tuned model, required for that strategy
    marker_map: MarkerMap = field(default_factory=MarkerMap)
    terms_from: str = "gold"             # "gold" or "run:<path to a terms run file>"
    max_workers: int = 4


def _terms_for_relations(dataset: Dataset, params: RunParams) -> dict[str, list[str]]:
    """Term list per document for the relation task."""
    if params.terms_from == "gold":
        return {item.doc.id: item.term_list() for item in dataset.items}
    if params.terms_from.startswith("run:"):
        run = load_run(params.terms_from[len("run:") :])
        if run.task != "terms":
            raise ValueError("terms_from run file must be a terms run")
        out: dict[str, list[str]] = {}
        for pred in run.predictions:
            if pred.spans is not None:
                seen: set[str] = set()
                terms = []
                for span in pred.spans:
                    if span.surface not in seen:
                        seen.add(span.surface)
                        terms.append(span.surface)
                out[pred.doc_id] = terms
            elif pred.names is not None:
                out[pred.doc_id] = [name for name, _ in pred.names]
        return out
    raise ValueError(f"unknown terms_from {params.terms_from!r}")


def run_strategy(
    dataset: Dataset,
    strategy: str,
    task: str,
    params: RunParams,
    gateway,
    train: Dataset | None = None,
    clock=None,
) -> ExtractionRun:
    """Run one strategy over every eligible document.

    Per-document failures are recorded on the run and never abort it; only
    configuration errors raise. Documents are processed concurrently but the
    run is assembled in dataset order, so output is deterministic.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    if strategy == "icl" and train is None:
        raise ValueError("ICL requires a training dataset for demonstrations")
    if strategy == "icl" and params.k < 1:
        raise ValueError("ICL requires k >= 1")
    if strategy == "fine_tuned" and not params.model_id:
        raise ValueError("fine_tuned strategy requires model_id from a succeeded job")

    clock = clock or (lambda: "")
    model = params.model or (params.model_id if strategy == "fine_tuned" else gateway.chat_model)
    # Zero-shot is one-step and needs no term lists; the two-step strategies
    # extract relations only between previously identified terms.
    two_step_relations = task == "relations" and strategy != "zero_shot"
    term_lists = _terms_for_relations(dataset, params) if two_step_relations else {}

    if two_step_relations:
        eligible = [
            item for item in dataset.items if len(term_lists.get(item.doc.id, [])) >= 2
        ]
    else:
        eligible = list(dataset.items)

    def process(item: AnnotatedText):
        doc = item.doc
        doc_warnings: list[str] = []
        if strategy == "zero_shot":
            out = extract_zero_shot(
                doc, gateway, params.prompt_profile, model, params.temperature, params.max_output_tokens
            )
            doc_warnings.extend(out.warnings)
            if task == "terms":
                pred = DocPrediction(doc_id=doc.id, names=out.terms)
            else:
                triples = [Triple(s, o, r, source_doc=doc.id) for s, o, r in out.relations]
                pred = DocPrediction(doc_id=doc.id, triples=triples)
            return pred, doc_warnings
        if task == "terms":
            if strategy == "icl":
                probe = doc.text
                demos = select_demonstrations(train, probe, params.k, task, gateway, params.marker_map)
                annotated, report = extract_terms_icl(
                    doc, demos, gateway, params.marker_map, params.max_drift,
                    model, params.temperature, params.max_output_tokens,
                )
            else:
                annotated, report = extract_terms_finetuned(
                    doc, params.model_id, gateway, params.marker_map,
                    params.max_drift, params.temperature, params.max_output_tokens,
                )
            for surface, concept, reason in report.dropped:
                doc_warnings.append(f"term {surface!r} ({concept.value}) dropped: {reason}")
            return DocPrediction(doc_id=doc.id, spans=list(annotated.spans)), doc_warnings
        terms = term_lists[doc.id]
        if strategy == "icl":
            probe = "Terms: " + ", ".join(terms) + "\n" + doc.text
            demos = select_demonstrations(train, probe, params.k, task, gateway, params.marker_map)
            triples, warns = extract_relations_icl(
                terms, doc, demos, gateway, model, params.temperature, params.max_output_tokens
            )
        else:
            triples, warns = extract_relations_finetuned(
                terms, doc, params.model_id, gateway, params.temperature, params.max_output_tokens
            )
        doc_warnings.extend(warns)
        return DocPrediction(doc_id=doc.id, triples=triples), doc_warnings

    run = ExtractionRun(
        strategy=strategy,
        task=task,
        model=model,
        params=run_params_dict(params, strategy),
        started=clock(),
        audit_file=str(gateway.audit_path) if getattr(gateway, "audit_path", None) else None,
    )

    results: list[tuple[DocPrediction, list[str]] | Exception] = [None] * len(eligible)  # type: ignore[list-item]
    max_workers = max(1, params.max_workers)
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = {pool.submit(process, item): i for i, item in enumerate(eligible)}
        for future, i in futures.items():
            try:
                results[i] = future.result()
            except Exception as exc:  # per-document isolation
                results[i] = exc

    for item, result in zip(eligible, results):
        if isinstance(result, Exception):
            run.failures.append((item.doc.id, f"{type(result).__name__}: {result}"))
            continue
        pred, doc_warnings = result
        run.predictions.append(pred)
        run.warnings.extend((item.doc.id, w) for w in doc_warnings)
    run.finished = clock()
    return run


def run_params_dict(params: RunParams, strategy: str) -> dict:
    out = {
        "temperature": params.temperature,
        "max_output_tokens": params.max_output_tokens,
        "max_drift": params.max_drift,
        "marker_map": {"open": params.marker_map.open_marker, "close": params.marker_map.to_labels()},
        "terms_from": params.terms_from,
    }
    if strategy == "icl":
        out["k"] = params.k
    if strategy == "zero_shot":
        out["prompt_profile"] = params.prompt_profile
    if strategy == "fine_tuned":
        out["model_id"] = params.model_id
    return out


# --- run file I/O -----------------------------------------------------------


def write_run(run: ExtractionRun, path: str | Path) -> None:
    records = [
        {
            "kind": "run",
            "strategy": run.strategy,
            "task": run.task,
            "model": run.model,
            "params": run.params,
            "started": run.started,
            "finished": run.finished,
            "audit_file": run.audit_file,
        }
    ]
    for pred in run.predictions:
        record: dict = {"kind": "prediction", "doc_id": pred.doc_id}
        if pred.spans is not None:
            record["spans"] = [
                {"start": s.start, "end": s.end, "surface": s.surface, "concept": s.concept.value}
                for s in pred.spans
            ]
        if pred.names is not None:
            record["names"] = [{"name": n, "concept": c.value} for n, c in pred.names]
        if pred.triples is not None:
            record["triples"] = [
                {"subject": t.subject, "object": t.object, "relation": t.relation}
                for t in pred.triples
            ]
        records.append(record)
    for doc_id, message in run.warnings:
        records.append({"kind": "warning", "doc_id": doc_id, "message": message})
    for doc_id, error in run.failures:
        records.append({"kind": "failure", "doc_id": doc_id, "error": error})
    Path(path).write_text(
        "\n".join(json.dumps(r, ensure_ascii=False) for r in records) + "\n", encoding="utf-8"
    )


def load_run(path: str | Path) -> ExtractionRun:
    run: ExtractionRun | None = None
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        record = json.loads(line)
        kind = record.get("kind")
        if kind == "run":
            run = ExtractionRun(
                strategy=record["strategy"],
                task=record["task"],
                model=record["model"],
                params=record.get("params", {}),
                started=record.get("started", ""),
                finished=record.get("finished", ""),
                audit_file=record.get("audit_file"),
            )
        elif kind == "prediction":
            if run is None:
                raise ValueError(f"line {lineno}: prediction before run header")
            pred = DocPrediction(doc_id=record["doc_id"])
            if "spans" in record:
                pred.spans = [
                    TermSpan(s["start"], s["end"], s["surface"], TopConcept.from_label(s["concept"]))
                    for s in record["spans"]
                ]
            if "names" in record:
                pred.names = [
                    (n["name"], TopConcept.from_label(n["concept"])) for n in record["names"]
                ]
            if "triples" in record:
                pred.triples = [
                    Triple(t["subject"], t["object"], t["relation"], source_doc=record["doc_id"])
                    for t in record["triples"]
                ]
            run.predictions.append(pred)
        elif kind == "warning":
            if run is None:
                raise ValueError(f"line {lineno}: warning before run header")
            run.warnings.append((record.get("doc_id", ""), record["message"]))
        elif kind == "failure":
            if run is None:
                raise ValueError(f"line {lineno}: failure before run header")
            run.failures.append((record.get("doc_id", ""), record["error"]))
        else:
            raise ValueError(f"line {lineno}: unknown record kind {kind!r}")
    if run is None:
        raise ValueError("run file has no run header")
    return run
