"""Command-line entry point wiring all pipeline stages together.

Exit codes: 0 success, 1 operational error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import corpus, evaluate, extract, ontology
from .config import ConfigError, build_gateway, load_config


def _add_config(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="pipeline config YAML", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ontoforge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="print dataset statistics")
    _add_config(p)
    p.add_argument("--dataset", required=True)

    p = sub.add_parser("distill", help="distill source documents into QA texts")
    _add_config(p)
    p.add_argument("--corpus", required=True, help="dataset file with source documents")
    p.add_argument("--topic", required=True, choices=[c.value for c in corpus.TopConcept])
    p.add_argument("--out", required=True)
    p.add_argument("--n-pairs", type=int, default=None)

    p = sub.add_parser("export-finetune", help="write a chat-format training file")
    _add_config(p)
    p.add_argument("--train", required=True)
    p.add_argument("--task", required=True, choices=extract.TASKS)
    p.add_argument("--out", required=True)

    p = sub.add_parser("finetune", help="manage fine-tune jobs")
    _add_config(p)
    p.add_argument("action", choices=["create", "poll"])
    p.add_argument("--file", help="training file (create)")
    p.add_argument("--task", choices=extract.TASKS, default="terms")
    p.add_argument("--base-model", default=None)
    p.add_argument("--job", help="job id (poll)")

    p = sub.add_parser("extract", help="run one extraction strategy over a dataset")
    _add_config(p)
    p.add_argument("--strategy", required=True, choices=["zero-shot", "icl", "fine-tuned"])
    p.add_argument("--task", required=True, choices=extract.TASKS)
    p.add_argument("--dataset", required=True)
    p.add_argument("--train", help="training dataset (ICL demonstrations)")
    p.add_argument("--out", required=True)
    p.add_argument("--model", default=None)
    p.add_argument("--model-id", default=None, help="fine-tuned model id")
    p.add_argument("--terms-from", default=None, help='"gold" or "run:<terms run file>"')

    p = sub.add_parser("evaluate", help="score a run against gold annotations")
    _add_config(p)
    p.add_argument("--run", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out", help="write the structured report here")
    p.add_argument("--term-mode", choices=["surface", "strict"], default="surface")
    p.add_argument("--triple-mode", choices=["full", "terms_only"], default="full")

    p = sub.add_parser("compare", help="side-by-side reports for several runs")
    _add_config(p)
    p.add_argument("--gold", required=True)
    p.add_argument("--runs", nargs="+", required=True)
    p.add_argument("--term-mode", choices=["surface", "strict"], default="surface")
    p.add_argument("--triple-mode", choices=["full", "terms_only"], default="full")

    p = sub.add_parser("review-serve", help="serve the expert review API and UI")
    _add_config(p)
    p.add_argument("--store", required=True, help="review state directory")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui-dir", default=None, help="built review UI bundle to serve at /")

    p = sub.add_parser("build-graph", help="consolidate triples into an ontology graph")
    _add_config(p)
    p.add_argument("--triples", required=True, help="triple file or relations run file")
    p.add_argument("--terms", required=True, help="terms run file or gold dataset for concept types")
    p.add_argument("--out", required=True)
    p.add_argument(
        "--fallback-concept",
        choices=[c.value for c in corpus.TopConcept],
        default=None,
        help="concept for terms with no known type (default: error)",
    )

    p = sub.add_parser("export", help="export an ontology graph")
    _add_config(p)
    p.add_argument("--graph", required=True)
    p.add_argument("--format", required=True, choices=["cypher", "graphml", "graph"])
    p.add_argument("--out", required=True)
    return parser


def _load_triples(path: str) -> list[corpus.Triple]:
    """Accept either a relations run file or a line file of triple records."""
    first = ""
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            first = line
            break
    kind = json.loads(first).get("kind") if first else None
    if kind == "run":
        run = extract.load_run(path)
        out: list[corpus.Triple] = []
        for pred in run.predictions:
            out.extend(pred.triples or [])
        return out
    triples = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        record = json.loads(line)
        if record.get("kind") not in (None, "triple"):
            continue
        triples.append(
            corpus.Triple(
                record["subject"], record["object"], record["relation"], record.get("doc_id", "")
            )
        )
    return triples


def _term_concepts(path: str) -> dict[str, corpus.TopConcept]:
    """Term -> concept map from a terms run file or a gold dataset file."""
    first = Path(path).read_text(encoding="utf-8").splitlines()[0]
    out: dict[str, corpus.TopConcept] = {}
    if json.loads(first).get("kind") == "run":
        run = extract.load_run(path)
        for pred in run.predictions:
            for span in pred.spans or []:
                out.setdefault(span.surface, span.concept)
            for name, concept in pred.names or []:
                out.setdefault(name, concept)
        return out
    dataset = corpus.load_dataset(path)
    for item in dataset.items:
        for span in item.spans:
            out.setdefault(span.surface, span.concept)
    return out


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # operational failures: I/O, provider, invariants
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def _dispatch(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    config_dir = Path(args.config).parent if args.config else Path(".")

    if args.command == "stats":
        stats = corpus.dataset_stats(corpus.load_dataset(args.dataset))
        print(json.dumps(stats.__dict__, indent=2))
        return 0

    if args.command == "distill":
        from . import distill as distill_mod

        gateway = build_gateway(config, config_dir)
        source = corpus.load_dataset(args.corpus)
        chunks = distill_mod.chunk_documents([i.doc for i in source.items], config.distill.max_chars)
        index = distill_mod.build_index(chunks, gateway)
        docs, warnings = distill_mod.distill_topic(
            index,
            corpus.TopConcept.from_label(args.topic),
            gateway,
            n_pairs=args.n_pairs or config.distill.n_pairs,
            top_m=config.distill.top_m,
            topic_queries=config.topic_queries(),
        )
        for warning in warnings:
            print(f"warning: {warning}", file=sys.stderr)
        out = corpus.Dataset(
            name=f"distilled-{args.topic}",
            items=[corpus.AnnotatedText(doc=d) for d in docs],
        )
        corpus.write_dataset(out, args.out)
        print(f"wrote {len(docs)} distilled documents to {args.out}")
        return 0

    if args.command == "export-finetune":
        train = corpus.load_dataset(args.train)
        count = extract.export_finetune_dataset(train, args.task, args.out, config.marker_map())
        print(f"wrote {count} training lines to {args.out}")
        return 0

    if args.command == "finetune":
        gateway = build_gateway(config, config_dir)
        if args.action == "create":
            if not args.file:
                print("error: --file is required for create", file=sys.stderr)
                return 2
            job = gateway.create_finetune_job(
                args.file,
                args.base_model or config.provider.chat_model,
                config.finetune.hyperparams(args.task),
            )
        else:
            if not args.job:
                print("error: --job is required for poll", file=sys.stderr)
                return 2
            job = gateway.poll_job(args.job)
        print(
            json.dumps(
                {
                    "id": job.id,
                    "base_model": job.base_model,
                    "status": job.status,
                    "result_model": job.result_model,
                },
                indent=2,
            )
        )
        return 0

    if args.command == "extract":
        gateway = build_gateway(config, config_dir)
        dataset = corpus.load_dataset(args.dataset)
        train = corpus.load_dataset(args.train) if args.train else None
        strategy = args.strategy.replace("-", "_")
        params = extract.RunParams(
            k=config.strategy.k,
            temperature=config.strategy.temperature,
            max_drift=config.strategy.max_drift,
            max_output_tokens=config.strategy.max_output_tokens,
            prompt_profile=config.strategy.prompt_profile,
            model=args.model,
            model_id=args.model_id or config.strategy.model_id,
            marker_map=config.marker_map(),
            terms_from=args.terms_from or config.strategy.terms_from,
            max_workers=config.gateway.max_concurrency,
        )
        run = extract.run_strategy(
            dataset, strategy, args.task, params, gateway, train=train, clock=config.clock()
        )
        extract.write_run(run, args.out)
        print(
            f"{strategy}/{args.task}: {len(run.predictions)} predictions, "
            f"{len(run.failures)} failures, {len(run.warnings)} warnings -> {args.out}"
        )
        return 0

    if args.command == "evaluate":
        run = extract.load_run(args.run)
        gold = corpus.load_dataset(args.gold)
        cfg = evaluate.MatchConfig(term_mode=args.term_mode, triple_mode=args.triple_mode)
        report = evaluate.evaluate_run(run, gold, cfg)
        print(evaluate.format_report(report))
        if args.out:
            Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
        return 0

    if args.command == "compare":
        gold = corpus.load_dataset(args.gold)
        cfg = evaluate.MatchConfig(term_mode=args.term_mode, triple_mode=args.triple_mode)
        reports = []
        for run_path in args.runs:
            run = extract.load_run(run_path)
            reports.append((f"{run.strategy}", evaluate.evaluate_run(run, gold, cfg)))
        print(evaluate.format_comparison(reports))
        return 0

    if args.command == "review-serve":
        import uvicorn

        from .review import ReviewStore, create_app

        store = ReviewStore(args.store)
        app = create_app(store, ui_dir=args.ui_dir)
        uvicorn.run(app, host=args.host, port=args.port)
        return 0

    if args.command == "build-graph":
        triples = _load_triples(args.triples)
        term_concepts = _term_concepts(args.terms)
        fallback = (
            corpus.TopConcept.from_label(args.fallback_concept) if args.fallback_concept else None
        )
        result = ontology.consolidate(triples, term_concepts, fallback)
        for warning in result.warnings:
            print(f"warning: {warning}", file=sys.stderr)
        graph = ontology.build_graph(result.nodes, result.triples)
        ontology.export_graph_file(graph, args.out)
        print(
            f"graph: {len(graph.nodes)} concept nodes + {len(graph.top_names)} top nodes, "
            f"{len(graph.edges)} edges -> {args.out}"
        )
        return 0

    if args.command == "export":
        graph = ontology.load_graph_file(args.graph)
        if args.format == "cypher":
            Path(args.out).write_text(ontology.export_cypher(graph), encoding="utf-8")
        elif args.format == "graphml":
            Path(args.out).write_text(ontology.export_graphml(graph), encoding="utf-8")
        else:
            ontology.export_graph_file(graph, args.out)
        print(f"wrote {args.format} export to {args.out}")
        return 0

    raise ValueError(f"unhandled command {args.command!r}")


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
