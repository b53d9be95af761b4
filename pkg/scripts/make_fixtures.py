#!/usr/bin/env python3
"""Regenerate the checked-in test fixtures and golden pipeline outputs.

Run from the repository root:

    python3 scripts/make_fixtures.py

Outputs land in tests/data/: the train/gold corpora, the scripted mock
provider (identity replies plus a handful of deliberate mistakes so the
evaluation reports are non-trivial), the pipeline config, and the frozen
golden outputs the end-to-end harness compares against byte-for-byte.
"""

import shutil
import subprocess
import sys
from pathlib import Path

import yaml

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from fixtures_def import gold_dataset, train_dataset  # noqa: E402

from ontoforge.corpus import write_dataset  # noqa: E402
from ontoforge.extract import gold_triples_for_item  # noqa: E402
from ontoforge.markup import MarkerMap, render_markup, render_triples  # noqa: E402

DATA = ROOT / "tests" / "data"
GOLDEN = DATA / "golden"


def golden_rules(gold):
    """Identity replies with scripted mistakes on d02/d04/d07/d08/d11."""
    m = MarkerMap()
    rules = []
    for item in gold.items:
        terms_reply = render_markup(item, m)
        if item.doc.id == "d02":
            # paraphrased tail; all terms intact
            terms_reply = terms_reply.replace("is too high.", "rises far too high.")
        if item.doc.id == "d04":
            # truncated term: "strength" instead of "mechanical strength"
            terms_reply = terms_reply.replace(
                "the @@mechanical strength||", "the mechanical @@strength||"
            )
        rules.append({"suffix": f"Input: {item.doc.text}\nOutput:", "reply": terms_reply})

        rel_reply = render_triples(gold_triples_for_item(gold, item))
        if item.doc.id == "d07":
            # relation name substitution
            rel_reply = rel_reply.replace("relation: improves", "relation: has property")
        if item.doc.id == "d08":
            rel_reply = "None"
        if item.doc.id == "d11":
            # hallucinated, unlisted term: must be dropped with a warning
            rel_reply += "; [subject: Shot blasting, object: rubber, relation: cleans]"
        rules.append({"suffix": f"Context: {item.doc.text}\nTriples:", "reply": rel_reply})
    return rules


CONFIG = {
    "provider": {
        "kind": "mock",
        "chat_model": "gpt-4.1-mini-2025-04-14",
        "embed_model": "mock-embed",
        "mock": {"script": "mock_script.yaml"},
    },
    "gateway": {"max_concurrency": 4},
    "strategy": {"k": 3, "temperature": 0.0, "max_drift": 0.25},
    "fixed_clock": True,
}

FT_MODEL = "gpt-4.1-mini-2025-04-14:ft-mock"


def cli(outdir, *args):
    result = subprocess.run(
        [sys.executable, "-m", "ontoforge.cli", *args],
        cwd=outdir,
        capture_output=True,
        text=True,
    )
    if result.returncode != 0:
        raise SystemExit(f"command {args} failed:\n{result.stdout}\n{result.stderr}")
    return result.stdout


def golden_pipeline_commands(config, gold_file, train_file):
    """The exact command lines the acceptance harness replays."""
    return [
        ["extract", "--config", config, "--strategy", "icl", "--task", "terms",
         "--dataset", gold_file, "--train", train_file, "--out", "icl_terms.run.jsonl"],
        ["extract", "--config", config, "--strategy", "icl", "--task", "relations",
         "--dataset", gold_file, "--train", train_file,
         "--terms-from", "run:icl_terms.run.jsonl", "--out", "icl_relations.run.jsonl"],
        ["extract", "--config", config, "--strategy", "fine-tuned", "--task", "terms",
         "--dataset", gold_file, "--model-id", FT_MODEL, "--out", "ft_terms.run.jsonl"],
        ["extract", "--config", config, "--strategy", "fine-tuned", "--task", "relations",
         "--dataset", gold_file, "--model-id", FT_MODEL,
         "--terms-from", "run:ft_terms.run.jsonl", "--out", "ft_relations.run.jsonl"],
        ["evaluate", "--run", "icl_terms.run.jsonl", "--gold", gold_file,
         "--out", "icl_terms.report.json"],
        ["evaluate", "--run", "icl_relations.run.jsonl", "--gold", gold_file,
         "--out", "icl_relations.report.json"],
        ["build-graph", "--triples", "icl_relations.run.jsonl",
         "--terms", "icl_terms.run.jsonl", "--out", "graph.jsonl"],
        ["export", "--graph", "graph.jsonl", "--format", "cypher", "--out", "ontology.cypher"],
    ]


def main():
    GOLDEN.mkdir(parents=True, exist_ok=True)
    gold = gold_dataset()
    train = train_dataset()
    write_dataset(gold, DATA / "gold.jsonl")
    write_dataset(train, DATA / "train.jsonl")

    script = {"rules": golden_rules(gold)}
    (GOLDEN / "mock_script.yaml").write_text(
        yaml.safe_dump(script, allow_unicode=True, sort_keys=False, width=10**6),
        encoding="utf-8",
    )
    (GOLDEN / "config.yaml").write_text(
        yaml.safe_dump(CONFIG, allow_unicode=True, sort_keys=False), encoding="utf-8"
    )

    expected = GOLDEN / "expected"
    if expected.exists():
        shutil.rmtree(expected)
    expected.mkdir()
    commands = golden_pipeline_commands(
        str(GOLDEN / "config.yaml"), str(DATA / "gold.jsonl"), str(DATA / "train.jsonl")
    )
    for command in commands:
        print("$ ontoforge " + " ".join(command))
        print(cli(expected, *command), end="")
    print(f"fixtures written under {DATA}")


if __name__ == "__main__":
    main()
