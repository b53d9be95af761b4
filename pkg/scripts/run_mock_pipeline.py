#!/usr/bin/env python3
"""Run the whole extraction-to-graph pipeline offline on the fixture corpus.

    python3 scripts/run_mock_pipeline.py [output-dir]

Uses the scripted mock provider, so no credentials or network are needed.
Produces run files, evaluation reports, a review-ready triple stream, the
consolidated graph, and the Cypher/GraphML exports under the output directory
(default ./out), then prints the side-by-side comparison table.
"""

import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(Path(__file__).resolve().parent))

from make_fixtures import FT_MODEL, golden_pipeline_commands  # noqa: E402

DATA = ROOT / "tests" / "data"


def run(outdir, *args):
    print("$ ontoforge " + " ".join(args), flush=True)
    result = subprocess.run(
        [sys.executable, "-m", "ontoforge.cli", *args], cwd=outdir, text=True
    )
    if result.returncode != 0:
        raise SystemExit(result.returncode)


def main():
    outdir = Path(sys.argv[1]) if len(sys.argv) > 1 else ROOT / "out"
    outdir.mkdir(parents=True, exist_ok=True)
    config = str(DATA / "golden" / "config.yaml")
    gold = str(DATA / "gold.jsonl")
    train = str(DATA / "train.jsonl")

    for command in golden_pipeline_commands(config, gold, train):
        run(outdir, *command)
    run(outdir, "export", "--graph", "graph.jsonl", "--format", "graphml", "--out", "ontology.graphml")
    run(
        outdir,
        "compare",
        "--gold", gold,
        "--runs", "icl_relations.run.jsonl", "ft_relations.run.jsonl",
    )
    print(f"\nartifacts in {outdir}")
    print("next: ontoforge review-serve --store review-state --ui-dir frontend/dist")


if __name__ == "__main__":
    main()
