import json

import pytest
import yaml

from ontoforge.cli import main
from ontoforge.corpus import load_dataset, write_dataset
from ontoforge.markup import render_markup, render_triples
from ontoforge.extract import gold_triples_for_item


@pytest.fixture
def workspace(tmp_path, gold, train):
    write_dataset(gold, tmp_path / "gold.jsonl")
    write_dataset(train, tmp_path / "train.jsonl")
    rules = []
    for item in gold.items:
        rules.append({"suffix": f"Input: {item.doc.text}\nOutput:", "reply": render_markup(item)})
        rules.append(
            {
                "suffix": f"Context: {item.doc.text}\nTriples:",
                "reply": render_triples(gold_triples_for_item(gold, item)),
            }
        )
    (tmp_path / "script.yaml").write_text(
        yaml.safe_dump({"rules": rules}, allow_unicode=True, sort_keys=False)
    )
    config = {
        "provider": {"kind": "mock", "mock": {"script": "script.yaml"}},
        "strategy": {"k": 2},
        "fixed_clock": True,
    }
    (tmp_path / "config.yaml").write_text(yaml.safe_dump(config))
    return tmp_path


def run(workspace, *args):
    return main([*map(str, args)])


class TestExitCodes:
    def test_unknown_flag_exits_2(self, workspace, capsys):
        with pytest.raises(SystemExit) as err:
            main(["evaluate", "--bogus-flag"])
        assert err.value.code == 2

    def test_unknown_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as err:
            main(["frobnicate"])
        assert err.value.code == 2

    def test_operational_error_exits_1(self, workspace, capsys):
        code = run(workspace, "stats", "--dataset", workspace / "missing.jsonl")
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_success_exits_0(self, workspace, capsys):
        code = run(workspace, "stats", "--dataset", workspace / "gold.jsonl")
        assert code == 0
        stats = json.loads(capsys.readouterr().out)
        assert stats["item_count"] == 12


class TestPipelineCommands:
    def extract(self, workspace, strategy, task, out, *extra):
        code = run(
            workspace,
            "extract",
            "--config", workspace / "config.yaml",
            "--strategy", strategy,
            "--task", task,
            "--dataset", workspace / "gold.jsonl",
            "--train", workspace / "train.jsonl",
            "--out", workspace / out,
            *extra,
        )
        assert code == 0

    def test_identity_evaluate_scores_one(self, workspace, capsys):
        self.extract(workspace, "icl", "terms", "terms.run.jsonl")
        code = run(
            workspace,
            "evaluate",
            "--run", workspace / "terms.run.jsonl",
            "--gold", workspace / "gold.jsonl",
            "--out", workspace / "report.json",
        )
        assert code == 0
        assert "f1=1.000" in capsys.readouterr().out
        report = json.loads((workspace / "report.json").read_text())
        assert report["f1"] == 1.0

    def test_compare_renders_table(self, workspace, capsys):
        self.extract(workspace, "icl", "terms", "a.run.jsonl")
        self.extract(workspace, "fine-tuned", "terms", "b.run.jsonl", "--model-id", "m:ft-mock")
        code = run(
            workspace,
            "compare",
            "--gold", workspace / "gold.jsonl",
            "--runs", workspace / "a.run.jsonl", workspace / "b.run.jsonl",
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "precision" in out and "fine_tuned" in out

    def test_build_graph_and_exports(self, workspace, capsys):
        self.extract(workspace, "icl", "terms", "terms.run.jsonl")
        self.extract(workspace, "icl", "relations", "relations.run.jsonl")
        code = run(
            workspace,
            "build-graph",
            "--triples", workspace / "relations.run.jsonl",
            "--terms", workspace / "terms.run.jsonl",
            "--out", workspace / "graph.jsonl",
        )
        assert code == 0
        for fmt, name in [("cypher", "g.cypher"), ("graphml", "g.graphml"), ("graph", "g.jsonl")]:
            code = run(
                workspace,
                "export",
                "--graph", workspace / "graph.jsonl",
                "--format", fmt,
                "--out", workspace / name,
            )
            assert code == 0
        cypher = (workspace / "g.cypher").read_text()
        assert cypher.count("MERGE") >= 6
        assert "<graphml" in (workspace / "g.graphml").read_text()

    def test_export_finetune_and_job_lifecycle(self, workspace, capsys):
        code = run(
            workspace,
            "export-finetune",
            "--train", workspace / "train.jsonl",
            "--task", "terms",
            "--out", workspace / "ft.jsonl",
        )
        assert code == 0
        assert len((workspace / "ft.jsonl").read_text().splitlines()) == 6
        capsys.readouterr()

        code = run(
            workspace,
            "finetune", "create",
            "--config", workspace / "config.yaml",
            "--file", workspace / "ft.jsonl",
            "--task", "terms",
        )
        assert code == 0
        job = json.loads(capsys.readouterr().out)
        assert job["status"] == "queued"
        # polling hits a fresh mock provider, which has no such job
        code = run(
            workspace,
            "finetune", "poll",
            "--config", workspace / "config.yaml",
            "--job", "ftjob-ghost",
        )
        assert code == 1

    def test_zero_shot_extract(self, workspace, tmp_path, capsys):
        reply = json.dumps(
            {"terms": [{"name": "sand casting", "concept": "casting-process"}], "relations": []}
        )
        config = {
            "provider": {"kind": "mock", "mock": {"default_reply": reply}},
            "fixed_clock": True,
        }
        (workspace / "zs.yaml").write_text(yaml.safe_dump(config))
        code = run(
            workspace,
            "extract",
            "--config", workspace / "zs.yaml",
            "--strategy", "zero-shot",
            "--task", "terms",
            "--dataset", workspace / "gold.jsonl",
            "--out", workspace / "zs.run.jsonl",
        )
        assert code == 0
        code = run(
            workspace,
            "evaluate",
            "--run", workspace / "zs.run.jsonl",
            "--gold", workspace / "gold.jsonl",
        )
        assert code == 0
        assert "recall=n/a" in capsys.readouterr().out

    def test_distill_writes_corpus(self, workspace, capsys):
        source = load_dataset(workspace / "gold.jsonl")
        write_dataset(source, workspace / "source.jsonl")
        config = {
            "provider": {
                "kind": "mock",
                "mock": {"default_reply": "Q: What is porosity?\nA: A gas defect.\nQ: Second?\nA: Also."},
            },
            "fixed_clock": True,
        }
        (workspace / "distill.yaml").write_text(yaml.safe_dump(config))
        code = run(
            workspace,
            "distill",
            "--config", workspace / "distill.yaml",
            "--corpus", workspace / "source.jsonl",
            "--topic", "casting-defect",
            "--out", workspace / "distilled.jsonl",
        )
        assert code == 0
        distilled = load_dataset(workspace / "distilled.jsonl")
        assert len(distilled.items) == 2
        assert all(i.doc.text.startswith("Q: ") for i in distilled.items)


class TestConfig:
    def test_unknown_keys_rejected(self, workspace, capsys):
        (workspace / "bad.yaml").write_text("provider:\n  kind: mock\n  typo_key: 1\n")
        code = run(workspace, "stats", "--dataset", workspace / "gold.jsonl")
        assert code == 0  # no config involved
        code = run(
            workspace,
            "extract",
            "--config", workspace / "bad.yaml",
            "--strategy", "icl",
            "--task", "terms",
            "--dataset", workspace / "gold.jsonl",
            "--train", workspace / "train.jsonl",
            "--out", workspace / "x.jsonl",
        )
        assert code == 1
        assert "typo_key" in capsys.readouterr().err

    def test_marker_override(self, tmp_path):
        from ontoforge.config import load_config

        (tmp_path / "m.yaml").write_text(
            yaml.safe_dump({"markers": {"close": {"casting-defect": "!!"}}})
        )
        config = load_config(tmp_path / "m.yaml")
        m = config.marker_map()
        from ontoforge.corpus import TopConcept

        assert m.close_markers[TopConcept.DEFECT] == "!!"
        assert m.close_markers[TopConcept.MATERIALS] == "$$"

    def test_icl_without_train_is_config_error(self, workspace, capsys):
        code = run(
            workspace,
            "extract",
            "--config", workspace / "config.yaml",
            "--strategy", "icl",
            "--task", "terms",
            "--dataset", workspace / "gold.jsonl",
            "--out", workspace / "x.jsonl",
        )
        assert code == 1
        assert "training dataset" in capsys.readouterr().err


class TestReviewServeApp:
    def test_app_serves_ui_and_api(self, tmp_path):
        from fastapi.testclient import TestClient

        from ontoforge.review import ReviewStore, create_app

        ui = tmp_path / "ui"
        ui.mkdir()
        (ui / "index.html").write_text("<!doctype html><title>review</title>")
        store = ReviewStore(tmp_path / "store")
        client = TestClient(create_app(store, ui_dir=ui))
        assert client.get("/runs").json() == {"runs": []}
        page = client.get("/")
        assert page.status_code == 200 and "review" in page.text
