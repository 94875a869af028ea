from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from commentary_engine.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def write_config(tmp_path) -> str:
    path = tmp_path / "config.json"
    path.write_text(json.dumps({
        "gateway": {"retry_backoff_ms": 0},
        "data_dir": str(tmp_path / "data"),
    }))
    return str(path)


def test_generate_with_keywords(runner, tmp_path):
    config = write_config(tmp_path)
    out = tmp_path / "article.md"
    result = runner.invoke(
        main,
        ["--config", config, "generate", "--keywords", "smoking ban",
         "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    text = out.read_text(encoding="utf-8")
    assert text.startswith("# ")
    assert "MOCK[ending|" in text


def test_generate_reports_missing_inputs(runner, tmp_path):
    result = runner.invoke(main, ["--config", write_config(tmp_path), "generate"])
    assert result.exit_code != 0


def test_ingest_events_and_search(runner, tmp_path):
    config = write_config(tmp_path)
    feed = tmp_path / "titles.txt"
    feed.write_text("City bans smoking in parks\nLibrary funding doubled\n")
    result = runner.invoke(main, ["--config", config, "ingest-events", str(feed)])
    assert result.exit_code == 0, result.output
    assert "added=2" in result.output

    result = runner.invoke(
        main,
        ["--config", config, "search", "--query", "mock", "--threshold", "0.0"],
    )
    assert result.exit_code == 0, result.output
    assert "[1]" in result.output


def test_ingest_events_jsonl_feed(runner, tmp_path):
    config = write_config(tmp_path)
    feed = tmp_path / "feed.jsonl"
    feed.write_text('{"title": "Headline one"}\n{"title": "Headline two"}\n')
    result = runner.invoke(main, ["--config", config, "ingest-events", str(feed)])
    assert result.exit_code == 0, result.output
    assert "added=2" in result.output


def test_ingest_book(runner, tmp_path):
    config = write_config(tmp_path)
    book = tmp_path / "book.txt"
    book.write_text("All about contract law. " * 60)
    result = runner.invoke(
        main,
        ["--config", config, "ingest-book", "--title", "Contracts",
         "--subject", "law", str(book)],
    )
    assert result.exit_code == 0, result.output
    assert "indexed" in result.output


def test_rank_train_score_eval(runner, tmp_path):
    pairs_path = tmp_path / "pairs.jsonl"
    with pairs_path.open("w") as fh:
        for i in range(30):
            fh.write(json.dumps({
                "preferred": f"novel insight {i} marker",
                "other": f"stale take {i}",
            }) + "\n")
    model_path = tmp_path / "model.json"

    result = runner.invoke(main, [
        "rank", "train", "--pairs", str(pairs_path), "--out", str(model_path),
        "--epochs", "20", "--feature-dim", "4096",
    ])
    assert result.exit_code == 0, result.output
    assert model_path.exists()

    result = runner.invoke(main, [
        "rank", "score", "--model", str(model_path), "--text", "novel insight marker",
    ])
    assert result.exit_code == 0, result.output
    float(result.output.strip())  # prints a number

    result = runner.invoke(main, [
        "rank", "eval", "--pairs", str(pairs_path), "--model", str(model_path),
    ])
    assert result.exit_code == 0, result.output
    assert "pair accuracy" in result.output


def test_eval_run_and_pearson(runner, tmp_path):
    config = write_config(tmp_path)
    articles = tmp_path / "articles"
    articles.mkdir()
    (articles / "one.md").write_text("# Article one\n\nBody.")
    (articles / "two.md").write_text("# Article two\n\nBody.")
    reports_dir = tmp_path / "reports"

    result = runner.invoke(main, [
        "--config", config, "eval", "run", "--input", str(articles),
        "--reports", str(reports_dir),
    ])
    assert result.exit_code == 0, result.output
    assert "Overall" in result.output
    assert (reports_dir / "one.json").exists()

    humans = tmp_path / "humans.csv"
    lines = ["item_id,dimension,score"]
    for item in ("one", "two"):
        for d, v in (
            ("structure_soundness", 8 if item == "one" else 6),
            ("logic_consistency", 7 if item == "one" else 5),
            ("argument_quality", 9 if item == "one" else 6),
            ("evidence_support", 8 if item == "one" else 4),
            ("language_finesse", 7 if item == "one" else 5),
        ):
            lines.append(f"{item},{d},{v}")
    humans.write_text("\n".join(lines))

    result = runner.invoke(main, [
        "eval", "pearson", "--reports", str(reports_dir), "--humans", str(humans),
    ])
    # mock judge scores are constant 8, so correlation is undefined
    assert result.exit_code != 0


def test_sft_build(runner, tmp_path):
    corpus = tmp_path / "corpus.jsonl"
    doc = {
        "event_detail": "detail", "peg": "peg", "direction": "finance",
        "main_argument": "main", "structure": "parallel",
        "supporting_arguments": ["s1", "s2"],
        "evidence": [
            {"text": "e1", "references": ["r1"]},
            {"text": "e2", "references": []},
        ],
        "title": "t", "ending": "end",
    }
    corpus.write_text(json.dumps(doc) + "\n")
    out = tmp_path / "sft.jsonl"
    result = runner.invoke(main, ["sft", "build", "--corpus", str(corpus),
                                  "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "wrote 6 records" in result.output
    assert len(out.read_text().splitlines()) == 6


def test_sft_build_with_mix(runner, tmp_path):
    corpus = tmp_path / "corpus.jsonl"
    doc = {
        "event_detail": "detail", "peg": "peg", "direction": "finance",
        "main_argument": "main", "structure": "parallel",
        "supporting_arguments": ["s1", "s2"],
        "evidence": [
            {"text": "e1", "references": []},
            {"text": "e2", "references": []},
        ],
        "title": "t", "ending": "end",
    }
    corpus.write_text(json.dumps(doc) + "\n")
    mix = tmp_path / "general.jsonl"
    mix.write_text(json.dumps({
        "stage": "general", "instruction": "gi", "input": "gin", "output": "go",
    }) + "\n")
    out = tmp_path / "mixed.jsonl"
    result = runner.invoke(main, [
        "sft", "build", "--corpus", str(corpus), "--out", str(out),
        "--mix", str(mix), "--ratio", "0.5",
    ])
    assert result.exit_code == 0, result.output
    assert "wrote 9 records" in result.output
