"""Command-line interface: full auto generation, service, ingestion, ranking, eval, sft."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import AppConfig, load_config
from .evaluation import (
    EvaluationReport,
    aggregate_table,
    consistency_analysis,
    evaluate,
    format_consistency,
    load_human_scores_csv,
)
from .ranking import (
    ScorerModel,
    TrainConfig,
    load_pairs_jsonl,
    pair_accuracy,
    score,
    train,
)
from .service import build_state, serve
from .sft import build_records, export_jsonl, load_corpus_jsonl, load_records_jsonl, mix_records


def _load_app_config(config_path: str | None) -> AppConfig:
    return load_config(config_path)


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON config file.")
@click.pass_context
def main(ctx, config_path):
    """Staged commentary generation engine."""
    ctx.obj = _load_app_config(config_path)


@main.command()
@click.option("--keywords", default=None, help="Search keywords for event details.")
@click.option("--event-detail", default=None, help="Manual event detail text.")
@click.option("--structure", default="parallel",
              type=click.Choice(["parallel", "progressive", "contrasting"]))
@click.option("--select-rank", default=1, show_default=True,
              help="Candidate rank to select as the main argument.")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Write Markdown here instead of stdout.")
@click.option("--json-out", "json_path", type=click.Path(), default=None,
              help="Also write the structured commentary JSON here.")
@click.pass_obj
def generate(config: AppConfig, keywords, event_detail, structure, select_rank,
             out_path, json_path):
    """Run the whole five-step pipeline automatically."""
    state = build_state(config)
    session, commentary = state.engine.run_auto(
        keywords=keywords,
        event_detail=event_detail,
        structure=structure,
        select_rank=select_rank,
    )
    markdown = commentary.to_markdown()
    if out_path:
        Path(out_path).write_text(markdown, encoding="utf-8")
        click.echo(f"wrote {out_path} (session {session.id})")
    else:
        click.echo(markdown)
    if json_path:
        Path(json_path).write_text(
            json.dumps(commentary.to_json(), ensure_ascii=False, indent=2),
            encoding="utf-8",
        )


@main.command("serve")
@click.pass_obj
def serve_cmd(config: AppConfig):
    """Run the HTTP service."""
    serve(config)


@main.command("ingest-events")
@click.argument("source", type=click.Path(exists=True))
@click.pass_obj
def ingest_events(config: AppConfig, source):
    """Ingest event titles from a .txt (one per line) or .jsonl ({"title": ...}) feed."""
    state = build_state(config)
    titles = []
    for line in Path(source).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("{"):
            titles.append(json.loads(line)["title"])
        else:
            titles.append(line)
    report = state.knowledge.refresh_daily(titles, state.gateway)
    click.echo(f"added={report.added} failed={report.failed} skipped={report.skipped}")
    for title, error in report.failures:
        click.echo(f"  failed: {title}: {error}", err=True)


@main.command("ingest-book")
@click.option("--title", required=True)
@click.option("--subject", required=True)
@click.argument("source", type=click.Path(exists=True))
@click.pass_obj
def ingest_book(config: AppConfig, title, subject, source):
    """Chunk and index a book body from a text file."""
    state = build_state(config)
    body = Path(source).read_text(encoding="utf-8")
    chunks = state.knowledge.ingest_book(title, subject, body)
    click.echo(f"indexed {len(chunks)} chunks of {title!r}")


@main.command()
@click.option("--query", required=True)
@click.option("--threshold", default=None, type=float)
@click.option("--k-max", default=None, type=int)
@click.pass_obj
def search(config: AppConfig, query, threshold, k_max):
    """Query the knowledge index."""
    state = build_state(config)
    results = state.knowledge.search(
        query,
        threshold=config.retrieval.threshold if threshold is None else threshold,
        k_max=config.retrieval.k_max if k_max is None else k_max,
    )
    if not results:
        click.echo("no hits")
        return
    for r in results:
        click.echo(f"[{r.ref_number}] {r.record_id} raw={r.raw_score:.4f} "
                   f"norm={r.norm_score:.3f} {r.snippet[:80]}")


@main.group()
def rank():
    """Argument-ranking model commands."""


@rank.command("train")
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--lr", default=0.5, show_default=True)
@click.option("--epochs", default=20, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--l2", default=0.0, show_default=True)
@click.option("--feature-dim", default=2 ** 18, show_default=True)
def rank_train(pairs_path, out_path, lr, epochs, seed, l2, feature_dim):
    """Train the scorer on a JSONL pair dataset."""
    pairs = load_pairs_jsonl(pairs_path)
    model = train(pairs, TrainConfig(lr=lr, epochs=epochs, seed=seed, l2=l2,
                                     feature_dim=feature_dim))
    model.save(out_path)
    accuracy = pair_accuracy(model, pairs)
    click.echo(f"trained on {len(pairs)} pairs; training accuracy {accuracy:.3f}; "
               f"model -> {out_path}")


@rank.command("score")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--text", required=True)
def rank_score(model_path, text):
    """Score one argument text."""
    model = ScorerModel.load(model_path)
    click.echo(f"{score(model, text):.6f}")


@rank.command("eval")
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
def rank_eval(pairs_path, model_path):
    """Report pair accuracy of a model on a JSONL pair dataset."""
    model = ScorerModel.load(model_path)
    pairs = load_pairs_jsonl(pairs_path)
    click.echo(f"pair accuracy: {pair_accuracy(model, pairs):.3f} on {len(pairs)} pairs")


@main.group("eval")
def eval_group():
    """Commentary evaluation commands."""


@eval_group.command("run")
@click.option("--input", "input_dir", required=True, type=click.Path(exists=True))
@click.option("--reports", "reports_dir", type=click.Path(), default=None,
              help="Directory for per-item report JSON files.")
@click.pass_obj
def eval_run(config: AppConfig, input_dir, reports_dir):
    """Judge every .md/.txt article in a directory; print the aggregate table."""
    state = build_state(config)
    paths = sorted(
        p for p in Path(input_dir).iterdir() if p.suffix in (".md", ".txt")
    )
    if not paths:
        click.echo("no .md or .txt articles found", err=True)
        sys.exit(1)
    reports = []
    for path in paths:
        report = evaluate(path.read_text(encoding="utf-8"), state.gateway,
                          item_id=path.stem)
        reports.append(report)
        click.echo(f"{path.stem}: overall={report.overall:.2f}")
        if reports_dir:
            out = Path(reports_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / f"{path.stem}.json").write_text(
                json.dumps(report.to_json(), ensure_ascii=False, indent=2),
                encoding="utf-8",
            )
    click.echo(aggregate_table(reports))


@eval_group.command("pearson")
@click.option("--reports", "reports_dir", required=True, type=click.Path(exists=True))
@click.option("--humans", "humans_csv", required=True, type=click.Path(exists=True))
def eval_pearson(reports_dir, humans_csv):
    """Per-dimension judge-vs-human consistency over stored reports."""
    reports = []
    for path in sorted(Path(reports_dir).glob("*.json")):
        obj = json.loads(path.read_text(encoding="utf-8"))
        reports.append(
            EvaluationReport(
                scores=obj["scores"],
                overall=obj["overall"],
                judge_transcripts=obj.get("judge_transcripts", {}),
                judged_by=obj.get("judged_by", "unknown"),
                timeliness=obj.get("timeliness"),
                item_id=obj.get("item_id") or path.stem,
            )
        )
    humans = load_human_scores_csv(humans_csv)
    click.echo(format_consistency(consistency_analysis(reports, humans)))


@main.group()
def sft():
    """SFT dataset commands."""


@sft.command("build")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--mix", "mix_path", type=click.Path(exists=True), default=None)
@click.option("--ratio", default=0.0, show_default=True)
@click.option("--split-combination", is_flag=True, default=False)
def sft_build(corpus_path, out_path, mix_path, ratio, split_combination):
    """Emit per-stage SFT records from an annotated commentary corpus."""
    records = []
    for doc in load_corpus_jsonl(corpus_path):
        records.extend(build_records(doc, split_combination=split_combination))
    if mix_path:
        records = mix_records(records, load_records_jsonl(mix_path), ratio)
    count = export_jsonl(records, out_path)
    click.echo(f"wrote {count} records -> {out_path}")


# expose for `python -m commentary_engine.cli`
if __name__ == "__main__":
    main()
