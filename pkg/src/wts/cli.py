"""Command-line interface: ingest, ask, run, serve, kg export/stats."""

from __future__ import annotations

import json
from pathlib import Path

import click

from .config import AppConfig, ConfigError, build_embedder, build_llm, load_config, open_store
from .errors import StoreFormatError, WtsError
from .figures import render_report_figures
from .harness import default_depth, emit_report, load_dataset, run_apprenticeship, run_mastership
from .evolution import FeedbackVerdict, Verdict
from .kg_store import Triple
from .pipeline import DatasetKind, Mode, Question, answer_question
from .service import create_app

_OVERRIDE_KEYS = {
    "store_path": "store_path",
    "audit_log_path": "audit_log_path",
    "llm": "llm",
    "mock_script": "mock_script",
    "embedder": "embedder",
    "domain": "domain",
    "hash_seed": "hash_seed",
    "static_dir": "static_dir",
    "max_entities": "pipeline.max_entities",
    "max_depth": "pipeline.max_depth",
    "prune_width": "pipeline.prune_width",
    "max_hop": "pipeline.max_hop",
    "similarity_gap": "pipeline.similarity_gap",
    "redundancy_gap": "pipeline.redundancy_gap",
    "strategy": "pipeline.strategy",
    "temperature": "pipeline.temperature",
    "mode": "pipeline.mode",
}


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="TOML config file.")
@click.option("--store", "store_path", type=click.Path(), help="Knowledge graph JSONL file.")
@click.option("--audit-log", "audit_log_path", type=click.Path(), help="Evolution audit JSONL file.")
@click.option("--llm", type=click.Choice(["mock", "remote"]), help="Model client.")
@click.option("--mock-script", type=click.Path(exists=True, dir_okay=False), help="Scripted replies for the mock client.")
@click.option("--embedder", type=click.Choice(["hash", "remote"]), help="Embedding backend.")
@click.option("--domain", help="Domain word used in prompts.")
@click.option("--seed", "hash_seed", type=int, help="Seed for the hash embedder.")
@click.option("--static-dir", type=click.Path(file_okay=False), help="Console assets served at /.")
@click.option("--max-entities", type=int, help="Entities extracted per question.")
@click.option("--max-depth", type=int, help="Retrieval depth limit.")
@click.option("--prune-width", type=int, help="Triples kept per depth.")
@click.option("--max-hop", type=int, help="Depth below which a confident answer skips evolution.")
@click.option("--similarity-gap", type=float, help="Max embedding distance kept in retrieval.")
@click.option("--redundancy-gap", type=float, help="Max embedding distance treated as duplicate knowledge.")
@click.option("--strategy", type=click.Choice(["em", "em-esr", "em-qsr"]), help="Retrieval refinement.")
@click.option("--temperature", type=float, help="Model sampling temperature.")
@click.option("--mode", type=click.Choice(["apprenticeship", "mastership"]), help="Run mode.")
@click.pass_context
def main(ctx, config_path, **options):
    """Question answering over a self-growing knowledge graph."""
    overrides = {
        _OVERRIDE_KEYS[name]: value for name, value in options.items() if value is not None
    }
    try:
        ctx.obj = load_config(config_path, overrides)
    except (ConfigError, OSError) as exc:
        raise click.ClickException(str(exc))


def _fail_on(ctx_call):
    try:
        return ctx_call()
    except (WtsError, OSError) as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}")


@main.command()
@click.argument("triples_path", type=click.Path(exists=True, dir_okay=False))
@click.pass_obj
def ingest(cfg: AppConfig, triples_path):
    """Add triples from a JSONL file to the store (duplicates are counted)."""

    def work():
        store = open_store(cfg)
        added = 0
        duplicates = 0
        with open(triples_path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                    triple = Triple(record["head"], record["relation"], record["tail"])
                except Exception as exc:
                    raise StoreFormatError(line_no, f"bad triple record: {exc}") from exc
                if store.add_triple(triple).created:
                    added += 1
                else:
                    duplicates += 1
        Path(cfg.store_path).parent.mkdir(parents=True, exist_ok=True)
        store.save(cfg.store_path)
        return store, added, duplicates

    store, added, duplicates = _fail_on(work)
    stats = store.stats()
    click.echo(
        json.dumps(
            {
                "added": added,
                "duplicates": duplicates,
                "triple_count": stats.triple_count,
                "entity_count": stats.entity_count,
                "relation_count": stats.relation_count,
            }
        )
    )


@main.command()
@click.argument("question_text")
@click.option("--option", "-o", "options", multiple=True, help="Answer option (repeatable).")
@click.pass_obj
def ask(cfg: AppConfig, question_text, options):
    """Answer one question against the current store. Does not evolve the graph."""

    def work():
        store = open_store(cfg)
        embedder = build_embedder(cfg)
        llm = build_llm(cfg)
        question = Question(
            id="cli-ask",
            text=question_text,
            options=tuple(options) if options else None,
            kind=DatasetKind.MULTIPLE_CHOICE if options else DatasetKind.GENERATION,
        )
        return answer_question(question, cfg.pipeline, store, embedder, llm)

    result = _fail_on(work)
    click.echo(
        json.dumps(
            {
                "answer": result.answer.answer,
                "confidence": result.answer.confidence.value,
                "support_info": result.answer.support_info,
                "triples": [t.as_dict() for t in result.accumulated],
                "depth_used": result.depth_used,
                "evidence": result.evidence.value,
                "trigger": result.trigger.value if result.trigger else None,
            },
            ensure_ascii=False,
        )
    )


def _verdict_source(path: str | None):
    if path is None:
        return None
    words = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        word = line.strip().lower()
        if word:
            words.append(word)
    cursor = iter(words)

    def supply(record, result):
        word = next(cursor, "none")
        if word == "good":
            return FeedbackVerdict(Verdict.POSITIVE)
        if word == "bad":
            return FeedbackVerdict(Verdict.NEGATIVE)
        return FeedbackVerdict(None)

    return supply


@main.command()
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False), help="Question JSONL file.")
@click.option("--source", default="custom", type=click.Choice(["chatdoctor", "pubmedqa", "medmcqa", "sciq", "scienceqa", "simpleqa", "custom"]))
@click.option("--out", "out_dir", default="out", type=click.Path(file_okay=False), help="Report directory.")
@click.option("--limit", type=int, help="Process only the first N records.")
@click.option("--verdicts", type=click.Path(exists=True, dir_okay=False), help="Scripted good/bad/none verdicts for mastership runs, one per line.")
@click.option("--figures/--no-figures", default=True, help="Also render PNG figures.")
@click.pass_obj
def run(cfg: AppConfig, dataset, source, out_dir, limit, verdicts, figures):
    """Batch-answer a dataset, evolving the store as the run proceeds."""

    def work():
        pipeline_cfg = cfg.pipeline
        if not cfg.depth_was_set():
            pipeline_cfg = cfg.pipeline_for_depth(default_depth(source))
        store = open_store(cfg)
        embedder = build_embedder(cfg)
        llm = build_llm(cfg)
        records = load_dataset(dataset, source)
        if limit is not None:
            records = records[:limit]
        if pipeline_cfg.mode is Mode.MASTERSHIP:
            report = run_mastership(
                records, pipeline_cfg, store, embedder, llm,
                feedback_source=_verdict_source(verdicts),
                audit_path=cfg.audit_log_path,
            )
        else:
            report = run_apprenticeship(
                records, pipeline_cfg, store, embedder, llm, audit_path=cfg.audit_log_path
            )
        Path(cfg.store_path).parent.mkdir(parents=True, exist_ok=True)
        store.save(cfg.store_path)
        paths = emit_report(report, out_dir)
        if figures:
            for fig_path in render_report_figures(report, out_dir):
                paths[fig_path.stem + "_png"] = fig_path
        return report, paths

    report, paths = _fail_on(work)
    click.echo(f"processed {report.totals['questions']} questions "
               f"({report.totals['errored']} errored), "
               f"accuracy {report.totals['accuracy']}, "
               f"triples added {report.totals['triples_added']}")
    for name in sorted(paths):
        click.echo(f"  {name}: {paths[name]}")


@main.command()
@click.pass_obj
def serve(cfg: AppConfig):
    """Run the HTTP service hosting the console and the feedback loop."""
    import uvicorn

    def work():
        store = open_store(cfg)
        return create_app(cfg, store, build_embedder(cfg), build_llm(cfg))

    app = _fail_on(work)
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="info")


@main.group()
def kg():
    """Inspect or export the knowledge graph."""


@kg.command()
@click.pass_obj
def stats(cfg: AppConfig):
    """Print triple/entity/relation counts."""
    store = _fail_on(lambda: open_store(cfg))
    s = store.stats()
    click.echo(json.dumps({
        "triple_count": s.triple_count,
        "entity_count": s.entity_count,
        "relation_count": s.relation_count,
    }))


@kg.command()
@click.option("--out", "out_path", type=click.Path(dir_okay=False), help="Write here instead of stdout.")
@click.pass_obj
def export(cfg: AppConfig, out_path):
    """Dump the store as JSONL."""

    def work():
        store = open_store(cfg)
        if out_path:
            store.save(out_path)
            return store, None
        lines = [
            json.dumps({"id": i, **t.as_dict()}, ensure_ascii=False)
            for i, t in store.items()
        ]
        return store, lines

    _, lines = _fail_on(work)
    if lines is None:
        click.echo(f"exported to {out_path}")
    else:
        for line in lines:
            click.echo(line)


if __name__ == "__main__":
    main()
