"""Operator entry points: ingest, split, train-retriever, train-reranker,
synthesize-vanilla, evaluate, serve, export-feedback.

Every command writes a resolved-config snapshot next to its output so runs
are reproducible from the artifact directory alone.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from . import checkpoint as ckpt
from .data import CorpusSplit, load_corpus, passages_by_domain, split_corpus, write_corpus
from .fusion import rerank
from .metrics import EvalRun, paired_bootstrap, precision_at_1
from .reranker import (
    RerankerConfig,
    RerankerTrainConfig,
    RerankerTrainingSet,
    build_feedback_training_set,
    build_reranker,
    synthesize_vanilla,
    train_reranker,
)
from .retriever import (
    EncoderConfig,
    RetrieverConfig,
    TrainConfig,
    build_retriever,
    retrieve_topk,
    train_retriever,
)
from .store import FeedbackStore
from .vocab import Vocab


class SplitMismatch(click.ClickException):
    exit_code = 4


def _write_snapshot(out_path: Path, command: str, params: dict) -> None:
    snapshot = {"command": command, "params": {k: str(v) if isinstance(v, Path) else v
                                               for k, v in params.items()}}
    target = out_path / "resolved_config.json" if out_path.is_dir() else (
        out_path.parent / (out_path.name + ".config.json"))
    target.write_text(json.dumps(snapshot, indent=1, sort_keys=True))


def _parse_ratios(text: str) -> tuple[float, float, float]:
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 3:
        raise click.BadParameter("expected three comma-separated ratios")
    return tuple(parts)


@click.group()
def main():
    """Retrieval-based QA with a human feedback loop."""


@main.command()
@click.argument("corpus", type=click.Path(exists=True, path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Write a normalized copy of the corpus.")
def ingest(corpus: Path, out: Path | None):
    """Validate a JSONL corpus and print per-domain counts."""
    passages, questions = load_corpus(corpus)
    by_domain = passages_by_domain(passages)
    q_by_domain: dict[str, int] = {}
    for q in questions:
        q_by_domain[q.domain] = q_by_domain.get(q.domain, 0) + 1
    click.echo(f"{'domain':<12} {'passages':>9} {'questions':>10}")
    for domain in sorted(set(by_domain) | set(q_by_domain)):
        click.echo(f"{domain:<12} {len(by_domain.get(domain, [])):>9} "
                   f"{q_by_domain.get(domain, 0):>10}")
    click.echo(f"{'Overall':<12} {len(passages):>9} {len(questions):>10}")
    if out is not None:
        write_corpus(out, passages, questions)
        _write_snapshot(out, "ingest", {"corpus": corpus, "out": out})


@main.command()
@click.argument("corpus", type=click.Path(exists=True, path_type=Path))
@click.option("--ratios", default="0.7,0.1,0.2", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def split(corpus: Path, ratios: str, seed: int, out: Path):
    """Split the corpus questions into train/valid/test per domain."""
    _, questions = load_corpus(corpus)
    result = split_corpus(questions, _parse_ratios(ratios), seed)
    result.save(out)
    _write_snapshot(out, "split", {"corpus": corpus, "ratios": ratios, "seed": seed})
    click.echo(f"train={len(result.train)} valid={len(result.valid)} "
               f"test={len(result.test)} -> {out}")


@main.command("train-retriever")
@click.option("--corpus", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--split", "split_path", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--scorer", type=click.Choice(["bi", "poly"]), default="bi",
              show_default=True)
@click.option("--domain", default=None, help="Restrict training to one domain.")
@click.option("--batch-size", default=16, show_default=True)
@click.option("--epochs", default=40, show_default=True)
@click.option("--lr", default=5e-5, show_default=True)
@click.option("--dropout", default=0.1, show_default=True)
@click.option("--hidden-dim", default=64, show_default=True)
@click.option("--layers", default=1, show_default=True)
@click.option("--poly-m", default=16, show_default=True)
@click.option("--pooling", type=click.Choice(["mean_tokens", "final_state"]),
              default="mean_tokens", show_default=True)
@click.option("--seed", default=0, show_default=True)
def train_retriever_cmd(corpus, split_path, out, scorer, domain, batch_size, epochs,
                        lr, dropout, hidden_dim, layers, poly_m, pooling, seed):
    """Train the dense retriever with in-batch negatives."""
    passages, questions = load_corpus(corpus)
    if domain:
        passages = [p for p in passages if p.domain == domain]
        questions = [q for q in questions if q.domain == domain]
    corpus_split = CorpusSplit.load(split_path)
    vocab = Vocab.build([p.text for p in passages] + [q.text for q in questions])
    model = build_retriever(
        RetrieverConfig(
            encoder=EncoderConfig(vocab_size=len(vocab), hidden_dim=hidden_dim,
                                  n_layers=layers, dropout=dropout, pooling=pooling),
            scorer=scorer,
            poly_m=poly_m,
        ),
        seed=seed,
    )
    result = train_retriever(
        model, vocab, passages, questions, corpus_split,
        TrainConfig(batch_size=batch_size, epochs=epochs, lr=lr, seed=seed),
    )
    train_ids = sorted(q.id for q in questions if q.id in corpus_split.train)
    ckpt.save_retriever(out, model, vocab, extra={
        "train_question_ids": train_ids,
        "loss_curve": result.loss_curve,
        "val_p_at_1": result.val_p_at_1,
        "best_epoch": result.best_epoch,
    })
    _write_snapshot(Path(out), "train-retriever", {
        "corpus": corpus, "split": split_path, "scorer": scorer, "domain": domain,
        "batch_size": batch_size, "epochs": epochs, "lr": lr, "dropout": dropout,
        "hidden_dim": hidden_dim, "layers": layers, "poly_m": poly_m,
        "pooling": pooling, "seed": seed,
    })
    best = max(result.val_p_at_1) if result.val_p_at_1 else float("nan")
    click.echo(f"trained {epochs} epochs; best val P@1 = {best:.4f} -> {out}")


@main.command("train-reranker")
@click.option("--corpus", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--split", "split_path", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--feedback", type=click.Path(path_type=Path), default=None,
              help="Feedback store JSONL (required for feedback/combined).")
@click.option("--provenance", type=click.Choice(["feedback", "vanilla", "combined"]),
              default="feedback", show_default=True)
@click.option("--mode", type=click.Choice(["rating", "explain-rate"]),
              default="rating", show_default=True)
@click.option("--negatives-per-positive", default=1, show_default=True)
@click.option("--holdout-domain", default=None,
              help="Exclude this domain's feedback from training.")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--batch-size", default=16, show_default=True)
@click.option("--epochs", default=40, show_default=True)
@click.option("--lr", default=5e-5, show_default=True)
@click.option("--hidden-dim", default=64, show_default=True)
@click.option("--seed", default=0, show_default=True)
def train_reranker_cmd(corpus, split_path, feedback, provenance, mode,
                       negatives_per_positive, holdout_domain, out, batch_size,
                       epochs, lr, hidden_dim, seed):
    """Train the rating reranker on feedback, vanilla, or combined data."""
    passages, questions = load_corpus(corpus)
    corpus_split = CorpusSplit.load(split_path)
    vocab = Vocab.build([p.text for p in passages] + [q.text for q in questions])

    feedback_set = None
    if provenance in ("feedback", "combined"):
        if feedback is None:
            raise click.UsageError("--feedback is required for this provenance")
        records = FeedbackStore(feedback).records()
        if not records:
            raise click.ClickException("feedback store is empty")
        lookup = {(p.domain, p.id): p for p in passages}
        exclude = {holdout_domain} if holdout_domain else None
        feedback_set = build_feedback_training_set(records, lookup,
                                                   exclude_domains=exclude)
    vanilla_set = None
    if provenance in ("vanilla", "combined"):
        vanilla_set = synthesize_vanilla(
            passages, questions, negatives_per_positive, seed,
            question_ids=corpus_split.train,
        )
    if provenance == "feedback":
        dataset = feedback_set
    elif provenance == "vanilla":
        dataset = vanilla_set
    else:
        dataset = RerankerTrainingSet.combine(feedback_set, vanilla_set)

    model_mode = "rating_only" if mode == "rating" else "explain_then_rate"
    model = build_reranker(
        RerankerConfig(vocab_size=len(vocab), hidden_dim=hidden_dim, mode=model_mode),
        seed=seed,
    )
    result = train_reranker(
        model, dataset, vocab,
        RerankerTrainConfig(batch_size=batch_size, epochs=epochs, lr=lr, seed=seed),
    )
    ckpt.save_reranker(out, model, vocab, extra={
        "provenance": provenance,
        "loss_curve": result.loss_curve,
        "holdout_domain": holdout_domain,
    })
    _write_snapshot(Path(out), "train-reranker", {
        "corpus": corpus, "split": split_path, "feedback": feedback,
        "provenance": provenance, "mode": mode,
        "negatives_per_positive": negatives_per_positive,
        "holdout_domain": holdout_domain, "batch_size": batch_size,
        "epochs": epochs, "lr": lr, "hidden_dim": hidden_dim, "seed": seed,
    })
    final = result.loss_curve[-1] if result.loss_curve else float("nan")
    click.echo(f"trained on {len(dataset.examples)} examples "
               f"({provenance}); final loss {final:.4f} -> {out}")


@main.command("synthesize-vanilla")
@click.option("--corpus", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--split", "split_path", type=click.Path(exists=True, path_type=Path),
              default=None)
@click.option("--negatives-per-positive", "-n", default=1, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def synthesize_vanilla_cmd(corpus, split_path, negatives_per_positive, seed, out):
    """Write vanilla reranker training examples as JSONL."""
    passages, questions = load_corpus(corpus)
    qids = CorpusSplit.load(split_path).train if split_path else None
    dataset = synthesize_vanilla(passages, questions, negatives_per_positive, seed,
                                 question_ids=qids)
    with Path(out).open("w") as fh:
        for ex in dataset.examples:
            fh.write(json.dumps({
                "question_text": ex.question_text,
                "passage_id": ex.passage_id,
                "domain": ex.domain,
                "target": list(ex.target.p),
            }) + "\n")
    _write_snapshot(Path(out), "synthesize-vanilla", {
        "corpus": corpus, "split": split_path,
        "negatives_per_positive": negatives_per_positive, "seed": seed,
    })
    click.echo(f"{len(dataset.examples)} examples -> {out}")


@main.command()
@click.option("--corpus", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--split", "split_path", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--retriever", "retriever_path",
              type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--reranker", "reranker_path", type=click.Path(path_type=Path),
              default=None)
@click.option("--rerank", "do_rerank", is_flag=True, default=False)
@click.option("--k", default=5, show_default=True)
@click.option("--scheme", type=click.Choice(["p-excellent", "expected-rating"]),
              default="p-excellent", show_default=True)
@click.option("--subset", type=click.Choice(["train", "valid", "test"]),
              default="test", show_default=True)
@click.option("--system-name", default=None)
@click.option("--significance", "baseline_report",
              type=click.Path(exists=True, path_type=Path), default=None,
              help="Baseline report JSON for a paired-bootstrap p-value.")
@click.option("--bootstrap-resamples", default=10000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def evaluate(corpus, split_path, retriever_path, reranker_path, do_rerank, k,
             scheme, subset, system_name, baseline_report, bootstrap_resamples,
             seed, out):
    """Report per-domain and overall P@1, optionally with significance."""
    passages, questions = load_corpus(corpus)
    corpus_split = CorpusSplit.load(split_path)
    model, vocab, manifest = ckpt.load_retriever(retriever_path)
    subset_ids = getattr(corpus_split, subset)
    eval_qs = sorted((q for q in questions if q.id in subset_ids), key=lambda q: q.id)
    if not eval_qs:
        raise click.ClickException(f"no questions in subset {subset!r}")

    trained_on = set(manifest.get("train_question_ids", []))
    overlap = trained_on & {q.id for q in eval_qs}
    if subset != "train" and overlap:
        raise SplitMismatch(
            f"checkpoint was trained on {len(overlap)} of the evaluated questions"
        )

    reranker_model = None
    if do_rerank:
        if reranker_path is None:
            raise click.UsageError("--rerank requires --reranker")
        reranker_model, _, _ = ckpt.load_reranker(reranker_path)
    by_domain = passages_by_domain(passages)
    fusion_scheme = scheme.replace("-", "_")

    top1, gold, domain_of = {}, {}, {}
    for q in eval_qs:
        if reranker_model is not None:
            ranked = rerank(q.text, q.domain, by_domain, model, reranker_model,
                            vocab, k=k, scheme=fusion_scheme)
            top1[q.id] = ranked[0].passage_id
        else:
            top1[q.id] = retrieve_topk(model, vocab, q.text,
                                       by_domain[q.domain], k=1)[0][0]
        gold[q.id] = set(q.gold_passage_ids)
        domain_of[q.id] = q.domain

    name = system_name or ("retriever+reranker" if reranker_model else "retriever")
    run = precision_at_1(top1, gold, domain_of, system_name=name)
    report = run.to_record()
    report["per_domain"]["All"] = report.pop("overall")
    report["significance"] = []
    if baseline_report is not None:
        base = json.loads(Path(baseline_report).read_text())
        base_hits = base["hits"]
        if set(base_hits) != set(run.hits):
            raise click.ClickException("baseline report covers different questions")
        qids = sorted(run.hits)
        p = paired_bootstrap([base_hits[q] for q in qids],
                             [run.hits[q] for q in qids],
                             n_resamples=bootstrap_resamples, seed=seed)
        report["significance"].append({"baseline": base["system"], "p_value": p})

    Path(out).write_text(json.dumps(report, indent=1, sort_keys=True))
    _write_snapshot(Path(out), "evaluate", {
        "corpus": corpus, "split": split_path, "retriever": retriever_path,
        "reranker": reranker_path, "rerank": do_rerank, "k": k, "scheme": scheme,
        "subset": subset, "seed": seed,
        "bootstrap_resamples": bootstrap_resamples,
    })
    cols = list(report["per_domain"])
    click.echo("  ".join(f"{c:>10}" for c in ["system"] + cols))
    click.echo("  ".join([f"{name:>10}"] +
                         [f"{report['per_domain'][c]:>10.2f}" for c in cols]))
    for sig in report["significance"]:
        click.echo(f"vs {sig['baseline']}: p = {sig['p_value']:.4f}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path),
              required=True, help="YAML or JSON service configuration.")
def serve(config_path: Path):
    """Run the feedback-collecting HTTP service."""
    import uvicorn
    import yaml

    from .service import Pipeline, ServingConfig, create_app

    raw = yaml.safe_load(config_path.read_text())
    data_dir = Path(os.environ.get("QALOOP_DATA_DIR", raw.get("data_dir", ".")))
    port = int(os.environ.get("QALOOP_PORT", raw.get("port", 8000)))

    passages, questions = load_corpus(raw["corpus"])
    model, vocab, _ = ckpt.load_retriever(raw["retriever_checkpoint"])
    reranker_model = None
    if raw.get("reranker_checkpoint"):
        reranker_model, _, _ = ckpt.load_reranker(raw["reranker_checkpoint"])
    train_ids = set()
    if raw.get("split"):
        train_ids = CorpusSplit.load(raw["split"]).train
    pipeline = Pipeline(
        passages=passages,
        questions=questions,
        vocab=vocab,
        retriever=model,
        reranker=reranker_model,
        train_question_ids=train_ids,
        config=ServingConfig(k=raw.get("k", 5),
                             scheme=raw.get("scheme", "p_excellent")),
    )
    store = FeedbackStore(data_dir / raw.get("feedback_store", "feedback.jsonl"))
    app = create_app(pipeline, store)
    uvicorn.run(app, host=raw.get("host", "127.0.0.1"), port=port)


@main.command("export-feedback")
@click.option("--store", "store_path", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--domain", default=None)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def export_feedback(store_path, domain, out):
    """Copy feedback records (optionally one domain) to a JSONL file."""
    records = FeedbackStore(store_path).records()
    if domain:
        records = [r for r in records if r.domain == domain]
    with Path(out).open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_record()) + "\n")
    click.echo(f"{len(records)} records -> {out}")


if __name__ == "__main__":
    sys.exit(main())
