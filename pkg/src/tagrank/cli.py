"""Command-line front end for the full experimental pipeline.

Subcommands: prepare, train, evaluate, ablate, dump-candidates, dump-stats.
Exit codes: 0 success, 1 usage, 2 data error, 3 internal error. Every
command writes the resolved configuration next to its outputs.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .candidates import build_candidates
from .config import ExperimentConfig, n_tags_label, parse_n_tags
from .corpus import (
    CorpusError,
    load_corpus,
    load_split,
    save_corpus,
    save_split,
    sessions_in,
    split_corpus,
)
from .embeddings import save_embeddings
from .experiment import (
    build_training_state,
    evaluate_methods,
    format_summary,
    significance_pairs,
    train_models,
    write_report_csv,
)
from .ranker import load_models, save_models
from .tagstats import compute_corpus_stats, write_stats_csv

CORPUS_FILE = "corpus.jsonl"
SPLIT_FILE = "split.tsv"
VOCAB_FILE = "vocabulary.csv"
EMBEDDINGS_FILE = "embeddings.txt"
REPORT_FILE = "report.csv"
SUMMARY_FILE = "report.txt"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2; usage errors are 1
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--outdir", required=True, help="artifact directory")
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--m", type=int, help="nearest neighbors per query")
    p.add_argument("--C", type=float, help="hinge-loss trade-off")
    p.add_argument("--k", type=int, help="DCG cutoff")
    p.add_argument("--mode", choices=("supervised_only", "semi_only", "combined"))
    p.add_argument(
        "--n-tags",
        help="comma-separated truncation lengths, each an int or 'inf'",
    )
    p.add_argument("--threshold", type=float)
    p.add_argument("--min-cooccur", type=int)
    p.add_argument("--solver-epochs", type=int)
    p.add_argument("--exclude-same-user", action="store_true", default=None)
    p.add_argument("--dim", type=int, help="embedding dimension")
    p.add_argument("--window", type=int)
    p.add_argument("--negatives", type=int)
    p.add_argument("--epochs", type=int, help="embedding epochs")


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = (
        ExperimentConfig.from_file(args.config)
        if getattr(args, "config", None)
        else ExperimentConfig()
    )
    n_tags = None
    if getattr(args, "n_tags", None):
        n_tags = tuple(parse_n_tags(v) for v in str(args.n_tags).split(","))
    return cfg.with_overrides(
        seed=args.seed,
        min_occurrences=getattr(args, "min_occurrences", None),
        min_user_images=getattr(args, "min_user_images", None),
        m=args.m,
        C=args.C,
        k=args.k,
        mode=args.mode,
        n_tags=n_tags,
        threshold=args.threshold,
        min_cooccur=args.min_cooccur,
        solver_epochs=args.solver_epochs,
        exclude_same_user=args.exclude_same_user,
        dim=args.dim,
        window=args.window,
        negatives=args.negatives,
        epochs=args.epochs,
    )


def _write_resolved(config: ExperimentConfig, outdir: Path, command: str) -> None:
    config.write(outdir / f"config_{command}.json")


def _models_file(outdir: Path, mode: str, n: int | None) -> Path:
    return outdir / f"models_{mode}_n{n_tags_label(n)}.txt"


def _load_artifacts(outdir: Path):
    corpus_path = outdir / CORPUS_FILE
    split_path = outdir / SPLIT_FILE
    for p in (corpus_path, split_path):
        if not p.exists():
            raise FileNotFoundError(f"missing artifact: {p} (run 'prepare' first)")
    # artifacts were already filtered; permissive thresholds keep them intact
    corpus = load_corpus(corpus_path, min_occurrences=1, min_user_images=1)
    split = load_split(split_path)
    return corpus, split


def cmd_prepare(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    corpus = load_corpus(args.data, config.min_occurrences, config.min_user_images)
    split = split_corpus(corpus, config.seed)
    save_corpus(corpus, outdir / CORPUS_FILE)
    save_split(split, outdir / SPLIT_FILE)
    with open(outdir / VOCAB_FILE, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tag", "id", "occurrences"])
        for tid, tag in enumerate(corpus.vocabulary.id_to_tag):
            writer.writerow([tag, tid, corpus.vocabulary.occurrence_count[tid]])
    _write_resolved(config, outdir, "prepare")
    print(
        f"prepared corpus: {len(corpus.sessions)} sessions, "
        f"{len(corpus.users)} users, {len(corpus.vocabulary)} tags "
        f"({len(split.train)} train / {len(split.test)} test)"
    )
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    outdir = Path(args.outdir)
    corpus, split = _load_artifacts(outdir)
    state = build_training_state(corpus, split, config)
    save_embeddings(state.embeddings, corpus.vocabulary, outdir / EMBEDDINGS_FILE)
    all_skipped: set[str] = set()
    for n in config.n_tags:
        n_eff = n if config.mode == "combined" else None
        models, skipped = train_models(state, corpus, config, config.mode, n_eff)
        all_skipped.update(skipped)
        for user in skipped:
            print(f"warning: user {user!r} has no training constraints; skipped", file=sys.stderr)
        save_models(
            [models[u] for u in sorted(models)], _models_file(outdir, config.mode, n_eff)
        )
        print(
            f"trained {len(models)} user models "
            f"(mode={config.mode}, n={n_tags_label(n_eff)})"
        )
        if config.mode != "combined":
            break  # n sweeps only apply to the combined order
    _write_resolved(config, outdir, "train")
    return 0


def _evaluate(args: argparse.Namespace, methods: tuple[str, ...]) -> int:
    config = _resolve_config(args)
    outdir = Path(args.outdir)
    corpus, split = _load_artifacts(outdir)
    state = build_training_state(corpus, split, config)

    models_by_n = {}
    if any(m in ("ranker", "random_user") for m in methods):
        ns = config.n_tags if config.mode == "combined" else (None,)
        for n in ns:
            path = _models_file(outdir, config.mode, n)
            if not path.exists():
                raise FileNotFoundError(f"missing artifact: {path} (run 'train' first)")
            models_by_n[n_tags_label(n)] = load_models(path)

    results = evaluate_methods(state, corpus, split, config, models_by_n, methods)
    ttests = significance_pairs(results)
    report_path = outdir / (args.report_name or REPORT_FILE)
    write_report_csv(report_path, results, config.k)
    summary = format_summary(results, ttests, config.k)
    (outdir / SUMMARY_FILE).write_text(summary, encoding="utf-8")
    _write_resolved(config, outdir, "evaluate")
    print(summary, end="")
    print(f"report written to {report_path}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    methods = tuple(args.methods.split(",")) if args.methods else (
        "ranker",
        "ptrerank",
        "candidates_only",
    )
    return _evaluate(args, methods)


def cmd_ablate(args: argparse.Namespace) -> int:
    args.report_name = args.report_name or "report_ablation.csv"
    return _evaluate(args, ("ranker", "random_user"))


def cmd_dump_candidates(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    outdir = Path(args.outdir)
    corpus, split = _load_artifacts(outdir)
    state = build_training_state(corpus, split, config)
    session = corpus.session_by_id(args.session_id)
    cands = build_candidates(
        session,
        session.user_id,
        state.index,
        state.stats,
        config.m,
        exclude_ground_truth=args.exclude_ground_truth,
        exclude_same_user=config.exclude_same_user,
    )
    writer = csv.writer(sys.stdout)
    writer.writerow(["rank", "tag", "score"])
    for rank, (tid, score) in enumerate(cands.entries, start=1):
        writer.writerow([rank, corpus.vocabulary.id_to_tag[tid], repr(score)])
    return 0


def cmd_dump_stats(args: argparse.Namespace) -> int:
    outdir = Path(args.outdir)
    corpus, split = _load_artifacts(outdir)
    train = sessions_in(corpus, split.train)
    stats = compute_corpus_stats(train, len(corpus.vocabulary))
    out = outdir / "tagstats.csv"
    write_stats_csv(out, corpus.vocabulary, stats.global_stats)
    print(f"statistics written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tagrank", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", parents=[], help="filter a record file and split it")
    p.add_argument("--data", required=True, help="raw JSONL record file")
    p.add_argument("--min-occurrences", type=int)
    p.add_argument("--min-user-images", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train embeddings and per-user models")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="rank test sessions and report DCG")
    p.add_argument(
        "--methods",
        help="comma list from ranker,ptrerank,candidates_only,random_user",
    )
    p.add_argument("--report-name")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="own-model vs random-user comparison")
    p.add_argument("--report-name")
    _add_common(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("dump-candidates", help="print one query's candidate list")
    p.add_argument("--session-id", type=int, required=True)
    p.add_argument("--exclude-ground-truth", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_dump_candidates)

    p = sub.add_parser("dump-stats", help="write the tag statistics CSV")
    _add_common(p)
    p.set_defaults(func=cmd_dump_stats)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (CorpusError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
