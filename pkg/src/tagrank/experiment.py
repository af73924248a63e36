"""Pipeline orchestration shared by the CLI, the experiment scripts, and the
acceptance suite: training-state construction, per-user model fitting, and
method evaluation over the test split."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import baseline, evaluation
from .candidates import build_candidates
from .config import ExperimentConfig
from .corpus import Corpus, Session, Split, sessions_in
from .embeddings import TagEmbeddings, train_embeddings
from .knn import VisualIndex, build_index
from .ranker import (
    FeatureMap,
    UserModel,
    build_pairs,
    fit_feature_map,
    rank_tags,
    train_user_model,
)
from .tagstats import CorpusStats, compute_corpus_stats

METHODS = ("ranker", "ptrerank", "candidates_only", "random_user")


def user_seed(seed: int, user_id: str) -> int:
    """Stable per-user sub-seed, independent of user iteration order."""
    digest = hashlib.blake2b(
        f"{seed}:{user_id}".encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "big") % (2**31)


@dataclass
class TrainingState:
    """Everything derived from the training split that evaluation reuses."""

    train_sessions: list[Session]
    index: VisualIndex
    stats: CorpusStats
    embeddings: TagEmbeddings
    feature_map: FeatureMap


def build_training_state(
    corpus: Corpus, split: Split, config: ExperimentConfig
) -> TrainingState:
    train_sessions = sessions_in(corpus, split.train)
    if not train_sessions:
        raise ValueError("training split is empty")
    n_tags = len(corpus.vocabulary)
    stats = compute_corpus_stats(train_sessions, n_tags)
    index = build_index(train_sessions)
    # the master seed drives every stage; the embedding block only carries
    # architecture knobs
    emb_config = replace(config.embedding, seed=config.seed)
    embeddings = train_embeddings(train_sessions, corpus.vocabulary, emb_config)
    feature_map = fit_feature_map(embeddings, stats.global_stats)
    return TrainingState(
        train_sessions=train_sessions,
        index=index,
        stats=stats,
        embeddings=embeddings,
        feature_map=feature_map,
    )


def train_models(
    state: TrainingState,
    corpus: Corpus,
    config: ExperimentConfig,
    mode: str,
    n: int | None,
) -> tuple[dict[str, UserModel], list[str]]:
    """Fit one ranking model per user; returns (models, users skipped for
    having no usable constraints)."""
    by_user: dict[str, list[Session]] = {}
    for s in state.train_sessions:
        by_user.setdefault(s.user_id, []).append(s)

    models: dict[str, UserModel] = {}
    skipped: list[str] = []
    for user_id in sorted(by_user):
        pairs = []
        for session in by_user[user_id]:
            cands = build_candidates(
                session,
                user_id,
                state.index,
                state.stats,
                config.m,
                exclude_ground_truth=True,
                exclude_same_user=config.exclude_same_user,
            )
            pairs.extend(build_pairs(session, cands, mode, n))
        if not pairs:
            skipped.append(user_id)
            continue
        models[user_id] = train_user_model(
            pairs,
            state.feature_map,
            C=config.C,
            epochs=config.solver_epochs,
            seed=user_seed(config.seed, user_id),
            user_id=user_id,
        )
    return models, skipped


@dataclass
class MethodResult:
    label: str
    n_tags: str  # "inf", a number, or "" for methods that ignore n
    report: evaluation.EvalReport


def evaluate_methods(
    state: TrainingState,
    corpus: Corpus,
    split: Split,
    config: ExperimentConfig,
    models_by_n: dict[str, dict[str, UserModel]] | None = None,
    methods: Sequence[str] = ("ranker", "ptrerank", "candidates_only"),
) -> list[MethodResult]:
    """Rank each test session's candidates with every requested method.

    ``models_by_n`` maps an n_tags label to the per-user models trained at
    that truncation; the ranker (and random_user ablation) emit one result
    per entry. Sessions whose user has no model under some entry are dropped
    from every method so that significance tests stay paired.
    """
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method: {m!r}")
    models_by_n = models_by_n or {}
    needs_models = any(m in ("ranker", "random_user") for m in methods)
    if needs_models and not models_by_n:
        raise ValueError("requested a model-based method without models")

    test_sessions = sessions_in(corpus, split.test)
    modeled_users: set[str] | None = None
    for models in models_by_n.values():
        users = set(models)
        modeled_users = users if modeled_users is None else modeled_users & users
    if needs_models:
        test_sessions = [s for s in test_sessions if s.user_id in (modeled_users or set())]
    if not test_sessions:
        raise ValueError("no evaluable test sessions")

    strengths: dict[str, baseline.PairStrengths] = {}
    if "ptrerank" in methods:
        by_user: dict[str, list[Session]] = {}
        for s in state.train_sessions:
            by_user.setdefault(s.user_id, []).append(s)
        strengths = {
            u: baseline.compute_strengths(ss)
            for u, ss in by_user.items()
            if u in {t.user_id for t in test_sessions}
        }

    assignment: dict[int, str] = {}
    if "random_user" in methods:
        first_models = next(iter(models_by_n.values()))
        assignment = evaluation.ablate_random_user(
            [(s.session_id, s.user_id) for s in test_sessions],
            list(first_models),
            config.seed,
        )

    candidate_cache: dict[int, list[int]] = {}
    for s in test_sessions:
        cands = build_candidates(
            s,
            s.user_id,
            state.index,
            state.stats,
            config.m,
            exclude_ground_truth=False,
            exclude_same_user=config.exclude_same_user,
        )
        candidate_cache[s.session_id] = cands.tag_ids()

    results: list[MethodResult] = []

    def scored_rows(rank_fn) -> list[tuple[int, str, float, float]]:
        rows = []
        for s in test_sessions:
            predicted = rank_fn(s)
            d = evaluation.dcg(predicted, s.tags)
            dk = evaluation.dcg_at_k(predicted, s.tags, config.k)
            rows.append((s.session_id, s.user_id, d, dk))
        return rows

    for method in methods:
        if method == "candidates_only":
            rows = scored_rows(lambda s: candidate_cache[s.session_id])
            results.append(
                MethodResult("candidates_only", "", evaluation.build_report("candidates_only", config.k, rows))
            )
        elif method == "ptrerank":
            rows = scored_rows(
                lambda s: baseline.rerank(
                    candidate_cache[s.session_id],
                    strengths[s.user_id],
                    config.threshold,
                    config.min_cooccur,
                )
            )
            results.append(
                MethodResult("ptrerank", "", evaluation.build_report("ptrerank", config.k, rows))
            )
        elif method == "ranker":
            for n_label, models in models_by_n.items():
                rows = scored_rows(
                    lambda s, models=models: rank_tags(
                        models[s.user_id], candidate_cache[s.session_id], state.feature_map
                    )
                )
                label = f"ranker:{config.mode}({n_label})"
                results.append(
                    MethodResult(label, n_label, evaluation.build_report(label, config.k, rows))
                )
        elif method == "random_user":
            for n_label, models in models_by_n.items():
                rows = scored_rows(
                    lambda s, models=models: rank_tags(
                        models[assignment[s.session_id]],
                        candidate_cache[s.session_id],
                        state.feature_map,
                    )
                )
                label = f"random_user:{config.mode}({n_label})"
                results.append(
                    MethodResult(label, n_label, evaluation.build_report(label, config.k, rows))
                )
    return results


def significance_pairs(
    results: Sequence[MethodResult],
) -> list[tuple[str, str, evaluation.TTestResult]]:
    """Paired t-tests on per-image DCG@k between every pair of methods."""
    out = []
    for i in range(len(results)):
        for j in range(i + 1, len(results)):
            a, b = results[i], results[j]
            scores_a = [dk for _, _, dk in a.report.per_image]
            scores_b = [dk for _, _, dk in b.report.per_image]
            out.append((a.label, b.label, evaluation.paired_ttest(scores_a, scores_b)))
    return out


def write_report_csv(
    path: str | Path,
    results: Sequence[MethodResult],
    k: int,
    baseline_label: str | None = None,
) -> None:
    """The six spec columns plus a p-value against the baseline method.

    The p value is a paired two-sided t-test on per-image DCG@k between the
    row's method and ``baseline_label`` (default: the ptrerank row when
    present, else the first row).
    """
    labels = [r.label for r in results]
    if baseline_label is None:
        baseline_label = "ptrerank" if "ptrerank" in labels else labels[0]
    base = next(r for r in results if r.label == baseline_label)
    base_scores = [dk for _, _, dk in base.report.per_image]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "config",
                "n_tags",
                "dcg_per_image",
                f"dcg{k}_per_image",
                "dcg_per_user",
                f"dcg{k}_per_user",
                "p_vs_baseline",
            ]
        )
        for r in results:
            if r.label == baseline_label:
                p = ""
            else:
                scores = [dk for _, _, dk in r.report.per_image]
                p = repr(evaluation.paired_ttest(scores, base_scores).p_value)
            writer.writerow(
                [
                    r.label,
                    r.n_tags,
                    repr(r.report.dcg_per_image),
                    repr(r.report.dcg_at_k_per_image),
                    repr(r.report.dcg_per_user),
                    repr(r.report.dcg_at_k_per_user),
                    p,
                ]
            )


def format_summary(
    results: Sequence[MethodResult],
    ttests: Sequence[tuple[str, str, evaluation.TTestResult]],
    k: int,
    skipped_users: Sequence[str] = (),
) -> str:
    lines = []
    n_images = len(results[0].report.per_image) if results else 0
    lines.append(f"evaluated {n_images} test images, k={k}")
    if skipped_users:
        lines.append(f"skipped users (no training constraints): {', '.join(skipped_users)}")
    lines.append("")
    lines.append(f"{'config':<28} {'dcg/img':>10} {f'dcg@{k}/img':>12} {'dcg/user':>10} {f'dcg@{k}/user':>12}")
    for r in results:
        lines.append(
            f"{r.label:<28} {r.report.dcg_per_image:>10.4f} {r.report.dcg_at_k_per_image:>12.4f} "
            f"{r.report.dcg_per_user:>10.4f} {r.report.dcg_at_k_per_user:>12.4f}"
        )
    if ttests:
        lines.append("")
        lines.append(f"paired two-sided t-tests on per-image dcg@{k}:")
        for a, b, res in ttests:
            lines.append(f"  {a} vs {b}: t={res.t_statistic:.4f} p={res.p_value:.6g}")
    return "\n".join(lines) + "\n"
