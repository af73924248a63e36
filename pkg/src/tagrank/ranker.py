"""Pairwise learning to rank: tag feature mapping, preference-pair generation
from relevance levels, a Pegasos-style hinge-loss solver, and ranking.

The learned function is linear, one weight vector per user, trained to
minimize 0.5*||w||^2 + C * sum_p max(0, 1 - w . (phi(preferred) - phi(dispreferred))).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .candidates import CandidateList, assign_levels, augment_order
from .corpus import Session
from .embeddings import TagEmbeddings
from .tagstats import GlobalTagStats

PAIR_MODES = ("supervised_only", "semi_only", "combined")


@dataclass
class FeatureMap:
    """Maps a tag id to its ranking features: embedding plus standardized
    mean-position, position-variance, and corpus-bias scalars.

    The standardization is fitted on tags observed in the training split
    (cb > 0); constant scalars standardize to 0.
    """

    embeddings: TagEmbeddings
    scalar_mean: np.ndarray  # (3,) for mp, vp, cb
    scalar_std: np.ndarray  # (3,)
    matrix: np.ndarray  # (vocab, dim + 3), precomputed phi rows

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def phi(self, tag_id: int) -> np.ndarray:
        if not 0 <= tag_id < self.matrix.shape[0]:
            raise KeyError(f"unknown tag id: {tag_id}")
        return self.matrix[tag_id]


def fit_feature_map(embeddings: TagEmbeddings, stats: GlobalTagStats) -> FeatureMap:
    scalars = np.stack([stats.mp, stats.vp, stats.cb], axis=1)
    observed = stats.cb > 0.0
    fit_rows = scalars[observed] if observed.any() else scalars
    mean = fit_rows.mean(axis=0)
    std = fit_rows.std(axis=0)  # population std so fitted variance is exactly 1
    safe = np.where(std > 0.0, std, 1.0)
    z = np.where(std > 0.0, (scalars - mean) / safe, 0.0)
    matrix = np.concatenate([embeddings.vectors, z], axis=1)
    return FeatureMap(embeddings=embeddings, scalar_mean=mean, scalar_std=std, matrix=matrix)


def phi(feature_map: FeatureMap, tag_id: int) -> np.ndarray:
    return feature_map.phi(tag_id)


@dataclass
class PreferencePair:
    preferred: int
    dispreferred: int
    session_id: int
    origin: str  # supervised_order | supervised_vs_candidates | semi_supervised

    def __post_init__(self) -> None:
        if self.preferred == self.dispreferred:
            raise ValueError("a pair cannot prefer a tag to itself")


@dataclass
class UserModel:
    user_id: str
    w: np.ndarray
    C: float
    epochs: int
    seed: int
    pair_count: int | None = None


def _cross_level_pairs(tags: Sequence[int], levels: Sequence[int]) -> Iterable[tuple[int, int]]:
    for i in range(len(tags)):
        for j in range(i + 1, len(tags)):
            if levels[i] < levels[j]:
                yield tags[i], tags[j]


def _origin(preferred: int, dispreferred: int, ground_truth: set[int]) -> str:
    if preferred in ground_truth and dispreferred in ground_truth:
        return "supervised_order"
    if preferred in ground_truth:
        return "supervised_vs_candidates"
    return "semi_supervised"


def build_pairs(
    session: Session,
    candidates: CandidateList,
    mode: str,
    n: int | None = None,
    raw: bool = False,
    full_vocab_size: int | None = None,
) -> list[PreferencePair]:
    """Generate preference pairs for one session under the given mode.

    supervised_only uses the user's order alone, semi_only the candidate
    order alone, combined the concatenated order truncated to n. Pairs cross
    relevance levels only; tags sharing a level yield no pair. ``raw``
    switches to ungrouped pairs (all order pairs for the supervised part,
    strict score inequality within candidates). ``full_vocab_size`` is a
    debug lever that additionally prefers every ground-truth tag to every
    other vocabulary tag.
    """
    if mode not in PAIR_MODES:
        raise ValueError(f"unknown mode: {mode!r}")
    gt = list(session.tags)
    gt_set = set(gt)

    pairs: list[PreferencePair] = []

    def emit(pref: int, disp: int) -> None:
        pairs.append(
            PreferencePair(
                preferred=pref,
                dispreferred=disp,
                session_id=session.session_id,
                origin=_origin(pref, disp, gt_set),
            )
        )

    if mode == "supervised_only":
        tags = gt
    elif mode == "semi_only":
        tags = candidates.tag_ids()
    else:
        tags = augment_order(gt, candidates, n).tags

    if raw:
        if mode == "combined":
            scores = dict(candidates.entries)
            for i in range(len(tags)):
                for j in range(i + 1, len(tags)):
                    a, b = tags[i], tags[j]
                    if a in gt_set:
                        emit(a, b)  # order within T, and T over candidates
                    elif scores[a] > scores[b]:
                        emit(a, b)
        elif mode == "supervised_only":
            for i in range(len(tags)):
                for j in range(i + 1, len(tags)):
                    emit(tags[i], tags[j])
        else:
            scores = dict(candidates.entries)
            for i in range(len(tags)):
                for j in range(i + 1, len(tags)):
                    if scores[tags[i]] > scores[tags[j]]:
                        emit(tags[i], tags[j])
    else:
        levels = assign_levels(tags)
        for pref, disp in _cross_level_pairs(tags, levels):
            emit(pref, disp)

    if full_vocab_size is not None:
        emitted = {(p.preferred, p.dispreferred) for p in pairs}
        for t in gt:
            for v in range(full_vocab_size):
                if v not in gt_set and (t, v) not in emitted:
                    emit(t, v)
    return pairs


def pair_difference_matrix(
    pairs: Sequence[PreferencePair], feature_map: FeatureMap
) -> np.ndarray:
    """Rows phi(preferred) - phi(dispreferred), one per pair."""
    if not pairs:
        raise ValueError("no pairs")
    pref = np.asarray([p.preferred for p in pairs])
    disp = np.asarray([p.dispreferred for p in pairs])
    return feature_map.matrix[pref] - feature_map.matrix[disp]


def hinge_objective(w: np.ndarray, diffs: np.ndarray, C: float) -> float:
    """0.5*||w||^2 + C * sum of hinge losses over the difference rows."""
    margins = diffs @ w
    return 0.5 * float(w @ w) + C * float(np.maximum(0.0, 1.0 - margins).sum())


def hinge_subgradient(w: np.ndarray, diffs: np.ndarray, C: float) -> np.ndarray:
    active = (diffs @ w) < 1.0
    return w - C * diffs[active].sum(axis=0)


def train_user_model(
    pairs: Sequence[PreferencePair],
    feature_map: FeatureMap,
    C: float = 0.01,
    epochs: int = 20,
    seed: int = 0,
    user_id: str = "",
) -> UserModel:
    """Pegasos-style stochastic subgradient descent over the pair constraints.

    With lambda = 1/(C*P) the scaled objective matches the hinge objective
    above, so steps eta_t = 1/(lambda*t) apply. Each epoch visits all pairs
    in a fresh seeded shuffle; the averaged iterate is returned.
    """
    if C <= 0.0:
        raise ValueError("C must be > 0")
    if not pairs:
        raise ValueError("no constraints for user")
    diffs = pair_difference_matrix(pairs, feature_map)
    n_pairs, dim = diffs.shape
    lam = 1.0 / (C * n_pairs)
    rng = np.random.default_rng(seed)
    w = np.zeros(dim)
    w_sum = np.zeros(dim)
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n_pairs):
            t += 1
            w *= 1.0 - 1.0 / t  # (1 - eta_t * lambda)
            if diffs[i] @ w < 1.0:
                w += diffs[i] / (lam * t)
            w_sum += w
    w_avg = w_sum / t
    if not np.isfinite(w_avg).all():
        raise FloatingPointError("non-finite weights after training")
    return UserModel(
        user_id=user_id, w=w_avg, C=C, epochs=epochs, seed=seed, pair_count=n_pairs
    )


def rank_tags(
    model: UserModel, candidate_tags: Sequence[int], feature_map: FeatureMap
) -> list[int]:
    """Sort tags by descending w . phi(tag); ties by ascending tag id."""
    ids = np.asarray(candidate_tags, dtype=np.int64)
    if ids.size == 0:
        return []
    if ids.min() < 0 or ids.max() >= feature_map.matrix.shape[0]:
        raise KeyError("unknown tag id in candidates")
    scores = feature_map.matrix[ids] @ model.w
    order = np.lexsort((ids, -scores))
    return [int(ids[i]) for i in order]


def save_models(models: Sequence[UserModel], path: str | Path) -> None:
    """Concatenated archive: per model a header line "user_id dim C epochs seed"
    followed by one line of dim weight values."""
    with open(path, "w", encoding="utf-8") as fh:
        for m in models:
            fh.write(f"{m.user_id} {m.w.shape[0]} {m.C!r} {m.epochs} {m.seed}\n")
            fh.write(" ".join(repr(float(x)) for x in m.w) + "\n")


def load_models(path: str | Path) -> dict[str, UserModel]:
    models: dict[str, UserModel] = {}
    with open(path, encoding="utf-8") as fh:
        while True:
            header = fh.readline()
            if not header:
                break
            if not header.strip():
                continue
            tokens = header.rstrip("\n").split(" ")
            if len(tokens) < 5:
                raise ValueError("bad model header")
            user_id = " ".join(tokens[:-4])
            dim = int(tokens[-4])
            C = float(tokens[-3])
            epochs = int(tokens[-2])
            seed = int(tokens[-1])
            values = fh.readline().split()
            if len(values) != dim:
                raise ValueError(f"model for {user_id!r} has {len(values)} != {dim} weights")
            w = np.asarray([float(x) for x in values])
            models[user_id] = UserModel(user_id=user_id, w=w, C=C, epochs=epochs, seed=seed)
    return models
