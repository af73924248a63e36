"""Candidate tag mining: the uniqueness score pb + sb - cb, the ordered
candidate list it induces, and the augmented training order built from it."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Session
from .knn import VisualIndex, nearest
from .tagstats import CorpusStats, compute_sb


@dataclass
class CandidateList:
    """Vocabulary tags scored for one (image, user) query, best first.

    Only non-negative scores are kept; ties are broken by ascending tag id.
    """

    entries: list[tuple[int, float]]  # (tag id, score)
    image_id: str
    user_id: str
    m: int

    def tag_ids(self) -> list[int]:
        return [t for t, _ in self.entries]


@dataclass
class AugmentedOrder:
    """Ground-truth order followed by candidate order, with relevance levels."""

    tags: list[int]
    n: int | None  # truncation length, None meaning unbounded
    levels: list[int]


def score_tag(pb: float, sb: float, cb: float) -> float:
    """Uniqueness of a tag for this user and neighborhood: pb + sb - cb."""
    return pb + sb - cb


def build_candidates(
    image: Session,
    user_id: str,
    index: VisualIndex,
    stats: CorpusStats,
    m: int,
    exclude_ground_truth: bool,
    exclude_same_user: bool = False,
) -> CandidateList:
    """Score every vocabulary tag against ``image`` and keep scores >= 0.

    The image itself is excluded from its own neighborhood; setting
    ``exclude_same_user`` also removes the querying user's other images from
    the neighbor pool. At test time ``exclude_ground_truth`` must be False
    (the true tag list is unknown to the system).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    pb = stats.pb_of(user_id)
    exclude = {image.session_id}
    if exclude_same_user:
        exclude.update(stats.user_sessions.get(user_id, ()))
    neighbor_ids = nearest(index, image.features, m, exclude)
    sb = compute_sb(neighbor_ids, stats.tags_by_session, m, pb.shape[0])
    scores = pb + sb - stats.global_stats.cb

    keep = scores >= 0.0
    if exclude_ground_truth:
        keep[list(image.tags)] = False
    tag_ids = np.flatnonzero(keep)
    order = np.lexsort((tag_ids, -scores[tag_ids]))
    entries = [(int(tag_ids[i]), float(scores[tag_ids[i]])) for i in order]
    return CandidateList(entries=entries, image_id=image.image_id, user_id=user_id, m=m)


def assign_levels(ordered_tags: Sequence[int]) -> list[int]:
    """Relevance levels: positions 1-5 get levels 1-5, then blocks of 5 share
    one level (positions 6-10 -> 6, 11-15 -> 7, ...)."""
    levels = []
    for pos in range(1, len(ordered_tags) + 1):
        levels.append(pos if pos <= 5 else 6 + (pos - 6) // 5)
    return levels


def augment_order(
    ground_truth: Sequence[int], candidates: CandidateList, n: int | None = None
) -> AugmentedOrder:
    """Concatenate the user's order with the candidate order and truncate to n.

    Candidate tags already present in the ground truth are dropped so the
    result is duplicate-free; the ground-truth prefix is preserved exactly.
    """
    if n is not None and n < 1:
        raise ValueError("n must be >= 1 or None")
    seen = set(ground_truth)
    tags = list(ground_truth)
    for t, _ in candidates.entries:
        if t not in seen:
            seen.add(t)
            tags.append(t)
    if n is not None:
        tags = tags[:n]
    return AugmentedOrder(tags=tags, n=n, levels=assign_levels(tags))
