"""Scalar tag statistics: personal bias pb, corpus bias cb, similarity bias sb,
and per-tag list-position mean/variance (mp, vp).

All statistics are computed from training-split sessions only; callers are
responsible for passing the right subset.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import Session, TagVocabulary


@dataclass
class GlobalTagStats:
    """Corpus-level per-tag statistics, indexed by tag id.

    Tags unobserved in the underlying sessions carry cb = mp = vp = 0.
    """

    cb: np.ndarray
    mp: np.ndarray
    vp: np.ndarray


@dataclass
class UserTagStats:
    pb: np.ndarray


@dataclass
class CorpusStats:
    """Everything candidate scoring needs, bundled for one training split."""

    global_stats: GlobalTagStats
    pb: dict[str, np.ndarray]  # user id -> per-tag probability
    tags_by_session: dict[int, list[int]]
    user_sessions: dict[str, list[int]]

    def pb_of(self, user_id: str) -> np.ndarray:
        if user_id not in self.pb:
            raise KeyError(f"unknown user: {user_id!r}")
        return self.pb[user_id]


def compute_pb(sessions_of_user: Sequence[Session], n_tags: int) -> np.ndarray:
    """Fraction of the user's sessions whose tag list contains each tag."""
    if not sessions_of_user:
        raise ValueError("user owns no sessions")
    counts = np.zeros(n_tags, dtype=np.float64)
    for s in sessions_of_user:
        for t in set(s.tags):
            counts[t] += 1.0
    return counts / len(sessions_of_user)


def compute_cb(all_sessions: Sequence[Session], n_tags: int) -> np.ndarray:
    """Fraction of all sessions whose tag list contains each tag."""
    if not all_sessions:
        raise ValueError("no sessions")
    counts = np.zeros(n_tags, dtype=np.float64)
    for s in all_sessions:
        for t in set(s.tags):
            counts[t] += 1.0
    return counts / len(all_sessions)


def compute_sb(
    neighbor_ids: Sequence[int],
    tag_lists: Mapping[int, Sequence[int]],
    m: int,
    n_tags: int,
) -> np.ndarray:
    """Fraction of the m nearest neighbors mentioning each tag.

    The denominator stays m even when fewer neighbors exist.
    """
    if len(neighbor_ids) > m:
        raise ValueError("more neighbors than m")
    counts = np.zeros(n_tags, dtype=np.float64)
    for sid in neighbor_ids:
        if sid not in tag_lists:
            raise KeyError(f"unknown session id: {sid}")
        for t in set(tag_lists[sid]):
            counts[t] += 1.0
    return counts / m


def compute_position_stats(
    all_sessions: Sequence[Session], n_tags: int
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and population variance of each tag's 1-based list position."""
    if not all_sessions:
        raise ValueError("no sessions")
    total = np.zeros(n_tags, dtype=np.float64)
    total_sq = np.zeros(n_tags, dtype=np.float64)
    count = np.zeros(n_tags, dtype=np.float64)
    for s in all_sessions:
        for pos, t in enumerate(s.tags, start=1):
            total[t] += pos
            total_sq[t] += pos * pos
            count[t] += 1.0
    seen = count > 0
    mp = np.zeros(n_tags, dtype=np.float64)
    vp = np.zeros(n_tags, dtype=np.float64)
    mp[seen] = total[seen] / count[seen]
    vp[seen] = total_sq[seen] / count[seen] - mp[seen] ** 2
    np.maximum(vp, 0.0, out=vp)  # guard tiny negative rounding
    return mp, vp


def compute_global_stats(train_sessions: Sequence[Session], n_tags: int) -> GlobalTagStats:
    cb = compute_cb(train_sessions, n_tags)
    mp, vp = compute_position_stats(train_sessions, n_tags)
    return GlobalTagStats(cb=cb, mp=mp, vp=vp)


def compute_corpus_stats(train_sessions: Sequence[Session], n_tags: int) -> CorpusStats:
    """Compute all per-user and global statistics over one training split."""
    by_user: dict[str, list[Session]] = {}
    for s in train_sessions:
        by_user.setdefault(s.user_id, []).append(s)
    pb = {u: compute_pb(ss, n_tags) for u, ss in sorted(by_user.items())}
    return CorpusStats(
        global_stats=compute_global_stats(train_sessions, n_tags),
        pb=pb,
        tags_by_session={s.session_id: list(s.tags) for s in train_sessions},
        user_sessions={u: [s.session_id for s in ss] for u, ss in sorted(by_user.items())},
    )


def write_stats_csv(
    path: str | Path, vocabulary: TagVocabulary, stats: GlobalTagStats
) -> None:
    """Dump tag, cb, mp, vp rows for inspection."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tag", "cb", "mp", "vp"])
        for tid, tag in enumerate(vocabulary.id_to_tag):
            writer.writerow(
                [tag, repr(float(stats.cb[tid])), repr(float(stats.mp[tid])), repr(float(stats.vp[tid]))]
            )
