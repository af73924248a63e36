"""Corpus ingestion: record parsing, tag/user filtering, and per-user train/test splits.

Records arrive as JSON lines with fields image_id, user_id, tags (ordered)
and features (fixed-length visual descriptor). Filtering drops rare tags and
under-quota users, iterating to a fixed point so that every retained tag meets
the occurrence threshold when counted over retained sessions only.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_WS = re.compile(r"\s+")


class CorpusError(ValueError):
    """Malformed input records or filtering that leaves no usable data."""


def normalize_tag(raw: str) -> str:
    """Lowercase, trim, and collapse internal whitespace to single spaces."""
    return _WS.sub(" ", raw.strip().lower())


@dataclass
class RawRecord:
    """One parsed input line, tags normalized and de-duplicated (first kept)."""

    image_id: str
    user_id: str
    tags: list[str]
    features: list[float]


@dataclass
class Session:
    """One tagging event: a user applied an ordered tag list to one image."""

    session_id: int
    image_id: str
    user_id: str
    tags: list[int]  # vocabulary ids, user order preserved
    features: np.ndarray


@dataclass
class TagVocabulary:
    """Retained tags with dense ids and occurrence counts over retained sessions."""

    tag_to_id: dict[str, int]
    id_to_tag: list[str]
    occurrence_count: list[int]

    def __len__(self) -> int:
        return len(self.id_to_tag)

    def id_of(self, tag: str) -> int:
        if tag not in self.tag_to_id:
            raise KeyError(f"unknown tag: {tag!r}")
        return self.tag_to_id[tag]


@dataclass
class Corpus:
    sessions: list[Session]
    vocabulary: TagVocabulary
    users: dict[str, list[int]]  # user id -> owned session ids
    feature_dim: int

    def session_by_id(self, session_id: int) -> Session:
        return self.sessions[session_id]


@dataclass
class Split:
    train: set[int]
    test: set[int]
    seed: int


def _parse_line(line: str, lineno: int, expect_dim: int | None) -> RawRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"line {lineno}: not valid JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise CorpusError(f"line {lineno}: record must be a JSON object")
    for key in ("image_id", "user_id", "tags", "features"):
        if key not in obj:
            raise CorpusError(f"line {lineno}: missing field {key!r}")
    image_id = str(obj["image_id"])
    user_id = str(obj["user_id"])
    if not isinstance(obj["tags"], list):
        raise CorpusError(f"line {lineno}: 'tags' must be an array")
    tags: list[str] = []
    seen: set[str] = set()
    for raw in obj["tags"]:
        tag = normalize_tag(str(raw))
        if tag and tag not in seen:
            seen.add(tag)
            tags.append(tag)
    if not tags:
        raise CorpusError(f"line {lineno}: no tags left after normalization")
    if not isinstance(obj["features"], list) or not obj["features"]:
        raise CorpusError(f"line {lineno}: 'features' must be a non-empty array")
    try:
        features = [float(x) for x in obj["features"]]
    except (TypeError, ValueError) as exc:
        raise CorpusError(f"line {lineno}: non-numeric feature value") from exc
    if expect_dim is not None and len(features) != expect_dim:
        raise CorpusError(
            f"line {lineno}: feature dimensionality {len(features)} != {expect_dim}"
        )
    return RawRecord(image_id, user_id, tags, features)


def parse_records(path: str | Path) -> list[RawRecord]:
    """Parse a JSONL record file; errors name the offending 1-based line."""
    records: list[RawRecord] = []
    dim: int | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            rec = _parse_line(line, lineno, dim)
            if dim is None:
                dim = len(rec.features)
            records.append(rec)
    return records


def _filter_records(
    records: list[RawRecord], min_occurrences: int, min_user_images: int
) -> tuple[list[tuple[RawRecord, list[str]]], dict[str, int]]:
    """Iterate (count tags -> drop rare -> drop empty sessions -> drop small users)
    until nothing changes. Counts are always over currently retained sessions."""
    retained: list[tuple[RawRecord, list[str]]] = [(r, list(r.tags)) for r in records]
    while True:
        counts: dict[str, int] = {}
        for _, tags in retained:
            for t in tags:
                counts[t] = counts.get(t, 0) + 1
        kept_tags = {t for t, c in counts.items() if c >= min_occurrences}

        survivors: list[tuple[RawRecord, list[str]]] = []
        changed = False
        for rec, tags in retained:
            new_tags = [t for t in tags if t in kept_tags]
            if not new_tags:
                changed = True
                continue
            if len(new_tags) != len(tags):
                changed = True
            survivors.append((rec, new_tags))

        per_user: dict[str, int] = {}
        for rec, _ in survivors:
            per_user[rec.user_id] = per_user.get(rec.user_id, 0) + 1
        quota = [
            (rec, tags)
            for rec, tags in survivors
            if per_user[rec.user_id] >= min_user_images
        ]
        if len(quota) != len(survivors):
            changed = True

        retained = quota
        if not changed:
            final_counts = {t: c for t, c in counts.items() if t in kept_tags}
            return retained, final_counts


def load_corpus(
    path: str | Path, min_occurrences: int = 50, min_user_images: int = 6
) -> Corpus:
    """Load, filter, and id-assign a record file.

    Tags occurring on fewer than ``min_occurrences`` retained sessions are
    dropped from every list (survivor order preserved); sessions whose list
    empties are dropped; users left with fewer than ``min_user_images``
    sessions are dropped. The three stages iterate to a fixed point.
    """
    if min_occurrences < 1 or min_user_images < 1:
        raise ValueError("min_occurrences and min_user_images must be >= 1")
    records = parse_records(path)
    if not records:
        raise CorpusError("empty corpus: no records in input")
    retained, counts = _filter_records(records, min_occurrences, min_user_images)
    if not retained:
        raise CorpusError("empty corpus: no sessions survive filtering")

    id_to_tag = sorted(counts)
    tag_to_id = {t: i for i, t in enumerate(id_to_tag)}
    vocabulary = TagVocabulary(
        tag_to_id=tag_to_id,
        id_to_tag=id_to_tag,
        occurrence_count=[counts[t] for t in id_to_tag],
    )

    feature_dim = len(retained[0][0].features)
    sessions: list[Session] = []
    users: dict[str, list[int]] = {}
    for sid, (rec, tags) in enumerate(retained):
        sessions.append(
            Session(
                session_id=sid,
                image_id=rec.image_id,
                user_id=rec.user_id,
                tags=[tag_to_id[t] for t in tags],
                features=np.asarray(rec.features, dtype=np.float64),
            )
        )
        users.setdefault(rec.user_id, []).append(sid)
    return Corpus(sessions=sessions, vocabulary=vocabulary, users=users, feature_dim=feature_dim)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Serialize back to the input JSONL format (tag ids mapped to strings)."""
    with open(path, "w", encoding="utf-8") as fh:
        for s in corpus.sessions:
            fh.write(
                json.dumps(
                    {
                        "image_id": s.image_id,
                        "user_id": s.user_id,
                        "tags": [corpus.vocabulary.id_to_tag[t] for t in s.tags],
                        "features": [float(x) for x in s.features],
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def split_corpus(corpus: Corpus, seed: int) -> Split:
    """Halve each user's sessions into train/test with a seeded shuffle.

    Odd counts put the extra session in train. Identical (corpus, seed)
    always produce the identical split.
    """
    rng = random.Random(seed)
    train: set[int] = set()
    test: set[int] = set()
    for user in sorted(corpus.users):
        ids = sorted(corpus.users[user])
        if len(ids) < 2:
            raise CorpusError(f"user {user!r} has a single session; cannot split")
        rng.shuffle(ids)
        n_train = (len(ids) + 1) // 2
        train.update(ids[:n_train])
        test.update(ids[n_train:])
    return Split(train=train, test=test, seed=seed)


def save_split(split: Split, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sid in sorted(split.train | split.test):
            label = "train" if sid in split.train else "test"
            fh.write(f"{sid}\t{label}\n")


def load_split(path: str | Path, seed: int = -1) -> Split:
    train: set[int] = set()
    test: set[int] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2 or parts[1] not in ("train", "test"):
                raise CorpusError(f"line {lineno}: bad split row")
            (train if parts[1] == "train" else test).add(int(parts[0]))
    return Split(train=train, test=test, seed=seed)


def sessions_in(corpus: Corpus, ids: set[int]) -> list[Session]:
    """Sessions with the given ids, in ascending session-id order."""
    return [s for s in corpus.sessions if s.session_id in ids]
