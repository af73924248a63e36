"""Exact nearest-neighbor search over visual feature vectors (Euclidean)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Collection, Iterable, Sequence

import numpy as np

from .corpus import Session


@dataclass
class VisualIndex:
    """Row i of ``vectors`` is the descriptor of session ``ids[i]``."""

    vectors: np.ndarray  # (n, d)
    ids: np.ndarray  # (n,) session ids


def build_index(sessions: Sequence[Session]) -> VisualIndex:
    if not sessions:
        raise ValueError("cannot build an index from zero sessions")
    dim = sessions[0].features.shape[0]
    for s in sessions:
        if s.features.shape[0] != dim:
            raise ValueError(
                f"feature dimension mismatch: {s.features.shape[0]} != {dim}"
            )
    vectors = np.stack([s.features for s in sessions]).astype(np.float64)
    ids = np.asarray([s.session_id for s in sessions], dtype=np.int64)
    return VisualIndex(vectors=vectors, ids=ids)


def nearest(
    index: VisualIndex,
    query: np.ndarray | Sequence[float],
    m: int,
    exclude: Collection[int] = (),
) -> list[int]:
    """The up-to-m session ids closest to ``query`` by Euclidean distance.

    Ties are broken by ascending session id; ids in ``exclude`` are skipped.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    q = np.asarray(query, dtype=np.float64)
    if q.shape != (index.vectors.shape[1],):
        raise ValueError(
            f"query dimension {q.shape} does not match index ({index.vectors.shape[1]},)"
        )
    d2 = np.einsum("ij,ij->i", index.vectors - q, index.vectors - q)
    order = np.lexsort((index.ids, d2))
    out: list[int] = []
    excluded = set(exclude)
    for row in order:
        sid = int(index.ids[row])
        if sid in excluded:
            continue
        out.append(sid)
        if len(out) == m:
            break
    return out
