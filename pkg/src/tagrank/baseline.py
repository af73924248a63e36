"""Heuristic re-ranking baseline: per-user pairwise order strengths from
training history, a directed constraint graph over strong preferences, and a
priority topological sort that re-orders a default ranking."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .corpus import Session


@dataclass
class PairStrengths:
    """Counts of ordered co-occurrence per tag pair for one user.

    before[(a, b)] is how often a appeared before b; together[(a, b)] (stored
    under the sorted key) how often both appeared in one list.
    """

    before: dict[tuple[int, int], int] = field(default_factory=dict)
    together: dict[tuple[int, int], int] = field(default_factory=dict)

    def strength(self, a: int, b: int) -> float | None:
        """p_ab, or None when the tags never co-occurred."""
        key = (a, b) if a < b else (b, a)
        total = self.together.get(key, 0)
        if total == 0:
            return None
        return self.before.get((a, b), 0) / total

    def cooccurrences(self, a: int, b: int) -> int:
        key = (a, b) if a < b else (b, a)
        return self.together.get(key, 0)


def compute_strengths(train_sessions_of_user: Sequence[Session]) -> PairStrengths:
    """Count ordered tag pairs over the user's training lists."""
    if not train_sessions_of_user:
        raise ValueError("user owns no sessions")
    strengths = PairStrengths()
    for s in train_sessions_of_user:
        tags = s.tags
        for i in range(len(tags)):
            for j in range(i + 1, len(tags)):
                a, b = tags[i], tags[j]
                strengths.before[(a, b)] = strengths.before.get((a, b), 0) + 1
                key = (a, b) if a < b else (b, a)
                strengths.together[key] = strengths.together.get(key, 0) + 1
    return strengths


def _on_cycle(node: int, edges: dict[int, set[int]]) -> bool:
    """Whether the node can reach itself in the remaining graph."""
    stack = list(edges.get(node, ()))
    seen: set[int] = set()
    while stack:
        cur = stack.pop()
        if cur == node:
            return True
        if cur in seen:
            continue
        seen.add(cur)
        stack.extend(edges.get(cur, ()))
    return False


def rerank(
    default_order: Sequence[int],
    strengths: PairStrengths,
    threshold: float = 0.8,
    min_cooccur: int = 2,
) -> list[int]:
    """Reorder ``default_order`` to respect strong pairwise preferences.

    An edge a -> b is added when p_ab strictly exceeds ``threshold`` and the
    pair co-occurred at least ``min_cooccur`` times. The output is a priority
    topological sort: among zero-indegree tags the one earliest in the
    default order is emitted; if none exists (a cycle, only possible with
    degenerate count tables), the cycle member earliest in the default order
    is emitted and its incoming edges discarded.
    """
    if not 0.5 < threshold <= 1.0:
        raise ValueError("threshold must be in (0.5, 1]")
    order = list(default_order)
    if len(set(order)) != len(order):
        raise ValueError("default order contains duplicate tags")
    position = {t: i for i, t in enumerate(order)}

    out_edges: dict[int, set[int]] = {t: set() for t in order}
    indegree: dict[int, int] = {t: 0 for t in order}
    for i, a in enumerate(order):
        for b in order[i + 1 :]:
            for x, y in ((a, b), (b, a)):
                p = strengths.strength(x, y)
                if (
                    p is not None
                    and p > threshold
                    and strengths.cooccurrences(x, y) >= min_cooccur
                ):
                    if y not in out_edges[x]:
                        out_edges[x].add(y)
                        indegree[y] += 1

    result: list[int] = []
    remaining = set(order)
    while remaining:
        ready = [t for t in remaining if indegree[t] == 0]
        if ready:
            pick = min(ready, key=position.__getitem__)
        else:
            cyclic = [t for t in remaining if _on_cycle(t, out_edges)]
            pick = min(cyclic, key=position.__getitem__)
            for t in remaining:
                if pick in out_edges[t]:
                    out_edges[t].discard(pick)
            indegree[pick] = 0
        result.append(pick)
        remaining.discard(pick)
        for succ in out_edges.pop(pick, ()):
            if succ in remaining:
                indegree[succ] -= 1
    return result
