"""Order-aware evaluation: reciprocal-rank relevance, DCG and DCG@k,
per-image and per-user aggregation, paired significance tests, and the
random-user model reassignment used for the personalization ablation."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Mapping, Sequence


def relevance(predicted_tag: int, ground_truth: Sequence[int]) -> float:
    """1 over the tag's 1-based ground-truth position, 0 if absent."""
    for pos, t in enumerate(ground_truth, start=1):
        if t == predicted_tag:
            return 1.0 / pos
    return 0.0


def dcg(predicted: Sequence[int], ground_truth: Sequence[int]) -> float:
    """rel(t_1) + sum_{i>=2} rel(t_i)/log2(i).

    Note the discount divides by log2 of the prediction position itself, so
    positions 1 and 2 are both undiscounted (log2(2) = 1).
    """
    if not predicted:
        return 0.0
    rank_of = {t: pos for pos, t in enumerate(ground_truth, start=1)}
    total = 0.0
    for i, t in enumerate(predicted, start=1):
        rel = 1.0 / rank_of[t] if t in rank_of else 0.0
        total += rel if i == 1 else rel / math.log2(i)
    return total


def dcg_at_k(predicted: Sequence[int], ground_truth: Sequence[int], k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    return dcg(list(predicted)[:k], ground_truth)


def aggregate(per_image_scores: Sequence[tuple[str, float]]) -> tuple[float, float]:
    """(flat per-image mean, equal-weight per-user mean of within-user means)."""
    if not per_image_scores:
        raise ValueError("no scores to aggregate")
    per_user: dict[str, list[float]] = {}
    for user, score in per_image_scores:
        per_user.setdefault(user, []).append(score)
    per_image_mean = sum(s for _, s in per_image_scores) / len(per_image_scores)
    per_user_mean = sum(
        sum(v) / len(v) for v in per_user.values()
    ) / len(per_user)
    return per_image_mean, per_user_mean


@dataclass
class TTestResult:
    t_statistic: float
    p_value: float
    n: int
    kind: str
    degenerate: bool = False


def _betacf(x: float, a: float, b: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return h


def regularized_incomplete_beta(x: float, a: float, b: float) -> float:
    """I_x(a, b) via the standard continued-fraction expansion."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(x, a, b) / a
    return 1.0 - front * _betacf(1.0 - x, b, a) / b


def t_sf_two_sided(t: float, df: float) -> float:
    """Two-sided survival probability of Student's t."""
    if df <= 0:
        raise ValueError("df must be > 0")
    if t == 0.0:
        return 1.0
    x = df / (df + t * t)
    return regularized_incomplete_beta(x, df / 2.0, 0.5)


def paired_ttest(scores_a: Sequence[float], scores_b: Sequence[float]) -> TTestResult:
    """Two-sided paired t-test on the per-item differences a - b."""
    if len(scores_a) != len(scores_b):
        raise ValueError("paired samples must have equal length")
    n = len(scores_a)
    if n < 2:
        raise ValueError("need at least 2 paired samples")
    diffs = [a - b for a, b in zip(scores_a, scores_b)]
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        if mean == 0.0:
            return TTestResult(t_statistic=0.0, p_value=1.0, n=n, kind="paired two-sided")
        return TTestResult(
            t_statistic=math.copysign(math.inf, mean),
            p_value=0.0,
            n=n,
            kind="paired two-sided",
            degenerate=True,
        )
    t = mean / math.sqrt(var / n)
    return TTestResult(
        t_statistic=t, p_value=t_sf_two_sided(t, n - 1), n=n, kind="paired two-sided"
    )


def welch_ttest(scores_a: Sequence[float], scores_b: Sequence[float]) -> TTestResult:
    """Unpaired two-sided Welch t-test (unequal variances)."""
    na, nb = len(scores_a), len(scores_b)
    if na < 2 or nb < 2:
        raise ValueError("need at least 2 samples per group")
    ma = sum(scores_a) / na
    mb = sum(scores_b) / nb
    va = sum((x - ma) ** 2 for x in scores_a) / (na - 1)
    vb = sum((x - mb) ** 2 for x in scores_b) / (nb - 1)
    se2 = va / na + vb / nb
    if se2 == 0.0:
        if ma == mb:
            return TTestResult(0.0, 1.0, na + nb, "welch two-sided")
        return TTestResult(
            math.copysign(math.inf, ma - mb), 0.0, na + nb, "welch two-sided", True
        )
    t = (ma - mb) / math.sqrt(se2)
    df = se2**2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    return TTestResult(t, t_sf_two_sided(t, df), na + nb, "welch two-sided")


def ablate_random_user(
    queries: Sequence[tuple[int, str]], model_users: Sequence[str], seed: int
) -> dict[int, str]:
    """Assign each (session id, owner) query a random OTHER user's model.

    The assignment is seeded and never maps a query to its own user.
    """
    users = sorted(set(model_users))
    if len(users) < 2:
        raise ValueError("random-user ablation needs at least 2 users")
    rng = random.Random(seed)
    assignment: dict[int, str] = {}
    for sid, owner in queries:
        others = [u for u in users if u != owner]
        assignment[sid] = others[rng.randrange(len(others))]
    return assignment


@dataclass
class EvalReport:
    """Aggregated ranking quality for one configuration."""

    label: str
    k: int
    per_image: list[tuple[int, float, float]]  # (session id, dcg, dcg@k)
    dcg_per_image: float
    dcg_at_k_per_image: float
    dcg_per_user: float
    dcg_at_k_per_user: float


def build_report(
    label: str,
    k: int,
    rows: Sequence[tuple[int, str, float, float]],
) -> EvalReport:
    """Assemble an EvalReport from (session id, user id, dcg, dcg@k) rows."""
    dcg_pi, dcg_pu = aggregate([(u, d) for _, u, d, _ in rows])
    dcgk_pi, dcgk_pu = aggregate([(u, dk) for _, u, _, dk in rows])
    return EvalReport(
        label=label,
        k=k,
        per_image=[(sid, d, dk) for sid, _, d, dk in rows],
        dcg_per_image=dcg_pi,
        dcg_at_k_per_image=dcgk_pi,
        dcg_per_user=dcg_pu,
        dcg_at_k_per_user=dcgk_pu,
    )
