import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as scipy_stats

from tagrank.evaluation import (
    ablate_random_user,
    aggregate,
    build_report,
    dcg,
    dcg_at_k,
    paired_ttest,
    regularized_incomplete_beta,
    relevance,
    welch_ttest,
)


class TestRelevance:
    def test_first_position(self):
        assert relevance(5, [5, 2, 7]) == 1.0

    def test_third_position(self):
        assert relevance(7, [5, 2, 7]) == pytest.approx(1 / 3)

    def test_absent(self):
        assert relevance(9, [5, 2, 7]) == 0.0

    @settings(max_examples=40, deadline=None)
    @given(st.permutations(list(range(6))), st.integers(min_value=0, max_value=9))
    def test_bounds(self, truth, tag):
        r = relevance(tag, truth)
        assert 0.0 <= r <= 1.0
        assert (r == 1.0) == (truth and truth[0] == tag)


class TestDcg:
    def test_identity_ranking(self):
        assert dcg([0, 1, 2], [0, 1, 2]) == pytest.approx(1.7103099178571526, abs=1e-5)

    def test_reversed_ranking(self):
        assert dcg([2, 1, 0], [0, 1, 2]) == pytest.approx(1.4642630869047908, abs=1e-5)

    def test_all_absent(self):
        assert dcg([7, 8, 9], [0, 1, 2]) == 0.0

    def test_empty_predicted(self):
        assert dcg([], [0, 1]) == 0.0

    def test_positions_one_two_equivalent(self):
        # log2(2) = 1, so swapping the first two predictions changes nothing
        assert dcg([0, 1, 2], [0, 1, 2]) == pytest.approx(dcg([1, 0, 2], [0, 1, 2]))

    def test_at_k_prefix(self):
        predicted, truth = [3, 0, 1, 2], [0, 1, 2, 3]
        assert dcg_at_k(predicted, truth, 10) == pytest.approx(dcg(predicted, truth))
        assert dcg_at_k(predicted, truth, 1) == pytest.approx(1 / 4)

    def test_at_k_head_at_truth_position_2(self):
        assert dcg_at_k([1, 0], [0, 1], 1) == pytest.approx(0.5)

    def test_maximal_for_ground_truth_order(self):
        # exhaustive over permutations of <= 6 predicted tags
        truth = [0, 1, 2, 3, 4, 5]
        for size in (2, 3, 4, 5, 6):
            tags = list(range(size))
            best = dcg(sorted(tags), truth)
            for perm in itertools.permutations(tags):
                assert dcg(list(perm), truth) <= best + 1e-12

    @settings(max_examples=40, deadline=None)
    @given(st.permutations(list(range(6))))
    def test_prefix_monotonicity(self, predicted):
        truth = [2, 4, 0, 5, 1, 3]
        values = [dcg_at_k(predicted, truth, k) for k in range(1, 8)]
        assert all(a <= b + 1e-12 for a, b in zip(values, values[1:]))


class TestAggregate:
    def test_two_users(self):
        per_image, per_user = aggregate([("A", 1.0), ("A", 0.0), ("B", 1.0)])
        assert per_image == pytest.approx(2 / 3)
        assert per_user == pytest.approx(0.75)

    def test_single_user_equal(self):
        per_image, per_user = aggregate([("A", 0.25), ("A", 0.75)])
        assert per_image == per_user == pytest.approx(0.5)

    def test_constant_scores(self):
        per_image, per_user = aggregate([("A", 0.4), ("B", 0.4), ("C", 0.4)])
        assert per_image == pytest.approx(0.4)
        assert per_user == pytest.approx(0.4)

    def test_empty_errors(self):
        with pytest.raises(ValueError):
            aggregate([])


class TestPairedTTest:
    def test_identical_samples(self):
        res = paired_ttest([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert res.t_statistic == 0.0
        assert res.p_value == 1.0

    def test_known_differences(self):
        res = paired_ttest([1.0, 2.0, 3.0, 4.0], [0.0, 0.0, 0.0, 0.0])
        assert res.t_statistic == pytest.approx(3.872983346207417, rel=1e-9)
        assert res.p_value == pytest.approx(0.030466291662170977, abs=1e-9)
        assert res.n == 4

    def test_negation_flips_t_not_p(self):
        a = [1.0, 2.5, 3.0, 0.5]
        b = [0.4, 2.0, 3.5, 0.1]
        res = paired_ttest(a, b)
        neg = paired_ttest(b, a)
        assert neg.t_statistic == pytest.approx(-res.t_statistic)
        assert neg.p_value == pytest.approx(res.p_value)

    def test_zero_variance_nonzero_mean(self):
        res = paired_ttest([1.0, 1.0, 1.0], [0.0, 0.0, 0.0])
        assert res.p_value == 0.0
        assert res.degenerate

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            paired_ttest([1.0], [0.0])

    def test_oracle_equivalence_20_random_samples(self):
        rng = np.random.default_rng(123)
        for _ in range(20):
            n = int(rng.integers(2, 30))
            a = rng.normal(size=n)
            b = a + rng.normal(scale=0.5, size=n)
            mine = paired_ttest(list(a), list(b))
            ref = scipy_stats.ttest_rel(a, b)
            assert mine.t_statistic == pytest.approx(ref.statistic, rel=1e-9)
            assert abs(mine.p_value - ref.pvalue) <= 1e-6


class TestWelch:
    def test_against_scipy(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            a = rng.normal(size=int(rng.integers(3, 20)))
            b = rng.normal(loc=0.3, size=int(rng.integers(3, 20)))
            mine = welch_ttest(list(a), list(b))
            ref = scipy_stats.ttest_ind(a, b, equal_var=False)
            assert mine.t_statistic == pytest.approx(ref.statistic, rel=1e-9)
            assert abs(mine.p_value - ref.pvalue) <= 1e-6


def test_incomplete_beta_against_scipy():
    from scipy.special import betainc

    rng = np.random.default_rng(9)
    for _ in range(50):
        a = float(rng.uniform(0.1, 20))
        b = float(rng.uniform(0.1, 20))
        x = float(rng.uniform(0, 1))
        assert regularized_incomplete_beta(x, a, b) == pytest.approx(
            betainc(a, b, x), abs=1e-10
        )


class TestAblation:
    def test_two_users_forced_swap(self):
        queries = [(0, "a"), (1, "b"), (2, "a")]
        got = ablate_random_user(queries, ["a", "b"], seed=0)
        assert got == {0: "b", 1: "a", 2: "b"}

    def test_deterministic(self):
        queries = [(i, f"u{i % 4}") for i in range(16)]
        users = [f"u{i}" for i in range(4)]
        assert ablate_random_user(queries, users, seed=3) == ablate_random_user(
            queries, users, seed=3
        )

    def test_single_user_errors(self):
        with pytest.raises(ValueError):
            ablate_random_user([(0, "a")], ["a"], seed=0)

    @settings(max_examples=30, deadline=None)
    @given(
        st.integers(min_value=2, max_value=6),
        st.integers(min_value=1, max_value=20),
        st.integers(min_value=0, max_value=100),
    )
    def test_never_own_model(self, n_users, n_queries, seed):
        users = [f"u{i}" for i in range(n_users)]
        queries = [(i, users[i % n_users]) for i in range(n_queries)]
        got = ablate_random_user(queries, users, seed=seed)
        for sid, owner in queries:
            assert got[sid] != owner
            assert got[sid] in users


def test_build_report_invariants():
    rows = [(0, "a", 1.5, 1.0), (1, "a", 0.5, 0.5), (2, "b", 2.0, 1.5)]
    report = build_report("demo", 10, rows)
    assert report.dcg_per_image == pytest.approx((1.5 + 0.5 + 2.0) / 3)
    assert report.dcg_per_user == pytest.approx((1.0 + 2.0) / 2)
    for _, d, dk in report.per_image:
        assert dk <= d + 1e-12
