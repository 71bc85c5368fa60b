from itertools import combinations

import numpy as np
import pytest

from lgmdopt.stats import mann_whitney_u, rank_midrank


def brute_force_u(a, b):
    """Pairwise-count definition: wins plus half-ties for sample a."""
    u = 0.0
    for x in a:
        for y in b:
            if x > y:
                u += 1.0
            elif x == y:
                u += 0.5
    return u


def brute_force_exact_p(a, b):
    """Permutation oracle built on the pairwise-count route."""
    pooled = list(a) + list(b)
    n1 = len(a)
    mean_u = n1 * len(b) / 2.0
    u_obs = brute_force_u(a, b)
    target = abs(u_obs - mean_u) - 1e-9
    hits = total = 0
    idx = range(len(pooled))
    for combo in combinations(idx, n1):
        chosen = set(combo)
        aa = [pooled[i] for i in combo]
        bb = [pooled[i] for i in idx if i not in chosen]
        if abs(brute_force_u(aa, bb) - mean_u) >= target:
            hits += 1
        total += 1
    return u_obs, hits / total


def test_rank_midrank_handles_ties():
    ranks = rank_midrank(np.array([3.0, 1.0, 3.0, 2.0]))
    assert list(ranks) == [3.5, 1.0, 3.5, 2.0]


def test_extreme_separation_u_zero():
    u, p = mann_whitney_u([1, 2, 3], [4, 5, 6])
    assert u == 0.0
    assert p < 0.2


def test_identical_samples_no_separation():
    a = [1.0, 2.0, 3.0, 4.0, 5.0]
    u, p = mann_whitney_u(a, list(a))
    assert u == pytest.approx(len(a) ** 2 / 2.0)
    assert p > 0.9


def test_all_values_identical_degenerate():
    u, p = mann_whitney_u([2.0] * 30, [2.0] * 30, method="normal")
    assert p == 1.0


def test_swapped_arguments_flip_u_keep_p():
    rng = np.random.default_rng(0)
    a = list(rng.normal(0, 1, 12))
    b = list(rng.normal(0.8, 1, 15))
    u_ab, p_ab = mann_whitney_u(a, b)
    u_ba, p_ba = mann_whitney_u(b, a)
    assert u_ab + u_ba == pytest.approx(len(a) * len(b))
    assert p_ab == pytest.approx(p_ba)


def test_worked_example_against_enumeration():
    a = [1.0, 2.0, 3.0, 4.0]
    b = [2.0, 3.0, 4.0, 5.0]
    u_impl, p_impl = mann_whitney_u(a, b)  # auto -> exact at these sizes
    u_oracle, p_oracle = brute_force_exact_p(a, b)
    assert u_impl == pytest.approx(u_oracle)
    assert p_impl == pytest.approx(p_oracle)


def test_exact_agreement_all_small_sizes():
    rng = np.random.default_rng(1)
    for n1 in range(1, 9):
        for n2 in range(1, 9):
            # mix continuous values and ties
            a = list(np.round(rng.normal(0, 1, n1), 1))
            b = list(np.round(rng.normal(0.5, 1, n2), 1))
            u_impl, p_impl = mann_whitney_u(a, b, method="auto")
            u_oracle, p_oracle = brute_force_exact_p(a, b)
            assert u_impl == pytest.approx(u_oracle), (n1, n2)
            assert p_impl == pytest.approx(p_oracle, abs=1e-12), (n1, n2)
            assert 0.0 <= p_impl <= 1.0


def test_normal_approximation_near_exact_at_boundary_size():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(20):
        a = list(rng.normal(0, 1, 8))
        b = list(rng.normal(0.7, 1, 8))
        _, p_norm = mann_whitney_u(a, b, method="normal")
        _, p_exact = mann_whitney_u(a, b, method="exact")
        worst = max(worst, abs(p_norm - p_exact))
    assert worst <= 0.02


def test_large_sample_sanity_against_scipy():
    from scipy.stats import mannwhitneyu

    rng = np.random.default_rng(3)
    a = rng.normal(0, 1, 30)
    b = rng.normal(0.6, 1, 30)
    u_impl, p_impl = mann_whitney_u(list(a), list(b))
    ref = mannwhitneyu(a, b, alternative="two-sided", method="asymptotic")
    assert u_impl == pytest.approx(float(ref.statistic))
    assert p_impl == pytest.approx(float(ref.pvalue), abs=1e-9)


def test_empty_sample_rejected():
    with pytest.raises(ValueError):
        mann_whitney_u([], [1.0])
