import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qaloop.metrics import (
    HumanJudgment,
    MisalignedSystems,
    ZeroVariance,
    judgment_accuracy,
    merge_rating_to_3way,
    paired_bootstrap,
    precision_at_1,
    spearman_agreement,
)
from qaloop.reranker import RatingLabel


# --- precision@1 ----------------------------------------------------------


def test_p_at_1_all_correct():
    run = precision_at_1({"q1": "p1", "q2": "p2"},
                         {"q1": {"p1"}, "q2": {"p2"}},
                         {"q1": "UK", "q2": "UK"})
    assert run.overall == 100.0


def test_p_at_1_two_of_three():
    run = precision_at_1({"q1": "p1", "q2": "p2", "q3": "px"},
                         {"q1": {"p1"}, "q2": {"p2"}, "q3": {"p3"}},
                         {q: "UK" for q in ("q1", "q2", "q3")})
    assert round(run.overall, 2) == 66.67


def test_p_at_1_recount_oracle():
    rng = np.random.default_rng(0)
    top1, gold, domains = {}, {}, {}
    planted = 0
    for i in range(1000):
        qid = f"q{i}"
        hit = bool(rng.random() < 0.37)
        planted += hit
        top1[qid] = "gold" if hit else "other"
        gold[qid] = {"gold"}
        domains[qid] = rng.choice(["UK", "US", "WHO"])
    run = precision_at_1(top1, gold, domains)
    assert run.overall == pytest.approx(100.0 * planted / 1000)
    # per-domain values recombine to the overall
    counts = {d: sum(1 for q in domains if domains[q] == d) for d in set(domains.values())}
    weighted = sum(run.per_domain[d] * counts[d] for d in counts) / 1000
    assert weighted == pytest.approx(run.overall)


def test_p_at_1_permutation_invariant():
    items = [(f"q{i}", f"p{i % 3}") for i in range(20)]
    gold = {q: {"p0"} for q, _ in items}
    domains = {q: "UK" for q, _ in items}
    a = precision_at_1(dict(items), gold, domains).overall
    b = precision_at_1(dict(reversed(items)), gold, domains).overall
    assert a == b


# --- paired bootstrap -----------------------------------------------------


def test_bootstrap_identical_systems_near_half():
    hits = [True, False] * 50
    p = paired_bootstrap(hits, hits, seed=0)
    assert 0.4 < p < 0.6


def test_bootstrap_maximal_separation():
    a = [False] * 100
    b = [True] * 100
    assert paired_bootstrap(a, b, seed=0) < 0.001


def test_bootstrap_symmetry_under_swap():
    rng = np.random.default_rng(1)
    a = rng.random(80) < 0.5
    b = rng.random(80) < 0.6
    p_ab = paired_bootstrap(a, b, seed=2)
    p_ba = paired_bootstrap(b, a, seed=3)
    assert abs(p_ab + p_ba - 1.0) < 0.02


def test_bootstrap_misaligned():
    with pytest.raises(MisalignedSystems):
        paired_bootstrap([True], [True, False])


def exact_bootstrap_p(hits_a, hits_b):
    """Exact value of the bootstrap estimator's expectation via the
    multinomial distribution of discordant-pair counts in a resample."""
    n = len(hits_a)
    n10 = sum(1 for x, y in zip(hits_a, hits_b) if x and not y)
    n01 = sum(1 for x, y in zip(hits_a, hits_b) if y and not x)
    p10, p01 = n10 / n, n01 / n
    p_rest = 1.0 - p10 - p01
    p_val = 0.0
    for c01 in range(n + 1):
        for c10 in range(n + 1 - c01):
            c_rest = n - c01 - c10
            prob = (math.factorial(n)
                    / (math.factorial(c01) * math.factorial(c10) * math.factorial(c_rest))
                    * p01**c01 * p10**c10 * p_rest**c_rest)
            if c01 < c10:
                p_val += prob
            elif c01 == c10:
                p_val += 0.5 * prob
    return p_val


def test_bootstrap_matches_enumeration_oracle():
    hits_a = [1, 0, 0, 1, 0, 1, 0, 0, 1, 0]
    hits_b = [1, 1, 0, 1, 1, 0, 1, 0, 1, 1]
    expected = exact_bootstrap_p(hits_a, hits_b)
    estimate = paired_bootstrap(hits_a, hits_b, n_resamples=20000, seed=0)
    assert abs(estimate - expected) < 0.02


def test_bootstrap_deterministic_given_seed():
    a = [1, 0, 1, 0, 1, 1, 0, 0]
    b = [1, 1, 1, 0, 0, 1, 0, 1]
    assert paired_bootstrap(a, b, seed=9) == paired_bootstrap(a, b, seed=9)


# --- 3-way merge and judgments ---------------------------------------------


@pytest.mark.parametrize("rating,expected", [
    (RatingLabel.excellent, "correct"),
    (RatingLabel.good, "partially_correct"),
    (RatingLabel.could_be_improved, "partially_correct"),
    (RatingLabel.bad, "incorrect"),
])
def test_merge_rating_to_3way(rating, expected):
    assert merge_rating_to_3way(rating) == expected


def test_merge_is_total_and_surjective():
    images = {merge_rating_to_3way(label) for label in RatingLabel}
    assert images == {"correct", "partially_correct", "incorrect"}


def test_judgment_accuracy_perfect():
    judgments = [HumanJudgment("i1", "r1", "correct"),
                 HumanJudgment("i1", "r2", "correct")]
    assert judgment_accuracy(judgments, {"i1": "correct"}) == 100.0


def test_judgment_accuracy_half():
    judgments = [HumanJudgment("i1", "r1", "correct"),
                 HumanJudgment("i1", "r2", "incorrect"),
                 HumanJudgment("i2", "r1", "correct"),
                 HumanJudgment("i2", "r2", "incorrect")]
    gold = {"i1": "correct", "i2": "correct"}
    assert judgment_accuracy(judgments, gold) == 50.0


def test_judgment_accuracy_enforces_rater_count():
    with pytest.raises(ValueError):
        judgment_accuracy([HumanJudgment("i1", "r1", "correct")], {"i1": "correct"})


# --- spearman ---------------------------------------------------------------


def test_spearman_identical_vectors():
    labels = ["incorrect", "correct", "partially_correct", "correct"]
    assert spearman_agreement(labels, labels) == pytest.approx(1.0)


def test_spearman_reversed_vectors():
    a = ["incorrect", "partially_correct", "correct"]
    b = ["correct", "partially_correct", "incorrect"]
    assert spearman_agreement(a, b) == pytest.approx(-1.0)


def rank_with_ties(values):
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = np.asarray(values)[order]
    i = 0
    while i < len(values):
        j = i
        while j < len(values) and sorted_vals[j] == sorted_vals[i]:
            j += 1
        ranks[order[i:j]] = (i + j - 1) / 2 + 1
        i = j
    return ranks


def test_spearman_matches_rank_then_pearson_oracle():
    code = {0: "incorrect", 1: "partially_correct", 2: "correct"}
    x = [0, 1, 2, 2, 1]
    y = [0, 2, 1, 2, 0]
    rho = spearman_agreement([code[v] for v in x], [code[v] for v in y])
    rx, ry = rank_with_ties(x), rank_with_ties(y)
    expected = np.corrcoef(rx, ry)[0, 1]
    assert rho == pytest.approx(expected, abs=1e-9)


def test_spearman_zero_variance_sentinel():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rho = spearman_agreement(["correct", "correct"], ["correct", "incorrect"])
    assert math.isnan(rho)
    assert any(issubclass(w.category, ZeroVariance) for w in caught)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=2), min_size=2, max_size=30))
def test_spearman_self_agreement_property(values):
    code = {0: "incorrect", 1: "partially_correct", 2: "correct"}
    labels = [code[v] for v in values]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rho = spearman_agreement(labels, labels)
    if len(set(values)) >= 2:
        assert rho == pytest.approx(1.0)
    else:
        assert math.isnan(rho)
