"""Evaluation: Precision@1, paired-bootstrap significance between systems,
and the human-judgment utility harness (accuracy and Spearman agreement).
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .reranker import RatingLabel

logger = logging.getLogger(__name__)

THREE_WAY = ("incorrect", "partially_correct", "correct")
THREE_WAY_ORDINAL = {"incorrect": 0, "partially_correct": 1, "correct": 2}


class MisalignedSystems(ValueError):
    pass


class ZeroVariance(Warning):
    pass


@dataclass
class EvalRun:
    system_name: str
    hits: dict[str, bool]  # question id -> top-1 is gold
    domains: dict[str, str]  # question id -> domain

    @property
    def overall(self) -> float:
        return precision_percent(list(self.hits.values()))

    @property
    def per_domain(self) -> dict[str, float]:
        grouped: dict[str, list[bool]] = {}
        for qid, hit in self.hits.items():
            grouped.setdefault(self.domains[qid], []).append(hit)
        return {d: precision_percent(h) for d, h in sorted(grouped.items())}

    def to_record(self) -> dict:
        return {
            "system": self.system_name,
            "per_domain": {d: round(v, 2) for d, v in self.per_domain.items()},
            "overall": round(self.overall, 2),
            "hits": {qid: bool(h) for qid, h in sorted(self.hits.items())},
            "domains": dict(sorted(self.domains.items())),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "EvalRun":
        return cls(system_name=rec["system"], hits=rec["hits"], domains=rec["domains"])


def precision_percent(hits: list[bool]) -> float:
    if not hits:
        return 0.0
    return 100.0 * sum(hits) / len(hits)


def precision_at_1(
    top1_by_question: dict[str, str],
    gold_by_question: dict[str, set[str]],
    domain_by_question: dict[str, str],
    system_name: str = "system",
) -> EvalRun:
    """Top-1 accuracy per domain and overall; a hit is membership of the
    top-1 passage id in the question's gold set."""
    hits = {}
    for qid, top1 in top1_by_question.items():
        if qid not in gold_by_question:
            raise KeyError(f"no gold set for question {qid!r}")
        hits[qid] = top1 in gold_by_question[qid]
    return EvalRun(system_name=system_name, hits=hits,
                   domains={qid: domain_by_question[qid] for qid in hits})


def paired_bootstrap(
    hits_a,
    hits_b,
    n_resamples: int = 10000,
    seed: int = 0,
) -> float:
    """p-value for "system b beats system a" by paired bootstrap over
    questions.

    Resamples question indices with replacement and measures how often b's
    advantage disappears: p = P(delta < 0) + 0.5 * P(delta == 0) where
    delta = mean(b) - mean(a) on the resample. Identical systems give
    p = 0.5 exactly; p(a, b) + p(b, a) = 1.
    """
    a = np.asarray(hits_a, dtype=np.float64)
    b = np.asarray(hits_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise MisalignedSystems(f"shapes {a.shape} vs {b.shape}")
    if a.size == 0:
        raise MisalignedSystems("empty hit lists")
    rng = np.random.default_rng(seed)
    n = a.size
    diff = b - a
    idx = rng.integers(0, n, size=(n_resamples, n))
    deltas = diff[idx].mean(axis=1)
    return float((np.sum(deltas < 0) + 0.5 * np.sum(deltas == 0)) / n_resamples)


def merge_rating_to_3way(rating: RatingLabel) -> str:
    """Collapse the 4-way rating taxonomy to the 3-way judgment scheme."""
    if rating == RatingLabel.excellent:
        return "correct"
    if rating == RatingLabel.bad:
        return "incorrect"
    return "partially_correct"


@dataclass(frozen=True)
class HumanJudgment:
    item_id: str
    rater_id: str
    label: str

    def __post_init__(self):
        if self.label not in THREE_WAY:
            raise ValueError(f"unknown 3-way label {self.label!r}")


def judgment_accuracy(
    judgments: list[HumanJudgment],
    gold_labels: dict[str, str],
    raters_per_item: int = 2,
) -> float:
    """Mean per-rater accuracy against the gold 3-way labels, x100."""
    by_item: dict[str, list[HumanJudgment]] = {}
    for j in judgments:
        by_item.setdefault(j.item_id, []).append(j)
    accs = []
    for item_id, item_judgments in sorted(by_item.items()):
        if len(item_judgments) != raters_per_item:
            raise ValueError(
                f"item {item_id!r} has {len(item_judgments)} raters, "
                f"expected {raters_per_item}"
            )
        gold = gold_labels[item_id]
        accs.append(np.mean([j.label == gold for j in item_judgments]))
    if not accs:
        raise ValueError("no judgments")
    return 100.0 * float(np.mean(accs))


def spearman_agreement(labels_1: list[str], labels_2: list[str]) -> float:
    """Spearman rank correlation between two raters' ordinal 3-way labels.

    Returns NaN (with a warning) when either rater has zero variance.
    """
    if len(labels_1) != len(labels_2):
        raise MisalignedSystems("rater label lists must align")
    if len(labels_1) < 2:
        raise ValueError("need at least 2 items")
    x = np.array([THREE_WAY_ORDINAL[l] for l in labels_1], dtype=np.float64)
    y = np.array([THREE_WAY_ORDINAL[l] for l in labels_2], dtype=np.float64)
    if np.all(x == x[0]) or np.all(y == y[0]):
        warnings.warn("zero-variance rater labels: agreement undefined", ZeroVariance)
        return float("nan")
    rho, _ = stats.spearmanr(x, y)
    return float(rho)
