"""Score fusion: combine the retriever's candidate probability with the
reranker's rating distribution to reorder the top-k candidates.

The fused score is an unweighted sum: retriever probability plus either the
probability of the "excellent" label (default) or the normalized expected
rating score.
"""

from __future__ import annotations

from dataclasses import dataclass

from .data import Passage
from .reranker import RatingDistribution, RerankerModel, rate
from .retriever import RetrieverModel, UnknownDomain, retrieve_topk
from .vocab import Vocab

SCHEMES = ("p_excellent", "expected_rating")


@dataclass(frozen=True)
class RankedCandidate:
    passage_id: str
    retriever_prob: float
    rating_dist: RatingDistribution
    fused_score: float


def fuse(retriever_prob: float, rating_dist: RatingDistribution,
         scheme: str = "p_excellent") -> float:
    """Unweighted sum of retriever probability and reranker term."""
    if scheme == "p_excellent":
        return retriever_prob + rating_dist.p_excellent()
    if scheme == "expected_rating":
        return retriever_prob + rating_dist.expected_score() / 3.0
    raise ValueError(f"unknown fusion scheme {scheme!r}")


def rerank(
    question_text: str,
    domain: str,
    passages_by_domain: dict[str, list[Passage]],
    retriever: RetrieverModel,
    reranker: RerankerModel,
    vocab: Vocab,
    k: int = 5,
    scheme: str = "p_excellent",
) -> list[RankedCandidate]:
    """Select the retriever's top-k, rate each with the reranker, and sort
    by fused score (ties: higher p[excellent], then ascending passage id)."""
    if domain not in passages_by_domain:
        raise UnknownDomain(domain)
    passages = passages_by_domain[domain]
    by_id = {p.id: p for p in passages}
    topk = retrieve_topk(retriever, vocab, question_text, passages, k)
    candidates = []
    for pid, prob in topk:
        dist = rate(reranker, question_text, by_id[pid].text, vocab)
        candidates.append(
            RankedCandidate(
                passage_id=pid,
                retriever_prob=prob,
                rating_dist=dist,
                fused_score=fuse(prob, dist, scheme),
            )
        )
    candidates.sort(
        key=lambda c: (-c.fused_score, -c.rating_dist.p_excellent(), c.passage_id)
    )
    return candidates
