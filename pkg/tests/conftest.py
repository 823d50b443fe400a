"""Shared synthetic-corpus helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from qaloop.data import Passage, Question, split_corpus
from qaloop.vocab import Vocab

FILLER = ["covid", "info", "health", "guidance"]
QUESTION_WORDS = ["what", "about", "tell", "me"]


def make_synthetic_corpus(
    domains=("alpha", "beta"),
    passages_per_domain: int = 10,
    questions_per_passage: int = 5,
    topic_words: int = 3,
    seed: int = 0,
):
    """Lexically separable corpus: each passage owns distinctive topic words
    and its questions reuse them, so perfect retrieval is achievable."""
    rng = np.random.default_rng(seed)
    passages, questions = [], []
    for domain in domains:
        for i in range(passages_per_domain):
            words = [f"{domain}{i}{chr(ord('a') + w)}" for w in range(topic_words)]
            pid = f"{domain}-p{i:02d}"
            text = " ".join(words + [FILLER[i % len(FILLER)]])
            passages.append(Passage(id=pid, domain=domain, text=text))
            for j in range(questions_per_passage):
                picked = rng.choice(topic_words, size=2, replace=False)
                qwords = [QUESTION_WORDS[j % len(QUESTION_WORDS)]] + [
                    words[int(k)] for k in sorted(picked)
                ]
                questions.append(
                    Question(
                        id=f"{domain}-q{i:02d}-{j}",
                        domain=domain,
                        text=" ".join(qwords),
                        gold_passage_ids=(pid,),
                    )
                )
    return passages, questions


def make_transfer_corpus(
    domains=("alpha", "beta"),
    n_topics: int = 24,
    questions_per_topic: int = 5,
    seed: int = 0,
):
    """Harder corpus: topics recur in every domain, question and passage
    lexicons for a topic are disjoint, and each passage carries its domain
    token. A retriever must learn the question-word/passage-word pairing
    rather than match surface strings, which leaves controllable headroom
    and lets rating models transfer across domains."""
    rng = np.random.default_rng(seed)
    passages, questions = [], []
    for domain in domains:
        for i in range(n_topics):
            pid = f"{domain}-p{i:02d}"
            pwords = [f"pt{i}{c}" for c in "abc"]
            passages.append(
                Passage(id=pid, domain=domain, text=" ".join(pwords + [domain]))
            )
            qwords_all = [f"qt{i}{c}" for c in "abc"]
            for j in range(questions_per_topic):
                picked = sorted(rng.choice(3, size=2, replace=False))
                qws = ["what"] + [qwords_all[int(k)] for k in picked]
                questions.append(
                    Question(
                        id=f"{domain}-q{i:02d}-{j}",
                        domain=domain,
                        text=" ".join(qws),
                        gold_passage_ids=(pid,),
                    )
                )
    return passages, questions


def build_world(seed=0, **kwargs):
    passages, questions = make_synthetic_corpus(seed=seed, **kwargs)
    split = split_corpus(questions, (0.7, 0.1, 0.2), seed=seed)
    vocab = Vocab.build([p.text for p in passages] + [q.text for q in questions])
    return passages, questions, split, vocab


@pytest.fixture(scope="session")
def small_world():
    return build_world(seed=0)
