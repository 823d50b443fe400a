"""Retrieval-based QA with a human feedback loop.

Pipeline: train a dense retriever on (question, gold passage) pairs,
serve it behind a feedback-collecting HTTP API, train a reranker on the
collected rating feedback, and fuse retriever and reranker scores to
improve answer accuracy.
"""

__version__ = "0.1.0"
