"""HTTP deployment of a trained pipeline: answer questions with the top-2
candidates (plus explanations when available), persist interactive
feedback, and expose retraining triggers that hot-swap the reranker."""

from __future__ import annotations

import logging
import threading
import time
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .data import Passage, Question, passages_by_domain
from .fusion import rerank
from .reranker import (
    FeedbackRecord,
    RatingLabel,
    RerankerConfig,
    RerankerModel,
    RerankerTrainConfig,
    RerankerTrainingSet,
    build_feedback_training_set,
    build_reranker,
    explain_and_rate,
    synthesize_vanilla,
    train_reranker,
)
from .retriever import RetrieverModel, retrieve_topk
from .store import FeedbackStore
from .vocab import Vocab

logger = logging.getLogger(__name__)

REQUEST_TTL_SECONDS = 24 * 3600


@dataclass
class ServingConfig:
    k: int = 5  # fusion candidate pool
    n_answers: int = 2  # cards shown per question
    scheme: str = "p_excellent"
    request_ttl: float = REQUEST_TTL_SECONDS
    # retraining defaults (desk scale)
    retrain_epochs: int = 30
    retrain_lr: float = 0.01
    retrain_seed: int = 0
    retrain_mode: str = "rating_only"
    negatives_per_positive: int = 1
    reranker_hidden_dim: int = 64
    reranker_emb_dim: int = 32


@dataclass
class Pipeline:
    """Immutable models plus the corpus; the reranker slot is swapped
    atomically after a successful retrain."""

    passages: list[Passage]
    questions: list[Question]
    vocab: Vocab
    retriever: RetrieverModel
    reranker: RerankerModel | None = None
    train_question_ids: set[str] = field(default_factory=set)
    config: ServingConfig = field(default_factory=ServingConfig)

    def __post_init__(self):
        self.by_domain = passages_by_domain(self.passages)
        self._swap_lock = threading.Lock()

    @property
    def domains(self) -> list[str]:
        return sorted(self.by_domain)

    def answer(self, question_text: str, domain: str) -> list[dict]:
        if domain not in self.by_domain:
            raise KeyError(domain)
        reranker = self.reranker  # snapshot: swap-safe for in-flight requests
        passages = self.by_domain[domain]
        by_id = {p.id: p for p in passages}
        cards = []
        if reranker is None:
            top = retrieve_topk(self.retriever, self.vocab, question_text,
                                passages, k=self.config.n_answers)
            for pid, prob in top:
                cards.append({
                    "passage_id": pid,
                    "passage_text": by_id[pid].text,
                    "retriever_prob": prob,
                    "fused_score": prob,
                    "rating_dist": None,
                    "explanation": None,
                })
        else:
            ranked = rerank(question_text, domain, self.by_domain, self.retriever,
                            reranker, self.vocab, k=self.config.k,
                            scheme=self.config.scheme)
            for cand in ranked[: self.config.n_answers]:
                explanation = None
                if reranker.cfg.mode == "explain_then_rate":
                    explanation, _ = explain_and_rate(
                        reranker, question_text, by_id[cand.passage_id].text, self.vocab
                    )
                cards.append({
                    "passage_id": cand.passage_id,
                    "passage_text": by_id[cand.passage_id].text,
                    "retriever_prob": cand.retriever_prob,
                    "fused_score": cand.fused_score,
                    "rating_dist": list(cand.rating_dist.p),
                    "explanation": explanation,
                })
        return cards

    def swap_reranker(self, model: RerankerModel) -> None:
        with self._swap_lock:
            self.reranker = model


class AskBody(BaseModel):
    question: str
    domain: str


class FeedbackBody(BaseModel):
    request_id: str
    passage_id: str
    rating: str | None = None
    explanation: str = ""
    client_session_id: str = "anonymous"
    synthetic: bool = False


class RetrainBody(BaseModel):
    provenance: str = "feedback"  # feedback | vanilla | combined
    mode: str | None = None


def create_app(pipeline: Pipeline, store: FeedbackStore) -> FastAPI:
    app = FastAPI(title="qaloop")
    served: dict[str, dict] = {}  # request_id -> {passage_ids, question, domain, ts}
    seen_submissions: set[tuple[str, str, str]] = set()
    jobs: dict[str, dict] = {}
    job_lock = threading.Lock()
    state = {"active_job": None}

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "reranker_loaded": pipeline.reranker is not None,
            "scheme": pipeline.config.scheme,
            "k": pipeline.config.k,
        }

    @app.get("/domains")
    def domains():
        return {"domains": pipeline.domains}

    @app.get("/stats")
    def stats():
        counts = store.counts_by_domain()
        return {
            "total_feedback": store.count(),
            "per_domain": {d: counts.get(d, 0) for d in pipeline.domains},
        }

    @app.post("/ask")
    def ask(body: AskBody):
        if not body.question.strip():
            raise HTTPException(400, "EmptyQuestion")
        if body.domain not in pipeline.by_domain:
            raise HTTPException(400, f"UnknownDomain: {body.domain}")
        if pipeline.retriever is None:
            raise HTTPException(503, "ModelNotLoaded")
        cards = pipeline.answer(body.question, body.domain)
        request_id = uuid.uuid4().hex
        served[request_id] = {
            "passage_ids": {c["passage_id"] for c in cards},
            "question": body.question,
            "domain": body.domain,
            "ts": time.time(),
        }
        return {"request_id": request_id, "answers": cards}

    @app.post("/feedback")
    def feedback(body: FeedbackBody):
        req = served.get(body.request_id)
        if req is None:
            raise HTTPException(404, "UnknownRequest")
        if time.time() - req["ts"] > pipeline.config.request_ttl:
            raise HTTPException(404, "UnknownRequest: expired")
        if not body.rating:
            raise HTTPException(422, "MissingRating")
        try:
            rating = RatingLabel.parse(body.rating)
        except ValueError:
            raise HTTPException(422, f"unknown rating {body.rating!r}")
        if body.passage_id not in req["passage_ids"]:
            raise HTTPException(422, "passage was not served for this request")
        if not body.explanation.strip() and not body.synthetic:
            raise HTTPException(422, "explanation required")
        dedup_key = (body.request_id, body.passage_id, body.client_session_id)
        if dedup_key in seen_submissions:
            raise HTTPException(409, "DuplicateSubmission")
        record = FeedbackRecord(
            question_text=req["question"],
            passage_id=body.passage_id,
            domain=req["domain"],
            rating=rating,
            explanation=body.explanation,
            worker_id=body.client_session_id,
            timestamp=time.time(),
            synthetic=body.synthetic,
        )
        count = store.append(record)
        seen_submissions.add(dedup_key)
        return {"accepted": True, "feedback_count": count}

    def run_retrain(job_id: str, provenance: str, mode: str):
        jobs[job_id]["status"] = "running"
        try:
            cfg = pipeline.config
            records = store.records()
            lookup = {(p.domain, p.id): p for p in pipeline.passages}
            feedback_set = build_feedback_training_set(records, lookup) if records else None
            vanilla_set = None
            if provenance in ("vanilla", "combined"):
                vanilla_set = synthesize_vanilla(
                    pipeline.passages, pipeline.questions,
                    negatives_per_positive=cfg.negatives_per_positive,
                    seed=cfg.retrain_seed,
                    question_ids=pipeline.train_question_ids or None,
                )
            if provenance == "feedback":
                dataset = feedback_set
            elif provenance == "vanilla":
                dataset = vanilla_set
            else:
                dataset = RerankerTrainingSet.combine(feedback_set, vanilla_set)

            model = build_reranker(
                RerankerConfig(
                    vocab_size=len(pipeline.vocab),
                    emb_dim=cfg.reranker_emb_dim,
                    hidden_dim=cfg.reranker_hidden_dim,
                    mode=mode,
                ),
                seed=cfg.retrain_seed,
            )
            train_reranker(
                model, dataset, pipeline.vocab,
                RerankerTrainConfig(epochs=cfg.retrain_epochs, lr=cfg.retrain_lr,
                                    seed=cfg.retrain_seed),
            )
            pipeline.swap_reranker(model)
            jobs[job_id]["status"] = "done"
        except Exception as exc:  # job failures are reported, not raised
            logger.exception("retrain job %s failed", job_id)
            jobs[job_id]["status"] = "failed"
            jobs[job_id]["error"] = str(exc)
        finally:
            with job_lock:
                state["active_job"] = None

    @app.post("/admin/retrain", status_code=202)
    def retrain(body: RetrainBody):
        if body.provenance not in ("feedback", "vanilla", "combined"):
            raise HTTPException(422, f"unknown provenance {body.provenance!r}")
        if body.provenance in ("feedback", "combined") and store.count() == 0:
            raise HTTPException(422, "NoFeedbackYet")
        mode = body.mode or pipeline.config.retrain_mode
        with job_lock:
            if state["active_job"] is not None:
                raise HTTPException(409, "JobAlreadyRunning")
            job_id = uuid.uuid4().hex
            state["active_job"] = job_id
            jobs[job_id] = {"status": "queued", "provenance": body.provenance,
                            "mode": mode}
        thread = threading.Thread(
            target=run_retrain, args=(job_id, body.provenance, mode), daemon=True
        )
        thread.start()
        return {"job_id": job_id}

    @app.get("/admin/jobs/{job_id}")
    def job_status(job_id: str):
        if job_id not in jobs:
            raise HTTPException(404, "unknown job")
        return {"job_id": job_id, **jobs[job_id]}

    return app
