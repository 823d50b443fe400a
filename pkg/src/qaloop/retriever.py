"""Dense retriever: shared text encoder, bi-/poly-encoder scoring,
in-batch-negative training, and exact top-k retrieval.

The desk-scale encoder is token + position embeddings followed by a small
stack of self-attention layers, with mean-token or final-state pooling.
Relevance is the dot product between the question embedding and either a
single pooled passage vector (bi-encoder) or a question-attended mixture
of m learned passage codes (poly-encoder).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .data import CorpusSplit, Passage, Question, passages_by_domain
from .vocab import PAD, TokenSequence, Vocab, tokenize

logger = logging.getLogger(__name__)


class EmptySequence(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class NoCandidates(ValueError):
    pass


class NonFiniteLoss(RuntimeError):
    pass


class UnknownDomain(KeyError):
    pass


@dataclass
class EncoderConfig:
    vocab_size: int
    hidden_dim: int = 64
    n_layers: int = 1
    n_heads: int = 2
    dropout: float = 0.1
    max_len: int = 512
    pooling: str = "mean_tokens"  # or "final_state"


@dataclass
class RetrieverConfig:
    encoder: EncoderConfig
    scorer: str = "bi"  # "bi" or "poly"
    poly_m: int = 16


@dataclass
class TrainConfig:
    batch_size: int = 16
    epochs: int = 40
    lr: float = 5e-5
    seed: int = 0


def pad_batch(seqs: list[TokenSequence], device=None, dtype=torch.long):
    """Stack variable-length sequences into (ids, mask) tensors; mask is True
    at real tokens."""
    if not seqs:
        raise EmptySequence("empty batch")
    max_len = max(len(s) for s in seqs)
    ids = torch.full((len(seqs), max_len), PAD, dtype=dtype, device=device)
    mask = torch.zeros((len(seqs), max_len), dtype=torch.bool, device=device)
    for i, s in enumerate(seqs):
        if len(s) == 0:
            raise EmptySequence(f"sequence {i} in batch is empty")
        ids[i, : len(s)] = torch.tensor(s.token_ids, dtype=dtype)
        mask[i, : len(s)] = True
    return ids, mask


class TextEncoder(nn.Module):
    """Token/position embeddings + self-attention layers + pooling."""

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        self.tok_emb = nn.Embedding(cfg.vocab_size, cfg.hidden_dim, padding_idx=PAD)
        self.pos_emb = nn.Embedding(cfg.max_len, cfg.hidden_dim)
        layer = nn.TransformerEncoderLayer(
            d_model=cfg.hidden_dim,
            nhead=cfg.n_heads,
            dim_feedforward=2 * cfg.hidden_dim,
            dropout=cfg.dropout,
            batch_first=True,
        )
        self.layers = nn.TransformerEncoder(layer, num_layers=cfg.n_layers)

    def token_states(self, ids: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        pos = torch.arange(ids.shape[1], device=ids.device)
        x = self.tok_emb(ids) + self.pos_emb(pos)[None, :, :]
        return self.layers(x, src_key_padding_mask=~mask)

    def pool(self, states: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        if self.cfg.pooling == "mean_tokens":
            m = mask.unsqueeze(-1).to(states.dtype)
            return (states * m).sum(dim=1) / m.sum(dim=1).clamp(min=1)
        if self.cfg.pooling == "final_state":
            last = mask.sum(dim=1) - 1
            return states[torch.arange(states.shape[0]), last]
        raise ValueError(f"unknown pooling {self.cfg.pooling!r}")

    def forward(self, ids: torch.Tensor, mask: torch.Tensor):
        states = self.token_states(ids, mask)
        return states, self.pool(states, mask)


class PolyCodes(nn.Module):
    """m learned code vectors; each attends over passage tokens to produce
    question-independent per-passage codes."""

    def __init__(self, m: int, hidden_dim: int):
        super().__init__()
        if m < 1:
            raise ValueError("poly_m must be >= 1")
        self.m = m
        self.codes = nn.Parameter(torch.randn(m, hidden_dim) * hidden_dim**-0.5)

    def forward(self, token_states: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        # token_states: [B, L, H] -> per-passage codes [B, m, H]
        logits = torch.einsum("mh,blh->bml", self.codes.to(token_states.dtype), token_states)
        logits = logits.masked_fill(~mask[:, None, :], float("-inf"))
        attn = torch.softmax(logits, dim=-1)
        return torch.einsum("bml,blh->bmh", attn, token_states)


class RetrieverModel(nn.Module):
    def __init__(self, cfg: RetrieverConfig):
        super().__init__()
        if cfg.scorer not in ("bi", "poly"):
            raise ValueError(f"unknown scorer {cfg.scorer!r}")
        self.cfg = cfg
        self.encoder = TextEncoder(cfg.encoder)
        self.poly = (
            PolyCodes(cfg.poly_m, cfg.encoder.hidden_dim) if cfg.scorer == "poly" else None
        )

    # --- embedding -------------------------------------------------------

    def embed_questions(self, seqs: list[TokenSequence]) -> torch.Tensor:
        ids, mask = pad_batch(seqs, device=self._device())
        _, pooled = self.encoder(ids, mask)
        return pooled

    def embed_question(self, seq: TokenSequence) -> torch.Tensor:
        return self.embed_questions([seq])[0]

    def embed_passages(self, seqs: list[TokenSequence]) -> torch.Tensor:
        """Bi-encoder: pooled vectors [B, H]. Poly-encoder: codes [B, m, H]."""
        ids, mask = pad_batch(seqs, device=self._device())
        states, pooled = self.encoder(ids, mask)
        if self.poly is None:
            return pooled
        return self.poly(states, mask)

    def embed_passage(self, seq: TokenSequence) -> torch.Tensor:
        return self.embed_passages([seq])[0]

    # --- scoring ---------------------------------------------------------

    def score(self, q_emb: torch.Tensor, passage_rep: torch.Tensor) -> torch.Tensor:
        """S(Q, A) for one question embedding and one passage representation."""
        if q_emb.dim() != 1:
            raise DimensionMismatch("q_emb must be a single vector")
        if passage_rep.dim() == 1:
            if passage_rep.shape != q_emb.shape:
                raise DimensionMismatch(
                    f"{tuple(q_emb.shape)} vs {tuple(passage_rep.shape)}"
                )
            return q_emb @ passage_rep
        if passage_rep.dim() == 2:
            if passage_rep.shape[1] != q_emb.shape[0]:
                raise DimensionMismatch(
                    f"{tuple(q_emb.shape)} vs {tuple(passage_rep.shape)}"
                )
            attn = torch.softmax(passage_rep @ q_emb, dim=0)
            u = attn @ passage_rep
            return u @ q_emb
        raise DimensionMismatch(f"unsupported passage rep rank {passage_rep.dim()}")

    def score_matrix(self, q_embs: torch.Tensor, passage_reps: torch.Tensor) -> torch.Tensor:
        """All-pairs scores [n_questions, n_passages]."""
        if passage_reps.dim() == 2:  # bi: [P, H]
            return q_embs @ passage_reps.T
        # poly: [P, m, H]
        logits = torch.einsum("qh,pmh->qpm", q_embs, passage_reps)
        attn = torch.softmax(logits, dim=-1)
        u = torch.einsum("qpm,pmh->qph", attn, passage_reps)
        return torch.einsum("qph,qh->qp", u, q_embs)

    def _device(self):
        return next(self.parameters()).device


def build_retriever(cfg: RetrieverConfig, seed: int = 0) -> RetrieverModel:
    torch.manual_seed(seed)
    return RetrieverModel(cfg)


def candidate_probabilities(scores) -> np.ndarray:
    """Softmax over candidate scores with max-subtraction for stability."""
    arr = np.asarray(scores, dtype=np.float64)
    if arr.size == 0:
        raise NoCandidates("no candidate scores")
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite candidate score")
    ex = np.exp(arr - arr.max())
    return ex / ex.sum()


def training_loss(
    model: RetrieverModel,
    question_seqs: list[TokenSequence],
    gold_seqs: list[TokenSequence],
) -> torch.Tensor:
    """In-batch-negative log-likelihood: each question's gold passage is the
    positive, the other golds in the batch are negatives."""
    if len(question_seqs) != len(gold_seqs):
        raise DimensionMismatch("questions and gold passages must align")
    b = len(question_seqs)
    if b == 1:
        logger.warning("batch of size 1: in-batch loss is trivially 0")
    seen = set()
    for s in gold_seqs:
        if s.token_ids in seen:
            logger.info("duplicate gold passage in batch (false negative)")
            break
        seen.add(s.token_ids)
    q_embs = model.embed_questions(question_seqs)
    reps = model.embed_passages(gold_seqs)
    scores = model.score_matrix(q_embs, reps)
    targets = torch.arange(b, device=scores.device)
    loss = F.cross_entropy(scores, targets)
    if not torch.isfinite(loss):
        raise NonFiniteLoss(f"loss is {loss.item()}")
    return loss


@dataclass
class TrainResult:
    loss_curve: list[float] = field(default_factory=list)
    val_p_at_1: list[float] = field(default_factory=list)
    best_epoch: int = -1


def _encode_texts(vocab: Vocab, texts: list[str], role: str) -> list[TokenSequence]:
    return [tokenize(t, role, vocab) for t in texts]


def retrieve_topk(
    model: RetrieverModel,
    vocab: Vocab,
    question_text: str,
    passages: list[Passage],
    k: int,
) -> list[tuple[str, float]]:
    """Rank a domain's passages for one question.

    Returns up to k (passage_id, probability) pairs sorted by descending
    score; probabilities are the softmax over the full passage set. Ties
    break by ascending passage id.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not passages:
        raise NoCandidates("no passages to rank")
    model.eval()
    with torch.no_grad():
        q_emb = model.embed_question(tokenize(question_text, "question", vocab))
        reps = model.embed_passages(
            _encode_texts(vocab, [p.text for p in passages], "passage")
        )
        scores = model.score_matrix(q_emb[None, :], reps)[0].cpu().numpy()
    probs = candidate_probabilities(scores)
    order = sorted(range(len(passages)), key=lambda i: (-scores[i], passages[i].id))
    return [(passages[order[i]].id, float(probs[order[i]])) for i in range(min(k, len(passages)))]


def evaluate_p_at_1(
    model: RetrieverModel,
    vocab: Vocab,
    questions: list[Question],
    by_domain: dict[str, list[Passage]],
) -> float:
    if not questions:
        return 0.0
    hits = 0
    for q in questions:
        top = retrieve_topk(model, vocab, q.text, by_domain[q.domain], k=1)
        hits += top[0][0] in q.gold_passage_ids
    return hits / len(questions)


def train_retriever(
    model: RetrieverModel,
    vocab: Vocab,
    passages: list[Passage],
    questions: list[Question],
    split: CorpusSplit,
    cfg: TrainConfig,
) -> TrainResult:
    """Train with in-batch negatives; checkpoint selected by validation P@1.

    The model is left loaded with the best-epoch weights. epochs=0 returns
    it unchanged with an empty loss curve.
    """
    result = TrainResult()
    if cfg.epochs == 0:
        return result

    by_id = {(p.domain, p.id): p for p in passages}
    by_domain = passages_by_domain(passages)
    train_qs = sorted(
        (q for q in questions if q.id in split.train), key=lambda q: q.id
    )
    valid_qs = sorted(
        (q for q in questions if q.id in split.valid), key=lambda q: q.id
    )
    if not train_qs:
        raise ValueError("empty train split")

    pairs = []
    for q in train_qs:
        gold = by_id[(q.domain, q.gold_passage_ids[0])]
        pairs.append(
            (
                tokenize(q.text, "question", vocab),
                tokenize(gold.text, "passage", vocab),
            )
        )

    rng = np.random.default_rng(cfg.seed)
    torch.manual_seed(cfg.seed)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    best_state = None
    best_val = -1.0

    for epoch in range(cfg.epochs):
        model.train()
        order = rng.permutation(len(pairs))
        epoch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            if len(idx) < 2:
                continue
            qs = [pairs[i][0] for i in idx]
            gs = [pairs[i][1] for i in idx]
            loss = training_loss(model, qs, gs)
            opt.zero_grad()
            loss.backward()
            opt.step()
            epoch_losses.append(loss.item())
        result.loss_curve.append(float(np.mean(epoch_losses)) if epoch_losses else 0.0)

        if valid_qs:
            val = evaluate_p_at_1(model, vocab, valid_qs, by_domain)
        else:
            val = -result.loss_curve[-1]
        result.val_p_at_1.append(val)
        if val > best_val:
            best_val = val
            result.best_epoch = epoch
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}

    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    return result
