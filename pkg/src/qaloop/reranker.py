"""Learning from rating feedback: rating taxonomy, distribution targets,
KL-trained reranker over [question; SEP; passage], explanation generation,
and synthetic (vanilla) training-set construction.

The reranker is a small encoder-decoder: a GRU encodes the concatenated
question/passage, the decoder optionally generates an explanation, and a
feed-forward head maps the decoder's final hidden state to a 4-way rating
distribution. Multiple annotator ratings per (question, answer) pair become
a soft target distribution trained with KL divergence.
"""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .data import Passage, Question
from .vocab import BOS, EOS, PAD, SEP, Vocab, QUESTION_MAX_LEN, PASSAGE_MAX_LEN

logger = logging.getLogger(__name__)

KL_FLOOR = 1e-12


class RatingLabel(enum.IntEnum):
    """Ordinal rating labels; value doubles as the rating score."""

    bad = 0
    could_be_improved = 1
    good = 2
    excellent = 3

    @classmethod
    def parse(cls, raw: str) -> "RatingLabel":
        key = raw.strip().lower().replace(" ", "_")
        if key == "acceptable":
            # legacy label used interchangeably with "good" in imported data
            logger.info("normalizing rating label 'Acceptable' -> 'good'")
            key = "good"
        try:
            return cls[key]
        except KeyError:
            raise ValueError(f"unknown rating label {raw!r}") from None


N_LABELS = len(RatingLabel)


class EmptyGroup(ValueError):
    pass


class DomainTooSmall(ValueError):
    pass


@dataclass(frozen=True)
class RatingDistribution:
    p: tuple[float, float, float, float]

    def __post_init__(self):
        arr = np.asarray(self.p, dtype=np.float64)
        if arr.shape != (N_LABELS,):
            raise ValueError(f"expected {N_LABELS} probabilities, got {arr.shape}")
        if (arr < 0).any():
            raise ValueError("negative probability")
        if abs(arr.sum() - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {arr.sum()}, expected 1")

    @classmethod
    def from_counts(cls, counts) -> "RatingDistribution":
        arr = np.asarray(counts, dtype=np.float64)
        total = arr.sum()
        if total <= 0:
            raise EmptyGroup("no ratings to aggregate")
        return cls(tuple(arr / total))

    @classmethod
    def one_hot(cls, label: RatingLabel) -> "RatingDistribution":
        p = [0.0] * N_LABELS
        p[int(label)] = 1.0
        return cls(tuple(p))

    @classmethod
    def uniform(cls) -> "RatingDistribution":
        return cls((0.25, 0.25, 0.25, 0.25))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.p, dtype=np.float64)

    def p_excellent(self) -> float:
        return self.p[int(RatingLabel.excellent)]

    def expected_score(self) -> float:
        return float(sum(y * py for y, py in enumerate(self.p)))


@dataclass(frozen=True)
class FeedbackRecord:
    question_text: str
    passage_id: str
    domain: str
    rating: RatingLabel
    explanation: str
    worker_id: str
    timestamp: float = 0.0
    synthetic: bool = False

    def __post_init__(self):
        if not self.explanation.strip() and not self.synthetic:
            raise ValueError("explanation required for non-synthetic feedback")
        if not self.passage_id:
            raise ValueError("passage_id required")

    def to_record(self) -> dict:
        return {
            "question_text": self.question_text,
            "passage_id": self.passage_id,
            "domain": self.domain,
            "rating": self.rating.name,
            "explanation": self.explanation,
            "worker_id": self.worker_id,
            "timestamp": self.timestamp,
            "synthetic": self.synthetic,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "FeedbackRecord":
        return cls(
            question_text=rec["question_text"],
            passage_id=rec["passage_id"],
            domain=rec["domain"],
            rating=RatingLabel.parse(rec["rating"]),
            explanation=rec.get("explanation", ""),
            worker_id=rec.get("worker_id", ""),
            timestamp=rec.get("timestamp", 0.0),
            synthetic=rec.get("synthetic", False),
        )


def aggregate_ratings(
    records: list[FeedbackRecord],
) -> dict[tuple[str, str], RatingDistribution]:
    """Group records by (question_text, passage_id) and turn rating counts
    into empirical distributions."""
    counts: dict[tuple[str, str], np.ndarray] = {}
    for rec in records:
        key = (rec.question_text, rec.passage_id)
        counts.setdefault(key, np.zeros(N_LABELS))[int(rec.rating)] += 1
    return {key: RatingDistribution.from_counts(c) for key, c in counts.items()}


def kl_loss(target: RatingDistribution, predicted: RatingDistribution) -> float:
    """D_KL(target || predicted) with 0*log(0)=0 and a 1e-12 floor on the
    predicted probabilities."""
    t = target.array
    p = np.maximum(predicted.array, KL_FLOOR)
    mask = t > 0
    return float(np.sum(t[mask] * (np.log(t[mask]) - np.log(p[mask]))))


# --- training data -------------------------------------------------------


@dataclass(frozen=True)
class RerankerExample:
    question_text: str
    passage_id: str
    passage_text: str
    domain: str
    target: RatingDistribution
    explanation: str | None = None


@dataclass
class RerankerTrainingSet:
    examples: list[RerankerExample]
    provenance: str  # "feedback", "vanilla", or "combined"

    @classmethod
    def combine(
        cls, feedback: "RerankerTrainingSet", vanilla: "RerankerTrainingSet"
    ) -> "RerankerTrainingSet":
        return cls(examples=list(feedback.examples) + list(vanilla.examples),
                   provenance="combined")


def build_feedback_training_set(
    records: list[FeedbackRecord],
    passage_lookup: dict[tuple[str, str], Passage],
    exclude_domains: set[str] | None = None,
) -> RerankerTrainingSet:
    """One training example per feedback record, each targeting the rating
    distribution aggregated over its (question, passage) group."""
    exclude = exclude_domains or set()
    kept = [r for r in records if r.domain not in exclude]
    dists = aggregate_ratings(kept)
    examples = []
    for rec in kept:
        passage = passage_lookup[(rec.domain, rec.passage_id)]
        examples.append(
            RerankerExample(
                question_text=rec.question_text,
                passage_id=rec.passage_id,
                passage_text=passage.text,
                domain=rec.domain,
                target=dists[(rec.question_text, rec.passage_id)],
                explanation=rec.explanation or None,
            )
        )
    return RerankerTrainingSet(examples=examples, provenance="feedback")


def synthesize_vanilla(
    passages: list[Passage],
    questions: list[Question],
    negatives_per_positive: int = 1,
    seed: int = 0,
    question_ids: set[str] | None = None,
) -> RerankerTrainingSet:
    """Build a reranker training set from pre-deployment data: each
    question's gold passage is labeled excellent, n random non-gold
    same-domain passages are labeled bad."""
    if negatives_per_positive < 1:
        raise ValueError("negatives_per_positive must be >= 1")
    by_domain: dict[str, list[Passage]] = {}
    for p in passages:
        by_domain.setdefault(p.domain, []).append(p)
    for plist in by_domain.values():
        plist.sort(key=lambda p: p.id)
    by_id = {(p.domain, p.id): p for p in passages}

    rng = np.random.default_rng(seed)
    excellent = RatingDistribution.one_hot(RatingLabel.excellent)
    bad = RatingDistribution.one_hot(RatingLabel.bad)
    examples: list[RerankerExample] = []
    for q in sorted(questions, key=lambda q: q.id):
        if question_ids is not None and q.id not in question_ids:
            continue
        pool = [p for p in by_domain[q.domain] if p.id not in q.gold_passage_ids]
        if not pool:
            raise DomainTooSmall(
                f"domain {q.domain!r} has no non-gold passages for {q.id!r}"
            )
        gold = by_id[(q.domain, q.gold_passage_ids[0])]
        examples.append(
            RerankerExample(q.text, gold.id, gold.text, q.domain, excellent)
        )
        idx = rng.choice(len(pool), size=negatives_per_positive,
                         replace=negatives_per_positive > len(pool))
        for i in np.atleast_1d(idx):
            neg = pool[int(i)]
            examples.append(RerankerExample(q.text, neg.id, neg.text, q.domain, bad))
    return RerankerTrainingSet(examples=examples, provenance="vanilla")


# --- model ---------------------------------------------------------------


@dataclass
class RerankerConfig:
    vocab_size: int
    emb_dim: int = 32
    hidden_dim: int = 64
    head_hidden: int = 32
    dropout: float = 0.1
    mode: str = "rating_only"  # or "explain_then_rate"
    q_max: int = QUESTION_MAX_LEN
    p_max: int = PASSAGE_MAX_LEN
    max_explanation_len: int = 40


class RerankerModel(nn.Module):
    """GRU encoder over [Q; SEP; A], GRU decoder for the explanation, and a
    one-hidden-layer head producing rating logits."""

    def __init__(self, cfg: RerankerConfig):
        super().__init__()
        if cfg.mode not in ("rating_only", "explain_then_rate"):
            raise ValueError(f"unknown mode {cfg.mode!r}")
        self.cfg = cfg
        self.emb = nn.Embedding(cfg.vocab_size, cfg.emb_dim, padding_idx=PAD)
        self.encoder = nn.GRU(cfg.emb_dim, cfg.hidden_dim, batch_first=True)
        self.dec_init = nn.Linear(cfg.hidden_dim, cfg.hidden_dim)
        self.decoder = nn.GRU(cfg.emb_dim, cfg.hidden_dim, batch_first=True)
        self.out_proj = nn.Linear(cfg.hidden_dim, cfg.vocab_size)
        self.dropout = nn.Dropout(cfg.dropout)
        self.head = nn.Sequential(
            nn.Linear(cfg.hidden_dim, cfg.head_hidden),
            nn.Tanh(),
            nn.Linear(cfg.head_hidden, N_LABELS),
        )

    def pair_ids(self, question_text: str, passage_text: str, vocab: Vocab) -> list[int]:
        q = vocab.encode_tokens(question_text)[: self.cfg.q_max]
        a = vocab.encode_tokens(passage_text)[: self.cfg.p_max]
        ids = q + [SEP] + a
        if not q and not a:
            raise ValueError("empty input after truncation")
        return ids

    def encode(self, batch_ids: list[list[int]]):
        """Returns the decoder start state h0 [B, H]."""
        device = next(self.parameters()).device
        dtype = next(self.parameters()).dtype
        lengths = [len(ids) for ids in batch_ids]
        max_len = max(lengths)
        ids = torch.full((len(batch_ids), max_len), PAD, dtype=torch.long, device=device)
        for i, seq in enumerate(batch_ids):
            ids[i, : len(seq)] = torch.tensor(seq, dtype=torch.long)
        x = self.dropout(self.emb(ids))
        states, _ = self.encoder(x)
        last = torch.tensor(lengths, device=device) - 1
        enc_final = states[torch.arange(len(batch_ids)), last]
        return torch.tanh(self.dec_init(enc_final))

    def rating_logits_from_state(self, h: torch.Tensor) -> torch.Tensor:
        return self.head(self.dropout(h))

    def teacher_forced(self, h0: torch.Tensor, explanation_ids: torch.Tensor,
                       lengths: torch.Tensor):
        """Run the decoder over [BOS, e_1..e_T] per example.

        Returns (vocab logits [B, T+1, V], final hidden [B, H]) where the
        final hidden is the state after consuming the full explanation.
        """
        bos = torch.full((h0.shape[0], 1), BOS, dtype=torch.long, device=h0.device)
        inputs = torch.cat([bos, explanation_ids], dim=1)
        x = self.dropout(self.emb(inputs))
        states, _ = self.decoder(x, h0[None, :, :].contiguous())
        final = states[torch.arange(h0.shape[0]), lengths]
        return self.out_proj(states), final

    @torch.no_grad()
    def greedy_decode(self, h0: torch.Tensor, max_len: int) -> tuple[list[int], torch.Tensor]:
        """Greedy explanation decoding for a single example; returns the
        generated token ids and the final decoder hidden state."""
        h = h0.reshape(1, 1, -1).contiguous()
        prev = torch.tensor([[BOS]], device=h0.device)
        tokens: list[int] = []
        final = h0.reshape(-1)
        for _ in range(max_len):
            x = self.emb(prev)
            states, h = self.decoder(x, h)
            final = states[0, 0]
            tok = int(self.out_proj(states[0, 0]).argmax())
            if tok == EOS:
                break
            tokens.append(tok)
            prev = torch.tensor([[tok]], device=h0.device)
        return tokens, final

    @torch.no_grad()
    def beam_decode(self, h0: torch.Tensor, max_len: int, beam: int) -> tuple[list[int], torch.Tensor]:
        """Beam search over explanation tokens; beam=1 matches greedy."""
        h_start = h0.reshape(1, 1, -1).contiguous()
        # (logprob, tokens, prev_token, hidden, final_state, done)
        beams = [(0.0, [], BOS, h_start, h0.reshape(-1), False)]
        for _ in range(max_len):
            if all(b[5] for b in beams):
                break
            candidates = []
            for lp, toks, prev, h, fin, done in beams:
                if done:
                    candidates.append((lp, toks, prev, h, fin, True))
                    continue
                x = self.emb(torch.tensor([[prev]], device=h0.device))
                states, h_next = self.decoder(x, h)
                logp = F.log_softmax(self.out_proj(states[0, 0]), dim=-1)
                top = torch.topk(logp, min(beam, logp.shape[0]))
                for val, tok in zip(top.values.tolist(), top.indices.tolist()):
                    if tok == EOS:
                        candidates.append((lp + val, toks, tok, h_next, states[0, 0], True))
                    else:
                        candidates.append(
                            (lp + val, toks + [tok], tok, h_next, states[0, 0], False)
                        )
            candidates.sort(key=lambda c: -c[0])
            beams = candidates[:beam]
        best = max(beams, key=lambda c: c[0])
        return best[1], best[4]


def rate(
    model: RerankerModel, question_text: str, passage_text: str, vocab: Vocab
) -> RatingDistribution:
    """Rating distribution for one (question, passage) pair. For an
    explain-then-rate model this decodes greedily first."""
    if model.cfg.mode == "explain_then_rate":
        _, dist = explain_and_rate(model, question_text, passage_text, vocab)
        return dist
    model.eval()
    with torch.no_grad():
        h0 = model.encode([model.pair_ids(question_text, passage_text, vocab)])
        logits = model.rating_logits_from_state(h0)[0]
        probs = torch.softmax(logits, dim=-1).cpu().numpy().astype(np.float64)
    probs = probs / probs.sum()
    return RatingDistribution(tuple(float(x) for x in probs))


def explain_and_rate(
    model: RerankerModel,
    question_text: str,
    passage_text: str,
    vocab: Vocab,
    beam: int = 1,
    max_len: int | None = None,
) -> tuple[str, RatingDistribution]:
    """Generate an explanation, then rate from the decoder's final state.

    max_len=0 is the degenerate decode: empty explanation, rating from the
    decoder start state.
    """
    model.eval()
    if max_len is None:
        max_len = model.cfg.max_explanation_len
    with torch.no_grad():
        h0 = model.encode([model.pair_ids(question_text, passage_text, vocab)])[0]
        if max_len == 0:
            tokens, final = [], h0
        elif beam <= 1:
            tokens, final = model.greedy_decode(h0, max_len)
        else:
            tokens, final = model.beam_decode(h0, max_len, beam)
        logits = model.rating_logits_from_state(final[None, :])[0]
        probs = torch.softmax(logits, dim=-1).cpu().numpy().astype(np.float64)
    probs = probs / probs.sum()
    return vocab.decode(tokens), RatingDistribution(tuple(float(x) for x in probs))


# --- training ------------------------------------------------------------


@dataclass
class RerankerTrainConfig:
    batch_size: int = 16
    epochs: int = 40
    lr: float = 5e-5
    seed: int = 0
    explanation_weight: float = 1.0  # lambda for the token CE term


@dataclass
class RerankerTrainResult:
    loss_curve: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = -1


class NonFiniteLoss(RuntimeError):
    pass


def _example_tensors(model, vocab, examples, device):
    pair_ids = [model.pair_ids(e.question_text, e.passage_text, vocab) for e in examples]
    targets = torch.tensor(np.stack([e.target.array for e in examples]),
                           dtype=next(model.parameters()).dtype, device=device)
    return pair_ids, targets


def batch_kl(targets: torch.Tensor, logits: torch.Tensor) -> torch.Tensor:
    """Mean KL(target || softmax(logits)) over the batch, with the same
    floor and 0*log(0) handling as the scalar kl_loss."""
    logp = F.log_softmax(logits, dim=-1)
    logp = torch.clamp(logp, min=float(np.log(KL_FLOOR)))
    ent = torch.special.xlogy(targets, targets)
    return (ent - targets * logp).sum(dim=-1).mean()


def training_step_loss(model, vocab, examples, explanation_weight=1.0):
    """Loss over a batch of RerankerExamples: mean KL on ratings plus, in
    explain mode, token cross-entropy on explanations."""
    device = next(model.parameters()).device
    pair_ids, targets = _example_tensors(model, vocab, examples, device)
    h0 = model.encode(pair_ids)

    if model.cfg.mode == "rating_only":
        logits = model.rating_logits_from_state(h0)
        return batch_kl(targets, logits)

    exp_tokens = [
        (vocab.encode_tokens(e.explanation) if e.explanation else [])
        for e in examples
    ]
    exp_tokens = [t[: model.cfg.max_explanation_len] for t in exp_tokens]
    lengths = torch.tensor([len(t) for t in exp_tokens], device=device)
    max_t = max(1, int(lengths.max()))
    exp_ids = torch.full((len(examples), max_t), PAD, dtype=torch.long, device=device)
    ce_targets = torch.full((len(examples), max_t + 1), PAD, dtype=torch.long, device=device)
    for i, toks in enumerate(exp_tokens):
        if toks:
            exp_ids[i, : len(toks)] = torch.tensor(toks, dtype=torch.long)
            ce_targets[i, : len(toks)] = torch.tensor(toks, dtype=torch.long)
        ce_targets[i, len(toks)] = EOS

    vocab_logits, final = model.teacher_forced(h0, exp_ids, lengths)
    rating_logits = model.rating_logits_from_state(final)
    loss = batch_kl(targets, rating_logits)
    ce = F.cross_entropy(
        vocab_logits.reshape(-1, vocab_logits.shape[-1]),
        ce_targets.reshape(-1),
        ignore_index=PAD,
    )
    return loss + explanation_weight * ce


def build_reranker(cfg: RerankerConfig, seed: int = 0) -> RerankerModel:
    torch.manual_seed(seed)
    return RerankerModel(cfg)


def train_reranker(
    model: RerankerModel,
    dataset: RerankerTrainingSet,
    vocab: Vocab,
    cfg: RerankerTrainConfig,
    valid_examples: list[RerankerExample] | None = None,
) -> RerankerTrainResult:
    """Train on a RerankerTrainingSet; checkpoint by validation loss when a
    validation set is supplied, otherwise keep the final weights."""
    if not dataset.examples:
        raise ValueError("empty training set")
    result = RerankerTrainResult()
    if cfg.epochs == 0:
        return result

    rng = np.random.default_rng(cfg.seed)
    torch.manual_seed(cfg.seed)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    examples = dataset.examples
    best_state = None
    best_val = float("inf")

    for epoch in range(cfg.epochs):
        model.train()
        order = rng.permutation(len(examples))
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = [examples[i] for i in order[start : start + cfg.batch_size]]
            loss = training_step_loss(model, vocab, batch, cfg.explanation_weight)
            if not torch.isfinite(loss):
                raise NonFiniteLoss(f"epoch {epoch}: loss {loss.item()}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(loss.item())
        result.loss_curve.append(float(np.mean(losses)))

        if valid_examples:
            model.eval()
            with torch.no_grad():
                val = training_step_loss(
                    model, vocab, valid_examples, cfg.explanation_weight
                ).item()
            result.val_loss.append(val)
            if val < best_val:
                best_val = val
                result.best_epoch = epoch
                best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}

    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    return result
