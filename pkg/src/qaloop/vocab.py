"""Whitespace tokenizer with a learned vocabulary.

The desk-scale default: lowercase, split on whitespace, map to integer ids
with reserved tokens for padding, unknowns, the question/answer separator,
and sequence delimiters. Pretrained subword tokenizers can be plugged in
behind the same encode() surface.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

PAD, UNK, SEP, BOS, EOS = 0, 1, 2, 3, 4
RESERVED = ["<pad>", "<unk>", "<sep>", "<bos>", "<eos>"]

QUESTION_MAX_LEN = 50
PASSAGE_MAX_LEN = 512


class EmptyText(ValueError):
    pass


@dataclass(frozen=True)
class TokenSequence:
    token_ids: tuple[int, ...]
    max_len: int

    def __post_init__(self):
        if len(self.token_ids) > self.max_len:
            raise ValueError(
                f"sequence length {len(self.token_ids)} exceeds max_len {self.max_len}"
            )

    def __len__(self) -> int:
        return len(self.token_ids)


class Vocab:
    """Token <-> id mapping built from a training corpus."""

    def __init__(self, tokens: list[str]):
        self.itos = list(RESERVED) + [t for t in tokens if t not in RESERVED]
        self.stoi = {t: i for i, t in enumerate(self.itos)}

    def __len__(self) -> int:
        return len(self.itos)

    @classmethod
    def build(cls, texts: list[str], min_count: int = 1) -> "Vocab":
        counts: dict[str, int] = {}
        for text in texts:
            for tok in text.lower().split():
                counts[tok] = counts.get(tok, 0) + 1
        kept = sorted(t for t, c in counts.items() if c >= min_count)
        return cls(kept)

    def encode_tokens(self, text: str) -> list[int]:
        return [self.stoi.get(tok, UNK) for tok in text.lower().split()]

    def decode(self, token_ids) -> str:
        words = []
        for tid in token_ids:
            if tid in (PAD, BOS):
                continue
            if tid == EOS:
                break
            words.append(self.itos[tid] if 0 <= tid < len(self.itos) else "<unk>")
        return " ".join(words)

    def content_hash(self) -> str:
        blob = "\n".join(self.itos).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps({"tokens": self.itos[len(RESERVED):]}))

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        return cls(json.loads(Path(path).read_text())["tokens"])


def tokenize(
    text: str,
    role: str,
    vocab: Vocab,
    q_max: int = QUESTION_MAX_LEN,
    p_max: int = PASSAGE_MAX_LEN,
) -> TokenSequence:
    """Encode text and truncate per role (question -> q_max, passage -> p_max)."""
    if role not in ("question", "passage"):
        raise ValueError(f"unknown role {role!r}")
    ids = vocab.encode_tokens(text)
    if not ids:
        raise EmptyText(f"no tokens in {text!r}")
    limit = q_max if role == "question" else p_max
    return TokenSequence(token_ids=tuple(ids[:limit]), max_len=limit)
