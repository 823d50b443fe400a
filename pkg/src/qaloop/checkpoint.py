"""Model checkpoints: a directory holding a metadata manifest, the vocab,
and the parameter blob. Shared by the retriever and the reranker."""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import torch

from .reranker import RerankerConfig, RerankerModel
from .retriever import EncoderConfig, RetrieverConfig, RetrieverModel
from .vocab import Vocab

MANIFEST = "manifest.json"
WEIGHTS = "weights.pt"
VOCAB = "vocab.json"


class MissingCheckpoint(FileNotFoundError):
    pass


def _write(path: Path, model, vocab: Vocab, manifest: dict) -> None:
    path.mkdir(parents=True, exist_ok=True)
    manifest["vocab_hash"] = vocab.content_hash()
    (path / MANIFEST).write_text(json.dumps(manifest, indent=1))
    vocab.save(path / VOCAB)
    torch.save(model.state_dict(), path / WEIGHTS)


def _read_manifest(path: Path) -> dict:
    if not (path / MANIFEST).exists():
        raise MissingCheckpoint(f"no manifest at {path}")
    return json.loads((path / MANIFEST).read_text())


def save_retriever(path: str | Path, model: RetrieverModel, vocab: Vocab,
                   extra: dict | None = None) -> None:
    manifest = {
        "kind": "retriever",
        "config": {
            "scorer": model.cfg.scorer,
            "poly_m": model.cfg.poly_m,
            "encoder": dataclasses.asdict(model.cfg.encoder),
        },
    }
    manifest.update(extra or {})
    _write(Path(path), model, vocab, manifest)


def load_retriever(path: str | Path) -> tuple[RetrieverModel, Vocab, dict]:
    path = Path(path)
    manifest = _read_manifest(path)
    if manifest["kind"] != "retriever":
        raise ValueError(f"{path} is a {manifest['kind']} checkpoint")
    cfg = RetrieverConfig(
        encoder=EncoderConfig(**manifest["config"]["encoder"]),
        scorer=manifest["config"]["scorer"],
        poly_m=manifest["config"]["poly_m"],
    )
    model = RetrieverModel(cfg)
    model.load_state_dict(torch.load(path / WEIGHTS, weights_only=True))
    model.eval()
    vocab = Vocab.load(path / VOCAB)
    return model, vocab, manifest


def save_reranker(path: str | Path, model: RerankerModel, vocab: Vocab,
                  extra: dict | None = None) -> None:
    manifest = {"kind": "reranker", "config": dataclasses.asdict(model.cfg)}
    manifest.update(extra or {})
    _write(Path(path), model, vocab, manifest)


def load_reranker(path: str | Path) -> tuple[RerankerModel, Vocab, dict]:
    path = Path(path)
    manifest = _read_manifest(path)
    if manifest["kind"] != "reranker":
        raise ValueError(f"{path} is a {manifest['kind']} checkpoint")
    model = RerankerModel(RerankerConfig(**manifest["config"]))
    model.load_state_dict(torch.load(path / WEIGHTS, weights_only=True))
    model.eval()
    vocab = Vocab.load(path / VOCAB)
    return model, vocab, manifest
