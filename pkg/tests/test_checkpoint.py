import pytest
import torch

from qaloop.checkpoint import (
    MissingCheckpoint,
    load_reranker,
    load_retriever,
    save_reranker,
    save_retriever,
)
from qaloop.data import Passage
from qaloop.reranker import RerankerConfig, build_reranker, rate
from qaloop.retriever import (
    EncoderConfig,
    RetrieverConfig,
    build_retriever,
    retrieve_topk,
)
from qaloop.vocab import Vocab


@pytest.fixture(scope="module")
def vocab():
    return Vocab.build(["alpha beta gamma", "delta epsilon", "what alpha"])


@pytest.fixture(scope="module")
def passages():
    return [Passage(id=f"p{i}", domain="UK", text="alpha beta gamma")
            for i in range(3)]


def test_retriever_round_trip(tmp_path, vocab, passages):
    model = build_retriever(
        RetrieverConfig(encoder=EncoderConfig(vocab_size=len(vocab), hidden_dim=16,
                                              dropout=0.0), scorer="poly", poly_m=3),
        seed=0)
    save_retriever(tmp_path / "ckpt", model, vocab, extra={"note": "x"})
    loaded, loaded_vocab, manifest = load_retriever(tmp_path / "ckpt")
    assert manifest["kind"] == "retriever"
    assert manifest["note"] == "x"
    assert manifest["vocab_hash"] == vocab.content_hash()
    assert loaded.cfg.scorer == "poly" and loaded.cfg.poly_m == 3
    assert loaded_vocab.itos == vocab.itos
    before = retrieve_topk(model, vocab, "what alpha", passages, 3)
    after = retrieve_topk(loaded, loaded_vocab, "what alpha", passages, 3)
    assert before == after


def test_retriever_weights_identical(tmp_path, vocab):
    model = build_retriever(
        RetrieverConfig(encoder=EncoderConfig(vocab_size=len(vocab), hidden_dim=16)),
        seed=1)
    save_retriever(tmp_path / "ckpt", model, vocab)
    loaded, _, _ = load_retriever(tmp_path / "ckpt")
    for k, v in model.state_dict().items():
        assert torch.equal(v, loaded.state_dict()[k])


def test_reranker_round_trip(tmp_path, vocab):
    model = build_reranker(
        RerankerConfig(vocab_size=len(vocab), emb_dim=8, hidden_dim=16,
                       mode="explain_then_rate"), seed=0)
    save_reranker(tmp_path / "ckpt", model, vocab)
    loaded, loaded_vocab, manifest = load_reranker(tmp_path / "ckpt")
    assert manifest["kind"] == "reranker"
    assert loaded.cfg.mode == "explain_then_rate"
    before = rate(model, "what alpha", "alpha beta gamma", vocab)
    after = rate(loaded, "what alpha", "alpha beta gamma", loaded_vocab)
    assert before == after


def test_kind_mismatch_rejected(tmp_path, vocab):
    model = build_reranker(RerankerConfig(vocab_size=len(vocab), emb_dim=8,
                                          hidden_dim=16), seed=0)
    save_reranker(tmp_path / "ckpt", model, vocab)
    with pytest.raises(ValueError):
        load_retriever(tmp_path / "ckpt")


def test_missing_checkpoint(tmp_path):
    with pytest.raises(MissingCheckpoint):
        load_retriever(tmp_path / "nope")
