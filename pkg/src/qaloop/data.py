"""Passage/question corpus: loading, validation, writing, and splitting.

Corpus files are JSONL, one record per line. Passage records carry
{"id", "domain", "text"} (plus optional "source_url"); question records
additionally carry "gold_passage_ids". Passage ids are unique within a
domain; every gold passage id must resolve to a passage in the same domain.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

logger = logging.getLogger(__name__)

DEFAULT_DOMAINS = ("Australia", "Canada", "UK", "US", "WHO")


class CorpusError(Exception):
    """Base class for corpus validation failures."""


class MalformedRecord(CorpusError):
    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {reason}")


class DuplicateId(CorpusError):
    def __init__(self, record_id: str, domain: str):
        self.record_id = record_id
        super().__init__(f"duplicate id {record_id!r} in domain {domain!r}")


class DanglingGoldId(CorpusError):
    def __init__(self, question_id: str, gold_id: str):
        self.question_id = question_id
        super().__init__(
            f"question {question_id!r} references unknown passage {gold_id!r}"
        )


class BadRatios(CorpusError):
    pass


@dataclass(frozen=True)
class Passage:
    id: str
    domain: str
    text: str
    source_url: str | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("passage id must be non-empty")
        if not self.text:
            raise ValueError(f"passage {self.id!r} has empty text")

    def to_record(self) -> dict:
        rec = {"id": self.id, "domain": self.domain, "text": self.text}
        if self.source_url is not None:
            rec["source_url"] = self.source_url
        return rec


@dataclass(frozen=True)
class Question:
    id: str
    domain: str
    text: str
    gold_passage_ids: tuple[str, ...]

    def __post_init__(self):
        if not self.id:
            raise ValueError("question id must be non-empty")
        if not self.text:
            raise ValueError(f"question {self.id!r} has empty text")
        if not self.gold_passage_ids:
            raise ValueError(f"question {self.id!r} has no gold passages")

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "domain": self.domain,
            "text": self.text,
            "gold_passage_ids": list(self.gold_passage_ids),
        }


@dataclass
class CorpusSplit:
    train: set[str]
    valid: set[str]
    test: set[str]
    ratios: tuple[float, float, float]
    seed: int

    def __post_init__(self):
        if self.train & self.valid or self.train & self.test or self.valid & self.test:
            raise ValueError("split sets must be pairwise disjoint")

    @property
    def all_ids(self) -> set[str]:
        return self.train | self.valid | self.test

    def to_record(self) -> dict:
        return {
            "train": sorted(self.train),
            "valid": sorted(self.valid),
            "test": sorted(self.test),
            "ratios": list(self.ratios),
            "seed": self.seed,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "CorpusSplit":
        return cls(
            train=set(rec["train"]),
            valid=set(rec["valid"]),
            test=set(rec["test"]),
            ratios=tuple(rec["ratios"]),
            seed=rec["seed"],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_record(), indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "CorpusSplit":
        return cls.from_record(json.loads(Path(path).read_text()))


def load_corpus(path: str | Path) -> tuple[list[Passage], list[Question]]:
    """Read a JSONL corpus file and validate all invariants.

    Returns (passages, questions). An empty file yields empty lists with a
    warning. Raises MalformedRecord / DuplicateId / DanglingGoldId.
    """
    path = Path(path)
    passages: list[Passage] = []
    questions: list[Question] = []
    passage_keys: set[tuple[str, str]] = set()
    question_ids: set[str] = set()

    with path.open() as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(line_no, f"invalid JSON: {exc}") from exc
            if not isinstance(rec, dict):
                raise MalformedRecord(line_no, "record is not an object")
            for key in ("id", "domain", "text"):
                if not rec.get(key):
                    raise MalformedRecord(line_no, f"missing or empty {key!r}")
            if "gold_passage_ids" in rec:
                gold = rec["gold_passage_ids"]
                if not isinstance(gold, list) or not gold:
                    raise MalformedRecord(line_no, "gold_passage_ids must be a non-empty list")
                if rec["id"] in question_ids:
                    raise DuplicateId(rec["id"], rec["domain"])
                question_ids.add(rec["id"])
                questions.append(
                    Question(
                        id=rec["id"],
                        domain=rec["domain"],
                        text=rec["text"],
                        gold_passage_ids=tuple(gold),
                    )
                )
            else:
                key = (rec["domain"], rec["id"])
                if key in passage_keys:
                    raise DuplicateId(rec["id"], rec["domain"])
                passage_keys.add(key)
                passages.append(
                    Passage(
                        id=rec["id"],
                        domain=rec["domain"],
                        text=rec["text"],
                        source_url=rec.get("source_url"),
                    )
                )

    for q in questions:
        for gid in q.gold_passage_ids:
            if (q.domain, gid) not in passage_keys:
                raise DanglingGoldId(q.id, gid)

    if not passages and not questions:
        logger.warning("corpus file %s is empty", path)
    return passages, questions


def write_corpus(
    path: str | Path, passages: list[Passage], questions: list[Question]
) -> None:
    """Write passages then questions as JSONL (inverse of load_corpus)."""
    with Path(path).open("w") as fh:
        for p in passages:
            fh.write(json.dumps(p.to_record()) + "\n")
        for q in questions:
            fh.write(json.dumps(q.to_record()) + "\n")


def passages_by_domain(passages: list[Passage]) -> dict[str, list[Passage]]:
    out: dict[str, list[Passage]] = {}
    for p in passages:
        out.setdefault(p.domain, []).append(p)
    for plist in out.values():
        plist.sort(key=lambda p: p.id)
    return out


def split_corpus(
    questions: list[Question],
    ratios: tuple[float, float, float] = (0.7, 0.1, 0.2),
    seed: int = 0,
) -> CorpusSplit:
    """Deterministic per-domain stratified split into train/valid/test.

    Within each domain, |train| = floor(r1*N), |valid| = floor(r2*N),
    |test| = floor(r3*N); leftover questions go to train, then valid,
    then test.
    """
    if any(r < 0 for r in ratios):
        raise BadRatios(f"negative ratio in {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise BadRatios(f"ratios {ratios} sum to {sum(ratios)}, expected 1")

    by_domain: dict[str, list[str]] = {}
    for q in questions:
        by_domain.setdefault(q.domain, []).append(q.id)

    rng = random.Random(seed)
    train: set[str] = set()
    valid: set[str] = set()
    test: set[str] = set()
    for domain in sorted(by_domain):
        ids = sorted(by_domain[domain])
        rng.shuffle(ids)
        n = len(ids)
        counts = [math.floor(r * n) for r in ratios]
        remainder = n - sum(counts)
        for i in range(remainder):
            counts[i % 3] += 1
        train.update(ids[: counts[0]])
        valid.update(ids[counts[0] : counts[0] + counts[1]])
        test.update(ids[counts[0] + counts[1] :])
    return CorpusSplit(train=train, valid=valid, test=test, ratios=tuple(ratios), seed=seed)
