"""Append-only JSONL feedback store with serialized writes."""

from __future__ import annotations

import json
import threading
from pathlib import Path

from .reranker import FeedbackRecord


class FeedbackStore:
    """One FeedbackRecord per line; writes are serialized by a lock so the
    file is safe under concurrent request handling."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def append(self, record: FeedbackRecord) -> int:
        """Append a record and return the total stored count."""
        line = json.dumps(record.to_record())
        with self._lock:
            with self.path.open("a") as fh:
                fh.write(line + "\n")
                fh.flush()
            return self._count_unlocked()

    def records(self) -> list[FeedbackRecord]:
        if not self.path.exists():
            return []
        with self._lock:
            lines = self.path.read_text().splitlines()
        return [FeedbackRecord.from_record(json.loads(l)) for l in lines if l.strip()]

    def count(self) -> int:
        with self._lock:
            return self._count_unlocked()

    def counts_by_domain(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for rec in self.records():
            out[rec.domain] = out.get(rec.domain, 0) + 1
        return out

    def _count_unlocked(self) -> int:
        if not self.path.exists():
            return 0
        return sum(1 for l in self.path.read_text().splitlines() if l.strip())
