"""Shared broker store: embedded key-value records with optimistic revisions.

Backed by an append-only JSONL log so state survives restarts and a crash
mid-write costs at most the torn final line.  All broker workers treat the
store as the single source of truth; nothing else needs to survive a
restart.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator

from .errors import NotFound, RevisionConflict, ValidationError

logger = logging.getLogger(__name__)

# Record kinds with append-only discipline: existing keys must not be
# rewritten.
_APPEND_ONLY_KINDS = {"event"}


@dataclass(frozen=True)
class StoreRecord:
    kind: str
    key: str
    document: dict[str, Any] | None
    revision: int

    def to_line(self) -> str:
        return json.dumps(
            {
                "kind": self.kind,
                "key": self.key,
                "document": self.document,
                "revision": self.revision,
            },
            ensure_ascii=False,
        )


class BrokerStore:
    """Thread-safe store; pass ``path=None`` for a memory-only instance."""

    def __init__(self, path: str | Path | None = None, fsync: bool = False):
        self._lock = threading.RLock()
        self._records: dict[tuple[str, str], StoreRecord] = {}
        self._mutations = 0
        self._fsync = fsync
        self._path = Path(path) if path is not None else None
        self._fh = None
        if self._path is not None:
            self._replay_log()
            self._fh = open(self._path, "a", encoding="utf-8")

    def _replay_log(self):
        if not self._path.exists():
            self._path.parent.mkdir(parents=True, exist_ok=True)
            return
        torn = 0
        with open(self._path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    doc = json.loads(line)
                    record = StoreRecord(
                        kind=doc["kind"],
                        key=doc["key"],
                        document=doc["document"],
                        revision=int(doc["revision"]),
                    )
                except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                    # Torn tail from a crash mid-append; drop and move on.
                    torn += 1
                    continue
                self._records[(record.kind, record.key)] = record
                self._mutations += 1
        if torn:
            logger.warning("store replay dropped %d unparseable line(s) from %s", torn, self._path)

    def _append(self, record: StoreRecord):
        if self._fh is None:
            return
        self._fh.write(record.to_line() + "\n")
        self._fh.flush()
        if self._fsync:
            os.fsync(self._fh.fileno())

    @property
    def mutation_count(self) -> int:
        """Total writes applied; unchanged means the store was not touched."""
        with self._lock:
            return self._mutations

    def persist(
        self,
        kind: str,
        key: str,
        document: dict[str, Any],
        expected_revision: int | None = None,
    ) -> int:
        """Write a record, returning its new revision.

        With `expected_revision` set, the write is rejected unless the
        current revision matches (0 for "must not exist yet").
        """
        with self._lock:
            current = self._records.get((kind, key))
            live = current is not None and current.document is not None
            if kind in _APPEND_ONLY_KINDS and live:
                raise ValidationError(f"{kind} records are append-only: {key}")
            current_rev = current.revision if current is not None else 0
            if expected_revision is not None and expected_revision != current_rev:
                raise RevisionConflict(
                    f"{kind}/{key}: expected revision {expected_revision}, have {current_rev}"
                )
            record = StoreRecord(kind=kind, key=key, document=document, revision=current_rev + 1)
            self._records[(kind, key)] = record
            self._mutations += 1
            self._append(record)
            return record.revision

    def load(self, kind: str, key: str) -> StoreRecord:
        with self._lock:
            record = self._records.get((kind, key))
            if record is None or record.document is None:
                raise NotFound(f"{kind}/{key}")
            return record

    def get(self, kind: str, key: str) -> dict[str, Any] | None:
        """Document for kind/key, or None when absent."""
        with self._lock:
            record = self._records.get((kind, key))
            if record is None or record.document is None:
                return None
            return record.document

    def exists(self, kind: str, key: str) -> bool:
        return self.get(kind, key) is not None

    def delete(self, kind: str, key: str, expected_revision: int | None = None) -> None:
        """Tombstone a record; deleting keeps the revision history."""
        with self._lock:
            current = self._records.get((kind, key))
            if current is None or current.document is None:
                raise NotFound(f"{kind}/{key}")
            if kind in _APPEND_ONLY_KINDS:
                raise ValidationError(f"{kind} records are append-only: {key}")
            if expected_revision is not None and expected_revision != current.revision:
                raise RevisionConflict(
                    f"{kind}/{key}: expected revision {expected_revision}, have {current.revision}"
                )
            record = StoreRecord(kind=kind, key=key, document=None, revision=current.revision + 1)
            self._records[(kind, key)] = record
            self._mutations += 1
            self._append(record)

    def records(self, kind: str) -> list[StoreRecord]:
        """Live records of one kind, ordered by key."""
        with self._lock:
            found = [
                record
                for (record_kind, _), record in self._records.items()
                if record_kind == kind and record.document is not None
            ]
        return sorted(found, key=lambda record: record.key)

    def keys(self, kind: str) -> list[str]:
        return [record.key for record in self.records(kind)]

    def documents(self, kind: str) -> Iterator[tuple[str, dict[str, Any]]]:
        for record in self.records(kind):
            yield record.key, record.document

    def close(self):
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None
