"""At-least-once internal event bus on top of the shared store.

Events append under kind 'event'; a matching record under kind 'delivery'
marks one as handled.  Anything without a delivery record is replayed after
a restart, so handlers have to be idempotent.  Publishers that pass a
deterministic event id get dedup on re-emission for free.
"""

from __future__ import annotations

import logging
import threading
import uuid
from typing import Callable

from .envelope import MessageEnvelope, parse_envelope
from .store import BrokerStore

log = logging.getLogger(__name__)

Handler = Callable[[MessageEnvelope], None]
ErrorHook = Callable[[str, MessageEnvelope, Exception], None]

# Outcomes recorded per event.
DELIVERED = "delivered"
FAILED = "failed"
DISCARDED = "discarded"


class EventBus:
    EVENT_KIND = "event"
    DELIVERY_KIND = "delivery"

    def __init__(self, store: BrokerStore):
        self._store = store
        self._handlers: dict[str, list[Handler]] = {}
        self._wake = threading.Condition()
        self._worker: threading.Thread | None = None
        self._stopping = False
        self._drain_lock = threading.RLock()
        self.on_error: ErrorHook | None = None
        self._seq = 0
        self._seen_event_ids: set[str] = set()
        for key, doc in store.documents(self.EVENT_KIND):
            self._seq = max(self._seq, int(key))
            self._seen_event_ids.add(doc["eventId"])

    @property
    def running(self) -> bool:
        return self._worker is not None

    def subscribe(self, topic: str, handler: Handler) -> None:
        self._handlers.setdefault(topic, []).append(handler)

    def unsubscribe(self, topic: str) -> None:
        """Drop every handler for ``topic``; later events there are
        discarded (partition simulation)."""
        self._handlers.pop(topic, None)

    def publish(self, topic: str, envelope: MessageEnvelope, event_id: str | None = None) -> str:
        """Append an event; returns its id.  A previously seen event id is a
        no-op, which makes crash-replay re-publication safe."""
        with self._wake:
            if event_id is None:
                event_id = f"evt-{uuid.uuid4().hex}"
            elif event_id in self._seen_event_ids:
                return event_id
            self._seq += 1
            key = f"{self._seq:010d}"
            self._store.persist(
                self.EVENT_KIND,
                key,
                {"eventId": event_id, "topic": topic, "envelope": envelope.to_dict()},
                expected_revision=0,
            )
            self._seen_event_ids.add(event_id)
            self._wake.notify_all()
            return event_id

    def pending(self) -> list[dict]:
        """Event documents not yet marked handled, in append order."""
        return [
            doc
            for _, doc in self._store.documents(self.EVENT_KIND)
            if not self._store.exists(self.DELIVERY_KIND, doc["eventId"])
        ]

    def drain(self, max_events: int | None = None) -> int:
        """Handle pending events until none remain (or the cap is hit).
        Handlers may publish more; those are picked up in the same drain."""
        processed = 0
        with self._drain_lock:
            while max_events is None or processed < max_events:
                batch = self.pending()
                if not batch:
                    break
                for doc in batch:
                    if max_events is not None and processed >= max_events:
                        break
                    if self._dispatch(doc):
                        processed += 1
        return processed

    def _dispatch(self, doc: dict) -> bool:
        event_id = doc["eventId"]
        if self._store.exists(self.DELIVERY_KIND, event_id):
            return False
        topic = doc["topic"]
        envelope = parse_envelope(doc["envelope"])
        handlers = self._handlers.get(topic, [])
        if not handlers:
            # No subscriber for the topic: the event is dropped, not retried.
            log.warning("event %s on %s has no subscriber, discarded", event_id, topic)
            status = DISCARDED
        else:
            status = DELIVERED
            try:
                for handler in handlers:
                    handler(envelope)
            except Exception as exc:
                log.exception("handler for %s failed on event %s", topic, event_id)
                status = FAILED
                if self.on_error is not None:
                    try:
                        self.on_error(topic, envelope, exc)
                    except Exception:
                        log.exception("error hook failed for event %s", event_id)
        # Written after handling: a crash in between means redelivery.  The
        # write is unconditional so a redelivered event always leaves the
        # pending set, whatever revision the record is at.
        self._store.persist(
            self.DELIVERY_KIND,
            event_id,
            {"topic": topic, "status": status, "attempt": 1},
        )
        return True

    def start(self) -> None:
        if self._worker is not None:
            return
        self._stopping = False
        self._worker = threading.Thread(target=self._run, name="bus-worker", daemon=True)
        self._worker.start()

    def stop(self) -> None:
        worker = self._worker
        if worker is None:
            return
        with self._wake:
            self._stopping = True
            self._wake.notify_all()
        worker.join(timeout=10)
        self._worker = None

    def _run(self) -> None:
        while True:
            self.drain()
            with self._wake:
                if self._stopping:
                    return
                self._wake.wait(timeout=0.1)
