"""Webhook subscriptions and outbound delivery with bounded retries."""

from __future__ import annotations

import logging
import threading
import time
import uuid
from typing import Any, Callable

from .bus import EventBus
from .envelope import MessageEnvelope
from .errors import NotFound, RevisionConflict, ValidationError
from .lifecycle import NOTIFY_TOPIC
from .store import BrokerStore

log = logging.getLogger(__name__)

# Callable(url, json_body, headers) -> HTTP status code.
Transport = Callable[[str, dict[str, Any], dict[str, str]], int]

TOKEN_HEADER = "X-Broker-Token"
EVENT_HEADER = "X-Broker-Event-Id"


def httpx_transport(url: str, body: dict[str, Any], headers: dict[str, str]) -> int:
    import httpx

    response = httpx.post(url, json=body, headers=headers, timeout=5.0)
    return response.status_code


class SubscriptionRegistry:
    KIND = "webhook-sub"

    def __init__(self, store: BrokerStore):
        self._store = store
        self._lock = threading.RLock()

    def register(self, url: str, secret_token: str | None = None) -> dict[str, Any]:
        if not url or not url.startswith(("http://", "https://")):
            raise ValidationError(f"webhook url must be http(s), got {url!r}")
        doc = {
            "subscriptionId": f"sub-{uuid.uuid4().hex[:10]}",
            "url": url,
            "secretToken": secret_token,
            "active": True,
        }
        with self._lock:
            self._store.persist(self.KIND, doc["subscriptionId"], doc, expected_revision=0)
        return doc

    def get(self, subscription_id: str) -> dict[str, Any]:
        doc = self._store.get(self.KIND, subscription_id)
        if doc is None:
            raise NotFound(f"subscription {subscription_id}")
        return doc

    def exists(self, subscription_id: str) -> bool:
        return self._store.exists(self.KIND, subscription_id)

    def deactivate(self, subscription_id: str) -> None:
        with self._lock:
            doc = dict(self.get(subscription_id))
            doc["active"] = False
            self._store.persist(self.KIND, subscription_id, doc)

    def list(self) -> list[dict[str, Any]]:
        return [doc for _, doc in self._store.documents(self.KIND)]


class WebhookDeliverer:
    """Pushes terminal notifications to subscribers.

    One delivery record per notification event id caps the effect at one
    successful webhook per request, no matter how often the bus replays the
    event.  A failed POST is retried over `backoff_s`, then the record goes
    dead.
    """

    KIND = "webhook-delivery"

    def __init__(
        self,
        store: BrokerStore,
        subscriptions: SubscriptionRegistry,
        bus: EventBus,
        transport: Transport | None = None,
        backoff_s: tuple[float, ...] = (1.0, 2.0, 4.0),
        sleeper: Callable[[float], None] = time.sleep,
    ):
        self._store = store
        self._subscriptions = subscriptions
        self._transport = transport or httpx_transport
        self._backoff_s = backoff_s
        self._sleep = sleeper
        bus.subscribe(NOTIFY_TOPIC, self.handle_notification)

    def handle_notification(self, envelope: MessageEnvelope) -> None:
        event_id = envelope.message_id
        if self._store.exists(self.KIND, event_id):
            return  # already pushed (or given up); bus replay must not resend
        payload = envelope.payload
        subscription_id = payload.get("subscriptionId")
        record: dict[str, Any] = {"subscriptionId": subscription_id, "attempts": 0}
        try:
            subscription = self._subscriptions.get(subscription_id)
        except NotFound:
            subscription = None
        if subscription is None or not subscription.get("active", False):
            record["status"] = "dead"
            record["reason"] = "subscription missing or inactive"
            self._record(event_id, record)
            return
        headers = {EVENT_HEADER: event_id}
        if subscription.get("secretToken"):
            headers[TOKEN_HEADER] = subscription["secretToken"]
        # The body is the terminal reply itself; correlationId points the
        # receiver back at its request.
        body = payload.get("reply") or {}
        status: int | None = None
        attempts = 0
        for wait_s in (0.0, *self._backoff_s):
            if wait_s:
                self._sleep(wait_s)
            attempts += 1
            try:
                status = self._transport(subscription["url"], body, headers)
            except Exception as exc:
                log.warning("webhook POST to %s raised: %s", subscription["url"], exc)
                status = None
            if status is not None and 200 <= status < 300:
                break
        record["attempts"] = attempts
        if status is not None and 200 <= status < 300:
            record["status"] = "delivered"
        else:
            record["status"] = "dead"
            record["lastStatus"] = status
        self._record(event_id, record)

    def _record(self, event_id: str, record: dict[str, Any]) -> None:
        try:
            self._store.persist(self.KIND, event_id, record, expected_revision=0)
        except RevisionConflict:
            pass

    def deliveries(self) -> list[dict[str, Any]]:
        return [
            {"eventId": key, **doc} for key, doc in self._store.documents(self.KIND)
        ]
