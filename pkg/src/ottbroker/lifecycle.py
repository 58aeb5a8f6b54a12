"""Instance state machine and the orchestration around provider work.

An accepted create request becomes an instance record that only ever moves
forward: REQUESTED, PROVISIONING, RUNNING, TERMINATING, TERMINATED, with
FAILED reachable from any non-terminal state.  History is append-only.
Provider adapters report back over the bus; results that do not fit the
current state are either replayed idempotently or discarded.
"""

from __future__ import annotations

import copy
import logging
import threading
import uuid
from datetime import datetime, timezone
from enum import Enum
from typing import Any

from .bus import EventBus
from .envelope import CommandVerb, MessageEnvelope, Reply, ReplyStatus
from .errors import (
    IllegalTransition,
    NotFound,
    NotRemovable,
    RevisionConflict,
    UnknownInstance,
)
from .store import BrokerStore
from .templates import ResolvedPayload

log = logging.getLogger(__name__)

RESULT_TOPIC = "status.providerresult"
NOTIFY_TOPIC = "status.notification"


class InstanceState(str, Enum):
    REQUESTED = "REQUESTED"
    PROVISIONING = "PROVISIONING"
    RUNNING = "RUNNING"
    TERMINATING = "TERMINATING"
    TERMINATED = "TERMINATED"
    FAILED = "FAILED"


TERMINAL_STATES = frozenset({InstanceState.TERMINATED, InstanceState.FAILED})

LEGAL_TRANSITIONS: dict[InstanceState, frozenset[InstanceState]] = {
    InstanceState.REQUESTED: frozenset({InstanceState.PROVISIONING, InstanceState.FAILED}),
    InstanceState.PROVISIONING: frozenset({InstanceState.RUNNING, InstanceState.FAILED}),
    InstanceState.RUNNING: frozenset({InstanceState.TERMINATING, InstanceState.FAILED}),
    InstanceState.TERMINATING: frozenset({InstanceState.TERMINATED, InstanceState.FAILED}),
    InstanceState.TERMINATED: frozenset(),
    InstanceState.FAILED: frozenset(),
}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat().replace("+00:00", "Z")


def provision_topic(provider_id: str) -> str:
    return f"create_{provider_id}"


def deprovision_topic(provider_id: str) -> str:
    return f"remove_{provider_id}"


class InstanceRegistry:
    """Instance records in the shared store, with transition legality
    enforced at the single write path."""

    KIND = "instance"

    def __init__(self, store: BrokerStore):
        self._store = store
        self._lock = threading.RLock()

    def create(self, doc: dict[str, Any]) -> dict[str, Any]:
        with self._lock:
            self._store.persist(self.KIND, doc["instanceId"], doc, expected_revision=0)
        return doc

    def exists(self, instance_id: str) -> bool:
        return self._store.exists(self.KIND, instance_id)

    def get(self, instance_id: str) -> dict[str, Any]:
        doc = self._store.get(self.KIND, instance_id)
        if doc is None:
            raise UnknownInstance(f"instance {instance_id}")
        return copy.deepcopy(doc)

    def list(self) -> list[dict[str, Any]]:
        return [copy.deepcopy(doc) for _, doc in self._store.documents(self.KIND)]

    def transition(
        self,
        instance_id: str,
        to_state: InstanceState,
        reason: str | None = None,
        extra: dict[str, Any] | None = None,
    ) -> dict[str, Any]:
        with self._lock:
            try:
                record = self._store.load(self.KIND, instance_id)
            except NotFound:
                raise UnknownInstance(f"instance {instance_id}") from None
            doc = copy.deepcopy(record.document)
            current = InstanceState(doc["state"])
            if current in TERMINAL_STATES:
                raise IllegalTransition(f"instance {instance_id} is terminal ({current.value})")
            if to_state not in LEGAL_TRANSITIONS[current]:
                raise IllegalTransition(
                    f"instance {instance_id}: {current.value} -> {to_state.value}"
                )
            doc["state"] = to_state.value
            entry: dict[str, Any] = {"state": to_state.value, "at": _now()}
            if reason:
                entry["reason"] = reason
            doc["history"].append(entry)
            if extra:
                doc.update(extra)
            self._store.persist(self.KIND, instance_id, doc, expected_revision=record.revision)
            return doc


class Lifecycle:
    """Drives instances through their states off bus events."""

    REPLY_KIND = "reply"

    def __init__(self, store: BrokerStore, bus: EventBus, registry: InstanceRegistry):
        self._store = store
        self._bus = bus
        self.registry = registry
        bus.subscribe(RESULT_TOPIC, self.handle_provider_result)
        bus.on_error = self._fail_on_handler_error

    # -- request entry points (called with the broker's write lock held) --

    def begin_create(
        self,
        offer_id: str,
        target: str,
        resolved: ResolvedPayload,
        request_ref: dict[str, Any],
        subscription_id: str | None = None,
    ) -> dict[str, Any]:
        instance_id = f"i-{uuid.uuid4().hex[:12]}"
        doc: dict[str, Any] = {
            "instanceId": instance_id,
            "offerId": offer_id,
            "target": target,
            "state": InstanceState.REQUESTED.value,
            "providerId": resolved.provider_id,
            "providerRef": None,
            "resolvedPayload": {
                "providerId": resolved.provider_id,
                "document": resolved.document,
                "sourceChain": list(resolved.source_chain),
            },
            "requesterWebhook": subscription_id,
            "requests": {"create": request_ref},
            "history": [{"state": InstanceState.REQUESTED.value, "at": _now()}],
        }
        self.registry.create(doc)
        doc = self.registry.transition(
            instance_id,
            InstanceState.PROVISIONING,
            reason=f"dispatched to {resolved.provider_id}",
        )
        envelope = MessageEnvelope(
            message_id=f"provision/{instance_id}",
            command=CommandVerb.CREATE,
            target=target,
            payload={
                "instanceId": instance_id,
                "providerId": resolved.provider_id,
                "offerId": offer_id,
                "document": resolved.document,
            },
        )
        self._bus.publish(
            provision_topic(resolved.provider_id), envelope, event_id=f"provision/{instance_id}"
        )
        return doc

    def begin_remove(
        self,
        instance_id: str,
        request_ref: dict[str, Any],
        subscription_id: str | None = None,
    ) -> dict[str, Any]:
        try:
            doc = self.registry.get(instance_id)
        except UnknownInstance:
            raise NotFound(f"instance {instance_id}") from None
        state = InstanceState(doc["state"])
        if state in TERMINAL_STATES:
            raise NotRemovable(f"instance {instance_id} already {state.value}")
        if state is not InstanceState.RUNNING:
            # No cancel of in-flight provisioning; callers wait for RUNNING.
            raise NotRemovable(f"instance {instance_id} is {state.value}")
        requests = dict(doc.get("requests", {}))
        requests["remove"] = request_ref
        extra: dict[str, Any] = {"requests": requests}
        if subscription_id is not None:
            extra["requesterWebhook"] = subscription_id
        doc = self.registry.transition(
            instance_id,
            InstanceState.TERMINATING,
            reason="remove requested",
            extra=extra,
        )
        envelope = MessageEnvelope(
            message_id=f"deprovision/{instance_id}",
            command=CommandVerb.REMOVE,
            target=doc["target"],
            payload={
                "instanceId": instance_id,
                "providerId": doc["providerId"],
                "providerRef": doc.get("providerRef"),
            },
        )
        self._bus.publish(
            deprovision_topic(doc["providerId"]), envelope, event_id=f"deprovision/{instance_id}"
        )
        return doc

    # -- bus handlers --

    def handle_provider_result(self, envelope: MessageEnvelope) -> None:
        payload = envelope.payload
        instance_id = payload.get("instanceId")
        action = payload.get("action")
        ok = bool(payload.get("ok"))
        if not isinstance(instance_id, str) or action not in ("provision", "deprovision"):
            log.warning("malformed provider result discarded: %s", payload)
            return
        try:
            doc = self.registry.get(instance_id)
        except UnknownInstance:
            log.warning("provider result for unknown instance %s discarded", instance_id)
            return
        state = InstanceState(doc["state"])
        reason = payload.get("reason") or f"{action} failed"
        if state in TERMINAL_STATES:
            # Replays after a crash land here; re-run the idempotent finish
            # for the case that actually matches, drop everything else.
            if action == "provision":
                if ok and doc.get("providerRef") == payload.get("providerRef"):
                    self._finish(instance_id, "create", ReplyStatus.COMPLETED, "instance running")
                elif not ok and state is InstanceState.FAILED:
                    self._finish(instance_id, "create", ReplyStatus.FAILED, reason)
            else:
                if ok and state is InstanceState.TERMINATED:
                    self._finish(instance_id, "remove", ReplyStatus.COMPLETED, "instance released")
                elif not ok and state is InstanceState.FAILED:
                    self._finish(instance_id, "remove", ReplyStatus.FAILED, reason)
            return

        if action == "provision":
            self._apply_provision_result(instance_id, state, doc, ok, payload, reason)
        else:
            self._apply_deprovision_result(instance_id, state, ok, reason)

    def _apply_provision_result(
        self,
        instance_id: str,
        state: InstanceState,
        doc: dict[str, Any],
        ok: bool,
        payload: dict[str, Any],
        reason: str,
    ) -> None:
        if ok:
            ref = payload.get("providerRef")
            if state is InstanceState.PROVISIONING:
                self.registry.transition(
                    instance_id, InstanceState.RUNNING, extra={"providerRef": ref}
                )
                self._finish(instance_id, "create", ReplyStatus.COMPLETED, "instance running")
            elif state is InstanceState.RUNNING and doc.get("providerRef") == ref:
                # Duplicate delivery; the finish path dedups on its own.
                self._finish(instance_id, "create", ReplyStatus.COMPLETED, "instance running")
            elif state is InstanceState.TERMINATING:
                log.info("stale provision result for %s discarded", instance_id)
            else:
                violation = "protocol violation"
                log.warning("provision result in state %s for %s", state.value, instance_id)
                self.registry.transition(instance_id, InstanceState.FAILED, reason=violation)
                self._finish(instance_id, "create", ReplyStatus.FAILED, violation)
        else:
            if state in (InstanceState.REQUESTED, InstanceState.PROVISIONING):
                self.registry.transition(instance_id, InstanceState.FAILED, reason=reason)
                self._finish(instance_id, "create", ReplyStatus.FAILED, reason)
            elif state is InstanceState.RUNNING:
                # Provider reports the instance lost after it was up; the
                # create request was already answered, only history records it.
                self.registry.transition(instance_id, InstanceState.FAILED, reason=reason)
            else:
                log.info("stale provision failure for %s discarded", instance_id)

    def _apply_deprovision_result(
        self, instance_id: str, state: InstanceState, ok: bool, reason: str
    ) -> None:
        if ok:
            if state is InstanceState.TERMINATING:
                self.registry.transition(instance_id, InstanceState.TERMINATED, reason="released")
                self._finish(instance_id, "remove", ReplyStatus.COMPLETED, "instance released")
            else:
                violation = "protocol violation"
                log.warning("deprovision result in state %s for %s", state.value, instance_id)
                self.registry.transition(instance_id, InstanceState.FAILED, reason=violation)
                self._finish(instance_id, "create", ReplyStatus.FAILED, violation)
        else:
            if state is InstanceState.TERMINATING:
                self.registry.transition(instance_id, InstanceState.FAILED, reason=reason)
                self._finish(instance_id, "remove", ReplyStatus.FAILED, reason)
            else:
                log.info("stale deprovision failure for %s discarded", instance_id)

    def _fail_on_handler_error(self, topic: str, envelope: MessageEnvelope, exc: Exception) -> None:
        instance_id = envelope.payload.get("instanceId")
        if not isinstance(instance_id, str):
            return
        try:
            self.registry.transition(
                instance_id, InstanceState.FAILED, reason=f"handler error: {exc}"
            )
        except (UnknownInstance, IllegalTransition):
            pass

    # -- terminal replies and notification fan-out --

    def _finish(
        self, instance_id: str, kind: str, status: ReplyStatus, detail: str
    ) -> None:
        """Persist the terminal reply for the open request of `kind` and queue
        the webhook notification.  Safe to call repeatedly: the first reply
        wins and the notify event id is deterministic."""
        doc = self.registry.get(instance_id)
        ref = (doc.get("requests") or {}).get(kind)
        if not ref:
            return
        message_id = ref["messageId"]
        result: dict[str, Any] = {
            "instanceId": instance_id,
            "state": doc["state"],
        }
        if doc.get("providerRef"):
            result["providerRef"] = doc["providerRef"]
        if status is ReplyStatus.FAILED:
            result["reason"] = detail
        reply = Reply(
            status=status,
            detail=detail,
            correlation_id=message_id,
            result_payload=result,
            extra=ref.get("extra") or {},
        )
        try:
            self._store.persist(self.REPLY_KIND, message_id, reply.to_dict(), expected_revision=0)
        except RevisionConflict:
            pass  # a terminal reply exists; never overwrite it
        if doc.get("requesterWebhook"):
            envelope = MessageEnvelope(
                message_id=f"notify/{message_id}",
                command=CommandVerb.STATUS,
                target="Notification",
                payload={
                    "subscriptionId": doc["requesterWebhook"],
                    "instanceId": instance_id,
                    "reply": self.reply_for(message_id).to_dict(),  # type: ignore[union-attr]
                },
            )
            self._bus.publish(NOTIFY_TOPIC, envelope, event_id=f"notify/{message_id}")

    def reply_for(self, message_id: str) -> Reply | None:
        doc = self._store.get(self.REPLY_KIND, message_id)
        return Reply.from_dict(doc) if doc is not None else None
