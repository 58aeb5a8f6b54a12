"""Command dispatch: envelopes in, replies out.

Routing goes by ``<command>.<target>``; the Template target addresses the
template plane, every other target goes through offers and instances.
Every submit answers synchronously with an accepted (or raised) reply;
instance work finishes later through the bus and lands as a terminal
completed or failed reply.
"""

from __future__ import annotations

import threading
from typing import Any, Callable

from .catalog import Catalog
from .envelope import (
    CommandVerb,
    MessageEnvelope,
    Reply,
    ReplyStatus,
    make_reply,
)
from .errors import (
    DuplicateMessageId,
    NoHandler,
    NoOfferMatched,
    NotFound,
    RevisionConflict,
    UnknownCorrelation,
    ValidationError,
)
from .lifecycle import Lifecycle
from .store import BrokerStore
from .templates import Template, TemplateStore
from .webhooks import SubscriptionRegistry

TEMPLATE_TARGET = "template"


class Broker:
    """Single entry point for envelope processing.

    All mutating paths run under one lock, so processing is serialized even
    when the ASGI server shares the process with the bus worker.
    """

    REQUEST_KIND = "request"

    def __init__(
        self,
        store: BrokerStore,
        templates: TemplateStore,
        catalog: Catalog,
        lifecycle: Lifecycle,
        subscriptions: SubscriptionRegistry,
        default_radius_km: float = 100.0,
    ):
        self._store = store
        self._templates = templates
        self._catalog = catalog
        self._lifecycle = lifecycle
        self._subscriptions = subscriptions
        self._default_radius_km = default_radius_km
        self._lock = threading.RLock()

    def submit(self, envelope: MessageEnvelope) -> Reply:
        """Process one envelope and return its first reply.

        Raises broker errors for anything the request itself got wrong;
        the gateway maps those to HTTP statuses.
        """
        with self._lock:
            if envelope.correlation_id is not None and not self._store.exists(
                self.REQUEST_KIND, envelope.correlation_id
            ):
                raise UnknownCorrelation(
                    f"correlationId {envelope.correlation_id} references no known message"
                )
            try:
                self._store.persist(
                    self.REQUEST_KIND,
                    envelope.message_id,
                    {"command": envelope.command.value, "target": envelope.target},
                    expected_revision=0,
                )
            except RevisionConflict:
                raise DuplicateMessageId(f"messageId {envelope.message_id} was already used") from None
            handler = self._resolve(envelope)
            return handler(envelope)

    def _resolve(self, envelope: MessageEnvelope) -> Callable[[MessageEnvelope], Reply]:
        command = envelope.command
        is_template = envelope.target.lower() == TEMPLATE_TARGET
        if is_template:
            table: dict[CommandVerb, Callable[[MessageEnvelope], Reply]] = {
                CommandVerb.REGISTER: self._register_template,
                CommandVerb.REMOVE: self._remove_template,
                CommandVerb.QUERY: self._query_templates,
            }
        else:
            table = {
                CommandVerb.REGISTER: self._publish_offer,
                CommandVerb.DELETE: self._unpublish_offer,
                CommandVerb.QUERY: self._query_offers,
                CommandVerb.CREATE: self._create_instance,
                CommandVerb.REMOVE: self._remove_instance,
                CommandVerb.STATUS: self._instance_status,
            }
        handler = table.get(command)
        if handler is None:
            raise NoHandler(f"no handler for {command.value}.{envelope.target.lower()}")
        return handler

    # -- template plane --

    def _register_template(self, envelope: MessageEnvelope) -> Reply:
        template = Template.from_dict(envelope.payload)
        self._templates.register(template)
        return make_reply(
            envelope,
            ReplyStatus.ACCEPTED,
            f"template {template.template_id} registered",
            {"templateId": template.template_id},
        )

    def _remove_template(self, envelope: MessageEnvelope) -> Reply:
        template_id = self._require(envelope, "templateId")
        self._templates.remove(template_id)
        return make_reply(
            envelope,
            ReplyStatus.ACCEPTED,
            f"template {template_id} removed",
            {"templateId": template_id},
        )

    def _query_templates(self, envelope: MessageEnvelope) -> Reply:
        templates = [t.to_dict() for t in self._templates.list()]
        return make_reply(
            envelope,
            ReplyStatus.ACCEPTED,
            f"{len(templates)} template(s)",
            {"templates": templates},
        )

    # -- offer plane --

    def _publish_offer(self, envelope: MessageEnvelope) -> Reply:
        offer_id = self._require(envelope, "offerId")
        customer_template_id = self._require(envelope, "customerTemplateId")
        offer = self._catalog.publish(offer_id, customer_template_id, envelope.target)
        return make_reply(
            envelope,
            ReplyStatus.ACCEPTED,
            f"offer {offer_id} published",
            {"offer": offer.to_dict()},
        )

    def _unpublish_offer(self, envelope: MessageEnvelope) -> Reply:
        offer_id = self._require(envelope, "offerId")
        self._catalog.unpublish(offer_id)
        return make_reply(
            envelope, ReplyStatus.ACCEPTED, f"offer {offer_id} withdrawn", {"offerId": offer_id}
        )

    def _query_offers(self, envelope: MessageEnvelope) -> Reply:
        requirement = self._requirement_from(envelope.payload, envelope.target)
        ranked = self._catalog.search(requirement)
        return make_reply(
            envelope,
            ReplyStatus.ACCEPTED,
            f"{len(ranked)} offer(s) matched",
            {"offers": [offer.to_dict() for offer in ranked]},
        )

    # -- instance plane --

    def _create_instance(self, envelope: MessageEnvelope) -> Reply:
        payload = envelope.payload
        subscription_id = self._subscription_from(envelope)
        if payload.get("offerId"):
            offer = self._catalog.get(payload["offerId"])
        else:
            requirement = self._requirement_from(
                payload.get("requirement") or payload, envelope.target
            )
            offer = self._catalog.select(requirement)
            if offer is None:
                # Record the failed terminal reply so later polls see the
                # answer, then refuse the request; no instance is created.
                reply = make_reply(
                    envelope,
                    ReplyStatus.FAILED,
                    f"{NoOfferMatched.code}: nothing in the catalog satisfies "
                    f"the requirement for {requirement.target}",
                    {"errorCode": NoOfferMatched.code, "target": requirement.target},
                )
                try:
                    self._store.persist(
                        Lifecycle.REPLY_KIND, envelope.message_id, reply.to_dict(),
                        expected_revision=0,
                    )
                except RevisionConflict:
                    pass
                raise NoOfferMatched(
                    f"nothing in the catalog satisfies the requirement "
                    f"for {requirement.target}"
                )
        params = payload.get("params") or {}
        if not isinstance(params, dict):
            raise ValidationError("params must be an object")
        resolved = self._templates.resolve(offer.customer_template_id, params)
        request_ref = {"messageId": envelope.message_id, "extra": dict(envelope.extra)}
        instance = self._lifecycle.begin_create(
            offer.offer_id, offer.target, resolved, request_ref, subscription_id
        )
        return make_reply(
            envelope,
            ReplyStatus.ACCEPTED,
            f"instance {instance['instanceId']} accepted on offer {offer.offer_id}",
            {
                "instanceId": instance["instanceId"],
                "offerId": offer.offer_id,
                "state": instance["state"],
            },
        )

    def _remove_instance(self, envelope: MessageEnvelope) -> Reply:
        instance_id = self._require(envelope, "instanceId")
        subscription_id = self._subscription_from(envelope)
        request_ref = {"messageId": envelope.message_id, "extra": dict(envelope.extra)}
        instance = self._lifecycle.begin_remove(instance_id, request_ref, subscription_id)
        return make_reply(
            envelope,
            ReplyStatus.ACCEPTED,
            f"instance {instance_id} terminating",
            {"instanceId": instance_id, "state": instance["state"]},
        )

    def _instance_status(self, envelope: MessageEnvelope) -> Reply:
        instance_id = envelope.payload.get("instanceId")
        if instance_id:
            instance = self._lifecycle.registry.get(instance_id)
            return make_reply(
                envelope,
                ReplyStatus.ACCEPTED,
                f"instance {instance_id} is {instance['state']}",
                {"instance": instance},
            )
        instances = self._lifecycle.registry.list()
        wanted = envelope.payload.get("state")
        if wanted:
            instances = [doc for doc in instances if doc["state"] == wanted]
        return make_reply(
            envelope,
            ReplyStatus.ACCEPTED,
            f"{len(instances)} instance(s)",
            {"instances": instances},
        )

    # -- helpers --

    def _subscription_from(self, envelope: MessageEnvelope) -> str | None:
        subscription_id = envelope.reply_to
        if subscription_id is not None and not self._subscriptions.exists(subscription_id):
            raise NotFound(f"subscription {subscription_id}")
        return subscription_id

    def _requirement_from(self, doc: dict[str, Any], target: str):
        from .attributes import Requirement

        return Requirement.from_dict(
            doc, default_target=target, default_radius_km=self._default_radius_km
        )

    def _require(self, envelope: MessageEnvelope, field_name: str) -> str:
        value = envelope.payload.get(field_name)
        if not isinstance(value, str) or not value:
            raise ValidationError(f"payload field {field_name} is required")
        return value

    def reply_for(self, message_id: str) -> Reply | None:
        return self._lifecycle.reply_for(message_id)

    def request_seen(self, message_id: str) -> bool:
        return self._store.exists(self.REQUEST_KIND, message_id)
