"""Published offers, lookup, and rank-ordered search."""

from __future__ import annotations

import threading
from dataclasses import dataclass, replace
from typing import Any

from .attributes import AttributeSet, Requirement, matches, score
from .errors import DuplicateOffer, NotCustomerLayer, NotFound
from .store import BrokerStore
from .templates import Template, TemplateLayer, TemplateStore


@dataclass(frozen=True)
class Offer:
    """A customer template published for a target type, with the attribute
    snapshot taken at publish time."""

    offer_id: str
    customer_template_id: str
    target: str
    attributes: AttributeSet
    provider_id: str
    published: bool = True

    def to_dict(self) -> dict[str, Any]:
        return {
            "offerId": self.offer_id,
            "customerTemplateId": self.customer_template_id,
            "target": self.target,
            "attributes": self.attributes.to_dict(),
            "providerId": self.provider_id,
            "published": self.published,
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "Offer":
        return cls(
            offer_id=doc["offerId"],
            customer_template_id=doc["customerTemplateId"],
            target=doc["target"],
            attributes=AttributeSet.from_dict(doc["attributes"]),
            provider_id=doc["providerId"],
            published=doc.get("published", True),
        )


class Catalog:
    """Offer registry backed by the shared store."""

    KIND = "offer"

    def __init__(self, store: BrokerStore, templates: TemplateStore):
        self._store = store
        self._templates = templates
        self._lock = threading.RLock()
        self._offers: dict[str, Offer] = {}
        for key, doc in store.documents(self.KIND):
            self._offers[key] = Offer.from_dict(doc)
        templates.in_use_guards.append(self._template_guard)

    def _template_guard(self, template_id: str) -> str | None:
        with self._lock:
            for offer in self._offers.values():
                if offer.published and offer.customer_template_id == template_id:
                    return f"published as offer {offer.offer_id}"
        return None

    def get(self, offer_id: str) -> Offer:
        with self._lock:
            offer = self._offers.get(offer_id)
        if offer is None or not offer.published:
            raise NotFound(f"offer {offer_id}")
        return offer

    def publish(self, offer_id: str, customer_template_id: str, target: str) -> Offer:
        """Publish a customer template as an offer for `target`.

        The chain must be intact down to a provider template; attributes are
        snapshotted from the customer layer at this moment.
        """
        template = self._templates.get(customer_template_id)
        if template.layer is not TemplateLayer.CUSTOMER:
            raise NotCustomerLayer(f"template {customer_template_id} is {template.layer.value}-layer")
        chain = self._templates.chain(customer_template_id)
        assert template.attributes is not None  # enforced at registration
        with self._lock:
            existing = self._offers.get(offer_id)
            if existing is not None and existing.published:
                raise DuplicateOffer(f"offer {offer_id}")
            offer = Offer(
                offer_id=offer_id,
                customer_template_id=customer_template_id,
                target=target,
                attributes=template.attributes,
                provider_id=chain[-1].provider_id or "",
            )
            self.add_offer(offer)
            return offer

    def add_offer(self, offer: Offer) -> None:
        """Insert a fully formed offer, bypassing template resolution.

        Used by publish() and by tests that build synthetic catalogs.
        """
        with self._lock:
            self._offers[offer.offer_id] = offer
            self._store.persist(self.KIND, offer.offer_id, offer.to_dict())

    def unpublish(self, offer_id: str) -> Offer:
        with self._lock:
            offer = self._offers.get(offer_id)
            if offer is None or not offer.published:
                raise NotFound(f"offer {offer_id}")
            offer = replace(offer, published=False)
            self.add_offer(offer)
            return offer

    def offers_for_template(self, template_id: str) -> list[Offer]:
        with self._lock:
            return [
                o
                for o in self._offers.values()
                if o.published and o.customer_template_id == template_id
            ]

    def search(self, requirement: Requirement) -> list[Offer]:
        """Published offers matching the requirement, best first.

        Ordering is total: price ascending, then efficiency descending, then
        distance ascending when a location constraint is present, then
        offerId as the tiebreak.
        """
        with self._lock:
            candidates = [
                offer
                for offer in self._offers.values()
                if offer.published
                and offer.target == requirement.target
                and matches(requirement, offer.attributes)
            ]
        candidates.sort(key=lambda o: score(requirement, o.attributes, o.offer_id))
        return candidates

    def select(self, requirement: Requirement) -> Offer | None:
        ranked = self.search(requirement)
        return ranked[0] if ranked else None

    def list(self, include_unpublished: bool = False) -> list[Offer]:
        with self._lock:
            offers = [
                o for o in self._offers.values() if include_unpublished or o.published
            ]
        return sorted(offers, key=lambda o: o.offer_id)
