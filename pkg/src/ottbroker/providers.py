"""Simulated provider adapters.

Each adapter subscribes to its provider's create/remove topics, keeps an
allocation ledger in the shared store and reports outcomes back over the
bus.  Outcomes are persisted before the result event goes out, so replays
after a crash reproduce the original decision instead of rolling the dice
again.
"""

from __future__ import annotations

import logging
import random
import threading
import time
from dataclasses import dataclass, field
from typing import Any

from .attributes import AttributeSet, GeoPoint, Jurisdiction, PerformanceClass
from .bus import EventBus
from .envelope import CommandVerb, MessageEnvelope
from .errors import ValidationError
from .lifecycle import RESULT_TOPIC, deprovision_topic, provision_topic
from .store import BrokerStore

log = logging.getLogger(__name__)

# Ledger entry states; only "active" counts as allocated capacity.
ACTIVE = "active"
RELEASED = "released"
FAILED = "failed"


@dataclass(frozen=True)
class ProviderSite:
    label: str
    latitude_deg: float
    longitude_deg: float
    jurisdiction: Jurisdiction

    def geo_point(self) -> GeoPoint:
        return GeoPoint(self.latitude_deg, self.longitude_deg, label=self.label)

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "ProviderSite":
        return cls(
            label=doc["label"],
            latitude_deg=float(doc["latitudeDeg"]),
            longitude_deg=float(doc["longitudeDeg"]),
            jurisdiction=Jurisdiction(doc["jurisdiction"]),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "label": self.label,
            "latitudeDeg": self.latitude_deg,
            "longitudeDeg": self.longitude_deg,
            "jurisdiction": self.jurisdiction.value,
        }


@dataclass(frozen=True)
class ProviderPackage:
    """Capacity shape a provider sells; site-independent attribute parts."""

    name: str
    performance_class: PerformanceClass
    vcpu: int
    gpu: bool
    ram_gib: float
    storage_gib: float
    network_mbps: float
    price_per_hour: float

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "ProviderPackage":
        return cls(
            name=doc["name"],
            performance_class=PerformanceClass(doc["performanceClass"]),
            vcpu=int(doc["vcpu"]),
            gpu=bool(doc.get("gpu", False)),
            ram_gib=float(doc["ramGiB"]),
            storage_gib=float(doc["storageGiB"]),
            network_mbps=float(doc["networkMbps"]),
            price_per_hour=float(doc["pricePerHour"]),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "performanceClass": self.performance_class.value,
            "vcpu": self.vcpu,
            "gpu": self.gpu,
            "ramGiB": self.ram_gib,
            "storageGiB": self.storage_gib,
            "networkMbps": self.network_mbps,
            "pricePerHour": self.price_per_hour,
        }


@dataclass(frozen=True)
class FailureInjection:
    """Deterministic fault plan for provisioning: `always`, `everyNth`
    provision attempt, or `none`."""

    mode: str = "none"
    nth: int = 0

    def __post_init__(self):
        if self.mode == "every-nth":
            object.__setattr__(self, "mode", "everyNth")
        if self.mode not in ("none", "always", "everyNth"):
            raise ValidationError(f"unknown injection mode {self.mode!r}")
        if self.mode == "everyNth" and self.nth < 2:
            raise ValidationError("everyNth injection needs n >= 2")

    def should_fail(self, seq: int) -> bool:
        if self.mode == "always":
            return True
        if self.mode == "everyNth":
            return seq % self.nth == 0
        return False

    @classmethod
    def from_dict(cls, doc: dict[str, Any] | None) -> "FailureInjection":
        if not doc:
            return cls()
        return cls(mode=doc.get("mode", "none"), nth=int(doc.get("n", doc.get("nth", 0))))

    def to_dict(self) -> dict[str, Any]:
        return {"mode": self.mode, "n": self.nth}


@dataclass(frozen=True)
class ProviderDescriptor:
    provider_id: str
    kind: str  # cloud | edge | network
    target: str
    sites: tuple[ProviderSite, ...]
    packages: tuple[ProviderPackage, ...]
    efficiency_score: float
    display_name: str = ""
    failure_injection: FailureInjection = FailureInjection()
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.sites or not self.packages:
            raise ValidationError(f"provider {self.provider_id} needs sites and packages")

    def site(self, label: str) -> ProviderSite | None:
        for site in self.sites:
            if site.label == label:
                return site
        return None

    def package(self, name: str) -> ProviderPackage | None:
        for package in self.packages:
            if package.name == name:
                return package
        return None

    def attribute_set(self, package: ProviderPackage, site: ProviderSite) -> AttributeSet:
        return AttributeSet(
            performance_class=package.performance_class,
            vcpu=package.vcpu,
            gpu=package.gpu,
            ram_gib=package.ram_gib,
            storage_gib=package.storage_gib,
            network_mbps=package.network_mbps,
            location=site.geo_point(),
            price_per_hour=package.price_per_hour,
            efficiency_score=self.efficiency_score,
            jurisdiction=site.jurisdiction,
            extra=dict(self.extra),
        )

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "ProviderDescriptor":
        return cls(
            provider_id=doc["providerId"],
            kind=doc.get("kind", "cloud"),
            target=doc.get("target", "VirtualMachine"),
            sites=tuple(ProviderSite.from_dict(s) for s in doc["sites"]),
            packages=tuple(ProviderPackage.from_dict(p) for p in doc["packages"]),
            efficiency_score=float(doc["efficiencyScore"]),
            display_name=doc.get("displayName", doc["providerId"]),
            failure_injection=FailureInjection.from_dict(doc.get("failureInjection")),
            extra=dict(doc.get("extra", {})),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "providerId": self.provider_id,
            "displayName": self.display_name or self.provider_id,
            "kind": self.kind,
            "target": self.target,
            "sites": [s.to_dict() for s in self.sites],
            "packages": [p.to_dict() for p in self.packages],
            "efficiencyScore": self.efficiency_score,
            "failureInjection": self.failure_injection.to_dict(),
            "extra": dict(self.extra),
        }


class SimulatedProvider:
    """In-process stand-in for one provider's management API.

    A monotonic counter numbers provision attempts; the providerRef is
    ``<providerId>/<counter>`` and doubles as the ledger key.  Attempts are
    persisted before their result goes out, so after a crash the adapter
    replays the recorded outcome instead of deciding again, and the counter
    is recovered from the store.
    """

    LEDGER_KIND = "ledger"

    def __init__(
        self,
        descriptor: ProviderDescriptor,
        store: BrokerStore,
        bus: EventBus,
        latency_ms: tuple[float, float] = (0.0, 0.0),
        injection: FailureInjection | None = None,
        seed: int | None = None,
    ):
        self.descriptor = descriptor
        self._store = store
        self._bus = bus
        self._latency_ms = latency_ms
        self.injection = injection if injection is not None else descriptor.failure_injection
        self._rng = random.Random(seed)
        self._lock = threading.RLock()
        self._ref_by_instance: dict[str, str] = {}
        self._next_seq = 1
        prefix = f"{descriptor.provider_id}/"
        for key, doc in store.documents(self.LEDGER_KIND):
            if not key.startswith(prefix):
                continue
            self._ref_by_instance[doc["instanceId"]] = key
            self._next_seq = max(self._next_seq, int(doc["seq"]) + 1)
        bus.subscribe(provision_topic(descriptor.provider_id), self.handle_provision)
        bus.subscribe(deprovision_topic(descriptor.provider_id), self.handle_deprovision)

    # -- ledger access --

    def ledger(self) -> list[dict[str, Any]]:
        """Allocation entries (active and released); failed provision
        attempts are bookkeeping, not inventory."""
        return [doc for doc in self._entries() if doc["state"] in (ACTIVE, RELEASED)]

    def _entries(self) -> list[dict[str, Any]]:
        prefix = f"{self.descriptor.provider_id}/"
        return [
            doc for key, doc in self._store.documents(self.LEDGER_KIND) if key.startswith(prefix)
        ]

    def active_count(self) -> int:
        return sum(1 for doc in self._entries() if doc["state"] == ACTIVE)

    # -- bus handlers --

    def handle_provision(self, envelope: MessageEnvelope) -> None:
        payload = envelope.payload
        instance_id = payload.get("instanceId")
        if not isinstance(instance_id, str):
            log.warning("%s: provision without instanceId dropped", self.descriptor.provider_id)
            return
        with self._lock:
            ref = self._ref_by_instance.get(instance_id)
            if ref is not None:
                # Already decided; replay the stored outcome.
                self._publish_provision_result(instance_id, self._store.get(self.LEDGER_KIND, ref))
                return
            document = payload.get("document") or {}
            package_name = document.get("package")
            site_label = document.get("site")
            package = self.descriptor.package(package_name) if package_name else None
            site = self.descriptor.site(site_label) if site_label else None
            if package is None:
                # Validation happens before any allocation: no ledger entry,
                # no counter tick.
                self._publish_result(
                    instance_id, "provision", ok=False,
                    reason=f"UnknownPackage: {package_name!r}",
                )
                return
            if site is None:
                self._publish_result(
                    instance_id, "provision", ok=False,
                    reason=f"UnknownSite: {site_label!r}",
                )
                return
            self._sleep()
            seq = self._next_seq
            self._next_seq += 1
            ref = f"{self.descriptor.provider_id}/{seq}"
            entry: dict[str, Any] = {
                "providerId": self.descriptor.provider_id,
                "instanceId": instance_id,
                "seq": seq,
                "packageName": package.name,
                "site": site.label,
            }
            if self.injection.should_fail(seq):
                entry["state"] = FAILED
                entry["reason"] = "InjectedFailure"
            else:
                entry["state"] = ACTIVE
                entry["providerRef"] = ref
            self._store.persist(self.LEDGER_KIND, ref, entry, expected_revision=0)
            self._ref_by_instance[instance_id] = ref
            self._publish_provision_result(instance_id, entry)

    def handle_deprovision(self, envelope: MessageEnvelope) -> None:
        payload = envelope.payload
        instance_id = payload.get("instanceId")
        if not isinstance(instance_id, str):
            log.warning("%s: deprovision without instanceId dropped", self.descriptor.provider_id)
            return
        with self._lock:
            ref = payload.get("providerRef") or self._ref_by_instance.get(instance_id)
            entry = self._store.get(self.LEDGER_KIND, ref) if ref else None
            if entry is None or entry["state"] == FAILED:
                # Never allocated (or the allocation attempt itself failed).
                self._publish_result(
                    instance_id, "deprovision", ok=False, reason=f"UnknownRef: {ref}"
                )
                return
            if entry["state"] == ACTIVE:
                self._sleep()
                entry = dict(entry)
                entry["state"] = RELEASED
                self._store.persist(self.LEDGER_KIND, ref, entry)
            # RELEASED falls through: repeating a deprovision succeeds.
            self._publish_result(instance_id, "deprovision", ok=True)

    # -- result emission --

    def _publish_provision_result(self, instance_id: str, entry: dict[str, Any] | None) -> None:
        if entry is None:
            return
        if "providerRef" in entry:
            self._publish_result(
                instance_id, "provision", ok=True, provider_ref=entry["providerRef"]
            )
        else:
            self._publish_result(
                instance_id, "provision", ok=False, reason=entry.get("reason", "provision failed")
            )

    def _publish_result(
        self,
        instance_id: str,
        action: str,
        ok: bool,
        provider_ref: str | None = None,
        reason: str | None = None,
    ) -> None:
        payload: dict[str, Any] = {
            "instanceId": instance_id,
            "providerId": self.descriptor.provider_id,
            "action": action,
            "ok": ok,
        }
        if provider_ref is not None:
            payload["providerRef"] = provider_ref
        if reason is not None:
            payload["reason"] = reason
        event_id = f"result/{action}/{instance_id}"
        envelope = MessageEnvelope(
            message_id=event_id,
            command=CommandVerb.STATUS,
            target="ProviderResult",
            payload=payload,
        )
        self._bus.publish(RESULT_TOPIC, envelope, event_id=event_id)

    def _sleep(self) -> None:
        lo, hi = self._latency_ms
        if hi <= 0:
            return
        time.sleep(self._rng.uniform(lo, hi) / 1000.0)
