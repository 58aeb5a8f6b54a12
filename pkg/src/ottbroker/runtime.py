"""Wires the broker's parts together around one shared store.

Workers keep no private state: rebuilding a runtime over the same store
file recovers everything, including half-processed bus events.
"""

from __future__ import annotations

from dataclasses import dataclass

from .broker import Broker
from .bus import EventBus
from .catalog import Catalog
from .config import BrokerConfig, bootstrap_catalog
from .lifecycle import InstanceRegistry, Lifecycle
from .providers import SimulatedProvider
from .store import BrokerStore
from .templates import TemplateStore
from .webhooks import SubscriptionRegistry, Transport, WebhookDeliverer


@dataclass
class Runtime:
    config: BrokerConfig
    store: BrokerStore
    bus: EventBus
    templates: TemplateStore
    catalog: Catalog
    registry: InstanceRegistry
    lifecycle: Lifecycle
    subscriptions: SubscriptionRegistry
    deliverer: WebhookDeliverer
    providers: dict[str, SimulatedProvider]
    broker: Broker

    def start(self) -> None:
        """Replay anything left over from a previous run, then go async."""
        self.bus.drain()
        self.bus.start()

    def stop(self) -> None:
        self.bus.stop()
        self.store.close()

    def drain(self) -> int:
        """Process all pending bus events synchronously (test mode)."""
        return self.bus.drain()


def build_runtime(
    config: BrokerConfig,
    webhook_transport: Transport | None = None,
    webhook_sleeper=None,
) -> Runtime:
    store = BrokerStore(config.store_path)
    bus = EventBus(store)
    templates = TemplateStore(store)
    catalog = Catalog(store, templates)
    registry = InstanceRegistry(store)
    lifecycle = Lifecycle(store, bus, registry)
    templates.in_use_guards.append(_instance_guard(registry))
    subscriptions = SubscriptionRegistry(store)
    deliverer_kwargs = {"backoff_s": config.webhook_backoff_s}
    if webhook_sleeper is not None:
        deliverer_kwargs["sleeper"] = webhook_sleeper
    deliverer = WebhookDeliverer(
        store, subscriptions, bus, transport=webhook_transport, **deliverer_kwargs
    )
    providers = {
        descriptor.provider_id: SimulatedProvider(
            descriptor,
            store,
            bus,
            latency_ms=config.provider_latency_ms,
            injection=config.injection_for(descriptor.provider_id),
            seed=config.provider_seed,
        )
        for descriptor in config.providers
    }
    broker = Broker(
        store,
        templates,
        catalog,
        lifecycle,
        subscriptions,
        default_radius_km=config.default_radius_km,
    )
    if config.bootstrap_catalog:
        bootstrap_catalog(templates, catalog, config.providers)
    return Runtime(
        config=config,
        store=store,
        bus=bus,
        templates=templates,
        catalog=catalog,
        registry=registry,
        lifecycle=lifecycle,
        subscriptions=subscriptions,
        deliverer=deliverer,
        providers=providers,
        broker=broker,
    )


def _instance_guard(registry: InstanceRegistry):
    from .lifecycle import TERMINAL_STATES, InstanceState

    def guard(template_id: str) -> str | None:
        for doc in registry.list():
            if InstanceState(doc["state"]) in TERMINAL_STATES:
                continue
            chain = (doc.get("resolvedPayload") or {}).get("sourceChain", [])
            if template_id in chain:
                return f"in use by instance {doc['instanceId']}"
        return None

    return guard
