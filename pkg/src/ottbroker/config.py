"""Configuration loading and the standard catalog bootstrap."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .attributes import AttributeSet
from .errors import ValidationError
from .providers import FailureInjection, ProviderDescriptor


@dataclass
class BrokerConfig:
    store_path: str | None = None
    tokens: tuple[str, ...] = ()  # empty disables bearer auth
    providers: tuple[ProviderDescriptor, ...] = ()
    bootstrap_catalog: bool = True
    provider_latency_ms: tuple[float, float] = (50.0, 200.0)
    provider_seed: int | None = None
    # keyed by providerId, "*" applies to all without their own plan;
    # None falls back to the descriptor's own failureInjection
    failure_injection: dict[str, FailureInjection] = field(default_factory=dict)
    webhook_backoff_s: tuple[float, ...] = (1.0, 2.0, 4.0)
    default_radius_km: float = 100.0
    host: str = "127.0.0.1"
    port: int = 8750

    def injection_for(self, provider_id: str) -> FailureInjection | None:
        if provider_id in self.failure_injection:
            return self.failure_injection[provider_id]
        return self.failure_injection.get("*")


def load_config(path: str | Path) -> BrokerConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ValidationError(f"config {path} must be a JSON object")

    providers_doc = doc.get("providers")
    if providers_doc is None and doc.get("providersFile"):
        providers_path = path.parent / doc["providersFile"]
        try:
            providers_doc = json.loads(providers_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read providers {providers_path}: {exc}") from None
    if isinstance(providers_doc, dict):
        providers_doc = providers_doc.get("providers", [])
    providers = tuple(ProviderDescriptor.from_dict(p) for p in providers_doc or [])

    store_path = doc.get("storePath")
    if store_path is not None:
        store_path = str(path.parent / store_path)

    latency = doc.get("providerLatencyMs", [50, 200])
    injection = {
        key: FailureInjection.from_dict(value)
        for key, value in (doc.get("failureInjection") or {}).items()
    }
    return BrokerConfig(
        store_path=store_path,
        tokens=tuple(doc.get("tokens", [])),
        providers=providers,
        bootstrap_catalog=bool(doc.get("bootstrapCatalog", True)),
        provider_latency_ms=(float(latency[0]), float(latency[1])),
        provider_seed=doc.get("providerSeed"),
        failure_injection=injection,
        webhook_backoff_s=tuple(float(v) for v in doc.get("webhookBackoffS", [1, 2, 4])),
        default_radius_km=float(doc.get("defaultRadiusKm", 100.0)),
        host=doc.get("host", "127.0.0.1"),
        port=int(doc.get("port", 8750)),
    )


def standard_offer_id(provider_id: str, site_label: str, package_name: str) -> str:
    return f"{provider_id}-{site_label.lower().replace(' ', '-')}-{package_name.lower()}"


def bootstrap_catalog(templates, catalog, providers: tuple[ProviderDescriptor, ...]) -> int:
    """Generate the provider/customer template pairs and offers for every
    (provider, site, package) combination.  Idempotent: combinations whose
    customer template already exists are left alone.  Returns the number of
    offers added."""
    from .templates import Template, TemplateLayer

    added = 0
    known_offers = {offer.offer_id for offer in catalog.list(include_unpublished=True)}
    for descriptor in providers:
        for site in descriptor.sites:
            for package in descriptor.packages:
                offer_id = standard_offer_id(descriptor.provider_id, site.label, package.name)
                customer_id = offer_id
                provider_tpl_id = f"{offer_id}-prov"
                if customer_id not in templates:
                    attributes: AttributeSet = descriptor.attribute_set(package, site)
                    templates.register(
                        Template(
                            template_id=provider_tpl_id,
                            layer=TemplateLayer.PROVIDER,
                            provider_id=descriptor.provider_id,
                            body={
                                "package": package.name,
                                "site": site.label,
                                "name": "${instanceName}",
                            },
                        )
                    )
                    templates.register(
                        Template(
                            template_id=customer_id,
                            layer=TemplateLayer.CUSTOMER,
                            parent_id=provider_tpl_id,
                            declared_params=frozenset({"instanceName"}),
                            body={"displayName": "${instanceName}"},
                            attributes=attributes,
                        )
                    )
                if offer_id not in known_offers:
                    catalog.publish(offer_id, customer_id, descriptor.target)
                    added += 1
    return added
