"""Template storage and chain resolution.

An offer-facing customer template links through optional intermediate layers
down to a provider-specific template; resolving the chain substitutes
``${placeholder}`` slots layer by layer and yields the payload handed to the
provider adapter.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

from .attributes import AttributeSet
from .errors import (
    BrokenChain,
    CycleDetected,
    DanglingParent,
    DepthExceeded,
    DuplicateId,
    InUse,
    InvalidTemplate,
    MissingParam,
    MissingProviderId,
    NotFound,
    ValidationError,
)
from .store import BrokerStore

MAX_CHAIN_DEPTH = 16

_PLACEHOLDER_RE = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")

Scalar = str | int | float | bool


class TemplateLayer(str, Enum):
    CUSTOMER = "customer"
    INTERMEDIATE = "intermediate"
    PROVIDER = "provider"


@dataclass(frozen=True)
class Template:
    template_id: str
    layer: TemplateLayer
    body: dict[str, Any]
    parent_id: str | None = None
    provider_id: str | None = None
    declared_params: frozenset[str] = frozenset()
    attributes: AttributeSet | None = None

    def validate(self) -> None:
        """Per-template invariants; chain-level checks happen in the store."""
        if not self.template_id:
            raise InvalidTemplate("templateId must be non-empty")
        if self.layer is TemplateLayer.PROVIDER:
            if not self.provider_id:
                raise MissingProviderId(f"provider-layer template {self.template_id}")
            if self.parent_id is not None:
                raise InvalidTemplate(
                    f"{self.template_id}: provider-layer templates end the chain"
                )
        else:
            if self.parent_id is None:
                raise InvalidTemplate(
                    f"{self.template_id}: {self.layer.value}-layer templates need a parentId"
                )
        if self.layer is TemplateLayer.CUSTOMER:
            if self.attributes is None:
                raise InvalidTemplate(f"{self.template_id}: customer-layer templates need attributes")
            undeclared = _placeholders_in(self.body) - self.declared_params
            if undeclared:
                raise InvalidTemplate(
                    f"{self.template_id}: body uses undeclared placeholders {sorted(undeclared)}"
                )
        _check_placeholder_syntax(self.body, self.template_id)

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "templateId": self.template_id,
            "layer": self.layer.value,
            "body": self.body,
            "declaredParams": sorted(self.declared_params),
        }
        if self.parent_id is not None:
            doc["parentId"] = self.parent_id
        if self.provider_id is not None:
            doc["providerId"] = self.provider_id
        if self.attributes is not None:
            doc["attributes"] = self.attributes.to_dict()
        return doc

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "Template":
        try:
            layer = TemplateLayer(doc["layer"])
        except (KeyError, ValueError):
            raise InvalidTemplate(f"template layer invalid: {doc.get('layer')!r}") from None
        template_id = doc.get("templateId")
        if not isinstance(template_id, str) or not template_id:
            raise InvalidTemplate("templateId must be a non-empty string")
        body = doc.get("body", {})
        if not isinstance(body, dict):
            raise InvalidTemplate(f"{template_id}: body must be an object")
        attributes = None
        if doc.get("attributes") is not None:
            attributes = AttributeSet.from_dict(doc["attributes"])
        return cls(
            template_id=template_id,
            layer=layer,
            body=body,
            parent_id=doc.get("parentId"),
            provider_id=doc.get("providerId"),
            declared_params=frozenset(doc.get("declaredParams", [])),
            attributes=attributes,
        )


@dataclass(frozen=True)
class ResolvedPayload:
    """Fully substituted provider document plus the chain that produced it."""

    provider_id: str
    document: dict[str, Any]
    source_chain: tuple[str, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "providerId": self.provider_id,
            "document": self.document,
            "sourceChain": list(self.source_chain),
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "ResolvedPayload":
        return cls(
            provider_id=doc["providerId"],
            document=doc["document"],
            source_chain=tuple(doc["sourceChain"]),
        )


def _placeholders_in(node: Any) -> set[str]:
    names: set[str] = set()
    if isinstance(node, str):
        names.update(_PLACEHOLDER_RE.findall(node))
    elif isinstance(node, dict):
        for value in node.values():
            names |= _placeholders_in(value)
    elif isinstance(node, list):
        for value in node:
            names |= _placeholders_in(value)
    return names


def _check_placeholder_syntax(node: Any, template_id: str) -> None:
    """Reject ``${`` sequences that are not well-formed placeholders, so a
    resolved document can never carry one through."""
    if isinstance(node, str):
        if "${" in _PLACEHOLDER_RE.sub("", node):
            raise InvalidTemplate(f"{template_id}: malformed placeholder in {node!r}")
    elif isinstance(node, dict):
        for value in node.values():
            _check_placeholder_syntax(value, template_id)
    elif isinstance(node, list):
        for value in node:
            _check_placeholder_syntax(value, template_id)


def _substitute(node: Any, bindings: dict[str, Scalar]) -> Any:
    if isinstance(node, str):
        whole = _PLACEHOLDER_RE.fullmatch(node)
        if whole:
            name = whole.group(1)
            if name not in bindings:
                raise MissingParam(name)
            return bindings[name]  # whole-string slots keep the bound type

        def _replace(match: re.Match) -> str:
            name = match.group(1)
            if name not in bindings:
                raise MissingParam(name)
            return str(bindings[name])

        return _PLACEHOLDER_RE.sub(_replace, node)
    if isinstance(node, dict):
        return {key: _substitute(value, bindings) for key, value in node.items()}
    if isinstance(node, list):
        return [_substitute(value, bindings) for value in node]
    return node


class TemplateStore:
    """Registered templates, persisted in the shared store.

    `in_use_guards` lets other subsystems veto removal (published offers,
    active instances); each guard returns a reason string or None.
    """

    KIND = "template"

    def __init__(self, store: BrokerStore):
        self._store = store
        self._lock = threading.RLock()
        self._templates: dict[str, Template] = {}
        self.in_use_guards: list[Callable[[str], str | None]] = []
        for key, doc in store.documents(self.KIND):
            self._templates[key] = Template.from_dict(doc)

    def __contains__(self, template_id: str) -> bool:
        with self._lock:
            return template_id in self._templates

    def get(self, template_id: str) -> Template:
        with self._lock:
            template = self._templates.get(template_id)
        if template is None:
            raise NotFound(f"template {template_id}")
        return template

    def list(self) -> list[Template]:
        with self._lock:
            return sorted(self._templates.values(), key=lambda t: t.template_id)

    def register(self, template: Template) -> str:
        template.validate()
        with self._lock:
            if template.template_id in self._templates:
                raise DuplicateId(f"template {template.template_id}")
            if template.parent_id is not None:
                if template.parent_id == template.template_id:
                    raise CycleDetected(f"template {template.template_id} is its own parent")
                if template.parent_id not in self._templates:
                    raise DanglingParent(
                        f"template {template.template_id}: parent {template.parent_id} not found"
                    )
                # Parents must pre-exist, so a longer cycle cannot form; the
                # walk stays as a guard against store corruption.
                self._walk_parents(template)
            self._templates[template.template_id] = template
            self._store.persist(self.KIND, template.template_id, template.to_dict())
            return template.template_id

    def remove(self, template_id: str) -> None:
        with self._lock:
            if template_id not in self._templates:
                raise NotFound(f"template {template_id}")
            for other in self._templates.values():
                if other.parent_id == template_id:
                    raise InUse(f"template {template_id} is parent of {other.template_id}")
            for guard in self.in_use_guards:
                reason = guard(template_id)
                if reason:
                    raise InUse(f"template {template_id}: {reason}")
            del self._templates[template_id]
            self._store.delete(self.KIND, template_id)

    def replace_all(self, templates: list[Template]) -> None:
        """Import a full template store (the export round-trip); the new set
        must be internally consistent and keep every guard satisfied."""
        by_id: dict[str, Template] = {}
        for template in templates:
            template.validate()
            if template.template_id in by_id:
                raise DuplicateId(f"template {template.template_id}")
            by_id[template.template_id] = template
        for template in by_id.values():
            if template.parent_id is not None and template.parent_id not in by_id:
                raise DanglingParent(
                    f"template {template.template_id}: parent {template.parent_id} not found"
                )
        with self._lock:
            removed = set(self._templates) - set(by_id)
            for template_id in removed:
                for guard in self.in_use_guards:
                    reason = guard(template_id)
                    if reason:
                        raise InUse(f"template {template_id}: {reason}")
            old = self._templates
            self._templates = by_id
            try:
                for template in by_id.values():
                    self.chain(template.template_id)
            except (BrokenChain, CycleDetected, DepthExceeded):
                self._templates = old
                raise
            for template_id in removed:
                self._store.delete(self.KIND, template_id)
            for template in by_id.values():
                self._store.persist(self.KIND, template.template_id, template.to_dict())

    def chain(self, template_id: str) -> list[Template]:
        """Templates from `template_id` down to the provider layer."""
        with self._lock:
            chain: list[Template] = []
            seen: set[str] = set()
            current_id: str | None = template_id
            while current_id is not None:
                if current_id in seen:
                    raise CycleDetected(f"template chain revisits {current_id}")
                if len(chain) >= MAX_CHAIN_DEPTH:
                    raise DepthExceeded(f"chain from {template_id} exceeds {MAX_CHAIN_DEPTH} layers")
                template = self._templates.get(current_id)
                if template is None:
                    if current_id == template_id:
                        raise NotFound(f"template {template_id}")
                    raise BrokenChain(f"template {current_id} missing from chain")
                seen.add(current_id)
                chain.append(template)
                current_id = template.parent_id
            if chain[-1].layer is not TemplateLayer.PROVIDER:
                raise BrokenChain(
                    f"chain from {template_id} ends at {chain[-1].template_id} "
                    f"({chain[-1].layer.value}), not a provider template"
                )
            return chain

    def _walk_parents(self, template: Template) -> None:
        seen = {template.template_id}
        current_id = template.parent_id
        depth = 1
        while current_id is not None:
            if current_id in seen:
                raise CycleDetected(f"registering {template.template_id} closes a cycle")
            if depth >= MAX_CHAIN_DEPTH:
                raise DepthExceeded(f"chain through {template.template_id} exceeds {MAX_CHAIN_DEPTH}")
            seen.add(current_id)
            parent = self._templates.get(current_id)
            if parent is None:
                raise DanglingParent(f"template {current_id} not found")
            current_id = parent.parent_id
            depth += 1

    def resolve(self, customer_id: str, params: dict[str, Scalar]) -> ResolvedPayload:
        """Resolve a customer template into its provider payload.

        Placeholders substitute layer by layer; after each layer its
        top-level scalar fields become bindings for the layers below, with
        earlier bindings winning.  Deterministic for fixed inputs.
        """
        customer = self.get(customer_id)
        if customer.layer is not TemplateLayer.CUSTOMER:
            raise ValidationError(f"template {customer_id} is not customer-layer")
        missing = sorted(customer.declared_params - set(params))
        if missing:
            raise MissingParam(", ".join(missing))
        chain = self.chain(customer_id)
        bindings: dict[str, Scalar] = dict(params)
        document: dict[str, Any] = {}
        for template in chain:
            document = _substitute(template.body, bindings)
            for key, value in document.items():
                if isinstance(value, (str, int, float, bool)):
                    bindings.setdefault(key, value)
        provider = chain[-1]
        return ResolvedPayload(
            provider_id=provider.provider_id,
            document=document,
            source_chain=tuple(t.template_id for t in chain),
        )
