"""Pydantic models for the HTTP gateway."""

from __future__ import annotations

from typing import Any

from pydantic import BaseModel, ConfigDict, Field


class ReplyOut(BaseModel):
    """Wire shape of a broker reply; request extras ride along."""

    model_config = ConfigDict(extra="allow")

    status: str
    detail: str
    correlationId: str
    resultPayload: dict[str, Any] | None = None


class ErrorBody(BaseModel):
    error: str
    detail: str


class OfferOut(BaseModel):
    model_config = ConfigDict(extra="allow")

    offerId: str
    customerTemplateId: str
    target: str
    attributes: dict[str, Any]
    providerId: str
    published: bool


class InstanceOut(BaseModel):
    model_config = ConfigDict(extra="allow")

    instanceId: str
    offerId: str
    target: str
    state: str
    providerId: str
    providerRef: str | None = None
    history: list[dict[str, Any]] = Field(default_factory=list)


class WebhookIn(BaseModel):
    url: str
    secretToken: str | None = None


class SubscriptionOut(BaseModel):
    subscriptionId: str
    url: str
    active: bool


class ImportResult(BaseModel):
    imported: int


class HealthOut(BaseModel):
    status: str
    storePath: str | None = None
