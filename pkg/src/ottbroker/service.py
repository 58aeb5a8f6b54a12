"""HTTP gateway in front of the broker.

One POST endpoint carries the whole command protocol; the GET endpoints
exist for polling clients (CLI, console) that want plain resources instead
of envelopes.
"""

from __future__ import annotations

import json
from contextlib import asynccontextmanager
from typing import Any

from fastapi import Body, Depends, FastAPI, Header, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import __version__
from .attributes import Requirement
from .envelope import ENVELOPE_SCHEMA, parse_envelope
from .errors import (
    CONFLICT_ERRORS,
    PARSE_ERRORS,
    BrokerError,
    NotFound,
    UnknownInstance,
    ValidationError,
)
from .runtime import Runtime
from .schemas import (
    ErrorBody,
    HealthOut,
    ImportResult,
    InstanceOut,
    OfferOut,
    ReplyOut,
    SubscriptionOut,
    WebhookIn,
)
from .templates import Template


class _AuthFailed(Exception):
    pass


def create_app(runtime: Runtime) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        runtime.start()
        try:
            yield
        finally:
            runtime.stop()

    app = FastAPI(title="ottbroker gateway", version=__version__, lifespan=lifespan)
    app.state.runtime = runtime
    # The console is served as static files from a different origin.
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def require_token(authorization: str | None = Header(default=None)) -> None:
        tokens = runtime.config.tokens
        if not tokens:
            return
        if authorization is None or not authorization.startswith("Bearer "):
            raise _AuthFailed("missing bearer token")
        if authorization.removeprefix("Bearer ").strip() not in tokens:
            raise _AuthFailed("unknown token")

    @app.exception_handler(_AuthFailed)
    async def auth_failed(request: Request, exc: _AuthFailed) -> JSONResponse:
        body = ErrorBody(error="Unauthorized", detail=str(exc) or "authorization required")
        return JSONResponse(status_code=401, content=body.model_dump())

    @app.exception_handler(BrokerError)
    async def broker_error(request: Request, exc: BrokerError) -> JSONResponse:
        if isinstance(exc, PARSE_ERRORS):
            status = 400
        elif isinstance(exc, CONFLICT_ERRORS):
            status = 409
        elif isinstance(exc, (NotFound, UnknownInstance)) and request.method == "GET":
            status = 404
        else:
            status = 422
        body = ErrorBody(error=exc.code, detail=str(exc))
        return JSONResponse(status_code=status, content=body.model_dump())

    # -- command plane --

    @app.post("/messages", response_model=ReplyOut)
    def post_message(
        body: dict[str, Any] = Body(...), _: None = Depends(require_token)
    ) -> dict[str, Any]:
        envelope = parse_envelope(body)
        reply = runtime.broker.submit(envelope)
        if not runtime.bus.running:
            runtime.bus.drain()
        return reply.to_dict()

    # -- resource views --

    @app.get("/offers", response_model=list[OfferOut])
    def get_offers(
        target: str | None = Query(default=None),
        performance_class: str | None = Query(default=None, alias="class"),
        minClass: str | None = Query(default=None),
        nearLat: float | None = Query(default=None),
        nearLon: float | None = Query(default=None),
        radiusKm: float | None = Query(default=None),
        maxPrice: float | None = Query(default=None),
        maxPricePerHour: float | None = Query(default=None),
        minEfficiency: float | None = Query(default=None),
        jurisdiction: str | None = Query(default=None),
        needsGpu: bool | None = Query(default=None),
        extraConstraints: str | None = Query(default=None),
        _: None = Depends(require_token),
    ) -> list[dict[str, Any]]:
        doc: dict[str, Any] = {}
        min_class = performance_class or minClass
        if min_class is not None:
            doc["minClass"] = min_class
        if nearLat is not None or nearLon is not None:
            if nearLat is None or nearLon is None:
                raise ValidationError("nearLat and nearLon must be given together")
            near: dict[str, Any] = {"point": {"latitudeDeg": nearLat, "longitudeDeg": nearLon}}
            if radiusKm is not None:
                near["radiusKm"] = radiusKm
            doc["near"] = near
        if maxPrice is not None or maxPricePerHour is not None:
            doc["maxPricePerHour"] = maxPrice if maxPrice is not None else maxPricePerHour
        if minEfficiency is not None:
            doc["minEfficiency"] = minEfficiency
        if jurisdiction is not None:
            doc["jurisdiction"] = jurisdiction
        if needsGpu is not None:
            doc["needsGpu"] = needsGpu
        if extraConstraints is not None:
            try:
                doc["extraConstraints"] = json.loads(extraConstraints)
            except json.JSONDecodeError:
                raise ValidationError("extraConstraints must be a JSON object") from None
        if not doc:
            # Unconstrained browse: every published offer, cheap first.
            offers = runtime.catalog.list()
            if target is not None:
                offers = [o for o in offers if o.target == target]
            offers.sort(
                key=lambda o: (
                    o.attributes.price_per_hour,
                    -o.attributes.efficiency_score,
                    o.offer_id,
                )
            )
            return [o.to_dict() for o in offers]
        requirement = Requirement.from_dict(
            doc,
            default_target=target or "VirtualMachine",
            default_radius_km=runtime.config.default_radius_km,
        )
        return [o.to_dict() for o in runtime.catalog.search(requirement)]

    @app.get("/instances", response_model=list[InstanceOut])
    def get_instances(
        state: str | None = Query(default=None), _: None = Depends(require_token)
    ) -> list[dict[str, Any]]:
        instances = runtime.registry.list()
        if state is not None:
            instances = [doc for doc in instances if doc["state"] == state]
        return instances

    @app.get("/instances/{instance_id}", response_model=InstanceOut)
    def get_instance(instance_id: str, _: None = Depends(require_token)) -> dict[str, Any]:
        return runtime.registry.get(instance_id)

    @app.get("/replies/{message_id}", response_model=ReplyOut)
    def get_reply(message_id: str, _: None = Depends(require_token)) -> dict[str, Any]:
        reply = runtime.broker.reply_for(message_id)
        if reply is None:
            raise NotFound(f"no terminal reply for message {message_id}")
        return reply.to_dict()

    @app.post("/webhooks", response_model=SubscriptionOut)
    def post_webhook(
        body: WebhookIn, _: None = Depends(require_token)
    ) -> dict[str, Any]:
        return runtime.subscriptions.register(body.url, body.secretToken)

    # -- template portability --

    @app.get("/templates/export")
    def export_templates(_: None = Depends(require_token)) -> list[dict[str, Any]]:
        return [t.to_dict() for t in runtime.templates.list()]

    @app.put("/templates/export", response_model=ImportResult)
    def import_templates(
        body: list[dict[str, Any]] = Body(...), _: None = Depends(require_token)
    ) -> dict[str, Any]:
        templates = [Template.from_dict(doc) for doc in body]
        runtime.templates.replace_all(templates)
        return {"imported": len(templates)}

    # -- unauthenticated helpers --

    @app.get("/schema/envelope")
    def envelope_schema() -> dict[str, Any]:
        return ENVELOPE_SCHEMA

    @app.get("/health", response_model=HealthOut)
    def health() -> dict[str, Any]:
        return {"status": "ok", "storePath": runtime.config.store_path}

    return app


def serve(runtime: Runtime) -> None:
    import uvicorn

    app = create_app(runtime)
    uvicorn.run(app, host=runtime.config.host, port=runtime.config.port, log_level="info")
