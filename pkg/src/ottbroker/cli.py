"""Command line client for the broker gateway.

Every mutating subcommand builds a message envelope and POSTs it; with no
``--server`` the gateway runs in-process on the local store, so the same
commands work with or without a running daemon.  ``--dry-run`` prints the
envelope instead of sending it.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path
from typing import Any

import click
import httpx

from .config import BrokerConfig, load_config
from .envelope import new_envelope
from .lifecycle import InstanceState, TERMINAL_STATES

DEFAULT_CONFIG = "config/broker.json"

_REQUIREMENT_OPTIONS = [
    click.option("--target", default="VirtualMachine", show_default=True),
    click.option("--class", "--min-class", "min_class", type=click.Choice(["S", "M", "L", "XL"])),
    click.option("--near", help="latitude,longitude of the reference point"),
    click.option("--radius", "--radius-km", "radius_km", type=float),
    click.option("--max-price", "max_price", type=float, help="max price per hour"),
    click.option("--min-efficiency", "min_efficiency", type=float),
    click.option("--jurisdiction", type=click.Choice(["EU", "US", "OTHER"])),
    click.option("--needs-gpu", "needs_gpu", is_flag=True, default=None),
    click.option(
        "--extra", "extras", multiple=True, help="extra constraint key=value, repeatable"
    ),
]


def requirement_options(fn):
    for option in reversed(_REQUIREMENT_OPTIONS):
        fn = option(fn)
    return fn


class GatewayClient:
    """HTTP client against a remote gateway or an in-process one."""

    def __init__(self, server: str | None, config_path: str | None, token: str | None):
        headers = {"Authorization": f"Bearer {token}"} if token else {}
        self._runtime = None
        if server:
            self._client = httpx.Client(base_url=server.rstrip("/"), headers=headers, timeout=30.0)
        else:
            from fastapi.testclient import TestClient

            from .runtime import build_runtime
            from .service import create_app

            config = self._load(config_path)
            self._runtime = build_runtime(config)
            # Not started: the gateway drains the bus after each message.
            self._client = TestClient(create_app(self._runtime), headers=headers)

    @staticmethod
    def _load(config_path: str | None) -> BrokerConfig:
        if config_path:
            return load_config(config_path)
        if Path(DEFAULT_CONFIG).exists():
            return load_config(DEFAULT_CONFIG)
        return BrokerConfig(store_path=None, bootstrap_catalog=False)

    def close(self) -> None:
        self._client.close()
        if self._runtime is not None:
            self._runtime.stop()

    def send(self, envelope_doc: dict[str, Any]) -> tuple[int, dict[str, Any]]:
        response = self._client.post("/messages", json=envelope_doc)
        return response.status_code, response.json()

    def get(self, path: str, params: dict[str, Any] | None = None) -> tuple[int, Any]:
        response = self._client.get(path, params=params)
        return response.status_code, response.json()

    def post(self, path: str, body: dict[str, Any]) -> tuple[int, Any]:
        response = self._client.post(path, json=body)
        return response.status_code, response.json()


class Ctx:
    def __init__(self, server, config_path, token, dry_run, as_json):
        self.server = server
        self.config_path = config_path
        self.token = token
        self.dry_run = dry_run
        self.as_json = as_json
        self._client: GatewayClient | None = None

    @property
    def client(self) -> GatewayClient:
        if self._client is None:
            self._client = GatewayClient(self.server, self.config_path, self.token)
        return self._client

    def close(self) -> None:
        if self._client is not None:
            self._client.close()


pass_ctx = click.make_pass_decorator(Ctx)


@click.group()
@click.option("--config", "config_path", envvar="BROKER_CONFIG", type=click.Path(), default=None)
@click.option("--server", envvar="BROKER_SERVER", default=None, help="gateway base URL")
@click.option("--token", envvar="BROKER_TOKEN", default=None)
@click.option("--dry-run", is_flag=True, help="print the envelope, send nothing")
@click.option("--json", "as_json", is_flag=True, help="raw JSON output")
@click.pass_context
def main(ctx, config_path, server, token, dry_run, as_json):
    """Talk to the resource broker."""
    ctx.obj = Ctx(server, config_path, token, dry_run, as_json)
    ctx.call_on_close(ctx.obj.close)


def _emit(ctx: Ctx, status_code: int, body: Any, show: bool = True) -> None:
    """Print the body in --json mode (unless this is an intermediate fetch)
    and exit 1 on HTTP errors.  Errors always print, whatever `show` says."""
    if ctx.as_json and (show or status_code >= 400):
        click.echo(json.dumps(body, indent=2))
    if status_code >= 400:
        if not ctx.as_json:
            error = body.get("error", status_code) if isinstance(body, dict) else status_code
            detail = body.get("detail", "") if isinstance(body, dict) else body
            click.echo(f"error [{error}]: {detail}", err=True)
        sys.exit(1)


def _send(ctx: Ctx, envelope_doc: dict[str, Any], show: bool = True) -> dict[str, Any]:
    """Dry-run, or send and fail fast on HTTP/reply errors."""
    if ctx.dry_run:
        click.echo(json.dumps(envelope_doc, indent=2))
        sys.exit(0)
    status_code, body = ctx.client.send(envelope_doc)
    _emit(ctx, status_code, body, show=show)
    if body.get("status") in ("rejected", "failed"):
        if not ctx.as_json:
            click.echo(f"{body['status']}: {body.get('detail', '')}", err=True)
        sys.exit(1)
    return body


def _parse_kv(pairs: tuple[str, ...], option: str) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise click.BadParameter(f"{option} expects key=value, got {pair!r}")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def _requirement_doc(
    target, min_class, near, radius_km, max_price, min_efficiency, jurisdiction, needs_gpu, extras
) -> dict[str, Any]:
    doc: dict[str, Any] = {"target": target}
    if min_class:
        doc["minClass"] = min_class
    if near:
        try:
            lat, lon = (float(part) for part in near.split(","))
        except ValueError:
            raise click.BadParameter("--near expects latitude,longitude") from None
        near_doc: dict[str, Any] = {"point": {"latitudeDeg": lat, "longitudeDeg": lon}}
        if radius_km is not None:
            near_doc["radiusKm"] = radius_km
        doc["near"] = near_doc
    if max_price is not None:
        doc["maxPricePerHour"] = max_price
    if min_efficiency is not None:
        doc["minEfficiency"] = min_efficiency
    if jurisdiction:
        doc["jurisdiction"] = jurisdiction
    if needs_gpu is not None:
        doc["needsGpu"] = needs_gpu
    if extras:
        doc["extraConstraints"] = _parse_kv(extras, "--extra")
    return doc


def _wait_for(
    ctx: Ctx, instance_id: str, until: set[InstanceState], timeout_s: float
) -> dict[str, Any]:
    deadline = time.monotonic() + timeout_s
    while True:
        status_code, doc = ctx.client.get(f"/instances/{instance_id}")
        _emit(ctx, status_code, doc, show=False)
        state = InstanceState(doc["state"])
        if state in until or state in TERMINAL_STATES:
            return doc
        if time.monotonic() > deadline:
            click.echo(f"timed out waiting for {instance_id} (state {state.value})", err=True)
            sys.exit(1)
        time.sleep(0.2)


# -- serve --


@main.command()
@pass_ctx
def serve(ctx):
    """Run the HTTP gateway in the foreground."""
    from .runtime import build_runtime
    from .service import serve as run_server

    config = GatewayClient._load(ctx.config_path)
    runtime = build_runtime(config)
    click.echo(f"gateway on http://{config.host}:{config.port}", err=True)
    run_server(runtime)


# -- templates --


@main.group()
def template():
    """Manage the template store."""


@template.command("register")
@click.option("--file", "file_", type=click.File("r"), default="-", show_default=True)
@pass_ctx
def template_register(ctx, file_):
    """Register a template from a JSON document."""
    try:
        doc = json.load(file_)
    except json.JSONDecodeError as exc:
        raise click.BadParameter(f"not valid JSON: {exc}") from None
    envelope = new_envelope("register", "Template", doc)
    body = _send(ctx, envelope.to_dict())
    if not ctx.as_json:
        click.echo(f"registered {body['resultPayload']['templateId']}")


@template.command("remove")
@click.argument("template_id")
@pass_ctx
def template_remove(ctx, template_id):
    envelope = new_envelope("remove", "Template", {"templateId": template_id})
    _send(ctx, envelope.to_dict())
    if not ctx.as_json:
        click.echo(f"removed {template_id}")


@template.command("list")
@pass_ctx
def template_list(ctx):
    envelope = new_envelope("query", "Template", {})
    body = _send(ctx, envelope.to_dict())
    templates = body["resultPayload"]["templates"]
    if ctx.as_json:
        return
    for doc in templates:
        parent = f" -> {doc['parentId']}" if doc.get("parentId") else ""
        provider = f" (provider {doc['providerId']})" if doc.get("providerId") else ""
        click.echo(f"{doc['templateId']} [{doc['layer']}]{parent}{provider}")


# -- offers --


@main.group()
def offer():
    """Publish, withdraw and search offers."""


@offer.command("publish")
@click.argument("offer_id")
@click.argument("customer_template_id")
@click.option("--target", default="VirtualMachine", show_default=True)
@pass_ctx
def offer_publish(ctx, offer_id, customer_template_id, target):
    envelope = new_envelope(
        "register", target, {"offerId": offer_id, "customerTemplateId": customer_template_id}
    )
    _send(ctx, envelope.to_dict())
    if not ctx.as_json:
        click.echo(f"published {offer_id} ({target})")


@offer.command("withdraw")
@click.argument("offer_id")
@click.option("--target", default="VirtualMachine", show_default=True)
@pass_ctx
def offer_withdraw(ctx, offer_id, target):
    envelope = new_envelope("delete", target, {"offerId": offer_id})
    _send(ctx, envelope.to_dict())
    if not ctx.as_json:
        click.echo(f"withdrawn {offer_id}")


@offer.command("search")
@requirement_options
@pass_ctx
def offer_search(
    ctx, target, min_class, near, radius_km, max_price, min_efficiency, jurisdiction,
    needs_gpu, extras,
):
    """Rank matching offers, best first."""
    requirement = _requirement_doc(
        target, min_class, near, radius_km, max_price, min_efficiency, jurisdiction,
        needs_gpu, extras,
    )
    envelope = new_envelope("query", target, requirement)
    body = _send(ctx, envelope.to_dict())
    offers = body["resultPayload"]["offers"]
    if ctx.as_json:
        return
    if not offers:
        click.echo("no matching offers")
        return
    for rank, doc in enumerate(offers, start=1):
        attrs = doc["attributes"]
        label = attrs["location"].get("label", "?")
        click.echo(
            f"{rank}. {doc['offerId']}  class={attrs['performanceClass']} "
            f"price={attrs['pricePerHour']}/h eff={attrs['efficiencyScore']} "
            f"site={label} provider={doc['providerId']}"
        )


# -- instances --


@main.group()
def instance():
    """Create, inspect and remove instances."""


@instance.command("create")
@click.option("--offer", "offer_id", default=None, help="instantiate this offer directly")
@click.option("--param", "params", multiple=True, help="template parameter key=value")
@click.option("--subscription", "subscription_id", default=None)
@click.option("--wait/--no-wait", default=True, show_default=True)
@click.option("--timeout", "timeout_s", type=float, default=30.0, show_default=True)
@requirement_options
@pass_ctx
def instance_create(
    ctx, offer_id, params, subscription_id, wait, timeout_s, target, min_class, near,
    radius_km, max_price, min_efficiency, jurisdiction, needs_gpu, extras,
):
    """Create an instance from an offer or from requirement constraints."""
    payload: dict[str, Any] = {"params": _parse_kv(params, "--param")}
    if offer_id:
        payload["offerId"] = offer_id
    else:
        payload["requirement"] = _requirement_doc(
            target, min_class, near, radius_km, max_price, min_efficiency, jurisdiction,
            needs_gpu, extras,
        )
    envelope = new_envelope("create", target, payload, reply_to=subscription_id)
    # When waiting, the one JSON document printed is the final instance doc.
    body = _send(ctx, envelope.to_dict(), show=not wait)
    result = body["resultPayload"]
    instance_id = result["instanceId"]
    if not ctx.as_json:
        click.echo(f"accepted {instance_id} on {result['offerId']}")
    if not wait:
        return
    doc = _wait_for(ctx, instance_id, {InstanceState.RUNNING}, timeout_s)
    if ctx.as_json:
        click.echo(json.dumps(doc, indent=2))
    else:
        click.echo(f"{instance_id}: {doc['state']} (providerRef {doc.get('providerRef')})")
    if InstanceState(doc["state"]) is not InstanceState.RUNNING:
        sys.exit(1)


@instance.command("remove")
@click.argument("instance_id")
@click.option("--target", default="VirtualMachine", show_default=True)
@click.option("--wait/--no-wait", default=True, show_default=True)
@click.option("--timeout", "timeout_s", type=float, default=30.0, show_default=True)
@pass_ctx
def instance_remove(ctx, instance_id, target, wait, timeout_s):
    envelope = new_envelope("remove", target, {"instanceId": instance_id})
    _send(ctx, envelope.to_dict(), show=not wait)
    if not ctx.as_json:
        click.echo(f"terminating {instance_id}")
    if not wait:
        return
    doc = _wait_for(ctx, instance_id, {InstanceState.TERMINATED}, timeout_s)
    if ctx.as_json:
        click.echo(json.dumps(doc, indent=2))
    else:
        click.echo(f"{instance_id}: {doc['state']}")
    if InstanceState(doc["state"]) is not InstanceState.TERMINATED:
        sys.exit(1)


@instance.command("status")
@click.argument("instance_id")
@pass_ctx
def instance_status(ctx, instance_id):
    status_code, doc = ctx.client.get(f"/instances/{instance_id}")
    _emit(ctx, status_code, doc)
    if ctx.as_json:
        return
    click.echo(f"{doc['instanceId']}: {doc['state']} on {doc['providerId']}")
    for entry in doc["history"]:
        reason = f"  ({entry['reason']})" if entry.get("reason") else ""
        click.echo(f"  {entry['at']}  {entry['state']}{reason}")


@instance.command("list")
@click.option("--state", default=None)
@pass_ctx
def instance_list(ctx, state):
    params = {"state": state} if state else None
    status_code, docs = ctx.client.get("/instances", params=params)
    _emit(ctx, status_code, docs)
    if ctx.as_json:
        return
    if not docs:
        click.echo("no instances")
        return
    for doc in docs:
        click.echo(
            f"{doc['instanceId']}  {doc['state']:<12} {doc['offerId']}  "
            f"{doc.get('providerRef') or '-'}"
        )


# -- webhooks --


@main.command("webhook")
@click.argument("url")
@click.option("--secret", default=None)
@pass_ctx
def webhook_register(ctx, url, secret):
    """Register a webhook for terminal notifications."""
    status_code, doc = ctx.client.post("/webhooks", {"url": url, "secretToken": secret})
    _emit(ctx, status_code, doc)
    if not ctx.as_json:
        click.echo(doc["subscriptionId"])


# -- demo --


@main.group()
def demo():
    """Scripted walkthroughs."""


@demo.command("split-compute")
@click.option("--network", is_flag=True, help="also provision a network link")
@click.option("--timeout", "timeout_s", type=float, default=30.0, show_default=True)
@pass_ctx
def demo_split_compute(ctx, network, timeout_s):
    """A rendering workload outgrows one machine and spills over.

    Finds XL capacity near Berlin, provisions a primary rendering instance,
    then a second one when the first is not enough; with ``--network`` a
    dedicated link between the two is provisioned as well.
    """
    requirement = {
        "target": "VirtualMachine",
        "minClass": "XL",
        "near": {"point": {"latitudeDeg": 52.52, "longitudeDeg": 13.405}, "radiusKm": 100.0},
    }
    click.echo("searching XL capacity within 100 km of Berlin...")
    body = _send(ctx, new_envelope("query", "VirtualMachine", requirement).to_dict())
    offers = body["resultPayload"]["offers"]
    if not offers:
        click.echo("no XL capacity near Berlin", err=True)
        sys.exit(1)
    for rank, doc in enumerate(offers, start=1):
        click.echo(f"  {rank}. {doc['offerId']} at {doc['attributes']['pricePerHour']}/h")

    instances = []
    for name in ("rendering-1", "rendering-2"):
        if name == "rendering-2":
            click.echo("local capacity exhausted; splitting the workload...")
        payload = {"requirement": requirement, "params": {"instanceName": name}}
        body = _send(ctx, new_envelope("create", "VirtualMachine", payload).to_dict())
        instance_id = body["resultPayload"]["instanceId"]
        click.echo(f"accepted {name} as {instance_id}")
        doc = _wait_for(ctx, instance_id, {InstanceState.RUNNING}, timeout_s)
        click.echo(f"{name}: {doc['state']} at {doc.get('providerRef')}")
        if InstanceState(doc["state"]) is not InstanceState.RUNNING:
            sys.exit(1)
        instances.append(doc)

    if network:
        click.echo("provisioning a reliable link between the two...")
        payload = {
            "requirement": {
                "target": "NetworkLink",
                "extraConstraints": {"reliability": "high"},
            },
            "params": {"instanceName": "rendering-link"},
        }
        body = _send(ctx, new_envelope("create", "NetworkLink", payload).to_dict())
        link_id = body["resultPayload"]["instanceId"]
        doc = _wait_for(ctx, link_id, {InstanceState.RUNNING}, timeout_s)
        click.echo(f"link: {doc['state']} at {doc.get('providerRef')}")
        if InstanceState(doc["state"]) is not InstanceState.RUNNING:
            sys.exit(1)
        instances.append(doc)

    click.echo("history of the spill-over instance:")
    for entry in instances[1]["history"]:
        reason = f"  ({entry['reason']})" if entry.get("reason") else ""
        click.echo(f"  {entry['at']}  {entry['state']}{reason}")


if __name__ == "__main__":
    main()
