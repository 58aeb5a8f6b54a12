"""HTTP gateway: status codes, auth, query mapping, template portability."""

from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from ottbroker.envelope import new_envelope
from ottbroker.service import create_app


@pytest.fixture
def api(make_runtime):
    # no lifespan: the bus worker stays off and POST /messages drains inline
    return TestClient(create_app(make_runtime()))


def _post(api, command, target, payload, message_id=None, **extra):
    envelope = new_envelope(command, target, payload, message_id=message_id, **extra)
    return api.post("/messages", json=envelope.to_dict())


CREATE_PAYLOAD = {
    "requirement": {
        "minClass": "XL",
        "near": {"latitudeDeg": 52.52, "longitudeDeg": 13.405},
        "radiusKm": 100.0,
    },
    "params": {"instanceName": "g1"},
}


class TestStatusCodes:
    def test_register_template_is_accepted(self, api):
        response = _post(
            api,
            "register",
            "Template",
            {
                "templateId": "gw-prov",
                "layer": "provider",
                "providerId": "alpha",
                "body": {"plan": "p"},
            },
        )
        assert response.status_code == 200
        assert response.json()["status"] == "accepted"

    def test_unmatchable_requirement_is_422(self, api):
        response = _post(
            api, "create", "VirtualMachine", {"requirement": {"minClass": "XL", "maxPricePerHour": 0.01}}
        )
        assert response.status_code == 422
        assert response.json()["error"] == "NoOfferMatched"

    def test_unknown_command_is_400(self, api):
        response = api.post(
            "/messages",
            json={"messageId": "m-x", "command": "frobnicate", "target": "Template"},
        )
        assert response.status_code == 400
        assert response.json()["error"] == "UnknownCommand"

    def test_missing_message_id_is_400(self, api):
        response = api.post("/messages", json={"command": "create", "target": "VirtualMachine"})
        assert response.status_code == 400
        assert response.json()["error"] == "MissingField"

    def test_replayed_message_id_is_409(self, api):
        first = _post(api, "create", "VirtualMachine", CREATE_PAYLOAD, message_id="m-dup")
        assert first.status_code == 200
        second = _post(api, "create", "VirtualMachine", CREATE_PAYLOAD, message_id="m-dup")
        assert second.status_code == 409
        assert second.json()["error"] == "DuplicateMessageId"

    def test_unknown_instance_is_404(self, api):
        response = api.get("/instances/i-missing")
        assert response.status_code == 404
        assert response.json()["error"] == "UnknownInstance"

    def test_unknown_reply_is_404(self, api):
        assert api.get("/replies/m-missing").status_code == 404

    def test_bad_webhook_url_is_422(self, api):
        response = api.post("/webhooks", json={"url": "ftp://nope"})
        assert response.status_code == 422


class TestAuth:
    @pytest.fixture
    def locked(self, make_runtime):
        return TestClient(create_app(make_runtime(tokens=["tok-1"])))

    def test_missing_token_is_401(self, locked):
        assert locked.get("/offers").status_code == 401

    def test_wrong_token_is_401(self, locked):
        response = locked.get("/offers", headers={"Authorization": "Bearer nope"})
        assert response.status_code == 401
        assert response.json()["error"] == "Unauthorized"

    def test_right_token_passes(self, locked):
        response = locked.get("/offers", headers={"Authorization": "Bearer tok-1"})
        assert response.status_code == 200

    def test_health_and_schema_stay_open(self, locked):
        assert locked.get("/health").status_code == 200
        assert locked.get("/schema/envelope").status_code == 200


class TestOfferQueries:
    def test_class_near_radius_mapping(self, api):
        response = api.get(
            "/offers",
            params={"class": "XL", "nearLat": 52.52, "nearLon": 13.405, "radiusKm": 100},
        )
        assert response.status_code == 200
        assert [o["offerId"] for o in response.json()] == ["beta-berlin-xl"]

    def test_wider_radius_ranks_by_price(self, api):
        response = api.get(
            "/offers",
            params={"class": "XL", "nearLat": 52.52, "nearLon": 13.405, "radiusKm": 600},
        )
        assert [o["offerId"] for o in response.json()] == [
            "alpha-frankfurt-xl",
            "beta-berlin-xl",
            "beta-munich-xl",
        ]

    def test_max_price_filter(self, api):
        response = api.get("/offers", params={"class": "XL", "maxPrice": 0.45})
        ids = [o["offerId"] for o in response.json()]
        assert ids == ["alpha-ashburn-xl", "alpha-frankfurt-xl"]

    def test_min_efficiency_filter(self, api):
        response = api.get("/offers", params={"minEfficiency": 0.8})
        assert {o["providerId"] for o in response.json()} == {"beta"}

    def test_network_target(self, api):
        response = api.get("/offers", params={"target": "NetworkLink"})
        assert [o["offerId"] for o in response.json()] == ["netco-berlin-link-1g"]

    def test_lat_without_lon_is_rejected(self, api):
        response = api.get("/offers", params={"nearLat": 52.52})
        assert response.status_code == 422

    def test_unconstrained_browse_lists_everything(self, api):
        offers = api.get("/offers").json()
        assert len(offers) == 13
        prices = [o["attributes"]["pricePerHour"] for o in offers]
        assert prices == sorted(prices)


def test_full_flow_over_http(api):
    created = _post(api, "create", "VirtualMachine", CREATE_PAYLOAD, message_id="m-flow")
    assert created.status_code == 200
    body = created.json()
    assert body["status"] == "accepted"
    instance_id = body["resultPayload"]["instanceId"]

    instance = api.get(f"/instances/{instance_id}").json()
    assert instance["state"] == "RUNNING"
    assert instance["providerRef"].startswith("beta/")

    running = api.get("/instances", params={"state": "RUNNING"}).json()
    assert [doc["instanceId"] for doc in running] == [instance_id]

    reply = api.get("/replies/m-flow").json()
    assert reply["status"] == "completed"
    assert reply["correlationId"] == "m-flow"

    removed = _post(
        api, "remove", "VirtualMachine", {"instanceId": instance_id}, message_id="m-rm"
    )
    assert removed.status_code == 200
    assert api.get(f"/instances/{instance_id}").json()["state"] == "TERMINATED"
    assert api.get("/replies/m-rm").json()["status"] == "completed"


def test_webhook_registration_and_ping(api):
    response = api.post("/webhooks", json={"url": "http://hooks.test/x", "secretToken": "t"})
    assert response.status_code == 200
    assert response.json()["subscriptionId"].startswith("sub-")


def test_template_export_import_round_trip(api):
    exported = api.get("/templates/export").json()
    assert isinstance(exported, list)
    assert len(exported) == 26  # one provider and one customer layer per offer
    by_id = {t["templateId"]: t for t in exported}
    assert by_id["beta-berlin-xl"]["layer"] == "customer"

    put = api.put("/templates/export", json=exported)
    assert put.status_code == 200
    assert put.json() == {"imported": 26}
    assert api.get("/templates/export").json() == exported


def test_broken_import_is_rejected_and_rolled_back(api):
    exported = api.get("/templates/export").json()
    broken = [t for t in exported if t.get("parentId")]  # drop every provider layer
    response = api.put("/templates/export", json=broken)
    assert response.status_code == 422
    assert response.json()["error"] == "DanglingParent"
    assert api.get("/templates/export").json() == exported


def test_envelope_schema_names_the_required_fields(api):
    schema = api.get("/schema/envelope").json()
    assert set(schema["required"]) >= {"messageId", "command", "target"}


def test_health_reports_store_path(api):
    body = api.get("/health").json()
    assert body["status"] == "ok"