"""CLI against an in-process gateway: flags, exit codes, demo script."""

from __future__ import annotations

import json
import re
from pathlib import Path

import pytest
from click.testing import CliRunner

from ottbroker.cli import main

PROVIDERS_FILE = Path(__file__).resolve().parent.parent / "config" / "providers.json"

SEARCH_XL_BERLIN = ["offer", "search", "--class", "XL", "--near", "52.52,13.405", "--radius", "100"]


@pytest.fixture
def cli_env(tmp_path):
    config_path = tmp_path / "broker.json"
    config_path.write_text(
        json.dumps(
            {
                "storePath": str(tmp_path / "store.jsonl"),
                "providersFile": str(PROVIDERS_FILE),
                "bootstrapCatalog": True,
                "providerLatencyMs": [0, 0],
            }
        )
    )
    runner = CliRunner()

    def invoke(*args):
        return runner.invoke(main, ["--config", str(config_path), *args])

    invoke.store_path = tmp_path / "store.jsonl"
    return invoke


def test_search_finds_the_berlin_offer_first(cli_env):
    result = cli_env(*SEARCH_XL_BERLIN)
    assert result.exit_code == 0, result.output
    first_line = result.output.splitlines()[0]
    assert first_line.startswith("1. beta-berlin-xl")
    assert "provider=beta" in first_line


def test_search_without_matches_says_so(cli_env):
    result = cli_env("offer", "search", "--class", "XL", "--max-price", "0.01")
    assert result.exit_code == 0
    assert "no matching offers" in result.output


def test_search_json_output_is_the_reply(cli_env):
    result = cli_env("--json", *SEARCH_XL_BERLIN)
    assert result.exit_code == 0
    body = json.loads(result.output)
    assert body["status"] == "accepted"
    assert body["resultPayload"]["offers"][0]["offerId"] == "beta-berlin-xl"


def test_bad_flag_value_is_a_usage_error(cli_env):
    result = cli_env("offer", "search", "--radius", "wide")
    assert result.exit_code == 2


def test_bad_param_shape_is_a_usage_error(cli_env):
    result = cli_env("instance", "create", "--class", "XL", "--param", "nameonly")
    assert result.exit_code == 2


def test_dry_run_prints_the_envelope_and_writes_nothing(cli_env):
    # settle bootstrap writes first so the byte comparison is exact
    assert cli_env(*SEARCH_XL_BERLIN).exit_code == 0
    before = cli_env.store_path.read_bytes()

    result = cli_env(
        "--dry-run", "instance", "create", "--class", "XL",
        "--near", "52.52,13.405", "--radius", "100", "--param", "instanceName=x",
    )
    assert result.exit_code == 0
    envelope = json.loads(result.output)
    assert envelope["command"] == "create"
    assert envelope["payload"]["params"] == {"instanceName": "x"}
    assert cli_env.store_path.read_bytes() == before


def test_create_status_remove_round_trip(cli_env):
    created = cli_env(
        "instance", "create", "--class", "XL", "--near", "52.52,13.405",
        "--radius", "100", "--param", "instanceName=c1",
    )
    assert created.exit_code == 0, created.output
    match = re.search(r"accepted (i-[0-9a-f]+) on beta-berlin-xl", created.output)
    assert match, created.output
    instance_id = match.group(1)
    assert f"{instance_id}: RUNNING (providerRef beta/1)" in created.output

    # separate process in spirit: a fresh client over the same store file
    status = cli_env("instance", "status", instance_id)
    assert status.exit_code == 0
    assert f"{instance_id}: RUNNING on beta" in status.output
    history_states = re.findall(r"Z  (\w+)", status.output)
    assert history_states == ["REQUESTED", "PROVISIONING", "RUNNING"]

    removed = cli_env("instance", "remove", instance_id)
    assert removed.exit_code == 0
    assert f"{instance_id}: TERMINATED" in removed.output

    listing = cli_env("instance", "list", "--state", "TERMINATED")
    assert instance_id in listing.output


def test_create_json_mode_prints_one_parseable_document(cli_env):
    result = cli_env(
        "--json", "instance", "create", "--class", "XL", "--near", "52.52,13.405",
        "--radius", "100", "--param", "instanceName=j1",
    )
    assert result.exit_code == 0, result.output
    doc = json.loads(result.output)  # would fail on concatenated documents
    assert doc["state"] == "RUNNING"
    assert doc["providerRef"] == "beta/1"


def test_create_by_offer_id(cli_env):
    result = cli_env(
        "instance", "create", "--offer", "alpha-frankfurt-s", "--param", "instanceName=tiny",
    )
    assert result.exit_code == 0, result.output
    assert "providerRef alpha/1" in result.output


def test_remove_missing_template_fails_cleanly(cli_env):
    result = cli_env("template", "remove", "missing-id")
    assert result.exit_code == 1
    assert "NotFound" in result.stderr


def test_register_template_from_file(cli_env, tmp_path):
    doc = {
        "templateId": "cli-prov",
        "layer": "provider",
        "providerId": "alpha",
        "body": {"plan": "bare"},
    }
    path = tmp_path / "template.json"
    path.write_text(json.dumps(doc))
    result = cli_env("template", "register", "--file", str(path))
    assert result.exit_code == 0
    assert "registered cli-prov" in result.output
    assert "cli-prov [provider]" in cli_env("template", "list").output


def test_webhook_registration(cli_env):
    result = cli_env("--json", "webhook", "http://hooks.test/cli", "--secret", "s")
    assert result.exit_code == 0
    assert json.loads(result.output)["subscriptionId"].startswith("sub-")


class TestDemo:
    def test_split_compute_spills_over_and_ends_running(self, cli_env):
        result = cli_env("demo", "split-compute")
        assert result.exit_code == 0, result.output
        out = result.output
        assert "splitting the workload" in out
        assert "rendering-1: RUNNING" in out
        assert "rendering-2: RUNNING" in out
        # the printed history of the spill-over instance ends at RUNNING
        tail = out[out.index("history of the spill-over instance:"):]
        assert re.findall(r"Z  (\w+)", tail) == ["REQUESTED", "PROVISIONING", "RUNNING"]

    def test_split_compute_with_network_link(self, cli_env):
        result = cli_env("demo", "split-compute", "--network")
        assert result.exit_code == 0, result.output
        assert "link: RUNNING at netco/1" in result.output
