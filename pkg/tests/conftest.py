"""Shared fixtures: the standard provider set and ready-built runtimes.

Runtimes here use zero provider latency and an in-memory store so tests
drain synchronously; anything that needs durability builds its own runtime
over a tmp_path store file.
"""

from __future__ import annotations

from pathlib import Path

import pytest

from ottbroker.config import BrokerConfig, load_config
from ottbroker.runtime import Runtime, build_runtime

CONFIG_PATH = Path(__file__).resolve().parent.parent / "config" / "broker.json"


@pytest.fixture(scope="session")
def standard_providers():
    return load_config(CONFIG_PATH).providers


@pytest.fixture
def make_runtime(standard_providers):
    """Factory for runtimes over the standard fixture set; every runtime
    built here is stopped at teardown."""
    built: list[Runtime] = []

    def factory(**overrides) -> Runtime:
        transport = overrides.pop("webhook_transport", None)
        sleeper = overrides.pop("webhook_sleeper", lambda seconds: None)
        settings = {
            "store_path": None,
            "providers": standard_providers,
            "provider_latency_ms": (0.0, 0.0),
        }
        settings.update(overrides)
        runtime = build_runtime(
            BrokerConfig(**settings),
            webhook_transport=transport,
            webhook_sleeper=sleeper,
        )
        built.append(runtime)
        return runtime

    yield factory
    for runtime in built:
        runtime.stop()


@pytest.fixture
def runtime(make_runtime) -> Runtime:
    return make_runtime()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance-criterion verdicts after the test summary."""
    import sys

    for module in list(sys.modules.values()):
        verdicts = getattr(module, "ACCEPTANCE_VERDICTS", None)
        if verdicts:
            terminalreporter.section("acceptance criteria")
            for line in verdicts:
                terminalreporter.write_line(line)
