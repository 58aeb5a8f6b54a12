"""Envelope parsing, routing and reply construction."""

from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from ottbroker.envelope import (
    CommandVerb,
    ReplyStatus,
    make_reply,
    new_envelope,
    parse_envelope,
    route_key,
    serialize_envelope,
)
from ottbroker.errors import MalformedDocument, MissingField, UnknownCommand


def test_parse_minimal_register():
    doc = {
        "messageId": "m1",
        "command": "register",
        "target": "VirtualMachine",
        "payload": {"name": "vm-1"},
    }
    envelope = parse_envelope(doc)
    assert envelope.message_id == "m1"
    assert envelope.command is CommandVerb.REGISTER
    assert envelope.target == "VirtualMachine"
    assert envelope.payload == {"name": "vm-1"}


def test_unknown_command_rejected():
    doc = {"messageId": "m2", "command": "frobnicate", "target": "X", "payload": {}}
    with pytest.raises(UnknownCommand):
        parse_envelope(doc)


def test_missing_message_id_rejected():
    with pytest.raises(MissingField, match="messageId"):
        parse_envelope({"command": "create"})


def test_non_object_rejected():
    with pytest.raises(MalformedDocument):
        parse_envelope("definitely not an envelope")


def test_unknown_target_parses():
    # New payload types must flow through the protocol untouched.
    doc = {"messageId": "m3", "command": "create", "target": "SomethingNew", "payload": {}}
    assert parse_envelope(doc).target == "SomethingNew"


def test_extra_fields_survive_round_trip_and_reply():
    doc = {
        "messageId": "m4",
        "command": "query",
        "target": "VirtualMachine",
        "payload": {},
        "tenant": "acme",
    }
    envelope = parse_envelope(doc)
    assert envelope.extra == {"tenant": "acme"}
    reply = make_reply(envelope, ReplyStatus.ACCEPTED, "ok")
    assert reply.to_dict()["tenant"] == "acme"


@pytest.mark.parametrize(
    ("command", "target", "expected"),
    [
        ("create", "VirtualMachine", "create.virtualmachine"),
        ("remove", "Template", "remove.template"),
        ("status", "NetworkLink", "status.networklink"),
    ],
)
def test_route_key(command, target, expected):
    assert route_key(new_envelope(command, target)) == expected


def test_make_reply_correlates():
    envelope = new_envelope("create", "VirtualMachine", message_id="m1")
    assert make_reply(envelope, ReplyStatus.ACCEPTED, "queued").correlation_id == "m1"
    failed = make_reply(envelope, ReplyStatus.FAILED, "no offer matched")
    assert failed.terminal
    done = make_reply(envelope, ReplyStatus.COMPLETED, "instance running", {"state": "RUNNING"})
    assert done.terminal and done.result_payload == {"state": "RUNNING"}
    assert not make_reply(envelope, ReplyStatus.ACCEPTED, "queued").terminal


_scalars = st.one_of(st.text(max_size=20), st.integers(), st.booleans(), st.none())

_envelopes = st.builds(
    new_envelope,
    command=st.sampled_from([v.value for v in CommandVerb]),
    target=st.from_regex(r"[A-Za-z][A-Za-z0-9_-]{0,15}", fullmatch=True),
    payload=st.dictionaries(st.text(min_size=1, max_size=10), _scalars, max_size=4),
    reply_to=st.one_of(st.none(), st.text(min_size=1, max_size=10)),
    correlation_id=st.none(),
)


@given(_envelopes)
def test_round_trip(envelope):
    assert parse_envelope(serialize_envelope(envelope)) == envelope


@given(
    st.lists(
        st.tuples(
            st.sampled_from([v.value for v in CommandVerb]),
            st.from_regex(r"[A-Za-z][A-Za-z0-9_-]{0,10}", fullmatch=True),
        ),
        unique=True,
        min_size=2,
        max_size=10,
    )
)
def test_route_key_injective_after_lowercasing(pairs):
    lowered = {(command, target.lower()) for command, target in pairs}
    keys = {route_key(new_envelope(command, target)) for command, target in pairs}
    assert len(keys) == len(lowered)
