"""The ordering protocol: message envelope, command vocabulary and replies.

Every interaction with the broker travels as a :class:`MessageEnvelope`, a
command/target/payload triple plus correlation metadata.  The command set is
closed (new verbs require a code change) while targets are free strings, so
new payload types flow through the existing transport untouched.
"""

from __future__ import annotations

import json
import re
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any

from .errors import MalformedDocument, MissingField, UnknownCommand

_TARGET_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_-]*$")

# Field names owned by the envelope itself; everything else is preserved
# verbatim in `extra` and echoed in replies.
_RESERVED_FIELDS = {
    "messageId",
    "command",
    "target",
    "payload",
    "correlationId",
    "timestamp",
    "replyTo",
}

_REPLY_RESERVED = {"status", "detail", "resultPayload", "correlationId"}


class CommandVerb(str, Enum):
    """Closed set of broker commands."""

    REGISTER = "register"
    REMOVE = "remove"
    CREATE = "create"
    DELETE = "delete"
    QUERY = "query"
    STATUS = "status"


class ReplyStatus(str, Enum):
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    COMPLETED = "completed"
    FAILED = "failed"


#: Terminal reply statuses; every accepted request ends in exactly one of these.
TERMINAL_STATUSES = frozenset({ReplyStatus.COMPLETED, ReplyStatus.FAILED})


@dataclass(frozen=True)
class MessageEnvelope:
    """One unit of broker communication.

    `payload` stays opaque at this layer; handlers interpret it per target.
    Unknown top-level fields of the wire document are kept in `extra` and
    travel with the envelope end to end.
    """

    message_id: str
    command: CommandVerb
    target: str
    payload: dict[str, Any] = field(default_factory=dict)
    correlation_id: str | None = None
    timestamp: datetime = field(default_factory=lambda: datetime.now(timezone.utc))
    reply_to: str | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "messageId": self.message_id,
            "command": self.command.value,
            "target": self.target,
            "payload": self.payload,
            "timestamp": self.timestamp.isoformat().replace("+00:00", "Z"),
        }
        if self.correlation_id is not None:
            doc["correlationId"] = self.correlation_id
        if self.reply_to is not None:
            doc["replyTo"] = self.reply_to
        for key, value in self.extra.items():
            if key not in _RESERVED_FIELDS:
                doc[key] = value
        return doc


@dataclass(frozen=True)
class Reply:
    """Answer to a request; `correlation_id` names the request's messageId."""

    status: ReplyStatus
    detail: str
    correlation_id: str
    result_payload: dict[str, Any] | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def terminal(self) -> bool:
        return self.status in TERMINAL_STATUSES

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "status": self.status.value,
            "detail": self.detail,
            "correlationId": self.correlation_id,
        }
        if self.result_payload is not None:
            doc["resultPayload"] = self.result_payload
        for key, value in self.extra.items():
            if key not in _REPLY_RESERVED:
                doc[key] = value
        return doc

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "Reply":
        if not isinstance(doc, dict):
            raise MalformedDocument("reply must be a JSON object")
        for name in ("status", "detail", "correlationId"):
            if name not in doc:
                raise MissingField(name)
        try:
            status = ReplyStatus(doc["status"])
        except ValueError:
            raise MalformedDocument(f"unknown reply status {doc['status']!r}") from None
        extra = {k: v for k, v in doc.items() if k not in _REPLY_RESERVED}
        return cls(
            status=status,
            detail=str(doc["detail"]),
            correlation_id=str(doc["correlationId"]),
            result_payload=doc.get("resultPayload"),
            extra=extra,
        )


def parse_envelope(raw: bytes | str | dict[str, Any]) -> MessageEnvelope:
    """Parse and validate a wire document into an envelope.

    The payload is not interpreted here.  Unknown targets are fine; unknown
    commands are not.
    """
    if isinstance(raw, (bytes, str)):
        try:
            doc = json.loads(raw)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise MalformedDocument(f"not valid JSON: {exc}") from None
    else:
        doc = raw
    if not isinstance(doc, dict):
        raise MalformedDocument("envelope must be a JSON object")

    for name in ("messageId", "command", "target"):
        if name not in doc or doc[name] is None:
            raise MissingField(name)

    message_id = doc["messageId"]
    if not isinstance(message_id, str) or not message_id:
        raise MalformedDocument("messageId must be a non-empty string")

    raw_command = doc["command"]
    try:
        command = CommandVerb(raw_command)
    except ValueError:
        raise UnknownCommand(f"unknown command {raw_command!r}") from None

    target = doc["target"]
    if not isinstance(target, str) or not _TARGET_RE.match(target):
        raise MalformedDocument(f"target must match {_TARGET_RE.pattern}")

    payload = doc.get("payload", {})
    if not isinstance(payload, dict):
        raise MalformedDocument("payload must be a JSON object")

    correlation_id = doc.get("correlationId")
    if correlation_id is not None and not isinstance(correlation_id, str):
        raise MalformedDocument("correlationId must be a string")

    reply_to = doc.get("replyTo")
    if reply_to is not None and not isinstance(reply_to, str):
        raise MalformedDocument("replyTo must be a string")

    raw_ts = doc.get("timestamp")
    if raw_ts is None:
        timestamp = datetime.now(timezone.utc)
    else:
        timestamp = _parse_timestamp(raw_ts)

    extra = {k: v for k, v in doc.items() if k not in _RESERVED_FIELDS}
    return MessageEnvelope(
        message_id=message_id,
        command=command,
        target=target,
        payload=payload,
        correlation_id=correlation_id,
        timestamp=timestamp,
        reply_to=reply_to,
        extra=extra,
    )


def _parse_timestamp(raw: Any) -> datetime:
    if not isinstance(raw, str):
        raise MalformedDocument("timestamp must be an ISO-8601 string")
    text = raw[:-1] + "+00:00" if raw.endswith("Z") else raw
    try:
        parsed = datetime.fromisoformat(text)
    except ValueError:
        raise MalformedDocument(f"timestamp not ISO-8601: {raw!r}") from None
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed.astimezone(timezone.utc)


def serialize_envelope(envelope: MessageEnvelope) -> str:
    return json.dumps(envelope.to_dict(), ensure_ascii=False)


def route_key(envelope: MessageEnvelope) -> str:
    """Deterministic routing string ``<command>.<target>``, lowercase."""
    return f"{envelope.command.value}.{envelope.target.lower()}"


def make_reply(
    request: MessageEnvelope,
    status: ReplyStatus,
    detail: str,
    result_payload: dict[str, Any] | None = None,
) -> Reply:
    """Build a reply correlated to `request`, echoing its extra fields."""
    return Reply(
        status=status,
        detail=detail,
        correlation_id=request.message_id,
        result_payload=result_payload,
        extra=dict(request.extra),
    )


def new_envelope(
    command: CommandVerb | str,
    target: str,
    payload: dict[str, Any] | None = None,
    reply_to: str | None = None,
    correlation_id: str | None = None,
    message_id: str | None = None,
) -> MessageEnvelope:
    """Client-side constructor: fresh UUIDv4 messageId, current UTC timestamp."""
    return MessageEnvelope(
        message_id=message_id or str(uuid.uuid4()),
        command=CommandVerb(command),
        target=target,
        payload=payload or {},
        correlation_id=correlation_id,
        reply_to=reply_to,
    )


# Published at GET /schema/envelope.
ENVELOPE_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "MessageEnvelope",
    "type": "object",
    "properties": {
        "messageId": {"type": "string", "minLength": 1},
        "command": {"enum": [verb.value for verb in CommandVerb]},
        "target": {"type": "string", "pattern": _TARGET_RE.pattern},
        "payload": {"type": "object"},
        "correlationId": {"type": "string"},
        "timestamp": {"type": "string", "format": "date-time"},
        "replyTo": {"type": "string"},
    },
    "required": ["messageId", "command", "target"],
    "additionalProperties": True,
}
