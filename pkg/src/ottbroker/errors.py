"""Error taxonomy shared across the broker.

Every error carries a stable ``code`` (the error name used in HTTP bodies,
reply details and CLI output) so callers can match on it without parsing
message text.
"""

from __future__ import annotations


class BrokerError(Exception):
    """Base class for all broker errors."""

    code = "BrokerError"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code


# -- envelope / wire ---------------------------------------------------------

class MalformedDocument(BrokerError):
    code = "MalformedDocument"


class UnknownCommand(BrokerError):
    code = "UnknownCommand"


class MissingField(BrokerError):
    code = "MissingField"


class DuplicateMessageId(BrokerError):
    code = "DuplicateMessageId"


class UnknownCorrelation(BrokerError):
    code = "UnknownCorrelation"


# -- validation --------------------------------------------------------------

class ValidationError(BrokerError):
    code = "ValidationError"


# -- templates ---------------------------------------------------------------

class DuplicateId(BrokerError):
    code = "DuplicateId"


class DanglingParent(BrokerError):
    code = "DanglingParent"


class CycleDetected(BrokerError):
    code = "CycleDetected"


class MissingProviderId(BrokerError):
    code = "MissingProviderId"


class InvalidTemplate(BrokerError):
    code = "InvalidTemplate"


class NotFound(BrokerError):
    code = "NotFound"


class InUse(BrokerError):
    code = "InUse"


class MissingParam(BrokerError):
    code = "MissingParam"


class BrokenChain(BrokerError):
    code = "BrokenChain"


class DepthExceeded(BrokerError):
    code = "DepthExceeded"


# -- catalog -----------------------------------------------------------------

class NotCustomerLayer(BrokerError):
    code = "NotCustomerLayer"


class DuplicateOffer(BrokerError):
    code = "DuplicateOffer"


class NoOfferMatched(BrokerError):
    code = "NoOfferMatched"


# -- lifecycle ---------------------------------------------------------------

class NotRemovable(BrokerError):
    code = "NotRemovable"


class UnknownInstance(BrokerError):
    code = "UnknownInstance"


class IllegalTransition(BrokerError):
    code = "IllegalTransition"


class NoHandler(BrokerError):
    code = "NoHandler"


# -- providers ---------------------------------------------------------------

class UnknownPackage(BrokerError):
    code = "UnknownPackage"


class UnknownSite(BrokerError):
    code = "UnknownSite"


class InjectedFailure(BrokerError):
    code = "InjectedFailure"


class UnknownRef(BrokerError):
    code = "UnknownRef"


# -- store -------------------------------------------------------------------

class RevisionConflict(BrokerError):
    code = "RevisionConflict"


# HTTP status mapping used by the gateway: parse-level errors are 400,
# conflicts 409, semantic rejections 422.
PARSE_ERRORS = (MalformedDocument, UnknownCommand, MissingField)
CONFLICT_ERRORS = (DuplicateMessageId, DuplicateId, DuplicateOffer, InUse, RevisionConflict)
