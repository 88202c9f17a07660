"""Shared exception taxonomy."""


class UqlbError(Exception):
    """Base class for all package errors."""


# --- protocol ---

class ProtocolError(UqlbError):
    pass


class MalformedBody(ProtocolError):
    """Body is not parseable at all."""


class SchemaViolation(ProtocolError):
    """Body parses but is missing fields, has wrong types, wrong shapes or non-finite numbers."""


class PortInUse(ProtocolError):
    pass


class Unreachable(ProtocolError):
    pass


class ClientTimeout(ProtocolError):
    pass


class RemoteError(ProtocolError):
    """Structured error returned by a server."""

    def __init__(self, code, message):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


# --- models ---

class NotPositiveDefinite(UqlbError):
    pass


class DimensionMismatch(UqlbError):
    pass


class NumericalBreakdown(UqlbError):
    pass


class NoConvergence(UqlbError):
    pass


# --- balancer ---

class NoCapacity(UqlbError):
    pass


class UpstreamFailure(UqlbError):
    pass


class RegistrationTimeout(UqlbError):
    pass


class UnreachableServer(UqlbError):
    pass


class PreflightMismatch(UqlbError):
    pass


# --- backends ---

class SpawnFailure(UqlbError):
    pass


class TimeLimitExceeded(UqlbError):
    pass


class UnknownHandle(UqlbError):
    pass


class AllocationExpired(UqlbError):
    pass


class SubmitRejected(UqlbError):
    pass


# --- metrics / clients ---

class EmptyRecords(UqlbError):
    pass


class ZeroComputeTime(UqlbError):
    pass


class NonFiniteIntegrand(UqlbError):
    pass


class KeyMismatch(UqlbError):
    pass
