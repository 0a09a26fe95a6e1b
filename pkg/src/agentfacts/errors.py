"""Exception hierarchy shared across the package."""


class AgentFactsError(Exception):
    """Base class for every error raised by this package."""


class DocumentError(AgentFactsError):
    """A document could not be turned into typed values."""

    def __init__(self, path: str, message: str):
        self.path = path or "/"
        self.message = message
        super().__init__(f"{self.path}: {message}")


class DocumentSyntaxError(DocumentError):
    pass


class UnknownField(DocumentError):
    pass


class TypeMismatch(DocumentError):
    pass


class ValidationFailed(AgentFactsError):
    def __init__(self, findings):
        self.findings = list(findings)
        lines = "; ".join(f"{f.path}: {f.message}" for f in self.findings[:5])
        super().__init__(f"document failed validation: {lines}")


class OverlayViolation(AgentFactsError):
    pass


# canon
class NonCanonicalizable(AgentFactsError):
    pass


class UnknownSection(AgentFactsError):
    pass


class MissingSection(AgentFactsError):
    pass


# signing
class UnsupportedAlgorithm(AgentFactsError):
    pass


class InvalidConfidence(AgentFactsError):
    pass


class NotOwner(AgentFactsError):
    pass


class KeystoreError(AgentFactsError):
    pass


# trust
class UnknownSectionInPolicy(AgentFactsError):
    pass


class InvalidPolicy(AgentFactsError):
    pass


# lifecycle
class SeqGap(AgentFactsError):
    pass


class AgentIdMismatch(AgentFactsError):
    pass


class ClockRegression(AgentFactsError):
    pass


# permissions
class ActorMismatch(AgentFactsError):
    pass


class InvalidRequest(AgentFactsError):
    pass


class UnauthorizedApprover(AgentFactsError):
    pass


class TtlExceedsPolicy(AgentFactsError):
    pass


# registry
class ChainMismatch(AgentFactsError):
    pass


class UnknownAgent(AgentFactsError):
    pass


class BadUrl(AgentFactsError):
    pass


class Unreachable(AgentFactsError):
    """The upstream peer could not be contacted."""
