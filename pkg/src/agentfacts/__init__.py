"""Verifiable, signed metadata documents for AI agents.

The main entry points, by concern:

* documents: :func:`parse_document`, :func:`serialize_document`, :func:`validate_document`
* encoding: :func:`canonicalize`, :func:`digest`
* signatures: :func:`generate_authority`, :func:`sign_sections`, :func:`verify_signature`, :func:`revoke`
* trust: :class:`TrustPolicy`, :func:`evaluate_trust`, :func:`explain_verdict`
* lifecycle: :func:`freshness`, :func:`append_version`, :func:`verify_chain`
* permissions: :func:`grant`, :func:`escalate`, :func:`check`, :func:`revert_expired`
* distribution: :class:`Registry`, :func:`sync`
"""

from .canon import SECTION_NAMES, CanonicalBytes, Digest, canonicalize, digest, section_payload
from .errors import AgentFactsError
from .lifecycle import (
    FreshnessReport,
    StalenessPolicy,
    VersionLink,
    append_version,
    freshness,
    plan_refresh,
    verify_chain,
)
from .model import (
    AgentFactsDoc,
    RoleOverlay,
    ValidationReport,
    add_signatures,
    apply_overlay,
    parse_document,
    select_view,
    serialize_document,
    validate_document,
)
from .permissions import (
    AccessContext,
    ConstraintSet,
    Decision,
    EscalationPolicy,
    GrantRequest,
    PermissionState,
    TimeWindow,
    check,
    escalate,
    evaluate,
    grant,
    match_resource,
    revert_expired,
    verify_audit_chain,
)
from .registry import PeerUpstream, Registry, sync
from .signing import (
    AuthorityRecord,
    PrivateKeyHandle,
    RevocationEntry,
    SignatureBlock,
    SigStatus,
    generate_authority,
    revoke,
    sign_sections,
    verify_signature,
)
from .trust import TrustPolicy, TrustVerdict, evaluate_trust, explain_verdict

__all__ = [
    "SECTION_NAMES",
    "CanonicalBytes",
    "Digest",
    "canonicalize",
    "digest",
    "section_payload",
    "AgentFactsError",
    "FreshnessReport",
    "StalenessPolicy",
    "VersionLink",
    "append_version",
    "freshness",
    "plan_refresh",
    "verify_chain",
    "AgentFactsDoc",
    "RoleOverlay",
    "ValidationReport",
    "add_signatures",
    "apply_overlay",
    "parse_document",
    "select_view",
    "serialize_document",
    "validate_document",
    "AccessContext",
    "ConstraintSet",
    "Decision",
    "EscalationPolicy",
    "GrantRequest",
    "PermissionState",
    "TimeWindow",
    "check",
    "escalate",
    "evaluate",
    "grant",
    "match_resource",
    "revert_expired",
    "verify_audit_chain",
    "PeerUpstream",
    "Registry",
    "sync",
    "AuthorityRecord",
    "PrivateKeyHandle",
    "RevocationEntry",
    "SignatureBlock",
    "SigStatus",
    "generate_authority",
    "revoke",
    "sign_sections",
    "verify_signature",
    "TrustPolicy",
    "TrustVerdict",
    "evaluate_trust",
    "explain_verdict",
    "__version__",
]

__version__ = "0.1.0"
