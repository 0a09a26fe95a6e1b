"""The ten-section AgentFacts document: types, parsing, validation, overlays, views."""

from __future__ import annotations

import dataclasses
import math
import re
import typing
import uuid
from dataclasses import dataclass, field, replace
from functools import lru_cache
from datetime import datetime
from typing import Any, Iterable, Literal, Optional
from urllib.parse import urlparse

from . import _serde
from ._serde import Micro, Record, utc
from .canon import SECTION_NAMES, canonicalize
from .errors import NonCanonicalizable, OverlayViolation
from .permissions import GrantRequest, PermissionState, propose
from .signing import ALGORITHMS, SignatureBlock

AgentType = Literal["assistant", "autonomous", "tool", "workflow"]
OperationalLevel = Literal["ambient", "supervised", "autonomous"]
StakeholderContext = Literal["enterprise", "consumer", "government"]
DeploymentScope = Literal["internal", "external", "hybrid"]
InteractionMode = Literal["synchronous", "asynchronous", "batch"]
ToolCalling = Literal["mcp", "function_calls", "custom_protocols"]
DataFormat = Literal["json", "csv", "pdf", "image", "audio", "video"]
InterfaceType = Literal["text", "voice", "gui", "api"]
AuthMethod = Literal["oauth2", "api_key", "mtls", "jwt", "saml"]
SecurityLevel = Literal["basic", "standard", "high", "critical"]
RiskLevel = Literal["minimal", "limited", "high", "unacceptable"]
SafetyClass = Literal["low", "medium", "high", "critical"]
CostStructure = Literal["per_request", "subscription", "hybrid"]
RevocationState = Literal["valid", "revoked", "unknown"]


# -- section records ----------------------------------------------------------

@dataclass(frozen=True)
class CoreIdentity(Record):
    agent_id: str
    name: str
    version: str
    created: datetime
    last_updated: datetime
    ttl: int
    version_seq: int = 0


@dataclass(frozen=True)
class Assessment(Record):
    name: str
    result: str = ""
    assessor: str = ""
    assessed_at: Optional[datetime] = None


@dataclass(frozen=True)
class BaselineModel(Record):
    foundation_model: str
    model_version: str
    model_provider: str
    training_data_sources: tuple[str, ...] = ()
    training_cutoff_date: Optional[datetime] = None
    fine_tuning: dict[str, Any] = field(default_factory=dict)
    model_capabilities: tuple[str, ...] = ()
    known_limitations: tuple[str, ...] = ()
    bias_assessments: tuple[Assessment, ...] = ()
    safety_evaluations: tuple[Assessment, ...] = ()


@dataclass(frozen=True)
class Classification(Record):
    agent_type: AgentType
    operational_level: OperationalLevel
    stakeholder_context: StakeholderContext
    deployment_scope: DeploymentScope
    interaction_mode: InteractionMode


@dataclass(frozen=True)
class Capabilities(Record):
    external_apis: tuple[str, ...] = ()
    tool_calling: tuple[ToolCalling, ...] = ()
    programming_languages: tuple[str, ...] = ()
    data_formats: tuple[DataFormat, ...] = ()
    interface_types: tuple[InterfaceType, ...] = ()
    domain_expertise: tuple[str, ...] = ()
    language_support: tuple[str, ...] = ()


@dataclass(frozen=True)
class SessionManagement(Record):
    timeout_seconds: Optional[int] = None
    refresh_policy: str = ""


@dataclass(frozen=True)
class ScopeOfWork(Record):
    included_tasks: tuple[str, ...] = ()
    excluded_tasks: tuple[str, ...] = ()


@dataclass(frozen=True)
class AuthPermissions(Record):
    supported_methods: tuple[AuthMethod, ...] = ()
    primary_scheme: Optional[str] = None
    oauth_endpoints: tuple[str, ...] = ()
    token_requirements: dict[str, Any] = field(default_factory=dict)
    auth_security_level: Optional[SecurityLevel] = None
    session_management: Optional[SessionManagement] = None
    multi_factor_required: bool = False
    auth_compliance: tuple[str, ...] = ()
    scope_of_work: Optional[ScopeOfWork] = None
    permission_state: PermissionState = field(default_factory=PermissionState)


@dataclass(frozen=True)
class EuAiAct(Record):
    risk_level: RiskLevel
    transparency_obligations: tuple[str, ...] = ()


@dataclass(frozen=True)
class NistAiRmf(Record):
    framework_alignment: str = ""
    risk_categories: tuple[str, ...] = ()


@dataclass(frozen=True)
class GdprCompliance(Record):
    data_protection: str = ""
    privacy_controls: tuple[str, ...] = ()


@dataclass(frozen=True)
class Compliance(Record):
    eu_ai_act: Optional[EuAiAct] = None
    nist_ai_rmf: Optional[NistAiRmf] = None
    gdpr_compliance: Optional[GdprCompliance] = None
    sector_standards: tuple[str, ...] = ()
    geographic_compliance: tuple[str, ...] = ()
    safety_classification: Optional[SafetyClass] = None
    audit_certifications: tuple[str, ...] = ()


@dataclass(frozen=True)
class PerformanceSample(Record):
    timestamp: datetime
    metric: str
    value: Micro


@dataclass(frozen=True)
class Performance(Record):
    response_time_p50: Optional[int] = None
    response_time_p95: Optional[int] = None
    availability_sla: Optional[Micro] = None
    throughput_limit: Optional[int] = None
    accuracy_metrics: dict[str, Micro] = field(default_factory=dict)
    error_rate: Optional[Micro] = None
    cost_structure: Optional[CostStructure] = None
    reputation_score: Optional[Micro] = None
    user_satisfaction: Optional[Micro] = None
    historical_performance: tuple[PerformanceSample, ...] = ()


@dataclass(frozen=True)
class Component(Record):
    name: str
    version: str = ""


@dataclass(frozen=True)
class Library(Record):
    name: str
    version: str = ""
    license: str = ""


@dataclass(frozen=True)
class ScanRecord(Record):
    tool: str
    timestamp: datetime
    findings_count: int = 0


@dataclass(frozen=True)
class SupplyChain(Record):
    component_dependencies: tuple[Component, ...] = ()
    data_sources: tuple[str, ...] = ()
    infrastructure_providers: tuple[str, ...] = ()
    software_libraries: tuple[Library, ...] = ()
    security_scanning: tuple[ScanRecord, ...] = ()
    license_compliance: tuple[str, ...] = ()
    supply_chain_attestation: Optional[str] = None


@dataclass(frozen=True)
class VerificationMeta(Record):
    signatures: tuple[SignatureBlock, ...] = ()
    verification_authorities: tuple[str, ...] = ()
    verification_policy: Optional[str] = None
    confidence_levels: dict[str, Micro] = field(default_factory=dict)
    verification_ttl: dict[str, int] = field(default_factory=dict)
    signature_algorithms: tuple[str, ...] = ()
    revocation_status: dict[str, RevocationState] = field(default_factory=dict)


# Bookkeeping that grows as signatures are attached; excluded from what a
# signature over the verification section covers.
VERIFICATION_DETACHED = (
    "signatures",
    "verification_authorities",
    "confidence_levels",
    "signature_algorithms",
    "revocation_status",
)


@dataclass(frozen=True)
class Extensibility(Record):
    custom_facts: dict[str, Any] = field(default_factory=dict)
    integration_hooks: tuple[str, ...] = ()
    schema_extensions: tuple[str, ...] = ()
    plugin_interfaces: tuple[str, ...] = ()
    backward_compatibility: str = ""


SECTION_TYPES = {
    "identity": CoreIdentity,
    "baseline_model": BaselineModel,
    "classification": Classification,
    "capabilities": Capabilities,
    "auth_permissions": AuthPermissions,
    "compliance": Compliance,
    "performance": Performance,
    "supply_chain": SupplyChain,
    "verification": VerificationMeta,
    "extensions": Extensibility,
}
assert tuple(SECTION_TYPES) == SECTION_NAMES


@dataclass(frozen=True)
class AgentFactsDoc(Record):
    identity: CoreIdentity
    # required for a complete document (validate_document enforces it), but
    # absent from audience views that omit it
    baseline_model: Optional[BaselineModel] = None
    classification: Optional[Classification] = None
    capabilities: Optional[Capabilities] = None
    auth_permissions: Optional[AuthPermissions] = None
    compliance: Optional[Compliance] = None
    performance: Optional[Performance] = None
    supply_chain: Optional[SupplyChain] = None
    verification: Optional[VerificationMeta] = None
    extensions: Optional[Extensibility] = None

    def section(self, name: str):
        if name not in SECTION_TYPES:
            raise KeyError(name)
        return getattr(self, name)

    def present_sections(self) -> list[str]:
        return [n for n in SECTION_NAMES if getattr(self, n) is not None]

    def signable_section(self, name: str) -> dict:
        data = self.section(name).to_canonical()
        if name == "verification":
            for key in VERIFICATION_DETACHED:
                data.pop(key, None)
        return data

    @property
    def agent_id(self) -> str:
        return self.identity.agent_id

    @property
    def version_seq(self) -> int:
        return self.identity.version_seq


# -- parsing / serialization --------------------------------------------------

def parse_document(text: str | bytes) -> AgentFactsDoc:
    return _serde.from_data(AgentFactsDoc, _serde.loads(text), "")


def document_from_data(data: Any) -> AgentFactsDoc:
    return _serde.from_data(AgentFactsDoc, data, "")


def serialize_document(doc: AgentFactsDoc) -> str:
    return _serde.dumps(doc.to_data())


def add_signatures(doc: AgentFactsDoc, blocks: Iterable[SignatureBlock]) -> AgentFactsDoc:
    """Attach detached signature blocks to the verification section."""
    ver = doc.verification or VerificationMeta()
    sigs = list(ver.signatures)
    authorities = list(ver.verification_authorities)
    algorithms = list(ver.signature_algorithms)
    confidence = dict(ver.confidence_levels)
    for block in blocks:
        if block in sigs:
            continue
        sigs.append(block)
        if block.authority_id not in authorities:
            authorities.append(block.authority_id)
        if block.algorithm not in algorithms:
            algorithms.append(block.algorithm)
        confidence[block.authority_id] = max(confidence.get(block.authority_id, 0.0), block.confidence)
    ver = replace(
        ver,
        signatures=tuple(sigs),
        verification_authorities=tuple(authorities),
        signature_algorithms=tuple(algorithms),
        confidence_levels=confidence,
    )
    return replace(doc, verification=ver)


# -- validation ---------------------------------------------------------------

@dataclass(frozen=True)
class Finding:
    path: str
    severity: Literal["error", "warning"]
    message: str

    def __str__(self):
        return f"{self.severity}: {self.path}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...]

    @property
    def ok(self) -> bool:
        return not any(f.severity == "error" for f in self.findings)

    @property
    def errors(self) -> list[Finding]:
        return [f for f in self.findings if f.severity == "error"]

    def to_data(self) -> dict:
        return {
            "ok": self.ok,
            "findings": [dataclasses.asdict(f) for f in self.findings],
        }


_UUID_RE = re.compile(r"^[0-9a-fA-F]{8}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{12}$")
_DID_RE = re.compile(r"^did:[a-z0-9]+:[A-Za-z0-9._:%-]+$")
_URI_RE = re.compile(r"^[A-Za-z][A-Za-z0-9+.-]*:\S+$")
_LANG_RE = re.compile(r"^[a-z]{2,3}(-[A-Za-z0-9]{2,8})*$")


def classify_agent_id(agent_id: str) -> Optional[str]:
    """Syntactic form of an agent id: 'did', 'uuid', 'uri' or None."""
    if _DID_RE.match(agent_id):
        return "did"
    if _UUID_RE.match(agent_id):
        uuid.UUID(agent_id)
        return "uuid"
    if _URI_RE.match(agent_id):
        return "uri"
    return None


def well_formed_url(url: str) -> bool:
    try:
        parts = urlparse(url)
    except ValueError:
        return False
    return parts.scheme in ("http", "https") and bool(parts.netloc) and " " not in url


def _literal_values(cls, name: str) -> tuple:
    tp = _serde.field_types(cls)[name]
    _opt, tp = _serde._is_optional(tp)
    if typing.get_origin(tp) is tuple:
        tp = typing.get_args(tp)[0]
    return typing.get_args(tp)


class _Checker:
    def __init__(self):
        self.findings: list[Finding] = []

    def error(self, path, message):
        self.findings.append(Finding(path, "error", message))

    def warn(self, path, message):
        self.findings.append(Finding(path, "warning", message))

    def enums(self, rec, path: str) -> None:
        """Check every Literal-typed field of ``rec`` for enum membership."""
        for name, many, allowed in _literal_fields(type(rec)):
            value = getattr(rec, name)
            if value is None:
                continue
            if not many:
                if value not in allowed:
                    self.error(f"{path}/{name}", f"{value!r} is not one of {list(allowed)}")
                continue
            for i, v in enumerate(value):
                if v not in allowed:
                    self.error(f"{path}/{name}/{i}", f"{v!r} is not one of {list(allowed)}")

    def fraction(self, value, path):
        if value is None:
            return
        if not math.isfinite(value) or not 0.0 <= value <= 1.0:
            self.error(path, f"fraction must lie in [0, 1], got {value!r}")


def validate_document(doc: AgentFactsDoc) -> ValidationReport:
    """Check every structural invariant; freshness is deliberately not judged here."""
    c = _Checker()
    ident = doc.identity
    if ident is None:
        c.error("/identity", "required section is missing")
    else:
        if not ident.agent_id:
            c.error("/identity/agent_id", "agent_id must be non-empty")
        elif classify_agent_id(ident.agent_id) is None:
            c.error("/identity/agent_id", "agent_id is not a UUID, URI or DID")
        if ident.ttl <= 0:
            c.error("/identity/ttl", "ttl must be > 0")
        if ident.version_seq < 0:
            c.error("/identity/version_seq", "version_seq must be a non-negative integer")
        if utc(ident.created) > utc(ident.last_updated):
            c.error("/identity/last_updated", "created <= last_updated violated")
    bm = doc.baseline_model
    if bm is None:
        c.error("/baseline_model", "required section is missing")
    else:
        for name in ("foundation_model", "model_version", "model_provider"):
            if not getattr(bm, name):
                c.error(f"/baseline_model/{name}", f"{name} must be non-empty")

    for name in SECTION_NAMES:
        rec = getattr(doc, name)
        if rec is not None:
            _walk_enums(c, rec, f"/{name}")

    if doc.capabilities is not None:
        for i, tag in enumerate(doc.capabilities.language_support):
            if not _LANG_RE.match(tag):
                c.warn(f"/capabilities/language_support/{i}", f"{tag!r} does not look like an ISO-639 tag")

    ap = doc.auth_permissions
    if ap is not None:
        if ap.primary_scheme is not None and ap.primary_scheme not in ap.supported_methods:
            c.error("/auth_permissions/primary_scheme", "primary_scheme must be one of supported_methods")
        sm = ap.session_management
        if sm is not None and sm.timeout_seconds is not None and sm.timeout_seconds <= 0:
            c.error("/auth_permissions/session_management/timeout_seconds", "timeout_seconds must be > 0")
        for i, url in enumerate(ap.oauth_endpoints):
            if not well_formed_url(url):
                c.warn(f"/auth_permissions/oauth_endpoints/{i}", "not a well-formed http(s) URL")
        _check_permission_state(c, ap.permission_state, "/auth_permissions/permission_state")

    perf = doc.performance
    if perf is not None:
        p = "/performance"
        if perf.response_time_p50 is not None and perf.response_time_p50 < 0:
            c.error(f"{p}/response_time_p50", "latency must be >= 0")
        if perf.response_time_p95 is not None and perf.response_time_p95 < 0:
            c.error(f"{p}/response_time_p95", "latency must be >= 0")
        if (
            perf.response_time_p50 is not None
            and perf.response_time_p95 is not None
            and perf.response_time_p50 > perf.response_time_p95
        ):
            c.error(f"{p}/response_time_p50", "p50 <= p95 violated")
        for name in ("availability_sla", "error_rate", "reputation_score", "user_satisfaction"):
            c.fraction(getattr(perf, name), f"{p}/{name}")
        if perf.throughput_limit is not None and perf.throughput_limit < 0:
            c.error(f"{p}/throughput_limit", "throughput_limit must be >= 0")
        for tag, score in perf.accuracy_metrics.items():
            if not math.isfinite(score):
                c.error(f"{p}/accuracy_metrics/{tag}", "score must be finite")
        for i, sample in enumerate(perf.historical_performance):
            if not math.isfinite(sample.value):
                c.error(f"{p}/historical_performance/{i}/value", "value must be finite")

    sc = doc.supply_chain
    if sc is not None:
        for i, comp in enumerate(sc.component_dependencies):
            if not comp.name:
                c.error(f"/supply_chain/component_dependencies/{i}/name", "component name must be non-empty")
        for i, lib in enumerate(sc.software_libraries):
            if not lib.name:
                c.error(f"/supply_chain/software_libraries/{i}/name", "library name must be non-empty")
        for i, scan in enumerate(sc.security_scanning):
            if scan.findings_count < 0:
                c.error(f"/supply_chain/security_scanning/{i}/findings_count", "findings_count must be >= 0")

    ver = doc.verification
    if ver is not None:
        p = "/verification"
        for i, sig in enumerate(ver.signatures):
            sp = f"{p}/signatures/{i}"
            if sig.authority_id not in ver.verification_authorities:
                c.error(f"{sp}/authority_id", "signing authority is not listed in verification_authorities")
            if not sig.scope:
                c.error(f"{sp}/scope", "scope must be non-empty")
            elif list(sig.scope) != sorted(set(sig.scope)):
                c.error(f"{sp}/scope", "scope must be sorted and free of duplicates")
            for s in sig.scope:
                if s not in SECTION_NAMES:
                    c.error(f"{sp}/scope", f"unknown section {s!r}")
            c.fraction(sig.confidence, f"{sp}/confidence")
            if sig.algorithm not in ALGORITHMS:
                c.error(f"{sp}/algorithm", f"unsupported algorithm {sig.algorithm!r}")
        for name, ttl in ver.verification_ttl.items():
            if name not in SECTION_NAMES:
                c.error(f"{p}/verification_ttl/{name}", "not a section name")
            if ttl <= 0:
                c.error(f"{p}/verification_ttl/{name}", "verification_ttl values must be > 0")
        for auth, conf in ver.confidence_levels.items():
            c.fraction(conf, f"{p}/confidence_levels/{auth}")

    ext = doc.extensions
    if ext is not None:
        for key in ext.custom_facts:
            if "." not in key:
                c.error(f"/extensions/custom_facts/{key}", "custom fact keys must be namespaced (contain '.')")
        for i, url in enumerate(ext.integration_hooks):
            if not well_formed_url(url):
                c.warn(f"/extensions/integration_hooks/{i}", "not a well-formed http(s) URL")

    for name in doc.present_sections():
        try:
            canonicalize(doc.section(name))
        except NonCanonicalizable as exc:
            c.error(f"/{name}", f"section cannot be canonicalized: {exc}")
    return ValidationReport(tuple(c.findings))


@lru_cache(maxsize=None)
def _literal_fields(cls: type) -> tuple[tuple[str, bool, tuple], ...]:
    """(field, is_tuple, allowed values) for Literal and tuple-of-Literal fields."""
    out = []
    for f in dataclasses.fields(cls):
        _opt, inner = _serde._is_optional(_serde.field_types(cls)[f.name])
        if typing.get_origin(inner) is Literal:
            out.append((f.name, False, typing.get_args(inner)))
        elif typing.get_origin(inner) is tuple and typing.get_origin(typing.get_args(inner)[0]) is Literal:
            out.append((f.name, True, typing.get_args(typing.get_args(inner)[0])))
    return tuple(out)


def _walk_enums(c: _Checker, rec, path: str) -> None:
    c.enums(rec, path)
    for f in dataclasses.fields(rec):
        value = getattr(rec, f.name)
        if dataclasses.is_dataclass(value) and not getattr(value, "__serde_scalar__", False):
            _walk_enums(c, value, f"{path}/{f.name}")
        elif isinstance(value, tuple):
            for i, item in enumerate(value):
                if dataclasses.is_dataclass(item) and not getattr(item, "__serde_scalar__", False):
                    _walk_enums(c, item, f"{path}/{f.name}/{i}")


def _check_permission_state(c: _Checker, state: PermissionState, path: str) -> None:
    from .permissions import verify_audit_chain

    for i, g in enumerate(state.grants):
        gp = f"{path}/grants/{i}"
        if not g.grant.actions:
            c.error(f"{gp}/grant/actions", "actions must be non-empty")
        if not g.grant.resource_pattern:
            c.error(f"{gp}/grant/resource_pattern", "resource pattern must be non-empty")
        if g.grant.ttl <= 0:
            c.error(f"{gp}/grant/ttl", "ttl must be > 0")
        tw = g.grant.constraints.time_window
        if tw is not None and not (0 <= tw.start_hour < tw.end_hour <= 24):
            c.error(f"{gp}/grant/constraints/time_window", "needs 0 <= start_hour < end_hour <= 24")
        if g.status != "pending" and not g.grant.baseline and g.granted_at is not None:
            from datetime import timedelta

            if g.expires_at != g.granted_at + timedelta(seconds=g.grant.ttl):
                c.error(f"{gp}/expires_at", "expires_at must equal granted_at + ttl")
    if not verify_audit_chain(state.audit):
        c.error(f"{path}/audit", "audit chain does not verify")


# -- overlays and views -------------------------------------------------------

PROTECTED_SECTIONS = ("identity", "baseline_model", "supply_chain", "verification")


@dataclass(frozen=True)
class RoleOverlay(Record):
    assigning_org: str
    classification_updates: dict[str, str] = field(default_factory=dict)
    permission_grants: tuple[GrantRequest, ...] = ()
    scope_of_work: Optional[ScopeOfWork] = None
    constitution: tuple[str, ...] = ()

    @classmethod
    def from_data(cls, data: Any, path: str = "") -> "RoleOverlay":
        if isinstance(data, dict):
            for key in data:
                if key in SECTION_NAMES:
                    raise OverlayViolation(f"overlay may not set section {key!r}")
        return _serde.from_data(cls, data, path)


def apply_overlay(base: AgentFactsDoc, overlay: RoleOverlay, at: datetime) -> AgentFactsDoc:
    """Layer organisation-assigned role data onto verified baseline facts."""
    if not overlay.assigning_org:
        raise OverlayViolation("assigning_org must be named")
    class_fields = {f.name for f in dataclasses.fields(Classification)}
    updates = {}
    for key, value in overlay.classification_updates.items():
        section, dot, fname = key.rpartition(".")
        if dot and section != "classification":
            raise OverlayViolation(f"overlay may not modify {key!r}: only classification fields are overlayable")
        if fname not in class_fields:
            raise OverlayViolation(f"{fname!r} is not a classification field")
        allowed = _literal_values(Classification, fname)
        if value not in allowed:
            raise OverlayViolation(f"{value!r} is not a valid {fname}")
        updates[fname] = value

    doc = base
    if updates:
        if doc.classification is None:
            if set(updates) != class_fields:
                raise OverlayViolation("base has no classification; overlay must supply every classification field")
            doc = replace(doc, classification=Classification(**updates))
        else:
            doc = replace(doc, classification=replace(doc.classification, **updates))

    if overlay.permission_grants:
        ap = doc.auth_permissions or AuthPermissions()
        state = ap.permission_state
        for req in overlay.permission_grants:
            state = propose(state, req)
        doc = replace(doc, auth_permissions=replace(ap, permission_state=state))

    if overlay.scope_of_work is not None or overlay.constitution:
        ext = doc.extensions or Extensibility()
        facts = dict(ext.custom_facts)
        entry = {}
        if overlay.scope_of_work is not None:
            entry["scope_of_work"] = overlay.scope_of_work.to_data()
        if overlay.constitution:
            entry["constitution"] = list(overlay.constitution)
        facts[f"org.{overlay.assigning_org}"] = entry
        doc = replace(doc, extensions=replace(ext, custom_facts=facts))

    at = utc(at)
    ident = doc.identity
    if at < utc(ident.last_updated):
        at = utc(ident.last_updated)
    doc = replace(doc, identity=replace(ident, version_seq=ident.version_seq + 1, last_updated=at))
    return doc


VIEWS = {
    "enterprise": SECTION_NAMES,
    "consumer": ("identity", "baseline_model", "classification", "compliance", "performance"),
    "government": ("identity", "compliance", "verification"),
}


def select_view(doc: AgentFactsDoc, audience: str) -> AgentFactsDoc:
    """Project a document onto the sections one stakeholder audience reads."""
    try:
        keep = VIEWS[audience]
    except KeyError:
        raise ValueError(f"unknown audience {audience!r}; expected one of {sorted(VIEWS)}") from None
    if audience == "enterprise":
        return doc
    kwargs = {name: (getattr(doc, name) if name in keep else None) for name in SECTION_NAMES}
    if audience == "consumer" and doc.compliance is not None:
        kwargs["compliance"] = Compliance(safety_classification=doc.compliance.safety_classification)
    return AgentFactsDoc(**kwargs)


# -- schema introspection -----------------------------------------------------

def load_field_manifest() -> dict[str, dict[str, str]]:
    """Appendix field names per section, each mapped to its document path."""
    import json
    from importlib import resources

    text = resources.files("agentfacts").joinpath("data/field_manifest.json").read_text("utf-8")
    return json.loads(text)["fields"]


def resolve_schema_path(path: str, root: type = AgentFactsDoc):
    """Return the declared type at ``path``; ``*`` steps into array/map elements.

    Raises KeyError when the path does not exist in the schema.
    """
    tp: Any = root
    for seg in [s for s in path.split("/") if s]:
        _opt, tp = _serde._is_optional(tp)
        origin = typing.get_origin(tp)
        if seg == "*":
            if origin is tuple:
                tp = typing.get_args(tp)[0]
            elif origin is dict:
                tp = typing.get_args(tp)[1]
            else:
                raise KeyError(f"{path}: '*' applied to non-collection {tp!r}")
            continue
        if not (dataclasses.is_dataclass(tp) and not _serde.is_scalar_class(tp)):
            raise KeyError(f"{path}: {seg!r} applied to non-record {tp!r}")
        hints = _serde.field_types(tp)
        if seg not in hints:
            raise KeyError(f"{path}: no field {seg!r} in {tp.__name__}")
        tp = hints[seg]
    return tp


def schema_paths(root: type = AgentFactsDoc, prefix: str = "") -> list[str]:
    """Every field path reachable in the schema (collections stepped with ``*``)."""
    out = []
    for f in dataclasses.fields(root):
        path = f"{prefix}/{f.name}"
        out.append(path)
        tp = _serde.field_types(root)[f.name]
        _opt, tp = _serde._is_optional(tp)
        while typing.get_origin(tp) in (tuple, dict):
            tp = typing.get_args(tp)[0 if typing.get_origin(tp) is tuple else 1]
            path += "/*"
        if dataclasses.is_dataclass(tp) and not _serde.is_scalar_class(tp):
            out.extend(schema_paths(tp, path))
    return out
