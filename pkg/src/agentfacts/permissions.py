"""Time-limited, scope-specific permission grants with a hash-chained audit trail.

States are immutable values: every operation returns a new
:class:`PermissionState`. Resource patterns are "/"-separated; ``*`` matches
exactly one segment and a trailing ``**`` matches any (possibly empty) suffix.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta
from typing import Any, Literal, Optional
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

from ._serde import Record, format_ts, utc
from .canon import Digest, canonicalize, digest
from .errors import ActorMismatch, InvalidRequest, TtlExceedsPolicy, UnauthorizedApprover

Action = Literal["read", "write", "execute", "admin"]
ACTIONS = ("read", "write", "execute", "admin")
AUDIT_ACTIONS = ("grant", "revoke", "escalate", "revert", "check_denied")
GRANT_STATUSES = ("pending", "active", "expired", "revoked")


@dataclass(frozen=True)
class TimeWindow(Record):
    start_hour: int
    end_hour: int
    timezone: str = "UTC"


@dataclass(frozen=True)
class ConstraintSet(Record):
    time_window: Optional[TimeWindow] = None
    geographic: Optional[tuple[str, ...]] = None
    human_review_required: bool = False


@dataclass(frozen=True)
class GrantRequest(Record):
    actions: tuple[Action, ...]
    resource_pattern: str
    ttl: int
    authority: str
    constraints: ConstraintSet = field(default_factory=ConstraintSet)
    justification: str = ""
    baseline: bool = False


@dataclass(frozen=True)
class GrantRecord(Record):
    grant: GrantRequest
    status: Literal["pending", "active", "expired", "revoked"]
    granted_at: Optional[datetime] = None
    expires_at: Optional[datetime] = None


@dataclass(frozen=True)
class EscalationPolicy(Record):
    approver_authorities: tuple[str, ...] = ()
    max_ttl: int = 0


@dataclass(frozen=True)
class AuditEntry(Record):
    seq: int
    at: datetime
    actor: str
    action: Literal["grant", "revoke", "escalate", "revert", "check_denied"]
    detail: dict[str, Any]
    prev_hash: Digest
    entry_hash: Digest

    def body_bytes(self) -> bytes:
        data = self.to_canonical()
        data.pop("entry_hash")
        return canonicalize(data).bytes

    def expected_hash(self) -> Digest:
        return digest(self.body_bytes() + self.prev_hash.value)


@dataclass(frozen=True)
class PermissionState(Record):
    grants: tuple[GrantRecord, ...] = ()
    escalation_policy: EscalationPolicy = field(default_factory=EscalationPolicy)
    audit: tuple[AuditEntry, ...] = ()

    def active(self, now: Optional[datetime] = None) -> list[GrantRecord]:
        return [g for g in self.grants if g.status == "active" and (now is None or not _past(g, now))]


@dataclass(frozen=True)
class AccessContext:
    now: datetime
    jurisdiction: str = ""
    human_reviewer_present: bool = False
    local_hour: Optional[int] = None  # overrides derivation from ``now``
    requester: str = "agent"

    def __post_init__(self):
        if self.local_hour is not None and not 0 <= self.local_hour < 24:
            raise ValueError("local_hour must lie in [0, 24)")

    def hour_in(self, tz: str) -> int:
        if self.local_hour is not None:
            return self.local_hour
        return utc(self.now).astimezone(_zone(tz)).hour


@dataclass(frozen=True)
class Decision:
    allowed: bool
    reason: str = ""

    def __bool__(self):
        return self.allowed

    def __str__(self):
        return "allow" if self.allowed else f"deny({self.reason})"


def _zone(tz: str):
    try:
        return ZoneInfo(tz)
    except (ZoneInfoNotFoundError, ValueError):
        raise InvalidRequest(f"unknown timezone {tz!r}") from None


def _past(g: GrantRecord, now: datetime) -> bool:
    return g.expires_at is not None and utc(now) > g.expires_at


# -- resource patterns --------------------------------------------------------

def validate_pattern(pattern: str) -> None:
    if not pattern:
        raise InvalidRequest("resource pattern must be non-empty")
    segs = pattern.split("/")
    if any(s == "" for s in segs):
        raise InvalidRequest(f"empty segment in pattern {pattern!r}")
    if "**" in segs[:-1]:
        raise InvalidRequest(f"'**' may only appear as the last segment: {pattern!r}")


def match_resource(pattern: str, resource: str) -> bool:
    psegs = pattern.split("/")
    rsegs = resource.split("/")
    if "" in rsegs:
        return False
    if psegs and psegs[-1] == "**":
        head = psegs[:-1]
        if len(rsegs) < len(head):
            return False
        rsegs = rsegs[: len(head)]
        psegs = head
    if len(psegs) != len(rsegs):
        return False
    return all(p == "*" or p == r for p, r in zip(psegs, rsegs))


# -- audit chain --------------------------------------------------------------

def _append_audit(state: PermissionState, at: datetime, actor: str, action: str, detail: dict) -> PermissionState:
    prev = state.audit[-1].entry_hash if state.audit else Digest.zero()
    draft = AuditEntry(
        seq=len(state.audit),
        at=utc(at),
        actor=actor,
        action=action,
        detail=detail,
        prev_hash=prev,
        entry_hash=Digest.zero(),
    )
    entry = replace(draft, entry_hash=draft.expected_hash())
    return replace(state, audit=state.audit + (entry,))


def verify_audit_chain(audit) -> bool:
    prev = Digest.zero()
    for i, entry in enumerate(audit):
        if entry.seq != i or entry.prev_hash != prev:
            return False
        if entry.expected_hash() != entry.entry_hash:
            return False
        prev = entry.entry_hash
    return True


# -- operations ---------------------------------------------------------------

def _check_request(req: GrantRequest) -> None:
    if not req.actions:
        raise InvalidRequest("grant must name at least one action")
    bad = [a for a in req.actions if a not in ACTIONS]
    if bad:
        raise InvalidRequest(f"unknown action(s): {', '.join(bad)}")
    validate_pattern(req.resource_pattern)
    if req.ttl <= 0:
        raise InvalidRequest("ttl must be positive")
    if not req.authority:
        raise InvalidRequest("grant authority must be named")
    tw = req.constraints.time_window
    if tw is not None:
        if not (0 <= tw.start_hour < tw.end_hour <= 24):
            raise InvalidRequest("time window needs 0 <= start_hour < end_hour <= 24")
        _zone(tw.timezone)


def _grant_detail(req: GrantRequest, index: int, expires_at: Optional[datetime]) -> dict:
    return {
        "grant_index": index,
        "actions": list(req.actions),
        "resource_pattern": req.resource_pattern,
        "authority": req.authority,
        "baseline": req.baseline,
        "expires_at": format_ts(expires_at) if expires_at else None,
        "justification": req.justification,
    }


def _add_grant(state: PermissionState, req: GrantRequest, actor: str, now: datetime, action: str) -> PermissionState:
    _check_request(req)
    now = utc(now)
    expires_at = None if req.baseline else now + timedelta(seconds=req.ttl)
    record = GrantRecord(grant=req, status="active", granted_at=now, expires_at=expires_at)
    grants = list(state.grants)
    # activate a matching pending request (e.g. one proposed by a role overlay)
    for i, g in enumerate(grants):
        if g.status == "pending" and g.grant == req:
            grants[i] = record
            index = i
            break
    else:
        grants.append(record)
        index = len(grants) - 1
    state = replace(state, grants=tuple(grants))
    return _append_audit(state, now, actor, action, _grant_detail(req, index, expires_at))


def grant(state: PermissionState, req: GrantRequest, actor: str, now: datetime) -> PermissionState:
    if actor != req.authority:
        raise ActorMismatch(f"actor {actor!r} is not the granting authority {req.authority!r}")
    return _add_grant(state, req, actor, now, "grant")


def escalate(state: PermissionState, req: GrantRequest, approver: str, now: datetime) -> PermissionState:
    policy = state.escalation_policy
    if approver not in policy.approver_authorities:
        raise UnauthorizedApprover(f"{approver!r} is not an approver under the escalation policy")
    if req.ttl > policy.max_ttl:
        raise TtlExceedsPolicy(f"ttl {req.ttl}s exceeds escalation max_ttl {policy.max_ttl}s")
    if req.baseline:
        raise InvalidRequest("escalations are time-boxed and cannot be baseline grants")
    return _add_grant(state, req, approver, now, "escalate")


def propose(state: PermissionState, req: GrantRequest) -> PermissionState:
    """Record a pending request; it becomes effective only through :func:`grant`."""
    _check_request(req)
    return replace(state, grants=state.grants + (GrantRecord(grant=req, status="pending"),))


def revoke_grant(state: PermissionState, index: int, actor: str, now: datetime, reason: str = "") -> PermissionState:
    g = state.grants[index]
    if actor != g.grant.authority and actor not in state.escalation_policy.approver_authorities:
        raise ActorMismatch(f"{actor!r} may not revoke a grant issued by {g.grant.authority!r}")
    if g.status not in ("active", "pending"):
        return state
    grants = list(state.grants)
    grants[index] = replace(g, status="revoked")
    state = replace(state, grants=tuple(grants))
    return _append_audit(state, now, actor, "revoke", {"grant_index": index, "reason": reason})


def revert_expired(state: PermissionState, now: datetime) -> PermissionState:
    now = utc(now)
    due = [
        (g.expires_at, i)
        for i, g in enumerate(state.grants)
        if g.status == "active" and not g.grant.baseline and g.expires_at is not None and g.expires_at < now
    ]
    if not due:
        return state
    grants = list(state.grants)
    for _exp, i in sorted(due):
        grants[i] = replace(grants[i], status="expired")
    new = replace(state, grants=tuple(grants))
    for exp, i in sorted(due):
        new = _append_audit(
            new, now, "system", "revert",
            {"grant_index": i, "expired_at": format_ts(exp), "resource_pattern": grants[i].grant.resource_pattern},
        )
    return new


def _constraint_failure(c: ConstraintSet, ctx: AccessContext) -> Optional[str]:
    if c.time_window is not None:
        hour = ctx.hour_in(c.time_window.timezone)
        if not (c.time_window.start_hour <= hour < c.time_window.end_hour):
            return "outside time window"
    if c.geographic is not None and ctx.jurisdiction not in c.geographic:
        return "jurisdiction not permitted"
    if c.human_review_required and not ctx.human_reviewer_present:
        return "human review required"
    return None


def evaluate(state: PermissionState, action: str, resource: str, ctx: AccessContext) -> Decision:
    """Decide an access request without touching the audit trail."""
    reasons = set()
    for g in state.grants:
        if action not in g.grant.actions or not match_resource(g.grant.resource_pattern, resource):
            continue
        if g.status == "revoked":
            reasons.add("revoked")
            continue
        if g.status == "expired" or (g.status == "active" and _past(g, ctx.now)):
            reasons.add("expired")
            continue
        if g.status != "active":
            continue
        failure = _constraint_failure(g.grant.constraints, ctx)
        if failure is None:
            return Decision(True)
        reasons.add(f"constraint: {failure}")
    for r in sorted(reasons):
        if r.startswith("constraint"):
            return Decision(False, r)
    for r in ("expired", "revoked"):
        if r in reasons:
            return Decision(False, r)
    return Decision(False, "no matching grant")


def check(state: PermissionState, action: str, resource: str, ctx: AccessContext) -> tuple[Decision, PermissionState]:
    """Decide an access request; denials are appended to the audit trail."""
    decision = evaluate(state, action, resource, ctx)
    if decision.allowed:
        return decision, state
    state = _append_audit(
        state, ctx.now, ctx.requester, "check_denied",
        {"action": action, "resource": resource, "reason": decision.reason},
    )
    return decision, state
