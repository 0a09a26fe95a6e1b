"""TTL freshness, hash-linked version chains and refresh planning."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta
from pathlib import Path
from typing import Literal, Optional, Sequence, Union

from . import _serde
from ._serde import Record, format_ts, utc
from .canon import SECTION_NAMES, CanonicalBytes, Digest, canonicalize, digest
from .errors import AgentIdMismatch, BadUrl, ClockRegression, SeqGap
from .signing import ALGORITHMS, AuthorityRecord, PrivateKeyHandle
from .trust import DEFAULT_CRITICAL


@dataclass(frozen=True)
class StalenessPolicy(Record):
    acceptable_staleness: dict[str, int] = field(default_factory=dict)
    critical_sections: tuple[str, ...] = DEFAULT_CRITICAL

    def __post_init__(self):
        super().__post_init__()
        for name, secs in self.acceptable_staleness.items():
            if secs < 0:
                raise ValueError(f"acceptable_staleness[{name}] must be >= 0")


@dataclass(frozen=True)
class FreshnessReport:
    per_section: dict[str, Literal["fresh", "stale", "expired"]]
    expiries: dict[str, datetime]
    document_status: Literal["fresh", "degraded", "expired"]
    next_expiry: Optional[datetime]

    def to_data(self) -> dict:
        return {
            "document_status": self.document_status,
            "next_expiry": format_ts(self.next_expiry) if self.next_expiry else None,
            "per_section": dict(self.per_section),
            "expiries": {s: format_ts(t) for s, t in self.expiries.items()},
        }


def section_expiry(doc, section: str) -> datetime:
    ttl = doc.identity.ttl
    if doc.verification is not None and section in doc.verification.verification_ttl:
        ttl = doc.verification.verification_ttl[section]
    return utc(doc.identity.last_updated) + timedelta(seconds=ttl)


def freshness(doc, now: datetime, policy: Optional[StalenessPolicy] = None) -> FreshnessReport:
    policy = policy or StalenessPolicy()
    now = utc(now)
    states: dict[str, str] = {}
    expiries: dict[str, datetime] = {}
    for section in doc.present_sections():
        expiry = section_expiry(doc, section)
        grace = timedelta(seconds=policy.acceptable_staleness.get(section, 0))
        expiries[section] = expiry
        if now <= expiry:
            states[section] = "fresh"
        elif now <= expiry + grace:
            states[section] = "stale"
        else:
            states[section] = "expired"
    critical = set(policy.critical_sections)
    if any(states[s] == "expired" for s in states if s in critical):
        status = "expired"
    elif any(st != "fresh" for st in states.values()):
        status = "degraded"
    else:
        status = "fresh"
    fresh = [expiries[s] for s, st in states.items() if st == "fresh"]
    return FreshnessReport(states, expiries, status, min(fresh) if fresh else None)


@dataclass(frozen=True)
class RefreshPlan:
    entries: tuple[tuple[str, datetime], ...]
    expired: bool

    def to_data(self) -> dict:
        return {
            "expired": self.expired,
            "entries": [{"section": s, "refresh_at": format_ts(t)} for s, t in self.entries],
        }


def plan_refresh(doc, now: datetime, policy: Optional[StalenessPolicy] = None) -> RefreshPlan:
    """Pull schedule: one entry per section that has not yet expired, soonest first."""
    report = freshness(doc, now, policy)
    live = [(report.expiries[s], SECTION_NAMES.index(s), s) for s, st in report.per_section.items() if st != "expired"]
    entries = tuple((s, t) for t, _i, s in sorted(live))
    return RefreshPlan(entries, expired=not entries)


# -- version chain ------------------------------------------------------------

@dataclass(frozen=True)
class VersionLink(Record):
    agent_id: str
    from_seq: int
    to_seq: int
    prev_digest: Digest
    new_digest: Digest
    created_at: datetime
    provider_id: str
    provider_signature: bytes = b""

    def signed_bytes(self) -> bytes:
        data = self.to_canonical()
        data.pop("provider_signature", None)
        return canonicalize(data).bytes


def doc_digest(doc) -> Digest:
    return digest(canonicalize(doc))


def append_version(prev, next, provider_key: PrivateKeyHandle, created_at: Optional[datetime] = None) -> VersionLink:
    if next.identity.agent_id != prev.identity.agent_id:
        raise AgentIdMismatch(f"{next.identity.agent_id!r} != {prev.identity.agent_id!r}")
    if next.identity.version_seq != prev.identity.version_seq + 1:
        raise SeqGap(f"expected version_seq {prev.identity.version_seq + 1}, got {next.identity.version_seq}")
    if utc(next.identity.last_updated) < utc(prev.identity.last_updated):
        raise ClockRegression("next.last_updated precedes prev.last_updated")
    link = VersionLink(
        agent_id=prev.identity.agent_id,
        from_seq=prev.identity.version_seq,
        to_seq=next.identity.version_seq,
        prev_digest=doc_digest(prev),
        new_digest=doc_digest(next),
        created_at=utc(created_at or next.identity.last_updated),
        provider_id=provider_key.authority_id,
    )
    return replace(link, provider_signature=provider_key.sign(link.signed_bytes()))


def verify_link_signature(link: VersionLink, provider: AuthorityRecord) -> bool:
    if link.provider_id != provider.authority_id or provider.algorithm not in ALGORITHMS:
        return False
    return ALGORITHMS[provider.algorithm].verify(provider.public_key, link.provider_signature, link.signed_bytes())


@dataclass(frozen=True)
class ChainReport:
    accepted: bool
    failures: tuple[tuple[int, str], ...] = ()

    @property
    def first_failure(self) -> Optional[int]:
        return self.failures[0][0] if self.failures else None

    def to_data(self) -> dict:
        return {
            "accepted": self.accepted,
            "first_failure": self.first_failure,
            "failures": [{"link": i, "reason": r} for i, r in self.failures],
        }


def verify_chain_bytes(
    docs: Sequence[Union[bytes, CanonicalBytes]],
    links: Sequence[VersionLink],
    provider: AuthorityRecord,
    seqs: Optional[Sequence[int]] = None,
    agent_ids: Optional[Sequence[str]] = None,
) -> ChainReport:
    """Verify a chain given the canonical bytes of each revision."""
    failures: list[tuple[int, str]] = []
    if len(links) != len(docs) - 1:
        return ChainReport(False, ((0, f"expected {max(len(docs) - 1, 0)} links, got {len(links)}"),))
    digests = [digest(d) for d in docs]
    for i, link in enumerate(links):
        if link.to_seq != link.from_seq + 1:
            failures.append((i, f"sequence gap {link.from_seq}->{link.to_seq}"))
        if i > 0 and link.from_seq != links[i - 1].to_seq:
            failures.append((i, f"sequence discontinuity: previous link ends at {links[i - 1].to_seq}, this starts at {link.from_seq}"))
        if seqs is not None and (link.from_seq != seqs[i] or link.to_seq != seqs[i + 1]):
            failures.append((i, f"link {link.from_seq}->{link.to_seq} does not join revisions {seqs[i]}->{seqs[i + 1]}"))
        if link.agent_id != links[0].agent_id or (agent_ids is not None and link.agent_id != agent_ids[i + 1]):
            failures.append((i, "agent_id mismatch"))
        if link.prev_digest != digests[i]:
            failures.append((i, "prev_digest does not match previous revision"))
        if link.new_digest != digests[i + 1]:
            failures.append((i, "new_digest does not match next revision"))
        if not verify_link_signature(link, provider):
            failures.append((i, "provider signature does not verify"))
    return ChainReport(not failures, tuple(failures))


def verify_chain(docs: Sequence, links: Sequence[VersionLink], provider: AuthorityRecord) -> ChainReport:
    return verify_chain_bytes(
        [canonicalize(d) for d in docs],
        links,
        provider,
        seqs=[d.identity.version_seq for d in docs],
        agent_ids=[d.identity.agent_id for d in docs],
    )


# -- notifications ------------------------------------------------------------

@dataclass(frozen=True)
class UpdateNotification(Record):
    link: VersionLink
    webhook_url: str
    delivery_state: Literal["pending", "delivered", "failed"] = "pending"
    attempts: int = 0

    def __post_init__(self):
        super().__post_init__()
        from .model import well_formed_url

        if not well_formed_url(self.webhook_url):
            raise BadUrl(f"malformed webhook url {self.webhook_url!r}")


# -- on-disk chain layout -----------------------------------------------------
# <dir>/000000.af.json, 000001.af.json, ... one file per revision
# <dir>/links.json                          {"links": [VersionLink, ...]}

def chain_doc_path(directory: Path, seq: int) -> Path:
    return Path(directory) / f"{seq:06d}.af.json"


def save_chain(directory, docs: Sequence, links: Sequence[VersionLink]) -> None:
    from .model import serialize_document

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for d in docs:
        chain_doc_path(directory, d.identity.version_seq).write_text(serialize_document(d), "utf-8")
    (directory / "links.json").write_text(_serde.dumps({"links": [l.to_data() for l in links]}), "utf-8")


def load_chain(directory) -> tuple[list, list[VersionLink]]:
    from .model import parse_document

    directory = Path(directory)
    files = sorted(p for p in directory.iterdir() if p.name.endswith(".af.json"))
    docs = [parse_document(p.read_bytes()) for p in files]
    links_path = directory / "links.json"
    links = []
    if links_path.exists():
        data = _serde.loads(links_path.read_bytes())
        links = [VersionLink.from_data(l, f"/links/{i}") for i, l in enumerate(data.get("links", []))]
    return docs, links
