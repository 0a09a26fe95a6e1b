"""Single-node publish/fetch/subscribe store with offline fetch and peer sync.

One :class:`Registry` is one peer. It keeps every published revision of each
agent together with the version links joining them, serves cached facts when
its upstream peer cannot be reached, and queues webhook notifications that a
caller drains with :meth:`Registry.deliver_pending` (at-least-once delivery).
"""

from __future__ import annotations

import logging
import threading
import urllib.error
import urllib.request
from collections import defaultdict
from dataclasses import dataclass, replace
from datetime import datetime
from pathlib import Path
from typing import Iterable, Optional, Protocol
from urllib.parse import quote, unquote

from . import _serde
from ._serde import format_ts, now_utc, parse_ts, utc
from .errors import BadUrl, ChainMismatch, UnknownAgent, Unreachable, ValidationFailed
from .lifecycle import (
    FreshnessReport,
    StalenessPolicy,
    UpdateNotification,
    VersionLink,
    doc_digest,
    freshness,
    verify_chain,
    verify_link_signature,
)
from .model import AgentFactsDoc, add_signatures, parse_document, serialize_document, validate_document, well_formed_url
from .signing import AuthorityRecord, RevocationEntry, SignatureBlock, verify_revocation
from .trust import TrustPolicy, TrustVerdict, evaluate_trust

log = logging.getLogger(__name__)


@dataclass
class AgentRecord:
    versions: list[AgentFactsDoc]
    links: list[VersionLink]
    signatures: dict[int, list[SignatureBlock]]
    cached_at: datetime
    provider_id: Optional[str] = None

    @property
    def head(self) -> AgentFactsDoc:
        return self.versions[-1]

    @property
    def head_seq(self) -> int:
        return self.head.identity.version_seq

    def copy(self) -> "AgentRecord":
        return AgentRecord(
            list(self.versions),
            list(self.links),
            {k: list(v) for k, v in self.signatures.items()},
            self.cached_at,
            self.provider_id,
        )


@dataclass(frozen=True)
class Ack:
    agent_id: str
    head_seq: int

    def to_data(self) -> dict:
        return {"agent_id": self.agent_id, "head_seq": self.head_seq}


@dataclass(frozen=True)
class FetchResult:
    doc: AgentFactsDoc
    provenance: str  # "live" or "cache"
    freshness: FreshnessReport
    verdict: Optional[TrustVerdict]
    cached_at: datetime
    cache_age: int

    def to_data(self) -> dict:
        return {
            "provenance": self.provenance,
            "cached_at": format_ts(self.cached_at),
            "cache_age": self.cache_age,
            "freshness": self.freshness.to_data(),
            "verdict": self.verdict.to_data() if self.verdict else None,
            "doc": self.doc.to_data(),
        }


@dataclass
class QueuedNotification:
    id: str
    notification: UpdateNotification

    def to_data(self) -> dict:
        return {"id": self.id, **self.notification.to_data()}


@dataclass(frozen=True)
class DeliveryReport:
    outcomes: tuple[dict, ...]

    @property
    def delivered(self) -> int:
        return sum(1 for o in self.outcomes if o["outcome"] == "delivered")

    def to_data(self) -> dict:
        return {"delivered": self.delivered, "attempted": len(self.outcomes), "outcomes": list(self.outcomes)}


class Transport(Protocol):
    def __call__(self, url: str, body: bytes) -> int: ...


def http_transport(url: str, body: bytes, timeout: float = 10.0) -> int:
    """POST ``body`` to ``url`` and return the HTTP status (0 on network error)."""
    req = urllib.request.Request(url, data=body, method="POST", headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.status
    except urllib.error.HTTPError as exc:
        return exc.code
    except (urllib.error.URLError, OSError) as exc:
        log.warning("webhook delivery to %s failed: %s", url, exc)
        return 0


@dataclass(frozen=True)
class Snapshot:
    """Everything a peer hands over for one agent."""

    agent_id: str
    record: AgentRecord
    authorities: tuple[AuthorityRecord, ...]
    revocations: tuple[RevocationEntry, ...]


class Upstream(Protocol):
    def pull(self, agent_id: str) -> Snapshot: ...


class PeerUpstream:
    """Upstream backed by another in-process registry; ``partitioned`` simulates a cut link."""

    def __init__(self, peer: "Registry", partitioned: bool = False):
        self.peer = peer
        self.partitioned = partitioned

    def pull(self, agent_id: str) -> Snapshot:
        if self.partitioned:
            raise Unreachable("upstream peer is partitioned")
        return self.peer.snapshot(agent_id)


class HttpUpstream:
    """Upstream that pulls a peer's full history over the wire protocol."""

    def __init__(self, base_url: str, timeout: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def _get(self, path: str):
        try:
            with urllib.request.urlopen(self.base_url + path, timeout=self.timeout) as resp:
                return _serde.loads(resp.read())
        except urllib.error.HTTPError as exc:
            if exc.code == 404:
                raise UnknownAgent(f"upstream does not know {path}") from None
            raise Unreachable(f"upstream answered {exc.code} for {path}") from None
        except (urllib.error.URLError, OSError) as exc:
            raise Unreachable(f"{self.base_url}: {exc}") from None

    def pull(self, agent_id: str) -> Snapshot:
        enc = quote(agent_id, safe="")
        links = [VersionLink.from_data(l) for l in self._get(f"/agents/{enc}/chain")["links"]]
        head_seq = links[-1].to_seq if links else self._get(f"/agents/{enc}/facts")["head_seq"]
        versions, sigs = [], {}
        for seq in range(head_seq + 1):
            body = self._get(f"/agents/{enc}/facts/{seq}")
            versions.append(parse_document(_serde.dumps(body["doc"])))
            sigs[seq] = [SignatureBlock.from_data(s) for s in body["signatures"]]
        authorities = tuple(AuthorityRecord.from_data(a) for a in self._get("/authorities")["authorities"])
        provider = links[0].provider_id if links else None
        return Snapshot(agent_id, AgentRecord(versions, links, sigs, now_utc(), provider), authorities, ())


class Registry:
    def __init__(
        self,
        authorities: Iterable[AuthorityRecord] = (),
        revocations: Iterable[RevocationEntry] = (),
        upstream: Optional[Upstream] = None,
        paranoid: bool = False,
        staleness_policy: Optional[StalenessPolicy] = None,
    ):
        self.records: dict[str, AgentRecord] = {}
        self.subscriptions: dict[str, list[tuple[str, str]]] = defaultdict(list)
        self.notifications: list[QueuedNotification] = []
        self.authority_registry: dict[str, AuthorityRecord] = {a.authority_id: a for a in authorities}
        self.revocations: list[RevocationEntry] = list(revocations)
        self.upstream = upstream
        self.paranoid = paranoid
        self.staleness_policy = staleness_policy or StalenessPolicy()
        self._next_sub = 1
        self._next_note = 1
        self._guard = threading.Lock()
        self._agent_locks: dict[str, threading.Lock] = defaultdict(threading.Lock)

    def _lock(self, agent_id: str) -> threading.Lock:
        with self._guard:
            return self._agent_locks[agent_id]

    # -- authorities / revocations -------------------------------------------
    def add_authority(self, record: AuthorityRecord) -> None:
        with self._guard:
            existing = self.authority_registry.get(record.authority_id)
            if existing is not None and existing != record:
                raise ValueError(f"conflicting record for authority {record.authority_id}")
            self.authority_registry[record.authority_id] = record

    def add_revocation(self, entry: RevocationEntry) -> bool:
        """Accept a revocation whose own signature verifies; returns False otherwise."""
        if not verify_revocation(entry, self.authority_registry):
            return False
        with self._guard:
            if entry not in self.revocations:
                self.revocations.append(entry)
        return True

    # -- publish ---------------------------------------------------------------
    def publish(
        self,
        doc: AgentFactsDoc,
        signatures: Iterable[SignatureBlock] = (),
        link: Optional[VersionLink] = None,
        now: Optional[datetime] = None,
    ) -> Ack:
        now = utc(now or now_utc())
        report = validate_document(doc)
        if not report.ok:
            raise ValidationFailed(report.errors)
        agent_id = doc.identity.agent_id
        signatures = list(signatures)
        with self._lock(agent_id):
            rec = self.records.get(agent_id)
            if rec is None:
                if link is not None:
                    raise ChainMismatch("first publish of an agent must not carry a version link")
                if doc.identity.version_seq != 0:
                    raise ChainMismatch(f"genesis revision must have version_seq 0, got {doc.identity.version_seq}")
                self.records[agent_id] = AgentRecord([doc], [], {0: signatures}, now)
                return Ack(agent_id, 0)
            self._check_link(rec, doc, link)
            rec.versions.append(doc)
            rec.links.append(link)
            rec.signatures.setdefault(doc.identity.version_seq, []).extend(signatures)
            rec.cached_at = now
            rec.provider_id = rec.provider_id or link.provider_id
            for sub_id, url in list(self.subscriptions.get(agent_id, ())):
                self._enqueue(UpdateNotification(link=link, webhook_url=url))
            return Ack(agent_id, rec.head_seq)

    def _check_link(self, rec: AgentRecord, doc: AgentFactsDoc, link: Optional[VersionLink]) -> None:
        head = rec.head
        if link is None:
            raise ChainMismatch("agent already published: a version link to the current head is required")
        if doc.identity.version_seq != head.identity.version_seq + 1:
            raise ChainMismatch(f"head is {head.identity.version_seq}, cannot publish {doc.identity.version_seq}")
        if (link.from_seq, link.to_seq) != (head.identity.version_seq, doc.identity.version_seq):
            raise ChainMismatch("link sequence numbers do not join head to new revision")
        if link.agent_id != doc.identity.agent_id:
            raise ChainMismatch("link agent_id does not match the document")
        if link.prev_digest != doc_digest(head) or link.new_digest != doc_digest(doc):
            raise ChainMismatch("link digests do not match head and new revision")
        if rec.provider_id is not None and link.provider_id != rec.provider_id:
            raise ChainMismatch(f"link signed by {link.provider_id}, expected provider {rec.provider_id}")
        provider = self.authority_registry.get(link.provider_id)
        if provider is None or not verify_link_signature(link, provider):
            raise ChainMismatch("provider signature on the link does not verify")

    def _enqueue(self, note: UpdateNotification) -> None:
        with self._guard:
            qid = f"n-{self._next_note:06d}"
            self._next_note += 1
            self.notifications.append(QueuedNotification(qid, note))

    # -- queries ---------------------------------------------------------------
    def _record(self, agent_id: str) -> AgentRecord:
        rec = self.records.get(agent_id)
        if rec is None:
            raise UnknownAgent(f"unknown agent {agent_id!r}")
        return rec

    def head(self, agent_id: str) -> AgentFactsDoc:
        return self._record(agent_id).head

    def version(self, agent_id: str, seq: int) -> AgentFactsDoc:
        rec = self._record(agent_id)
        for d in rec.versions:
            if d.identity.version_seq == seq:
                return d
        raise UnknownAgent(f"agent {agent_id!r} has no revision {seq}")

    def chain(self, agent_id: str) -> list[VersionLink]:
        return list(self._record(agent_id).links)

    def signatures_for(self, agent_id: str, seq: Optional[int] = None) -> list[SignatureBlock]:
        rec = self._record(agent_id)
        return list(rec.signatures.get(rec.head_seq if seq is None else seq, []))

    def facts_with_signatures(self, agent_id: str, seq: Optional[int] = None) -> AgentFactsDoc:
        doc = self.head(agent_id) if seq is None else self.version(agent_id, seq)
        sigs = self.signatures_for(agent_id, doc.identity.version_seq)
        return add_signatures(doc, sigs) if sigs else doc

    def chain_intact(self, agent_id: str) -> bool:
        rec = self._record(agent_id)
        if len(rec.versions) < 2:
            return True
        provider = self.authority_registry.get(rec.provider_id or "")
        return provider is not None and verify_chain(rec.versions, rec.links, provider).accepted

    # -- fetch -----------------------------------------------------------------
    def fetch(
        self,
        agent_id: str,
        max_staleness: int,
        policy: Optional[TrustPolicy],
        now: Optional[datetime] = None,
    ) -> FetchResult:
        now = utc(now or now_utc())
        rec = self.records.get(agent_id)
        age = None if rec is None else int((now - rec.cached_at).total_seconds())
        live = False
        if (rec is None or age > max_staleness) and self.upstream is not None:
            try:
                self.adopt(self.upstream.pull(agent_id), now)
                rec = self.records.get(agent_id)
                age, live = 0, True
            except Unreachable as exc:
                log.info("upstream unreachable for %s: %s; serving cache", agent_id, exc)
            except UnknownAgent:
                pass
        if rec is None:
            raise UnknownAgent(f"unknown agent {agent_id!r}")
        if self.paranoid and not self.chain_intact(agent_id):
            raise ChainMismatch(f"stored chain for {agent_id!r} fails verification")
        doc = self.facts_with_signatures(agent_id)
        report = freshness(doc, now, self.staleness_policy)
        verdict = None
        if policy is not None and age <= max_staleness:
            verdict = evaluate_trust(doc, policy, self.authority_registry, self.revocations, now)
        provenance = "live" if live or age == 0 else "cache"
        return FetchResult(doc, provenance, report, verdict, rec.cached_at, age)

    # -- subscriptions and delivery --------------------------------------------
    def subscribe(self, agent_id: str, webhook_url: str) -> str:
        self._record(agent_id)
        if not well_formed_url(webhook_url):
            raise BadUrl(f"malformed webhook url {webhook_url!r}")
        with self._guard:
            sub_id = f"sub-{self._next_sub:06d}"
            self._next_sub += 1
            self.subscriptions[agent_id].append((sub_id, webhook_url))
        return sub_id

    def pending(self) -> list[QueuedNotification]:
        return [q for q in self.notifications if q.notification.delivery_state != "delivered"]

    def deliver_pending(self, transport: Transport = http_transport) -> DeliveryReport:
        outcomes = []
        for q in self.pending():
            note = q.notification
            body = _serde.dumps({"link": note.link.to_data(), "head_seq": note.link.to_seq}).encode("utf-8")
            try:
                status = int(transport(note.webhook_url, body))
            except Exception as exc:  # transport faults are outcomes, not errors
                log.warning("transport raised for %s: %s", note.webhook_url, exc)
                status = 0
            ok = 200 <= status < 300
            q.notification = replace(note, delivery_state="delivered" if ok else "failed", attempts=note.attempts + 1)
            outcomes.append({
                "id": q.id,
                "webhook_url": note.webhook_url,
                "outcome": "delivered" if ok else "failed",
                "status": status,
                "attempts": q.notification.attempts,
            })
        return DeliveryReport(tuple(outcomes))

    # -- replication -----------------------------------------------------------
    def snapshot(self, agent_id: str) -> Snapshot:
        with self._lock(agent_id):
            rec = self._record(agent_id).copy()
        return Snapshot(agent_id, rec, tuple(self.authority_registry.values()), tuple(self.revocations))

    def adopt(self, snap: Snapshot, now: datetime) -> bool:
        """Merge a peer snapshot; returns True when the local head advanced.

        The incoming chain must verify and extend whatever is held locally.
        """
        for a in snap.authorities:
            if a.authority_id not in self.authority_registry:
                self.add_authority(a)
        for r in snap.revocations:
            self.add_revocation(r)
        incoming = snap.record
        if len(incoming.versions) > 1:
            provider = self.authority_registry.get(incoming.provider_id or "")
            if provider is None or not verify_chain(incoming.versions, incoming.links, provider).accepted:
                raise ChainMismatch(f"peer chain for {snap.agent_id!r} does not verify")
        with self._lock(snap.agent_id):
            local = self.records.get(snap.agent_id)
            if local is not None:
                n = len(local.versions)
                shared = min(n, len(incoming.versions))
                if [doc_digest(d) for d in incoming.versions[:shared]] != [doc_digest(d) for d in local.versions[:shared]]:
                    raise ChainMismatch(f"peer history for {snap.agent_id!r} diverges from local history")
                if len(incoming.versions) < n:
                    return False  # peer is behind; it catches up from us
                advanced = len(incoming.versions) > n
                merged = incoming.copy()
                for seq, sigs in local.signatures.items():
                    for s in sigs:
                        if s not in merged.signatures.setdefault(seq, []):
                            merged.signatures[seq].append(s)
                merged.cached_at = utc(now)
                self.records[snap.agent_id] = merged
                return advanced
            rec = incoming.copy()
            rec.cached_at = utc(now)
            self.records[snap.agent_id] = rec
            return True

    # -- persistence -----------------------------------------------------------
    def save(self, directory) -> None:
        root = Path(directory)
        (root / "agents").mkdir(parents=True, exist_ok=True)
        _write(root / "authorities.json", {"authorities": [a.to_data() for a in self.authority_registry.values()]})
        _write(root / "revocations.json", {"revocations": [r.to_data() for r in self.revocations]})
        _write(root / "subscriptions.json", {
            "next_id": self._next_sub,
            "subscriptions": {a: [{"id": i, "webhook_url": u} for i, u in subs] for a, subs in self.subscriptions.items()},
        })
        _write(root / "notifications.json", {
            "next_id": self._next_note,
            "notifications": [q.to_data() for q in self.notifications],
        })
        for agent_id, rec in self.records.items():
            adir = root / "agents" / quote(agent_id, safe="")
            (adir / "versions").mkdir(parents=True, exist_ok=True)
            for d in rec.versions:
                path = adir / "versions" / f"{d.identity.version_seq:06d}.af.json"
                if not path.exists():
                    path.write_text(serialize_document(d), "utf-8")
            _write(adir / "links.json", {"links": [l.to_data() for l in rec.links]})
            _write(adir / "signatures.json", {
                "signatures": {str(k): [s.to_data() for s in v] for k, v in sorted(rec.signatures.items())}
            })
            meta = {"agent_id": agent_id, "cached_at": format_ts(rec.cached_at)}
            if rec.provider_id:
                meta["provider_id"] = rec.provider_id
            _write(adir / "meta.json", meta)

    @classmethod
    def load(cls, directory, **kwargs) -> "Registry":
        root = Path(directory)
        reg = cls(**kwargs)
        if not root.exists():
            return reg
        data = _read(root / "authorities.json", {"authorities": []})
        for i, a in enumerate(data["authorities"]):
            reg.add_authority(AuthorityRecord.from_data(a, f"/authorities/{i}"))
        data = _read(root / "revocations.json", {"revocations": []})
        reg.revocations = [RevocationEntry.from_data(r, f"/revocations/{i}") for i, r in enumerate(data["revocations"])]
        data = _read(root / "subscriptions.json", {"next_id": 1, "subscriptions": {}})
        reg._next_sub = data["next_id"]
        for agent_id, subs in data["subscriptions"].items():
            reg.subscriptions[agent_id] = [(s["id"], s["webhook_url"]) for s in subs]
        data = _read(root / "notifications.json", {"next_id": 1, "notifications": []})
        reg._next_note = data["next_id"]
        for n in data["notifications"]:
            n = dict(n)
            qid = n.pop("id")
            reg.notifications.append(QueuedNotification(qid, UpdateNotification.from_data(n)))
        agents = root / "agents"
        if agents.exists():
            for adir in sorted(p for p in agents.iterdir() if p.is_dir()):
                meta = _read(adir / "meta.json", None)
                versions = [parse_document(p.read_bytes()) for p in sorted((adir / "versions").glob("*.af.json"))]
                links = [VersionLink.from_data(l) for l in _read(adir / "links.json", {"links": []})["links"]]
                sigs = {
                    int(k): [SignatureBlock.from_data(s) for s in v]
                    for k, v in _read(adir / "signatures.json", {"signatures": {}})["signatures"].items()
                }
                agent_id = meta["agent_id"] if meta else unquote(adir.name)
                reg.records[agent_id] = AgentRecord(
                    versions, links, sigs,
                    parse_ts(meta["cached_at"]) if meta else now_utc(),
                    meta.get("provider_id") if meta else None,
                )
        return reg


def _write(path: Path, data) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(_serde.dumps(data), "utf-8")
    tmp.replace(path)


def _read(path: Path, default):
    if not path.exists():
        return default
    return _serde.loads(path.read_bytes())


@dataclass(frozen=True)
class SyncReport:
    advanced: tuple[tuple[str, str], ...]  # (store label, agent_id)
    conflicts: tuple[str, ...] = ()


def sync(a: Registry, b: Registry, now: Optional[datetime] = None) -> SyncReport:
    """One bidirectional anti-entropy round between two peers."""
    now = utc(now or now_utc())
    advanced, conflicts = [], []
    for label, src, dst in (("a", b, a), ("b", a, b)):
        for agent_id in sorted(src.records):
            try:
                if dst.adopt(src.snapshot(agent_id), now):
                    advanced.append((label, agent_id))
            except ChainMismatch as exc:
                log.warning("sync conflict for %s: %s", agent_id, exc)
                conflicts.append(agent_id)
    return SyncReport(tuple(advanced), tuple(sorted(set(conflicts))))
