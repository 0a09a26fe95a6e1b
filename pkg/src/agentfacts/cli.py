"""Command-line entry point: ``agentfacts <command> ...``.

Exit codes: 0 success, 1 validation or trust failure, 2 usage error.
``--format machine`` prints exactly one JSON object on standard output.
Every time-dependent command takes ``--at`` (RFC 3339, UTC) so runs are
reproducible; without it the wall clock is used.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from . import _serde
from ._serde import format_ts, now_utc, parse_ts
from .canon import SECTION_NAMES, canonicalize, digest, section_payload
from .errors import AgentFactsError, DocumentError, KeystoreError
from .keystore import Keystore, load_authorities, passphrase_from_env, save_authorities
from .lifecycle import (
    StalenessPolicy,
    VersionLink,
    append_version,
    freshness,
    load_chain,
    plan_refresh,
    save_chain,
    verify_chain,
)
from .model import (
    VIEWS,
    add_signatures,
    parse_document,
    select_view,
    serialize_document,
    validate_document,
)
from .permissions import (
    AccessContext,
    EscalationPolicy,
    GrantRequest,
    PermissionState,
    check,
    escalate,
    grant,
    revert_expired,
    verify_audit_chain,
)
from .registry import HttpUpstream, Registry, http_transport
from .signing import ALGORITHMS, DEFAULT_ALGORITHM, RevocationEntry, authority_map, generate_authority, revoke, sign_sections, verify_signature
from .trust import TrustPolicy, evaluate_trust, explain_verdict

log = logging.getLogger("agentfacts")


class UsageError(Exception):
    """Bad invocation that argparse could not catch (missing file, bad value)."""


class Failure(Exception):
    """The command ran but its check failed (exit 1)."""


@dataclass
class CliConfig:
    keystore_path: Path
    authority_registry_path: Path
    revocations_path: Path
    default_policy_path: Optional[Path]
    output_format: str


class Output:
    def __init__(self, cfg: CliConfig, stdout, stderr):
        self.machine = cfg.output_format == "machine"
        self.stdout = stdout
        self.stderr = stderr

    def emit(self, data, human=None) -> None:
        if self.machine:
            self.stdout.write(_serde.dumps(data))
            return
        if human is None:
            human = _serde.dumps(data).rstrip("\n")
        if isinstance(human, str):
            human = [human]
        for line in human:
            self.stdout.write(line + "\n")

    def warn(self, message: str) -> None:
        self.stderr.write(f"agentfacts: {message}\n")


# -- helpers ------------------------------------------------------------------

def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _load_doc(path):
    return parse_document(_read_bytes(path))


def _load_record(cls, path):
    return cls.from_data(_serde.loads(_read_bytes(path)))


def _write_text(path, text: str) -> None:
    Path(path).write_text(text, "utf-8")


def _at(args):
    at = getattr(args, "at", None)
    if at is None:
        return now_utc()
    try:
        return parse_ts(at)
    except DocumentError as exc:
        raise UsageError(f"--at: {exc}") from None


def _csv(value: Optional[str]) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()] if value else []


def _sections(value: str) -> set[str]:
    names = set(_csv(value))
    unknown = names - set(SECTION_NAMES)
    if unknown or not names:
        raise UsageError(f"--sections must list known section names, got {sorted(unknown) or 'nothing'}")
    return names


def _authorities(cfg: CliConfig):
    return authority_map(load_authorities(cfg.authority_registry_path))


def _revocations(cfg: CliConfig) -> list[RevocationEntry]:
    path = cfg.revocations_path
    if not path.exists():
        return []
    data = _serde.loads(path.read_bytes())
    return [RevocationEntry.from_data(r, f"/revocations/{i}") for i, r in enumerate(data.get("revocations", []))]


def _keystore(cfg: CliConfig) -> Keystore:
    return Keystore(cfg.keystore_path, passphrase_from_env())


def _policy(cfg: CliConfig, path: Optional[str]) -> TrustPolicy:
    path = path or cfg.default_policy_path
    if path is None:
        raise UsageError("a trust policy is required (--policy or AGENTFACTS_POLICY)")
    return _load_record(TrustPolicy, path)


# -- document commands ----------------------------------------------------------

def cmd_validate(args, cfg, out):
    try:
        doc = _load_doc(args.file)
    except DocumentError as exc:
        out.emit({"ok": False, "findings": [{"path": exc.path, "severity": "error", "message": exc.message}]}, f"error {exc}")
        raise Failure("document does not parse") from None
    report = validate_document(doc)
    out.emit(report.to_data(), [str(f) for f in report.findings] + [f"{args.file}: {'valid' if report.ok else 'INVALID'}"])
    if not report.ok:
        raise Failure(f"{len(report.errors)} validation error(s)")


def cmd_view(args, cfg, out):
    doc = select_view(_load_doc(args.file), args.audience)
    out.emit(doc.to_data(), serialize_document(doc).rstrip("\n"))


def cmd_canon(args, cfg, out):
    doc = _load_doc(args.file)
    data = section_payload(doc, _sections(args.sections)) if args.sections else canonicalize(doc)
    d = digest(data)
    if out.machine:
        out.emit({"canonical": data.bytes.decode("utf-8"), "digest": str(d), "length": len(data)})
    elif args.digest:
        out.emit(None, str(d))
    else:
        out.stdout.write(data.bytes.decode("utf-8") + "\n")


def cmd_keygen(args, cfg, out):
    seed = args.seed.encode("utf-8") if args.seed else None
    handle, record = generate_authority(args.algorithm, args.name, _csv(args.domains), seed=seed)
    ks = _keystore(cfg)
    ks.add(handle)
    ks.save()
    records = load_authorities(cfg.authority_registry_path)
    save_authorities(cfg.authority_registry_path, [*records, record])
    out.emit(record.to_data(), f"{record.authority_id} ({record.algorithm}) {record.display_name}")


def cmd_sign(args, cfg, out):
    doc = _load_doc(args.file)
    key = _keystore(cfg).open(args.key)
    block = sign_sections(key, doc, _sections(args.sections), args.confidence, _at(args))
    dest = args.out or args.file
    _write_text(dest, serialize_document(add_signatures(doc, [block])))
    out.emit(block.to_data(), f"signed {','.join(block.scope)} as {block.authority_id} -> {dest}")


def cmd_verify_sig(args, cfg, out):
    doc = _load_doc(args.file)
    sigs = doc.verification.signatures if doc.verification else ()
    if args.index is not None:
        if not 0 <= args.index < len(sigs):
            raise UsageError(f"no signature #{args.index} (document has {len(sigs)})")
        chosen = [(args.index, sigs[args.index])]
    else:
        chosen = list(enumerate(sigs))
    now, auths, revs = _at(args), _authorities(cfg), _revocations(cfg)
    results = [(i, s, verify_signature(doc, s, auths, revs, now)) for i, s in chosen]
    out.emit(
        {"signatures": [{"index": i, "authority_id": s.authority_id, "scope": list(s.scope), "status": st.value} for i, s, st in results]},
        [f"sig#{i} {s.authority_id} [{','.join(s.scope)}]: {st.value}" for i, s, st in results] or ["no signatures"],
    )
    if not results or any(st.value != "valid" for _i, _s, st in results):
        raise Failure("signature verification failed")


def cmd_revoke(args, cfg, out):
    key = _keystore(cfg).open(args.key)
    if args.signature_of:
        doc = _load_doc(args.signature_of)
        sigs = doc.verification.signatures if doc.verification else ()
        if not 0 <= args.index < len(sigs):
            raise UsageError(f"no signature #{args.index} in {args.signature_of}")
        target = sigs[args.index]
    elif args.digest:
        target = args.digest
    else:
        target = key.authority_id
    entry = revoke(key, target, args.reason, _at(args))
    existing = _revocations(cfg)
    if entry not in existing:
        existing.append(entry)
    _write_text(cfg.revocations_path, _serde.dumps({"revocations": [r.to_data() for r in existing]}))
    out.emit(entry.to_data(), f"revoked {entry.target} {entry.target_ref} -> {cfg.revocations_path}")


def cmd_trust_eval(args, cfg, out):
    doc = _load_doc(args.file)
    verdict = evaluate_trust(doc, _policy(cfg, args.policy), _authorities(cfg), _revocations(cfg), _at(args))
    out.emit(verdict.to_data(), explain_verdict(verdict).lines)
    weak = [f"{s}={v.status}" for s, v in verdict.per_section.items() if v.status != "trusted"]
    if verdict.overall == "untrusted":
        out.warn("untrusted: " + ", ".join(weak))
        raise Failure("untrusted")
    if verdict.overall == "degraded":
        out.warn("degraded: " + ", ".join(weak))


def cmd_verify(args, cfg, out):
    args.file = args.doc
    cmd_trust_eval(args, cfg, out)


def cmd_freshness(args, cfg, out):
    doc = _load_doc(args.file)
    policy = _load_record(StalenessPolicy, args.staleness) if args.staleness else StalenessPolicy()
    now = _at(args)
    report = freshness(doc, now, policy)
    plan = plan_refresh(doc, now, policy)
    lines = [f"{s:<17} {st:<8} expires {format_ts(report.expiries[s])}" for s, st in report.per_section.items()]
    lines.append(f"document: {report.document_status}")
    out.emit({**report.to_data(), "refresh_plan": plan.to_data()}, lines)
    if report.document_status == "expired":
        raise Failure("critical section expired")


# -- chains -------------------------------------------------------------------

def cmd_chain_append(args, cfg, out):
    directory = Path(args.dir)
    docs, links = load_chain(directory) if directory.exists() else ([], [])
    nxt = _load_doc(args.file)
    if not docs:
        if nxt.identity.version_seq != 0:
            raise UsageError("the first revision of a chain must have version_seq 0")
        save_chain(directory, [nxt], [])
        out.emit({"genesis": True, "seq": 0}, f"started chain in {directory} at seq 0")
        return
    key = _keystore(cfg).open(args.key) if args.key else None
    if key is None:
        raise UsageError("--key is required to link a new revision")
    link = append_version(docs[-1], nxt, key, _at(args) if args.at else None)
    save_chain(directory, [*docs, nxt], [*links, link])
    out.emit(link.to_data(), f"linked {link.from_seq} -> {link.to_seq} ({link.new_digest})")


def cmd_chain_verify(args, cfg, out):
    docs, links = load_chain(args.dir)
    if not docs:
        raise UsageError(f"no revisions in {args.dir}")
    auths = _authorities(cfg)
    provider_id = args.provider or (links[0].provider_id if links else None)
    if links and provider_id not in auths:
        raise UsageError(f"provider {provider_id} is not in {cfg.authority_registry_path}")
    if not links:
        out.emit({"accepted": True, "first_failure": None, "failures": []}, "single revision, nothing to link")
        return
    report = verify_chain(docs, links, auths[provider_id])
    out.emit(report.to_data(), ["accepted"] if report.accepted else [f"link {i}: {r}" for i, r in report.failures])
    if not report.accepted:
        raise Failure("chain rejected")


# -- permissions ----------------------------------------------------------------

def _load_state(path) -> PermissionState:
    return _load_record(PermissionState, path)


def _save_state(path, state: PermissionState) -> None:
    _write_text(path, _serde.dumps(state.to_data()))


def cmd_perms_init(args, cfg, out):
    if Path(args.state).exists() and not args.force:
        raise UsageError(f"{args.state} exists (use --force to overwrite)")
    policy = EscalationPolicy(tuple(_csv(args.approvers)), args.max_ttl)
    state = PermissionState(escalation_policy=policy)
    _save_state(args.state, state)
    out.emit(state.to_data(), f"initialised {args.state}")


def cmd_perms_grant(args, cfg, out):
    state = grant(_load_state(args.state), _load_record(GrantRequest, args.request), args.actor, _at(args))
    _save_state(args.state, state)
    g = state.grants[-1]
    out.emit(g.to_data(), f"granted {','.join(g.grant.actions)} on {g.grant.resource_pattern} ({g.status})")


def cmd_perms_check(args, cfg, out):
    ctx = AccessContext(
        now=_at(args),
        jurisdiction=args.jurisdiction,
        human_reviewer_present=args.reviewer,
        local_hour=args.local_hour,
        requester=args.requester,
    )
    decision, state = check(_load_state(args.state), args.action, args.resource, ctx)
    _save_state(args.state, state)
    out.emit({"allowed": decision.allowed, "reason": decision.reason}, f"{args.action} {args.resource}: {decision}")
    if not decision.allowed:
        raise Failure("access denied")


def _due_escalations(schedule: dict, state: PermissionState, now):
    """Schedule entries whose time has come and that are not yet in the audit trail."""
    applied = {
        (format_ts(e.at), e.actor, e.detail.get("resource_pattern"))
        for e in state.audit
        if e.action == "escalate"
    }
    for i, item in enumerate(schedule.get("escalations", [])):
        at = parse_ts(item["at"])
        req = GrantRequest.from_data(item["request"], f"/escalations/{i}/request")
        if at <= now and (format_ts(at), item["approver"], req.resource_pattern) not in applied:
            yield at, item["approver"], req


def cmd_perms_escalate(args, cfg, out):
    state = _load_state(args.state)
    if args.schedule:
        jobs = sorted(_due_escalations(_serde.loads(_read_bytes(args.schedule)), state, _at(args)), key=lambda j: j[0])
    elif args.request and args.approver:
        jobs = [(_at(args), args.approver, _load_record(GrantRequest, args.request))]
    else:
        raise UsageError("give --schedule, or both --request and --approver")
    lines = []
    for at, approver, req in jobs:
        state = escalate(state, req, approver, at)
        g = state.grants[-1]
        lines.append(f"escalated {','.join(req.actions)} on {req.resource_pattern} until {format_ts(g.expires_at)} ({approver})")
    _save_state(args.state, state)
    out.emit({"applied": len(jobs), "grants": [g.to_data() for g in state.grants]}, lines or ["no escalations due"])


def cmd_perms_revert(args, cfg, out):
    before = _load_state(args.state)
    state = revert_expired(before, _at(args))
    _save_state(args.state, state)
    reverted = [i for i, (a, b) in enumerate(zip(before.grants, state.grants)) if a.status != b.status]
    out.emit(
        {"reverted": reverted, "grants": [g.to_data() for g in state.grants]},
        [f"reverted grant #{i} {state.grants[i].grant.resource_pattern}" for i in reverted] or ["nothing to revert"],
    )


def cmd_perms_audit_verify(args, cfg, out):
    state = _load_state(args.state)
    ok = verify_audit_chain(state.audit)
    out.emit({"intact": ok, "entries": len(state.audit)}, f"audit chain of {len(state.audit)} entries: {'intact' if ok else 'BROKEN'}")
    if not ok:
        raise Failure("audit chain broken")


# -- registry -------------------------------------------------------------------

def _open_store(cfg: CliConfig, args) -> Registry:
    upstream = HttpUpstream(args.upstream) if getattr(args, "upstream", None) else None
    reg = Registry.load(args.store, upstream=upstream)
    for a in load_authorities(cfg.authority_registry_path):
        if a.authority_id not in reg.authority_registry:
            reg.add_authority(a)
    for r in _revocations(cfg):
        reg.add_revocation(r)
    return reg


def cmd_registry_serve(args, cfg, out):
    from .wire import serve

    reg = _open_store(cfg, args)
    server = serve(reg, args.host, args.port, on_change=lambda: reg.save(args.store))
    out.warn(f"serving {args.store} on http://{args.host}:{server.server_address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        reg.save(args.store)


def cmd_registry_publish(args, cfg, out):
    reg = _open_store(cfg, args)
    doc = _load_doc(args.file)
    sigs = doc.verification.signatures if doc.verification else ()
    link = None
    if args.link:
        link = _load_record(VersionLink, args.link)
    elif doc.identity.agent_id in reg.records and args.key:
        link = append_version(reg.head(doc.identity.agent_id), doc, _keystore(cfg).open(args.key))
    ack = reg.publish(doc, sigs, link, now=_at(args))
    reg.save(args.store)
    out.emit(ack.to_data(), f"published {ack.agent_id} head={ack.head_seq}")


def cmd_registry_fetch(args, cfg, out):
    reg = _open_store(cfg, args)
    policy = _policy(cfg, args.policy) if (args.policy or cfg.default_policy_path) else None
    result = reg.fetch(args.agent_id, args.max_staleness, policy, _at(args))
    reg.save(args.store)
    lines = [
        f"{args.agent_id} seq={result.doc.identity.version_seq} provenance={result.provenance} age={result.cache_age}s",
        f"freshness: {result.freshness.document_status}",
    ]
    if result.verdict is not None:
        lines.append(f"trust: {result.verdict.overall}")
    elif policy is not None:
        lines.append("trust: not evaluated (cache older than --max-staleness)")
    out.emit(result.to_data(), lines)
    if result.verdict is not None and result.verdict.overall == "untrusted":
        raise Failure("untrusted")


def cmd_registry_subscribe(args, cfg, out):
    reg = _open_store(cfg, args)
    sub_id = reg.subscribe(args.agent_id, args.webhook_url)
    reg.save(args.store)
    out.emit({"id": sub_id, "agent_id": args.agent_id, "webhook_url": args.webhook_url}, f"subscribed {sub_id}")


def cmd_registry_deliver(args, cfg, out):
    reg = _open_store(cfg, args)
    report = reg.deliver_pending(http_transport)
    reg.save(args.store)
    out.emit(report.to_data(), [f"{o['id']} {o['webhook_url']}: {o['outcome']} ({o['status']})" for o in report.outcomes] or ["nothing pending"])


# -- demo -------------------------------------------------------------------------

def cmd_demo(args, cfg, out):
    from .scenario import run_demo

    lines: list[str] = []
    sink = lines.append if out.machine else (lambda line: out.stdout.write(line + "\n"))
    code = run_demo(args.tamper_compliance, args.frozen_clock, out=sink)
    if out.machine:
        out.emit({"scenario": args.scenario, "exit_code": code, "transcript": lines})
    if code:
        raise Failure("demo stage failed")


# -- parser ---------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--keystore", default=argparse.SUPPRESS, help="keystore file (default agentfacts.keys.json)")
    common.add_argument("--authorities", default=argparse.SUPPRESS, help="authority registry file (default authorities.json)")
    common.add_argument("--revocations", default=argparse.SUPPRESS, help="revocation list file (default revocations.json)")
    common.add_argument("--format", choices=("human", "machine"), default=argparse.SUPPRESS)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = _Parser(prog="agentfacts", description="Verifiable agent metadata toolkit.", parents=[common])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def cmd(name, func, help, parent=sub):
        sp = parent.add_parser(name, help=help, parents=[common])
        sp.set_defaults(func=func)
        return sp

    def timed(sp):
        sp.add_argument("--at", help="evaluation time, e.g. 2025-01-06T14:00:00Z (default: now)")
        return sp

    sp = cmd("validate", cmd_validate, "check a .af.json document")
    sp.add_argument("file")
    sp = cmd("view", cmd_view, "print an audience-specific view")
    sp.add_argument("file")
    sp.add_argument("--audience", choices=sorted(VIEWS), required=True)
    sp = cmd("canon", cmd_canon, "print canonical bytes (or signed payload with --sections)")
    sp.add_argument("file")
    sp.add_argument("--sections", help="comma-separated scope")
    sp.add_argument("--digest", action="store_true", help="print only the sha-256 digest")
    sp = cmd("keygen", cmd_keygen, "create an authority key in the keystore")
    sp.add_argument("--algorithm", choices=sorted(ALGORITHMS), default=DEFAULT_ALGORITHM)
    sp.add_argument("--name", required=True)
    sp.add_argument("--domains", default="")
    sp.add_argument("--seed", help="deterministic key derivation (test fixtures only)")
    sp = timed(cmd("sign", cmd_sign, "sign sections and attach the signature"))
    sp.add_argument("file")
    sp.add_argument("--key", required=True, help="authority id in the keystore")
    sp.add_argument("--sections", required=True)
    sp.add_argument("--confidence", type=float, required=True)
    sp.add_argument("--out", help="write here instead of updating the file in place")
    sp = timed(cmd("verify-sig", cmd_verify_sig, "verify attached signatures"))
    sp.add_argument("file")
    sp.add_argument("--index", type=int)
    sp = timed(cmd("revoke", cmd_revoke, "issue a self-revocation"))
    sp.add_argument("--key", required=True)
    group = sp.add_mutually_exclusive_group()
    group.add_argument("--signature-of", metavar="FILE", help="revoke a signature attached to FILE")
    group.add_argument("--digest", help="revoke a signature by digest")
    sp.add_argument("--index", type=int, default=0)
    sp.add_argument("--reason", required=True)
    sp = timed(cmd("trust-eval", cmd_trust_eval, "evaluate a document against a trust policy"))
    sp.add_argument("file")
    sp.add_argument("--policy")
    sp = timed(cmd("verify", cmd_verify, "alias of trust-eval taking --doc"))
    sp.add_argument("--doc", required=True)
    sp.add_argument("--policy")
    sp = timed(cmd("freshness", cmd_freshness, "per-section freshness and refresh plan"))
    sp.add_argument("file")
    sp.add_argument("--staleness", help="staleness policy file")

    chain = sub.add_parser("chain", help="version chains").add_subparsers(dest="chain_cmd", required=True, parser_class=_Parser)
    sp = timed(cmd("append", cmd_chain_append, "append a revision to a chain directory", chain))
    sp.add_argument("dir")
    sp.add_argument("file")
    sp.add_argument("--key", help="provider authority id")
    sp = cmd("verify", cmd_chain_verify, "verify a chain directory", chain)
    sp.add_argument("dir")
    sp.add_argument("--provider")

    perms = sub.add_parser("perms", help="permission state files (.perm.json)").add_subparsers(dest="perms_cmd", required=True, parser_class=_Parser)
    sp = cmd("init", cmd_perms_init, "create an empty permission state", perms)
    sp.add_argument("state")
    sp.add_argument("--approvers", default="")
    sp.add_argument("--max-ttl", type=int, default=0)
    sp.add_argument("--force", action="store_true")
    sp = timed(cmd("grant", cmd_perms_grant, "activate a grant request", perms))
    sp.add_argument("state")
    sp.add_argument("--request", required=True)
    sp.add_argument("--actor", required=True)
    sp = timed(cmd("check", cmd_perms_check, "decide an access request", perms))
    sp.add_argument("state")
    sp.add_argument("--action", required=True)
    sp.add_argument("--resource", required=True)
    sp.add_argument("--jurisdiction")
    sp.add_argument("--reviewer", action="store_true", help="a human reviewer is present")
    sp.add_argument("--local-hour", type=int)
    sp.add_argument("--requester", default="agent")
    sp = timed(cmd("escalate", cmd_perms_escalate, "apply an escalation or a schedule file", perms))
    sp.add_argument("state")
    sp.add_argument("--schedule")
    sp.add_argument("--request")
    sp.add_argument("--approver")
    sp = timed(cmd("revert", cmd_perms_revert, "expire elevated grants past their deadline", perms))
    sp.add_argument("state")
    sp = cmd("audit-verify", cmd_perms_audit_verify, "check the audit hash chain", perms)
    sp.add_argument("state")

    reg = sub.add_parser("registry", help="registry store").add_subparsers(dest="registry_cmd", required=True, parser_class=_Parser)
    sp = cmd("serve", cmd_registry_serve, "serve a store over HTTP", reg)
    sp.add_argument("--store", required=True)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8080)
    sp = timed(cmd("publish", cmd_registry_publish, "publish a revision", reg))
    sp.add_argument("--store", required=True)
    sp.add_argument("file")
    sp.add_argument("--link")
    sp.add_argument("--key", help="provider key to link the revision automatically")
    sp = timed(cmd("fetch", cmd_registry_fetch, "fetch facts, from cache if the upstream is unreachable", reg))
    sp.add_argument("--store", required=True)
    sp.add_argument("agent_id")
    sp.add_argument("--max-staleness", type=int, default=3600)
    sp.add_argument("--policy")
    sp.add_argument("--upstream", help="base URL of an upstream registry")
    sp = cmd("subscribe", cmd_registry_subscribe, "register a webhook", reg)
    sp.add_argument("--store", required=True)
    sp.add_argument("agent_id")
    sp.add_argument("webhook_url")
    sp = cmd("deliver", cmd_registry_deliver, "deliver pending notifications", reg)
    sp.add_argument("--store", required=True)

    sp = cmd("demo", cmd_demo, "run a scripted scenario")
    sp.add_argument("scenario", choices=("employee-agent",))
    sp.add_argument("--tamper-compliance", action="store_true")
    sp.add_argument("--frozen-clock", action="store_true")
    return p


def _config(args) -> CliConfig:
    import os

    policy = os.environ.get("AGENTFACTS_POLICY")
    return CliConfig(
        keystore_path=Path(getattr(args, "keystore", "agentfacts.keys.json")),
        authority_registry_path=Path(getattr(args, "authorities", "authorities.json")),
        revocations_path=Path(getattr(args, "revocations", "revocations.json")),
        default_policy_path=Path(policy) if policy else None,
        output_format=getattr(args, "format", "human"),
    )


def run(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING, stream=stderr)
    cfg = _config(args)
    out = Output(cfg, stdout, stderr)
    try:
        args.func(args, cfg, out)
    except Failure as exc:
        out.warn(str(exc))
        return 1
    except (UsageError, KeystoreError) as exc:
        out.warn(str(exc))
        return 2
    except AgentFactsError as exc:
        out.warn(f"{type(exc).__name__}: {exc}")
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
