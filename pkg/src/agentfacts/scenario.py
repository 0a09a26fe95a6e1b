"""The financial-analysis employee agent: fixture document and end-to-end demo.

A provider publishes signed facts, an enterprise evaluates them under its own
trust policy, layers its role on top, and runs the agent through a quarter of
permission changes: baseline grants, a pre-deadline escalation, and the
automatic reversion once the filing is in.
"""

from __future__ import annotations

from dataclasses import replace
from datetime import datetime, timedelta, timezone
from typing import Callable
from zoneinfo import ZoneInfo

from ._serde import format_ts
from .canon import canonicalize
from .lifecycle import StalenessPolicy, append_version, freshness
from .model import (
    AgentFactsDoc,
    Assessment,
    AuthPermissions,
    BaselineModel,
    Capabilities,
    Classification,
    Compliance,
    Component,
    CoreIdentity,
    EuAiAct,
    Extensibility,
    GdprCompliance,
    Library,
    NistAiRmf,
    Performance,
    PerformanceSample,
    RoleOverlay,
    ScanRecord,
    ScopeOfWork,
    SessionManagement,
    SupplyChain,
    VerificationMeta,
    apply_overlay,
    validate_document,
)
from .permissions import (
    AccessContext,
    ConstraintSet,
    EscalationPolicy,
    GrantRequest,
    TimeWindow,
    check,
    escalate,
    grant,
    revert_expired,
    verify_audit_chain,
)
from .registry import PeerUpstream, Registry
from .signing import generate_authority, sign_sections
from .trust import TrustPolicy, explain_verdict

AGENT_ID = "did:web:finai.example:agents:reg-analyst"
T0 = datetime(2025, 1, 6, 14, 0, 0, tzinfo=timezone.utc)
DAY = timedelta(days=1)
NEW_YORK = ZoneInfo("America/New_York")

ORG = "acme-bank"
IT_ADMIN = "acme-bank:it-admin"
COMPLIANCE_OFFICER = "acme-bank:compliance-officer"


def finance_agent_doc(created: datetime = T0) -> AgentFactsDoc:
    """The provider's facts for the regulatory-reporting agent (unsigned)."""
    return AgentFactsDoc(
        identity=CoreIdentity(
            agent_id=AGENT_ID,
            name="FinAI Regulatory Reporting Analyst",
            version="1.0",
            created=created,
            last_updated=created,
            ttl=30 * 86400,
        ),
        baseline_model=BaselineModel(
            foundation_model="gpt-4",
            model_version="gpt-4-0613-ft-finreg-2024q4",
            model_provider="OpenAI",
            training_data_sources=("SEC EDGAR filings 2010-2024", "Basel III framework texts", "FINRA rulebook"),
            training_cutoff_date=datetime(2024, 10, 1, tzinfo=timezone.utc),
            fine_tuning={"method": "supervised", "domain": "financial regulation and reporting standards"},
            model_capabilities=("reasoning", "tool_use", "long_context"),
            known_limitations=("no real-time market data", "not licensed for investment advice"),
            bias_assessments=(Assessment("disparate impact review", "pass", "FairML Labs"),),
            safety_evaluations=(Assessment("red-team financial misuse", "pass", "FinAI internal"),),
        ),
        classification=Classification(
            agent_type="assistant",
            operational_level="supervised",
            stakeholder_context="consumer",
            deployment_scope="external",
            interaction_mode="asynchronous",
        ),
        capabilities=Capabilities(
            external_apis=("https://api.finai.example/openapi.json",),
            tool_calling=("mcp", "function_calls"),
            programming_languages=("python", "sql"),
            data_formats=("json", "csv", "pdf"),
            interface_types=("text", "api"),
            domain_expertise=("finance", "regulatory_reporting"),
            language_support=("en", "de", "fr"),
        ),
        auth_permissions=AuthPermissions(
            supported_methods=("oauth2", "mtls"),
            primary_scheme="oauth2",
            oauth_endpoints=("https://auth.finai.example/oauth2/token",),
            token_requirements={"scopes": ["reports:draft", "data:read"]},
            auth_security_level="high",
            session_management=SessionManagement(timeout_seconds=1800, refresh_policy="rotate-on-use"),
            multi_factor_required=True,
            auth_compliance=("pkce", "zero_trust"),
        ),
        compliance=Compliance(
            eu_ai_act=EuAiAct(risk_level="limited", transparency_obligations=("disclose AI-generated content",)),
            nist_ai_rmf=NistAiRmf(framework_alignment="financial services profile", risk_categories=("validity", "accountability")),
            gdpr_compliance=GdprCompliance(data_protection="DPA in place", privacy_controls=("data minimisation", "EU residency")),
            sector_standards=("sox", "iso27001"),
            geographic_compliance=("us", "eu", "sg"),
            safety_classification="medium",
            audit_certifications=("soc2", "iso"),
        ),
        performance=Performance(
            response_time_p50=850,
            response_time_p95=2400,
            availability_sla=0.999,
            throughput_limit=120,
            accuracy_metrics={"regulatory_report_accuracy": 0.97},
            error_rate=0.004,
            cost_structure="subscription",
            reputation_score=0.91,
            user_satisfaction=0.88,
            historical_performance=(PerformanceSample(created - DAY, "regulatory_report_accuracy", 0.968),),
        ),
        supply_chain=SupplyChain(
            component_dependencies=(Component("OpenAI API", "2024-10"), Component("Postgres", "16.2")),
            data_sources=("SEC EDGAR", "internal reporting templates"),
            infrastructure_providers=("AWS us-east-1", "AWS eu-central-1"),
            software_libraries=(Library("pandas", "2.2.1", "BSD-3-Clause"), Library("cryptography", "42.0.5", "Apache-2.0")),
            security_scanning=(ScanRecord("trivy", created - DAY, 0),),
            license_compliance=("apache-2.0", "bsd-3-clause"),
        ),
        verification=VerificationMeta(
            verification_policy="https://finai.example/trust/policy-v1",
            verification_ttl={"performance": 3600, "compliance": 90 * 86400},
        ),
        extensions=Extensibility(
            integration_hooks=("https://finai.example/hooks/agentfacts",),
            backward_compatibility=">=1.0,<2.0",
        ),
    )


def authorities():
    """Deterministic demo authorities: (provider, compliance consultancy, security firm)."""
    provider = generate_authority("ed25519", "FinAI Inc. (provider)", ["provider"], seed=b"demo:provider")
    consultancy = generate_authority("ecdsa-p256", "Ledger & Rule Compliance LLP", ["compliance"], seed=b"demo:compliance")
    security = generate_authority("ed25519", "Bastion Security Labs", ["security"], seed=b"demo:security")
    return provider, consultancy, security


def enterprise_policy(provider_id: str, compliance_id: str, security_id: str) -> TrustPolicy:
    return TrustPolicy(
        authority_weights={compliance_id: 1.0, security_id: 0.9, provider_id: 0.6},
        default_weight=0.0,
        allowed_authorities={"compliance": (compliance_id,), "supply_chain": (security_id,)},
        min_signatures={"compliance": 1, "auth_permissions": 1, "supply_chain": 1},
        min_confidence={"compliance": 0.85, "auth_permissions": 0.8, "supply_chain": 0.8},
        required_sections=("identity", "baseline_model", "auth_permissions", "compliance", "supply_chain", "verification"),
    )


def role_overlay() -> RoleOverlay:
    geo = ("us", "eu")
    return RoleOverlay(
        assigning_org=ORG,
        classification_updates={"stakeholder_context": "enterprise", "deployment_scope": "internal"},
        permission_grants=(
            GrantRequest(("read",), "finance/databases/approved/**", 86400, IT_ADMIN,
                         ConstraintSet(geographic=geo), "designated financial databases", baseline=True),
            GrantRequest(("write",), "reporting/templates/drafts/*", 86400, IT_ADMIN,
                         justification="draft reporting templates", baseline=True),
            GrantRequest(("execute",), "tools/approved/*", 86400, IT_ADMIN,
                         justification="approved analytical tools", baseline=True),
            GrantRequest(("read",), "finance/historical/**", 90 * 86400, IT_ADMIN,
                         ConstraintSet(geographic=geo), "initial quarter: historical data for baseline analysis"),
        ),
        scope_of_work=ScopeOfWork(
            included_tasks=("quarterly regulatory reporting",),
            excluded_tasks=("real-time trading decisions", "customer data access"),
        ),
        constitution=(
            "escalate any ambiguity in regulatory interpretation to a human supervisor",
            "never submit a filing without recorded human review",
        ),
    )


def deadline_escalation() -> GrantRequest:
    return GrantRequest(
        ("write",),
        "reporting/official/*",
        5 * 86400,
        COMPLIANCE_OFFICER,
        ConstraintSet(time_window=TimeWindow(8, 18, "America/New_York"), human_review_required=True),
        "Q1 filing deadline: write access to official reporting templates",
    )


def _local(day: datetime, hour: int) -> datetime:
    local = day.astimezone(NEW_YORK).replace(hour=hour, minute=0, second=0)
    return local.astimezone(timezone.utc)


class StageFailed(Exception):
    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"{stage}: {message}")


def run_demo(
    tamper_compliance: bool = False,
    frozen_clock: bool = False,
    out: Callable[[str], None] = print,
) -> int:
    """Run the scenario; returns 0 iff every stage's assertions hold."""
    stage = "setup"

    def say(line: str = "") -> None:
        out(f"[{stage}] {line}" if line else "")

    def expect(cond: bool, message: str) -> None:
        if not cond:
            raise StageFailed(stage, message)
        say(f"ok: {message}")

    try:
        (pkey, prec), (ckey, crec), (skey, srec) = authorities()
        for rec in (prec, crec, srec):
            say(f"authority {rec.authority_id} {rec.algorithm:<11} {rec.display_name}")

        stage = "publish"
        doc = finance_agent_doc()
        expect(validate_document(doc).ok, "provider facts validate")
        sigs = [
            sign_sections(pkey, doc, {"identity", "baseline_model", "capabilities", "verification"}, 1.0, T0),
            sign_sections(ckey, doc, {"compliance"}, 0.92, T0),
            sign_sections(skey, doc, {"auth_permissions", "supply_chain"}, 0.95, T0),
        ]
        if tamper_compliance:
            doc = replace(doc, compliance=replace(doc.compliance, eu_ai_act=EuAiAct(risk_level="minimal")))
            say("compliance section altered after signing (tamper run)")
        provider_reg = Registry(authorities=[prec, crec, srec])
        ack = provider_reg.publish(doc, sigs, now=T0)
        expect(ack.head_seq == 0, f"published {AGENT_ID} head={ack.head_seq} with {len(sigs)} signatures")

        stage = "trust"
        upstream = PeerUpstream(provider_reg)
        enterprise_reg = Registry(upstream=upstream)
        policy = enterprise_policy(prec.authority_id, crec.authority_id, srec.authority_id)
        fetched = enterprise_reg.fetch(AGENT_ID, max_staleness=3600, policy=policy, now=T0 + timedelta(hours=1))
        verdict = fetched.verdict
        for line in explain_verdict(verdict).lines:
            say(line)
        signers = {a.authority_id for sv in verdict.per_section.values() for a in sv.qualifying_signatures}
        expect(verdict.overall == "trusted", f"overall verdict {verdict.overall}")
        expect(len(signers) >= 3, f"{len(signers)} independent authorities contributed qualifying signatures")
        upstream.partitioned = True
        offline = enterprise_reg.fetch(AGENT_ID, 3600, policy, now=T0 + timedelta(hours=1, minutes=10))
        expect(
            offline.provenance == "cache" and offline.verdict.overall == verdict.overall,
            f"partitioned fetch served from cache (age {offline.cache_age}s) with the same verdict",
        )
        upstream.partitioned = False
        base = fetched.doc

        stage = "overlay"
        onboard_at = T0 + timedelta(hours=2)
        assigned = apply_overlay(base, role_overlay(), onboard_at)
        for name in ("baseline_model", "supply_chain"):
            expect(canonicalize(getattr(assigned, name)) == canonicalize(getattr(base, name)), f"{name} untouched")
        expect(assigned.verification.signatures == base.verification.signatures, "existing signatures retained")
        cls = assigned.classification
        expect(
            (cls.stakeholder_context, cls.deployment_scope) == ("enterprise", "internal"),
            "classification now stakeholder_context=enterprise, deployment_scope=internal",
        )
        expect(f"org.{ORG}" in assigned.extensions.custom_facts, f"scope of work and constitution under org.{ORG}")
        state = assigned.auth_permissions.permission_state
        expect(sum(g.status == "pending" for g in state.grants) == 4, "4 role grants pending activation")

        stage = "grant"
        state = replace(state, escalation_policy=EscalationPolicy((COMPLIANCE_OFFICER,), 14 * 86400))
        for g in [g for g in state.grants if g.status == "pending"]:
            state = grant(state, g.grant, IT_ADMIN, onboard_at)
        expect(all(g.status == "active" for g in state.grants), f"{len(state.grants)} grants active")
        work_day = onboard_at + 3 * DAY
        ctx = AccessContext(now=_local(work_day, 10), jurisdiction="us")
        d, state = check(state, "read", "finance/historical/2024/q3.csv", ctx)
        expect(d.allowed, f"read finance/historical/2024/q3.csv -> {d}")
        d, state = check(state, "write", "reporting/official/q1-filing", ctx)
        expect(not d.allowed, f"write reporting/official/q1-filing before deadline -> {d}")

        stage = "escalate"
        pre_deadline = T0 + 85 * DAY
        state = escalate(state, deadline_escalation(), COMPLIANCE_OFFICER, pre_deadline)
        say(f"escalation granted at {format_ts(pre_deadline)} until {format_ts(state.grants[-1].expires_at)}")
        in_hours = AccessContext(now=_local(pre_deadline + DAY, 10), jurisdiction="us", human_reviewer_present=True)
        d, state = check(state, "write", "reporting/official/q1-filing", in_hours)
        expect(d.allowed, f"write official filing 10:00 New York with reviewer -> {d}")
        night = AccessContext(now=_local(pre_deadline + DAY, 2), jurisdiction="us", human_reviewer_present=True)
        d, state = check(state, "write", "reporting/official/q1-filing", night)
        expect(not d.allowed and "time window" in d.reason, f"write official filing 02:00 New York -> {d}")
        unreviewed = replace(in_hours, human_reviewer_present=False)
        d, state = check(state, "write", "reporting/official/q1-filing", unreviewed)
        expect(not d.allowed and "human review" in d.reason, f"write official filing without reviewer -> {d}")

        stage = "revert"
        after_submission = pre_deadline + 7 * DAY if not frozen_clock else pre_deadline + DAY
        state = revert_expired(state, after_submission)
        active = state.active(after_submission)
        if frozen_clock:
            elevated = [g for g in active if not g.grant.baseline]
            expect(any(g.grant.resource_pattern == "reporting/official/*" for g in elevated), "elevated grant still active")
            say("reversion not yet due: clock has not passed the submission deadline")
        else:
            expect(all(g.grant.baseline for g in active) and len(active) == 3, "active grants are the 3 baseline grants only")
            after_ctx = AccessContext(now=_local(after_submission, 10), jurisdiction="us", human_reviewer_present=True)
            d, state = check(state, "write", "reporting/official/q2-filing", after_ctx)
            expect(not d.allowed, f"write official filing after submission -> {d}")
        for g in state.grants:
            say(f"grant {','.join(g.grant.actions):<7} {g.grant.resource_pattern:<32} {g.status}{' (baseline)' if g.grant.baseline else ''}")

        stage = "audit"
        for e in state.audit:
            say(f"#{e.seq:<2} {format_ts(e.at)} {e.actor:<28} {e.action:<12} {e.entry_hash.hex[:16]}")
        expect(verify_audit_chain(state.audit), f"audit chain of {len(state.audit)} entries verifies")

        stage = "update"
        sub_id = provider_reg.subscribe(AGENT_ID, "https://acme-bank.example/hooks/agentfacts")
        head = provider_reg.head(AGENT_ID)
        nxt = replace(
            head,
            identity=replace(head.identity, version_seq=1, last_updated=T0 + 7 * DAY),
            performance=replace(head.performance, response_time_p50=810, user_satisfaction=0.9),
        )
        link = append_version(head, nxt, pkey)
        provider_reg.publish(nxt, [], link, now=T0 + 7 * DAY)
        delivered = []
        report = provider_reg.deliver_pending(lambda url, body: delivered.append(url) or 204)
        expect(report.delivered == 1 and delivered, f"subscriber {sub_id} notified of revision {link.from_seq}->{link.to_seq}")
        fresh = freshness(nxt, T0 + 7 * DAY + timedelta(minutes=30), StalenessPolicy())
        expect(fresh.document_status == "fresh", f"revision 1 freshness: {fresh.document_status}")
    except StageFailed as exc:
        out(f"[{exc.stage}] FAILED: {exc}")
        return 1
    out("[done] all stages passed")
    return 0
