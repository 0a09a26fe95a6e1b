import json
from dataclasses import replace
from datetime import timedelta

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentfacts.canon import SECTION_NAMES, canonicalize
from agentfacts.errors import DocumentSyntaxError, OverlayViolation, TypeMismatch, UnknownField
from agentfacts.model import (
    VIEWS,
    AgentFactsDoc,
    Compliance,
    RoleOverlay,
    ScopeOfWork,
    apply_overlay,
    classify_agent_id,
    load_field_manifest,
    parse_document,
    resolve_schema_path,
    select_view,
    serialize_document,
    validate_document,
)
from agentfacts.permissions import GrantRequest

from conftest import ROOT, T0
from strategies import documents

MINIMAL = {
    "identity": {
        "agent_id": "550e8400-e29b-41d4-a716-446655440000",
        "name": "Minimal",
        "version": "1.0",
        "created": "2025-01-01T00:00:00Z",
        "last_updated": "2025-01-01T00:00:00Z",
        "ttl": 3600,
    },
    "baseline_model": {"foundation_model": "gpt-4", "model_version": "0613", "model_provider": "OpenAI"},
}


def _parse(data) -> AgentFactsDoc:
    return parse_document(json.dumps(data))


def _error_paths(doc):
    return [f.path for f in validate_document(doc).errors]


class TestParse:
    def test_minimal_document_has_eight_absent_sections(self):
        doc = _parse(MINIMAL)
        assert doc.present_sections() == ["identity", "baseline_model"]
        assert sum(getattr(doc, s) is None for s in SECTION_NAMES) == 8
        assert validate_document(doc).ok

    def test_enum_field(self):
        data = dict(MINIMAL, classification={
            "agent_type": "assistant", "operational_level": "supervised", "stakeholder_context": "enterprise",
            "deployment_scope": "internal", "interaction_mode": "batch",
        })
        assert _parse(data).classification.agent_type == "assistant"

    def test_unknown_top_level_key(self):
        with pytest.raises(UnknownField) as exc:
            _parse(dict(MINIMAL, favorite_color="blue"))
        assert exc.value.path == "/favorite_color"

    def test_unknown_nested_key_reports_path(self):
        data = json.loads(json.dumps(MINIMAL))
        data["identity"]["nickname"] = "x"
        with pytest.raises(UnknownField) as exc:
            _parse(data)
        assert exc.value.path == "/identity/nickname"

    def test_custom_facts_preserved_verbatim(self):
        facts = {"acme.notes": {"nested": [1, "two", None, True]}, "x.y": "z"}
        doc = _parse(dict(MINIMAL, extensions={"custom_facts": facts}))
        assert doc.extensions.custom_facts == facts
        assert json.loads(serialize_document(doc))["extensions"]["custom_facts"] == facts

    def test_type_mismatch_has_path(self):
        data = json.loads(json.dumps(MINIMAL))
        data["identity"]["ttl"] = "forever"
        with pytest.raises(TypeMismatch) as exc:
            _parse(data)
        assert exc.value.path == "/identity/ttl"

    def test_enum_outside_vocabulary_is_a_finding(self):
        doc = _parse(dict(MINIMAL, compliance={"eu_ai_act": {"risk_level": "spicy"}}))
        assert "/compliance/eu_ai_act/risk_level" in _error_paths(doc)

    @pytest.mark.parametrize("text", ["{", "[1,", '{"identity": NaN}', '{"a":1,"a":2}', ""])
    def test_syntax_errors(self, text):
        with pytest.raises(DocumentSyntaxError):
            parse_document(text)

    def test_timestamps_must_be_utc_seconds(self):
        data = json.loads(json.dumps(MINIMAL))
        data["identity"]["created"] = "2025-01-01T00:00:00+02:00"
        with pytest.raises(TypeMismatch):
            _parse(data)

    def test_fixture_round_trips_byte_exactly(self):
        text = (ROOT / "fixtures" / "finance-agent.af.json").read_text("utf-8")
        doc = parse_document(text)
        assert serialize_document(doc) == text
        assert validate_document(doc).ok


class TestValidate:
    def test_ttl_zero(self, doc):
        bad = replace(doc, identity=replace(doc.identity, ttl=0))
        assert "/identity/ttl" in _error_paths(bad)

    def test_p50_above_p95(self, doc):
        bad = replace(doc, performance=replace(doc.performance, response_time_p50=900, response_time_p95=150))
        errors = validate_document(bad).errors
        assert any("p50 <= p95 violated" in f.message for f in errors)

    def test_limited_risk_is_clean(self, doc):
        assert doc.compliance.eu_ai_act.risk_level == "limited"
        assert not [f for f in validate_document(doc).findings if f.path.startswith("/compliance")]

    def test_missing_baseline(self, doc):
        assert "/baseline_model" in _error_paths(replace(doc, baseline_model=None))

    def test_created_after_last_updated(self, doc):
        bad = replace(doc, identity=replace(doc.identity, created=doc.identity.last_updated + timedelta(seconds=1)))
        assert "/identity/last_updated" in _error_paths(bad)

    def test_primary_scheme_must_be_supported(self, doc):
        bad = replace(doc, auth_permissions=replace(doc.auth_permissions, primary_scheme="saml"))
        assert "/auth_permissions/primary_scheme" in _error_paths(bad)

    def test_fraction_out_of_range(self, doc):
        bad = replace(doc, performance=replace(doc.performance, error_rate=1.5))
        assert "/performance/error_rate" in _error_paths(bad)

    def test_custom_fact_keys_namespaced(self, doc):
        bad = replace(doc, extensions=replace(doc.extensions, custom_facts={"plain": 1}))
        assert "/extensions/custom_facts/plain" in _error_paths(bad)

    def test_non_integer_custom_fact_is_not_canonicalizable(self, doc):
        bad = replace(doc, extensions=replace(doc.extensions, custom_facts={"a.b": 0.5}))
        assert "/extensions" in _error_paths(bad)

    def test_verification_ttl_positive(self, doc):
        ver = replace(doc.verification, verification_ttl={"performance": 0})
        assert "/verification/verification_ttl/performance" in _error_paths(replace(doc, verification=ver))

    def test_bad_agent_id(self, doc):
        bad = replace(doc, identity=replace(doc.identity, agent_id="not an id"))
        assert "/identity/agent_id" in _error_paths(bad)

    def test_warnings_do_not_fail(self, doc):
        caps = replace(doc.capabilities, language_support=("English",))
        report = validate_document(replace(doc, capabilities=caps))
        assert report.ok and any(f.severity == "warning" for f in report.findings)

    @settings(max_examples=50)
    @given(documents())
    def test_pure(self, d):
        assert validate_document(d) == validate_document(d)


@pytest.mark.parametrize(
    "agent_id,kind",
    [
        ("550e8400-e29b-41d4-a716-446655440000", "uuid"),
        ("did:web:example.com:agent", "did"),
        ("https://agents.example.com/a1", "uri"),
        ("urn:agent:7", "uri"),
        ("hello world", None),
        ("", None),
    ],
)
def test_classify_agent_id(agent_id, kind):
    assert classify_agent_id(agent_id) == kind


class TestOverlay:
    def test_enterprise_internal(self, doc):
        ov = RoleOverlay("acme", {"stakeholder_context": "enterprise", "deployment_scope": "internal"})
        out = apply_overlay(doc, ov, T0 + timedelta(hours=1))
        assert out.classification.stakeholder_context == "enterprise"
        assert out.classification.deployment_scope == "internal"
        for name in SECTION_NAMES:
            if name not in ("identity", "classification"):
                assert canonicalize(out.section(name)) == canonicalize(doc.section(name)), name
        assert out.classification.agent_type == doc.classification.agent_type

    def test_empty_overlay(self, doc):
        at = T0 + timedelta(hours=3)
        out = apply_overlay(doc, RoleOverlay("acme"), at)
        assert out.identity.version_seq == doc.identity.version_seq + 1
        assert out.identity.last_updated == at
        restored = replace(out, identity=doc.identity)
        assert canonicalize(restored) == canonicalize(doc)

    def test_protected_section_rejected(self):
        with pytest.raises(OverlayViolation):
            RoleOverlay.from_data({"assigning_org": "acme", "baseline_model": {"foundation_model": "x"}})
        with pytest.raises(OverlayViolation):
            apply_overlay(
                parse_document(json.dumps(MINIMAL)),
                RoleOverlay("acme", {"baseline_model.foundation_model": "x"}),
                T0,
            )

    def test_unknown_classification_value_rejected(self, doc):
        with pytest.raises(OverlayViolation):
            apply_overlay(doc, RoleOverlay("acme", {"agent_type": "overlord"}), T0)

    def test_classification_update_needs_a_classification(self):
        with pytest.raises(OverlayViolation):
            apply_overlay(_parse(MINIMAL), RoleOverlay("acme", {"deployment_scope": "internal"}), T0)

    def test_grants_pending_and_role_data_namespaced(self, doc):
        req = GrantRequest(("read",), "finance/historical/**", 90 * 86400, "acme:it")
        ov = RoleOverlay("acme", permission_grants=(req,), scope_of_work=ScopeOfWork(("reporting",), ("trading",)),
                         constitution=("ask a human",))
        out = apply_overlay(doc, ov, T0)
        state = out.auth_permissions.permission_state
        assert [g.status for g in state.grants] == ["pending"]
        facts = out.extensions.custom_facts["org.acme"]
        assert facts["constitution"] == ["ask a human"]
        assert facts["scope_of_work"]["excluded_tasks"] == ["trading"]
        assert validate_document(out).ok

    @settings(max_examples=50)
    @given(documents(all_sections=True), st.sampled_from(["enterprise", "consumer", "government"]), st.sampled_from(["internal", "external", "hybrid"]))
    def test_never_touches_protected_content(self, d, ctx, scope):
        out = apply_overlay(d, RoleOverlay("org", {"stakeholder_context": ctx, "deployment_scope": scope}), T0)
        assert out.identity.agent_id == d.identity.agent_id
        for name in ("baseline_model", "supply_chain"):
            assert canonicalize(out.section(name) or {}) == canonicalize(d.section(name) or {})
        before = d.verification.signatures if d.verification else ()
        after = out.verification.signatures if out.verification else ()
        assert after == before


class TestViews:
    def test_enterprise_is_identity(self, doc):
        assert select_view(doc, "enterprise") == doc

    def test_consumer(self, doc):
        v = select_view(doc, "consumer")
        assert v.present_sections() == ["identity", "baseline_model", "classification", "compliance", "performance"]
        assert v.compliance == Compliance(safety_classification="medium")

    def test_government(self, doc):
        assert select_view(doc, "government").present_sections() == ["identity", "compliance", "verification"]

    @settings(max_examples=50)
    @given(documents(), st.sampled_from(sorted(VIEWS)))
    def test_idempotent(self, d, audience):
        once = select_view(d, audience)
        assert select_view(once, audience) == once


class TestManifest:
    def test_every_field_resolves_to_one_path(self):
        manifest = load_field_manifest()
        assert list(manifest) == list(SECTION_NAMES)
        seen = {}
        for section, fields in manifest.items():
            for name, path in fields.items():
                assert path.startswith(f"/{section}/"), (name, path)
                resolve_schema_path(path)
                assert path not in seen, f"{name} and {seen.get(path)} share {path}"
                seen[path] = name

    def test_unknown_path_raises(self):
        with pytest.raises(KeyError):
            resolve_schema_path("/identity/shoe_size")


@settings(max_examples=200)
@given(documents())
def test_round_trip(d):
    again = parse_document(serialize_document(d))
    assert again == d
    assert serialize_document(again) == serialize_document(d)
