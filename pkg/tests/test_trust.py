import random
from dataclasses import replace
from datetime import timedelta

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentfacts.errors import InvalidPolicy, UnknownSectionInPolicy
from agentfacts.signing import authority_map, generate_authority, revoke, sign_sections
from agentfacts.trust import TrustPolicy, check_policy, evaluate_trust, explain_verdict, overall_status

from conftest import T0
from oracles import RANK, add_qualifying_signature, agrees, random_trust_instance, trust_oracle


@pytest.fixture(scope="module")
def pair():
    a = generate_authority("ed25519", "auditor", seed=b"trust:a")
    b = generate_authority("ed25519", "vendor", seed=b"trust:b")
    return a, b


def _signed(doc, pair, conf_a=0.9, conf_b=0.8, section="compliance", at=T0):
    (ka, _), (kb, _) = pair
    from agentfacts.model import add_signatures

    return add_signatures(doc, [sign_sections(ka, doc, {section}, conf_a, at), sign_sections(kb, doc, {section}, conf_b, at)])


def _policy(pair, wa=1.0, wb=0.5, **kw):
    (_, ra), (_, rb) = pair
    base = dict(
        authority_weights={ra.authority_id: wa, rb.authority_id: wb},
        required_sections=("compliance",),
        min_signatures={"compliance": 2},
        min_confidence={"compliance": 0.85},
    )
    base.update(kw)
    return TrustPolicy(**base)


def _auths(pair):
    return authority_map(r for _k, r in pair)


class TestWorkedExamples:
    def test_two_signatures_max_score(self, doc, pair):
        signed = _signed(doc, pair)
        v = evaluate_trust(signed, _policy(pair), _auths(pair), [], T0)
        sv = v.per_section["compliance"]
        assert sv.status == "trusted" and sv.score == 0.9 and sv.score_units == 9 * 10**11
        assert v.overall == "trusted"
        report = explain_verdict(v)
        assert any("max(1.0×0.9, 0.5×0.8) = 0.9" in line for line in report.lines)
        assert report.disqualifications == 0

    def test_different_weights_same_qualification(self, doc, pair):
        signed = _signed(doc, pair)
        a = evaluate_trust(signed, _policy(pair), _auths(pair), [], T0)
        b = evaluate_trust(signed, _policy(pair, wa=0.7, wb=1.0, min_confidence={"compliance": 0.5}), _auths(pair), [], T0)
        qa = [s.index for s in a.per_section["compliance"].qualifying_signatures]
        qb = [s.index for s in b.per_section["compliance"].qualifying_signatures]
        assert qa == qb == [0, 1]
        assert b.per_section["compliance"].score == 0.8
        assert a.per_section["compliance"].score != b.per_section["compliance"].score

    def test_threshold_not_met(self, doc, pair):
        signed = _signed(doc, pair, conf_a=0.8)
        v = evaluate_trust(signed, _policy(pair), _auths(pair), [], T0)
        assert v.per_section["compliance"].status == "insufficient"
        assert v.overall == "untrusted"
        assert any("below threshold: score 0.8 < 0.85" in line for line in explain_verdict(v).lines)

    def test_zero_signatures(self, doc, pair):
        v = evaluate_trust(doc, _policy(pair), _auths(pair), [], T0)
        assert v.per_section["compliance"].status == "insufficient"
        assert v.per_section["compliance"].score == 0
        assert v.overall == "untrusted"
        assert any("0 of 2" in line for line in explain_verdict(v).lines)

    def test_revoked_signature_fails_section(self, doc, pair):
        signed = _signed(doc, pair)
        (ka, _), _ = pair
        entry = revoke(ka, signed.verification.signatures[0], "key rotated", T0)
        v = evaluate_trust(signed, _policy(pair), _auths(pair), [entry], T0 + timedelta(seconds=1))
        assert v.per_section["compliance"].status == "failed"
        report = explain_verdict(v)
        assert report.disqualifications == 1
        assert any("disqualified: revoked" in line for line in report.lines)

    def test_too_old_gives_stale(self, doc, pair):
        signed = _signed(doc, pair, at=T0 - timedelta(days=10))
        policy = _policy(pair, max_signature_age={"compliance": 86400})
        v = evaluate_trust(signed, policy, _auths(pair), [], T0)
        assert v.per_section["compliance"].status == "stale"
        assert v.overall == "untrusted"  # compliance is critical by default

    def test_stale_non_critical_is_degraded(self, doc, pair):
        signed = _signed(doc, pair, at=T0 - timedelta(days=10))
        policy = _policy(pair, max_signature_age={"compliance": 86400}, critical_sections=())
        assert evaluate_trust(signed, policy, _auths(pair), [], T0).overall == "degraded"

    def test_not_allowed_authority(self, doc, pair):
        (_, ra), _ = pair
        signed = _signed(doc, pair)
        policy = _policy(pair, allowed_authorities={"compliance": (ra.authority_id,)}, min_signatures={})
        sv = evaluate_trust(signed, policy, _auths(pair), [], T0).per_section["compliance"]
        assert sv.status == "trusted"
        assert sv.assessments[1].reasons == ("not_allowed",)

    def test_unknown_authority_is_insufficient(self, doc, pair):
        signed = _signed(doc, pair)
        (_, ra), _ = pair
        v = evaluate_trust(signed, _policy(pair), {ra.authority_id: ra}, [], T0)
        assert v.per_section["compliance"].status == "insufficient"

    def test_out_of_scope_listed(self, doc, pair):
        signed = _signed(doc, pair, section="performance")
        v = evaluate_trust(signed, _policy(pair), _auths(pair), [], T0)
        assert all(not a.in_scope for a in v.per_section["compliance"].assessments)
        assert sum("out of scope" in line for line in explain_verdict(v).lines) == 2

    def test_verdict_serializes(self, doc, pair):
        v = evaluate_trust(_signed(doc, pair), _policy(pair), _auths(pair), [], T0)
        data = v.to_data()
        assert data["per_section"]["compliance"]["qualifying_signatures"] == [0, 1]


class TestPolicyChecks:
    def test_unknown_section(self):
        with pytest.raises(UnknownSectionInPolicy):
            check_policy(TrustPolicy(required_sections=("identity", "horoscope")))

    def test_critical_outside_required(self):
        with pytest.raises(InvalidPolicy):
            check_policy(TrustPolicy(required_sections=("identity",), critical_sections=("compliance",)))

    @pytest.mark.parametrize("kw", [
        {"authority_weights": {"auth:x": 1.5}},
        {"default_weight": -0.1},
        {"min_confidence": {"identity": 2.0}},
        {"min_signatures": {"identity": 0}},
        {"max_signature_age": {"identity": -1}},
    ])
    def test_out_of_range(self, kw):
        with pytest.raises(InvalidPolicy):
            check_policy(TrustPolicy(**kw))

    def test_default_critical_is_intersection(self):
        assert TrustPolicy(required_sections=("identity", "performance")).critical() == ("identity",)

    def test_explicit_spells_out_defaults(self):
        data = TrustPolicy(required_sections=("identity",)).explicit()
        assert data["min_signatures"] == {"identity": 1}
        assert data["min_confidence"] == {"identity": 0.0}
        assert data["critical_sections"] == ["identity"]


@pytest.mark.parametrize("states,critical,expected", [
    ({"identity": "trusted", "performance": "trusted"}, ["identity"], "trusted"),
    ({"identity": "trusted", "performance": "stale"}, ["identity"], "degraded"),
    ({"identity": "trusted", "performance": "insufficient"}, ["identity"], "degraded"),
    ({"identity": "trusted", "performance": "failed"}, ["identity"], "untrusted"),
    ({"identity": "stale", "performance": "trusted"}, ["identity"], "untrusted"),
    ({}, [], "trusted"),
])
def test_overall_status(states, critical, expected):
    assert overall_status(states, critical) == expected


class TestAgainstOracle:
    @settings(max_examples=150)
    @given(st.integers(0, 2**32))
    def test_matches_brute_force(self, base_doc, seed):
        inst = random_trust_instance(random.Random(seed), base_doc)
        verdict = evaluate_trust(inst.doc, inst.policy, inst.authorities, inst.revocations, inst.now)
        assert agrees(verdict, trust_oracle(inst))

    @settings(max_examples=100)
    @given(st.integers(0, 2**32))
    def test_more_evidence_never_hurts(self, base_doc, seed):
        rng = random.Random(seed)
        inst = random_trust_instance(rng, base_doc)
        more = add_qualifying_signature(inst, rng)
        if more is None:
            return
        before = evaluate_trust(inst.doc, inst.policy, inst.authorities, inst.revocations, inst.now)
        after = evaluate_trust(more.doc, more.policy, more.authorities, more.revocations, more.now)
        assert RANK[after.overall] >= RANK[before.overall]
        for s, sv in before.per_section.items():
            assert after.per_section[s].score_units >= sv.score_units

    @settings(max_examples=100)
    @given(st.integers(0, 2**32), st.sampled_from(["confidence", "signatures"]))
    def test_stricter_thresholds_never_promote(self, base_doc, seed, knob):
        rng = random.Random(seed)
        inst = random_trust_instance(rng, base_doc)
        section = rng.choice(inst.policy.required_sections)
        if knob == "confidence":
            cur = inst.policy.min_confidence.get(section, 0.0)
            stricter = replace(inst.policy, min_confidence={**inst.policy.min_confidence, section: min(1.0, cur + rng.random())})
        else:
            cur = inst.policy.min_signatures.get(section, 1)
            stricter = replace(inst.policy, min_signatures={**inst.policy.min_signatures, section: cur + 1})
        before = evaluate_trust(inst.doc, inst.policy, inst.authorities, inst.revocations, inst.now)
        after = evaluate_trust(inst.doc, stricter, inst.authorities, inst.revocations, inst.now)
        assert RANK[after.overall] <= RANK[before.overall]
        for s, sv in after.per_section.items():
            if sv.status == "trusted":
                assert before.per_section[s].status == "trusted"
