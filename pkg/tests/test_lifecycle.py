import random
from dataclasses import replace
from datetime import timedelta

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentfacts.errors import AgentIdMismatch, BadUrl, ClockRegression, SeqGap
from agentfacts.lifecycle import (
    StalenessPolicy,
    UpdateNotification,
    append_version,
    chain_doc_path,
    doc_digest,
    freshness,
    load_chain,
    plan_refresh,
    save_chain,
    section_expiry,
    verify_chain,
)
from agentfacts.signing import generate_authority

from conftest import T0
from oracles import CHAIN_MUTATIONS, build_chain, chain_oracle, min_length, mutate_chain, stdlib_digest

HOUR = 3600
DAY = 86400


@pytest.fixture(scope="module")
def provider():
    return generate_authority("ed25519", "Provider", seed=b"lifecycle:provider")


def _next(doc, seconds=60, **identity):
    ident = replace(
        doc.identity,
        version_seq=doc.identity.version_seq + 1,
        last_updated=doc.identity.last_updated + timedelta(seconds=seconds),
        **identity,
    )
    return replace(doc, identity=ident)


class TestFreshness:
    @pytest.mark.parametrize("offset,expected", [
        (HOUR - 1, "fresh"),
        (HOUR, "fresh"),
        (HOUR + 1, "expired"),
    ])
    def test_performance_boundary_without_grace(self, doc, offset, expected):
        report = freshness(doc, T0 + timedelta(seconds=offset))
        assert report.per_section["performance"] == expected
        assert report.per_section["identity"] == "fresh"

    @pytest.mark.parametrize("offset,expected", [
        (HOUR, "fresh"),
        (HOUR + 1, "stale"),
        (HOUR + 600, "stale"),
        (HOUR + 601, "expired"),
    ])
    def test_performance_boundary_with_grace(self, doc, offset, expected):
        policy = StalenessPolicy({"performance": 600})
        assert freshness(doc, T0 + timedelta(seconds=offset), policy).per_section["performance"] == expected

    def test_short_ttl_non_critical_degrades(self, doc):
        ver = replace(doc.verification, verification_ttl={"performance": 60})
        report = freshness(replace(doc, verification=ver), T0 + timedelta(seconds=120))
        assert report.per_section["performance"] == "expired"
        assert report.document_status == "degraded"

    def test_identity_expiry_expires_document(self, doc):
        report = freshness(doc, T0 + timedelta(days=30, seconds=1))
        assert report.per_section["identity"] == "expired"
        assert report.document_status == "expired"

    def test_fresh_document(self, doc):
        report = freshness(doc, T0)
        assert report.document_status == "fresh"
        assert report.next_expiry == T0 + timedelta(seconds=HOUR)

    def test_section_ttl_overrides_document_ttl(self, doc):
        assert section_expiry(doc, "compliance") == T0 + timedelta(days=90)
        assert section_expiry(doc, "capabilities") == T0 + timedelta(days=30)

    def test_negative_grace_rejected(self):
        with pytest.raises(ValueError):
            StalenessPolicy({"performance": -1})

    @settings(max_examples=200)
    @given(st.integers(0, 40 * DAY), st.integers(0, 40 * DAY))
    def test_monotone_in_time(self, base_doc, a, b):
        order = {"fresh": 0, "stale": 1, "expired": 2}
        ra = freshness(base_doc, T0 + timedelta(seconds=min(a, b)), StalenessPolicy({"performance": 600}))
        rb = freshness(base_doc, T0 + timedelta(seconds=max(a, b)), StalenessPolicy({"performance": 600}))
        for s in ra.per_section:
            assert order[ra.per_section[s]] <= order[rb.per_section[s]]


class TestRefreshPlan:
    def test_soonest_first(self, doc):
        plan = plan_refresh(doc, T0)
        assert plan.entries[0] == ("performance", T0 + timedelta(seconds=HOUR))
        assert plan.entries[-1] == ("compliance", T0 + timedelta(days=90))
        times = [t for _s, t in plan.entries]
        assert times == sorted(times)
        assert not plan.expired

    def test_expired_sections_dropped(self, doc):
        plan = plan_refresh(doc, T0 + timedelta(days=31))
        assert [s for s, _t in plan.entries] == ["compliance"]

    def test_all_expired(self, doc):
        plan = plan_refresh(doc, T0 + timedelta(days=365))
        assert plan.expired and plan.entries == ()


class TestAppendVersion:
    def test_link_fields(self, doc, provider):
        key, rec = provider
        nxt = _next(doc)
        link = append_version(doc, nxt, key)
        assert (link.from_seq, link.to_seq) == (0, 1)
        assert link.prev_digest == doc_digest(doc)
        assert str(link.new_digest) == stdlib_digest(nxt)
        assert link.provider_id == rec.authority_id
        assert verify_chain([doc, nxt], [link], rec).accepted

    def test_seq_gap(self, doc, provider):
        with pytest.raises(SeqGap):
            append_version(doc, replace(_next(doc), identity=replace(_next(doc).identity, version_seq=2)), provider[0])

    def test_agent_id_mismatch(self, doc, provider):
        with pytest.raises(AgentIdMismatch):
            append_version(doc, _next(doc, agent_id="did:web:other.example"), provider[0])

    def test_clock_regression(self, doc, provider):
        with pytest.raises(ClockRegression):
            append_version(doc, _next(doc, seconds=-1), provider[0])

    def test_heartbeat_only_bumps_timestamp(self, doc, provider):
        key, rec = provider
        beat = _next(doc, seconds=1800)
        link = append_version(doc, beat, key)
        assert link.prev_digest != link.new_digest
        assert verify_chain([doc, beat], [link], rec).accepted


class TestVerifyChain:
    def test_tampered_revision(self, doc, provider):
        key, rec = provider
        docs, links = build_chain(random.Random(1), doc, key, 3)
        docs[1] = replace(docs[1], identity=replace(docs[1].identity, name="Impostor"))
        report = verify_chain(docs, links, rec)
        assert not report.accepted
        assert report.first_failure == 0
        assert {i for i, _r in report.failures} == {0, 1}

    def test_swapped_revisions(self, doc, provider):
        key, rec = provider
        docs, links = build_chain(random.Random(2), doc, key, 3)
        docs[1], docs[2] = docs[2], docs[1]
        assert verify_chain(docs, links, rec).first_failure == 0

    def test_missing_revision(self, doc, provider):
        key, rec = provider
        docs, links = build_chain(random.Random(3), doc, key, 4)
        report = verify_chain(docs[:2] + docs[3:], links[:1] + links[2:], rec)
        assert not report.accepted and report.first_failure == 1
        assert any("discontinuity" in r for _i, r in report.failures)

    def test_wrong_provider(self, doc, provider):
        key, _rec = provider
        _k2, other = generate_authority("ed25519", seed=b"lifecycle:other")
        docs, links = build_chain(random.Random(4), doc, key, 2)
        assert not verify_chain(docs, links, other).accepted

    def test_link_count_mismatch(self, doc, provider):
        key, rec = provider
        docs, links = build_chain(random.Random(5), doc, key, 3)
        assert not verify_chain(docs, links[:1], rec).accepted

    def test_single_revision_is_a_valid_chain(self, doc, provider):
        assert verify_chain([doc], [], provider[1]).accepted

    @settings(max_examples=100)
    @given(st.integers(0, 2**32), st.sampled_from(CHAIN_MUTATIONS), st.integers(2, 6))
    def test_matches_oracle(self, base_doc, provider, seed, kind, length):
        key, rec = provider
        rng = random.Random(seed)
        length = max(length, min_length(kind))
        docs, links = build_chain(rng, base_doc, key, length)
        docs, links = mutate_chain(rng, docs, links, kind)
        report = verify_chain(docs, links, rec)
        expected = chain_oracle(docs, links, rec)
        assert {i for i, _r in report.failures} == expected
        assert report.accepted == (kind == "none")


class TestPersistence:
    def test_save_and_load(self, doc, provider, tmp_path):
        key, rec = provider
        docs, links = build_chain(random.Random(6), doc, key, 3)
        save_chain(tmp_path, docs, links)
        assert chain_doc_path(tmp_path, 2).exists()
        again_docs, again_links = load_chain(tmp_path)
        assert again_docs == docs and again_links == links
        assert verify_chain(again_docs, again_links, rec).accepted


class TestNotification:
    def test_defaults(self, doc, provider):
        link = append_version(doc, _next(doc), provider[0])
        note = UpdateNotification(link, "https://hooks.example.org/af")
        assert note.delivery_state == "pending" and note.attempts == 0
        assert UpdateNotification.from_data(note.to_data()) == note

    @pytest.mark.parametrize("url", ["", "ftp://x.example/a", "not a url", "https://"])
    def test_bad_url(self, doc, provider, url):
        link = append_version(doc, _next(doc), provider[0])
        with pytest.raises(BadUrl):
            UpdateNotification(link, url)
