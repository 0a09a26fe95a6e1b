import io
import json
import shutil

import pytest

from agentfacts import _serde
from agentfacts.cli import run
from agentfacts.permissions import GrantRequest

from conftest import ROOT

AT = "2025-01-06T15:00:00Z"
FIXTURE = ROOT / "fixtures" / "finance-agent.af.json"


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def machine(*argv):
    code, out, err = cli(*argv, "--format", "machine")
    return code, json.loads(out), err


@pytest.fixture
def ws(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("AGENTFACTS_KEYSTORE_PASS", "correct horse")
    monkeypatch.delenv("AGENTFACTS_POLICY", raising=False)
    shutil.copy(FIXTURE, tmp_path / "agent.af.json")
    return tmp_path


def keygen(name, seed):
    code, data, _ = machine("keygen", "--name", name, "--seed", seed, "--algorithm", "ed25519")
    assert code == 0
    return data["authority_id"]


def write_policy(path, auditor):
    path.write_text(_serde.dumps({
        "required_sections": ["identity", "compliance"],
        "authority_weights": {auditor: 1.0},
        "min_confidence": {"compliance": 0.9},
    }))


class TestExitCodes:
    def test_validate_ok(self, ws):
        code, out, _ = cli("validate", "agent.af.json")
        assert code == 0 and out.strip().endswith("valid")

    def test_validate_invalid(self, ws):
        data = json.loads((ws / "agent.af.json").read_text())
        data["identity"]["ttl"] = 0
        (ws / "bad.af.json").write_text(json.dumps(data))
        code, payload, _ = machine("validate", "bad.af.json")
        assert code == 1 and payload["ok"] is False

    def test_parse_error_is_failure(self, ws):
        (ws / "broken.af.json").write_text("{")
        assert cli("validate", "broken.af.json")[0] == 1

    def test_missing_file_is_usage(self, ws):
        assert cli("validate", "nope.af.json")[0] == 2

    def test_unknown_command_is_usage(self, ws):
        assert cli("frobnicate")[0] == 2

    def test_bad_timestamp_is_usage(self, ws):
        assert cli("freshness", "agent.af.json", "--at", "yesterday")[0] == 2

    def test_missing_passphrase_is_usage(self, ws, monkeypatch):
        monkeypatch.delenv("AGENTFACTS_KEYSTORE_PASS")
        assert cli("keygen", "--name", "x")[0] == 2

    def test_help(self, ws):
        assert cli("--help")[0] == 0


class TestDocumentCommands:
    def test_canon_digest_matches_machine_output(self, ws):
        _c, human, _ = cli("canon", "agent.af.json", "--digest")
        code, data, _ = machine("canon", "agent.af.json")
        assert code == 0 and human.strip() == data["digest"]
        assert data["canonical"].startswith('{"auth_permissions":')

    def test_view(self, ws):
        code, data, _ = machine("view", "agent.af.json", "--audience", "government")
        assert code == 0 and sorted(data) == ["compliance", "identity", "verification"]

    def test_freshness(self, ws):
        code, data, _ = machine("freshness", "agent.af.json", "--at", AT)
        assert code == 0 and data["document_status"] == "fresh"
        code, data, _ = machine("freshness", "agent.af.json", "--at", "2025-03-01T00:00:00Z")
        assert code == 1 and data["document_status"] == "expired"


class TestSignVerify:
    def test_sign_verify_trust_revoke(self, ws):
        auditor = keygen("Auditor", "cli:auditor")
        code, _o, _e = cli("sign", "agent.af.json", "--key", auditor, "--sections", "identity,compliance",
                           "--confidence", "0.95", "--at", AT)
        assert code == 0
        code, data, _ = machine("verify-sig", "agent.af.json", "--at", AT)
        assert code == 0 and [s["status"] for s in data["signatures"]] == ["valid"]

        write_policy(ws / "policy.json", auditor)
        code, data, _ = machine("verify", "--doc", "agent.af.json", "--policy", "policy.json", "--at", AT)
        assert code == 0 and data["overall"] == "trusted"

        assert cli("revoke", "--key", auditor, "--signature-of", "agent.af.json", "--reason", "withdrawn", "--at", AT)[0] == 0
        code, data, err = machine("trust-eval", "agent.af.json", "--policy", "policy.json", "--at", "2025-01-06T16:00:00Z")
        assert code == 1 and data["overall"] == "untrusted"
        assert "compliance=failed" in err
        code, data, _ = machine("verify-sig", "agent.af.json", "--at", "2025-01-06T16:00:00Z")
        assert code == 1 and data["signatures"][0]["status"] == "revoked"

    def test_policy_from_environment(self, ws, monkeypatch):
        auditor = keygen("Auditor", "cli:auditor")
        write_policy(ws / "policy.json", auditor)
        monkeypatch.setenv("AGENTFACTS_POLICY", str(ws / "policy.json"))
        code, data, _ = machine("trust-eval", "agent.af.json", "--at", AT)
        assert code == 1 and data["per_section"]["compliance"]["status"] == "insufficient"

    def test_policy_required(self, ws):
        assert cli("trust-eval", "agent.af.json")[0] == 2

    def test_tampered_document_fails_verification(self, ws):
        auditor = keygen("Auditor", "cli:auditor")
        cli("sign", "agent.af.json", "--key", auditor, "--sections", "compliance", "--confidence", "0.9", "--at", AT)
        data = json.loads((ws / "agent.af.json").read_text())
        data["compliance"]["safety_classification"] = "low"
        (ws / "agent.af.json").write_text(json.dumps(data))
        code, payload, _ = machine("verify-sig", "agent.af.json", "--at", AT)
        assert code == 1 and payload["signatures"][0]["status"] == "bad_signature"

    def test_deterministic_with_at(self, ws):
        auditor = keygen("Auditor", "cli:auditor")
        for name in ("a.af.json", "b.af.json"):
            shutil.copy(ws / "agent.af.json", ws / name)
            cli("sign", name, "--key", auditor, "--sections", "identity", "--confidence", "0.9", "--at", AT)
        assert (ws / "a.af.json").read_bytes() == (ws / "b.af.json").read_bytes()


class TestChain:
    def test_append_and_verify(self, ws):
        provider = keygen("Provider", "cli:provider")
        assert cli("chain", "append", "chain", "agent.af.json")[0] == 0
        data = json.loads((ws / "agent.af.json").read_text())
        data["identity"]["version_seq"] = 1
        data["identity"]["last_updated"] = "2025-01-07T00:00:00Z"
        (ws / "v1.af.json").write_text(json.dumps(data))
        assert cli("chain", "append", "chain", "v1.af.json", "--key", provider)[0] == 0
        code, report, _ = machine("chain", "verify", "chain")
        assert code == 0 and report["accepted"]

        doc0 = ws / "chain" / "000000.af.json"
        doc0.write_text(doc0.read_text().replace("FinAI", "FinAl"))
        code, report, _ = machine("chain", "verify", "chain")
        assert code == 1 and report["first_failure"] == 0


class TestPerms:
    def request(self, ws, name, **kw):
        req = GrantRequest(**{"actions": ("read",), "resource_pattern": "finance/historical/**", "ttl": 86400,
                              "authority": "acme:it", **kw})
        (ws / name).write_text(_serde.dumps(req.to_data()))
        return name

    def test_grant_check_revert_audit(self, ws):
        assert cli("perms", "init", "s.perm.json")[0] == 0
        assert cli("perms", "init", "s.perm.json")[0] == 2
        req = self.request(ws, "r.json")
        assert cli("perms", "grant", "s.perm.json", "--request", req, "--actor", "acme:it", "--at", AT)[0] == 0
        code, data, _ = machine("perms", "check", "s.perm.json", "--action", "read", "--resource", "finance/historical/x", "--at", AT)
        assert code == 0 and data["allowed"]
        code, data, _ = machine("perms", "check", "s.perm.json", "--action", "read", "--resource", "finance/historical/x",
                                "--at", "2025-01-08T00:00:00Z")
        assert code == 1 and data["reason"] == "expired"
        code, data, _ = machine("perms", "revert", "s.perm.json", "--at", "2025-01-08T00:00:00Z")
        assert data["reverted"] == [0]
        code, data, _ = machine("perms", "audit-verify", "s.perm.json")
        assert code == 0 and data == {"intact": True, "entries": 3}

        state = json.loads((ws / "s.perm.json").read_text())
        state["audit"][0]["actor"] = "mallory"
        (ws / "s.perm.json").write_text(json.dumps(state))
        assert cli("perms", "audit-verify", "s.perm.json")[0] == 1

    def test_schedule_is_idempotent(self, ws):
        cli("perms", "init", "s.perm.json", "--approvers", "acme:officer", "--max-ttl", "864000")
        req = GrantRequest(("write",), "reporting/official/*", 5 * 86400, "acme:officer")
        (ws / "schedule.json").write_text(_serde.dumps({"escalations": [
            {"at": "2025-01-10T13:00:00Z", "approver": "acme:officer", "request": req.to_data()},
            {"at": "2025-02-10T13:00:00Z", "approver": "acme:officer", "request": req.to_data()},
        ]}))
        _c, data, _ = machine("perms", "escalate", "s.perm.json", "--schedule", "schedule.json", "--at", "2025-01-20T00:00:00Z")
        assert data["applied"] == 1
        _c, data, _ = machine("perms", "escalate", "s.perm.json", "--schedule", "schedule.json", "--at", "2025-01-21T00:00:00Z")
        assert data["applied"] == 0
        _c, data, _ = machine("perms", "escalate", "s.perm.json", "--schedule", "schedule.json", "--at", "2025-03-01T00:00:00Z")
        assert data["applied"] == 1 and len(data["grants"]) == 2

    def test_unauthorized_escalation(self, ws):
        cli("perms", "init", "s.perm.json", "--approvers", "acme:officer", "--max-ttl", "100")
        req = self.request(ws, "r.json", ttl=50)
        code, _o, err = cli("perms", "escalate", "s.perm.json", "--request", req, "--approver", "acme:intern")
        assert code == 1 and "UnauthorizedApprover" in err


class TestRegistry:
    def test_publish_fetch_subscribe(self, ws):
        provider = keygen("Provider", "cli:provider")
        assert cli("registry", "publish", "--store", "store", "agent.af.json", "--at", AT)[0] == 0
        agent = json.loads((ws / "agent.af.json").read_text())["identity"]["agent_id"]
        code, data, _ = machine("registry", "fetch", "--store", "store", agent, "--at", AT)
        assert code == 0 and data["provenance"] == "live"
        code, data, _ = machine("registry", "fetch", "--store", "store", agent, "--at", "2025-01-06T15:10:00Z")
        assert data["provenance"] == "cache" and data["cache_age"] == 600
        assert cli("registry", "subscribe", "--store", "store", agent, "https://hooks.example.org/x")[0] == 0
        data = json.loads((ws / "agent.af.json").read_text())
        data["identity"]["version_seq"] = 1
        data["identity"]["last_updated"] = "2025-01-07T00:00:00Z"
        (ws / "v1.af.json").write_text(json.dumps(data))
        assert cli("registry", "publish", "--store", "store", "v1.af.json", "--at", AT)[0] == 1  # no link
        code, data, _ = machine("registry", "publish", "--store", "store", "v1.af.json", "--key", provider, "--at", AT)
        assert code == 0 and data["head_seq"] == 1
        notes = json.loads((ws / "store" / "notifications.json").read_text())["notifications"]
        assert len(notes) == 1 and notes[0]["delivery_state"] == "pending"

    def test_unknown_agent(self, ws):
        assert cli("registry", "fetch", "--store", "store", "did:web:nobody.example")[0] == 1


class TestDemo:
    def test_demo_passes(self, ws):
        code, out, _ = cli("demo", "employee-agent", "--frozen-clock")
        assert code == 0 and "FAIL" not in out

    def test_demo_machine_transcript(self, ws):
        code, data, _ = machine("demo", "employee-agent", "--frozen-clock")
        assert code == 0 and data["exit_code"] == 0 and len(data["transcript"]) > 20

    def test_demo_deterministic_with_frozen_clock(self, ws):
        assert cli("demo", "employee-agent", "--frozen-clock")[1] == cli("demo", "employee-agent", "--frozen-clock")[1]

    def test_tampered_compliance_fails(self, ws):
        code, out, _ = cli("demo", "employee-agent", "--tamper-compliance", "--frozen-clock")
        assert code == 1
