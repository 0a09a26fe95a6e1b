"""HTTP surface of a registry peer.

``handle`` maps one request to ``(status, body)`` with no I/O, which keeps the
wire contract testable byte for byte; ``serve`` wraps it in a threaded
stdlib HTTP server.

    GET  /agents/{agent_id}/facts            head document + signatures + freshness
    GET  /agents/{agent_id}/facts/{seq}      historical revision
    GET  /agents/{agent_id}/chain            version links
    POST /agents/{agent_id}/facts            publish {doc, signatures, link?}; 409 on chain mismatch
    POST /agents/{agent_id}/subscriptions    {webhook_url}; 201 with id
    GET  /authorities                        authority registry
    POST /revocations                        submit a RevocationEntry
"""

from __future__ import annotations

import logging
import re
from datetime import datetime
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Optional
from urllib.parse import unquote, urlsplit

from . import _serde
from ._serde import now_utc
from .errors import (
    AgentFactsError,
    BadUrl,
    ChainMismatch,
    DocumentError,
    UnknownAgent,
    ValidationFailed,
)
from .lifecycle import VersionLink, freshness
from .model import document_from_data
from .registry import Registry
from .signing import RevocationEntry, SignatureBlock

log = logging.getLogger(__name__)

_FACTS = re.compile(r"^/agents/([^/]+)/facts$")
_FACTS_SEQ = re.compile(r"^/agents/([^/]+)/facts/(\d+)$")
_CHAIN = re.compile(r"^/agents/([^/]+)/chain$")
_SUBS = re.compile(r"^/agents/([^/]+)/subscriptions$")


def _ok(status: int, data) -> tuple[int, bytes]:
    return status, _serde.dumps(data).encode("utf-8")


def _err(status: int, kind: str, message: str) -> tuple[int, bytes]:
    return _ok(status, {"error": kind, "message": message})


def handle(registry: Registry, method: str, path: str, body: bytes = b"", now: Optional[datetime] = None) -> tuple[int, bytes]:
    now = now or now_utc()
    path = urlsplit(path).path
    try:
        if method == "GET":
            return _get(registry, path, now)
        if method == "POST":
            return _post(registry, path, _serde.loads(body or b"{}"), now)
        return _err(405, "method_not_allowed", f"{method} is not supported")
    except UnknownAgent as exc:
        return _err(404, "unknown_agent", str(exc))
    except ChainMismatch as exc:
        return _err(409, "chain_mismatch", str(exc))
    except ValidationFailed as exc:
        return _err(422, "validation_failed", str(exc))
    except (DocumentError, BadUrl) as exc:
        return _err(400, "bad_request", str(exc))
    except AgentFactsError as exc:
        return _err(400, "bad_request", str(exc))


def _get(registry: Registry, path: str, now) -> tuple[int, bytes]:
    if path == "/authorities":
        records = sorted(registry.authority_registry.values(), key=lambda a: a.authority_id)
        return _ok(200, {"authorities": [a.to_data() for a in records]})
    if m := _FACTS.match(path):
        agent_id = unquote(m.group(1))
        doc = registry.head(agent_id)
        return _ok(200, {
            "agent_id": agent_id,
            "head_seq": doc.identity.version_seq,
            "doc": doc.to_data(),
            "signatures": [s.to_data() for s in registry.signatures_for(agent_id)],
            "freshness": freshness(registry.facts_with_signatures(agent_id), now, registry.staleness_policy).to_data(),
        })
    if m := _FACTS_SEQ.match(path):
        agent_id, seq = unquote(m.group(1)), int(m.group(2))
        doc = registry.version(agent_id, seq)
        return _ok(200, {
            "agent_id": agent_id,
            "seq": seq,
            "doc": doc.to_data(),
            "signatures": [s.to_data() for s in registry.signatures_for(agent_id, seq)],
        })
    if m := _CHAIN.match(path):
        agent_id = unquote(m.group(1))
        return _ok(200, {"agent_id": agent_id, "links": [l.to_data() for l in registry.chain(agent_id)]})
    return _err(404, "not_found", f"no route for GET {path}")


def _post(registry: Registry, path: str, data, now) -> tuple[int, bytes]:
    if not isinstance(data, dict):
        return _err(400, "bad_request", "request body must be an object")
    if m := _FACTS.match(path):
        agent_id = unquote(m.group(1))
        unknown = set(data) - {"doc", "signatures", "link"}
        if unknown or "doc" not in data:
            return _err(400, "bad_request", "publish body is {doc, signatures, link?}")
        doc = document_from_data(data["doc"])
        if doc.identity.agent_id != agent_id:
            return _err(400, "bad_request", "document agent_id does not match the URL")
        sigs = [SignatureBlock.from_data(s, f"/signatures/{i}") for i, s in enumerate(data.get("signatures", []))]
        link = VersionLink.from_data(data["link"], "/link") if data.get("link") is not None else None
        ack = registry.publish(doc, sigs, link, now=now)
        return _ok(200, ack.to_data())
    if m := _SUBS.match(path):
        agent_id = unquote(m.group(1))
        url = data.get("webhook_url")
        if not isinstance(url, str) or set(data) != {"webhook_url"}:
            return _err(400, "bad_request", "subscription body is {webhook_url}")
        sub_id = registry.subscribe(agent_id, url)
        return _ok(201, {"id": sub_id, "agent_id": agent_id, "webhook_url": url})
    if path == "/revocations":
        entry = RevocationEntry.from_data(data)
        if not registry.add_revocation(entry):
            return _err(400, "bad_revocation", "revocation signature does not verify against its issuer")
        return _ok(201, {"accepted": True, "target": entry.target, "target_ref": entry.target_ref})
    return _err(404, "not_found", f"no route for POST {path}")


def make_handler(registry: Registry, clock: Callable[[], datetime] = now_utc, on_change: Optional[Callable[[], None]] = None):
    class Handler(BaseHTTPRequestHandler):
        server_version = "agentfacts-registry/0.1"

        def _respond(self, method: str):
            length = int(self.headers.get("Content-Length") or 0)
            body = self.rfile.read(length) if length else b""
            status, payload = handle(registry, method, self.path, body, clock())
            if method == "POST" and status < 300 and on_change is not None:
                on_change()
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def do_GET(self):
            self._respond("GET")

        def do_POST(self):
            self._respond("POST")

        def log_message(self, fmt, *args):
            log.info("%s - %s", self.address_string(), fmt % args)

    return Handler


def serve(registry: Registry, host: str = "127.0.0.1", port: int = 8080, **kwargs) -> ThreadingHTTPServer:
    """Build (but do not start) a threaded server; call ``serve_forever`` on it."""
    return ThreadingHTTPServer((host, port), make_handler(registry, **kwargs))
