"""Passphrase-protected keystore file for authority private keys.

Layout (file format, ``.keys.json``)::

    {"version": 1,
     "keys": {"<authority_id>": {"record": AuthorityRecord,
                                 "private_key_pem": "<encrypted PKCS#8 PEM>"}}}

The passphrase is read from ``AGENTFACTS_KEYSTORE_PASS`` and never taken from argv.
"""

from __future__ import annotations

import os
from pathlib import Path

from . import _serde
from .errors import KeystoreError
from .signing import AuthorityRecord, PrivateKeyHandle

PASS_ENV = "AGENTFACTS_KEYSTORE_PASS"


def passphrase_from_env(env=None) -> bytes:
    env = os.environ if env is None else env
    value = env.get(PASS_ENV)
    if not value:
        raise KeystoreError(f"set {PASS_ENV} to the keystore passphrase")
    return value.encode("utf-8")


class Keystore:
    def __init__(self, path, passphrase: bytes):
        self.path = Path(path)
        self._passphrase = passphrase
        self._entries: dict[str, dict] = {}
        if self.path.exists():
            data = _serde.loads(self.path.read_bytes())
            if data.get("version") != 1:
                raise KeystoreError(f"unsupported keystore version {data.get('version')!r}")
            self._entries = dict(data.get("keys", {}))

    def ids(self) -> list[str]:
        return sorted(self._entries)

    def records(self) -> list[AuthorityRecord]:
        return [AuthorityRecord.from_data(self._entries[i]["record"]) for i in self.ids()]

    def add(self, handle: PrivateKeyHandle) -> None:
        self._entries[handle.authority_id] = {
            "record": handle.record.to_data(),
            "private_key_pem": handle.export_pem(self._passphrase).decode("ascii"),
        }

    def open(self, authority_id: str) -> PrivateKeyHandle:
        entry = self._entries.get(authority_id)
        if entry is None:
            raise KeystoreError(f"no key for {authority_id} in {self.path}")
        record = AuthorityRecord.from_data(entry["record"])
        try:
            return PrivateKeyHandle.import_pem(entry["private_key_pem"].encode("ascii"), self._passphrase, record)
        except (ValueError, TypeError) as exc:
            raise KeystoreError(f"cannot unlock key {authority_id}: {exc}") from None

    def save(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        tmp.write_text(_serde.dumps({"version": 1, "keys": self._entries}), "utf-8")
        os.chmod(tmp, 0o600)
        tmp.replace(self.path)


def load_authorities(path) -> list[AuthorityRecord]:
    path = Path(path)
    if not path.exists():
        return []
    data = _serde.loads(path.read_bytes())
    return [AuthorityRecord.from_data(a, f"/authorities/{i}") for i, a in enumerate(data.get("authorities", []))]


def save_authorities(path, records) -> None:
    records = sorted({r.authority_id: r for r in records}.values(), key=lambda r: r.authority_id)
    Path(path).write_text(_serde.dumps({"authorities": [r.to_data() for r in records]}), "utf-8")
