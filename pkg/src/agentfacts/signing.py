"""Authority keys, section-scoped signatures and self-revocation."""

from __future__ import annotations

import enum
import hashlib
import threading
from dataclasses import dataclass, replace
from datetime import datetime, timedelta
from typing import Iterable, Literal, Mapping, Optional, Union

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec, ed25519, padding, rsa

from ._serde import Micro, Record, format_ts, to_micros, utc
from .canon import Digest, canonicalize, check_scope, digest, section_payload
from .errors import (
    InvalidConfidence,
    MissingSection,
    NotOwner,
    UnknownSection,
    UnsupportedAlgorithm,
    ValidationFailed,
)


# -- algorithm registry -------------------------------------------------------

class SignatureScheme:
    """One entry of the algorithm registry. Subclass and register to extend."""

    name: str
    public_key_size: int

    def generate(self, seed: Optional[bytes] = None):
        raise NotImplementedError

    def public_bytes(self, private_key) -> bytes:
        raise NotImplementedError

    def sign(self, private_key, message: bytes) -> bytes:
        raise NotImplementedError

    def verify(self, public_key: bytes, signature: bytes, message: bytes) -> bool:
        raise NotImplementedError


class Ed25519Scheme(SignatureScheme):
    name = "ed25519"
    public_key_size = 32

    def generate(self, seed=None):
        if seed is None:
            return ed25519.Ed25519PrivateKey.generate()
        return ed25519.Ed25519PrivateKey.from_private_bytes(hashlib.sha256(seed).digest())

    def public_bytes(self, private_key):
        return private_key.public_key().public_bytes(serialization.Encoding.Raw, serialization.PublicFormat.Raw)

    def sign(self, private_key, message):
        return private_key.sign(message)

    def verify(self, public_key, signature, message):
        try:
            ed25519.Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
            return True
        except (InvalidSignature, ValueError):
            return False


class EcdsaP256Scheme(SignatureScheme):
    name = "ecdsa-p256"
    public_key_size = 65  # uncompressed SEC1 point

    _ORDER = 0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551

    def generate(self, seed=None):
        if seed is None:
            return ec.generate_private_key(ec.SECP256R1())
        scalar = int.from_bytes(hashlib.sha256(seed).digest(), "big") % (self._ORDER - 1) + 1
        return ec.derive_private_key(scalar, ec.SECP256R1())

    def public_bytes(self, private_key):
        return private_key.public_key().public_bytes(
            serialization.Encoding.X962, serialization.PublicFormat.UncompressedPoint
        )

    def sign(self, private_key, message):
        return private_key.sign(message, ec.ECDSA(hashes.SHA256()))

    def verify(self, public_key, signature, message):
        try:
            key = ec.EllipticCurvePublicKey.from_encoded_point(ec.SECP256R1(), public_key)
            key.verify(signature, message, ec.ECDSA(hashes.SHA256()))
            return True
        except (InvalidSignature, ValueError):
            return False


class RsaPss2048Scheme(SignatureScheme):
    name = "rsa-pss-2048"
    public_key_size = 294  # DER SubjectPublicKeyInfo of a 2048-bit key

    _PSS = padding.PSS(mgf=padding.MGF1(hashes.SHA256()), salt_length=32)

    def generate(self, seed=None):
        if seed is not None:
            raise UnsupportedAlgorithm("rsa-pss-2048 keys cannot be derived from a seed")
        return rsa.generate_private_key(public_exponent=65537, key_size=2048)

    def public_bytes(self, private_key):
        return private_key.public_key().public_bytes(
            serialization.Encoding.DER, serialization.PublicFormat.SubjectPublicKeyInfo
        )

    def sign(self, private_key, message):
        return private_key.sign(message, self._PSS, hashes.SHA256())

    def verify(self, public_key, signature, message):
        try:
            key = serialization.load_der_public_key(public_key)
            if not isinstance(key, rsa.RSAPublicKey) or key.key_size != 2048:
                return False
            key.verify(signature, message, self._PSS, hashes.SHA256())
            return True
        except (InvalidSignature, ValueError):
            return False


ALGORITHMS: dict[str, SignatureScheme] = {}


def register_algorithm(scheme: SignatureScheme) -> None:
    ALGORITHMS[scheme.name] = scheme


for _scheme in (Ed25519Scheme(), EcdsaP256Scheme(), RsaPss2048Scheme()):
    register_algorithm(_scheme)

DEFAULT_ALGORITHM = "ed25519"


def scheme_for(algorithm: str) -> SignatureScheme:
    try:
        return ALGORITHMS[algorithm]
    except KeyError:
        raise UnsupportedAlgorithm(f"unsupported signature algorithm {algorithm!r}") from None


# -- records ------------------------------------------------------------------

@dataclass(frozen=True)
class AuthorityRecord(Record):
    authority_id: str
    display_name: str
    public_key: bytes
    algorithm: str
    domains: tuple[str, ...] = ()


@dataclass(frozen=True)
class SignatureBlock(Record):
    authority_id: str
    signed_at: datetime
    scope: tuple[str, ...]
    confidence: Micro
    algorithm: str
    agent_id: str
    version_seq: int
    signature: bytes = b""

    def digest(self) -> Digest:
        return digest(canonicalize(self))

    def header(self) -> bytes:
        """Canonical bytes of the block metadata appended to the section payload."""
        return canonicalize({
            "algorithm": self.algorithm,
            "authority_id": self.authority_id,
            "confidence": to_micros(self.confidence),
            "signed_at": format_ts(self.signed_at),
        }).bytes


@dataclass(frozen=True)
class RevocationEntry(Record):
    target: Literal["signature", "authority"]
    target_ref: str
    reason: str
    revoked_at: datetime
    issuer: str
    signature: bytes = b""

    def signed_bytes(self) -> bytes:
        data = self.to_canonical()
        data.pop("signature", None)
        return canonicalize(data).bytes


class SigStatus(str, enum.Enum):
    VALID = "valid"
    BAD_SIGNATURE = "bad_signature"
    UNKNOWN_AUTHORITY = "unknown_authority"
    REVOKED = "revoked"
    SCOPE_MISMATCH = "scope_mismatch"
    EXPIRED = "expired"

    def __str__(self):
        return self.value


# -- keys ---------------------------------------------------------------------

class PrivateKeyHandle:
    """Opaque signing capability for one authority.

    A handle belongs to the thread that created it; use :meth:`clone` to hand
    signing to another thread.
    """

    def __init__(self, private_key, record: AuthorityRecord):
        self._key = private_key
        self.record = record
        self._owner = threading.get_ident()

    @property
    def authority_id(self) -> str:
        return self.record.authority_id

    @property
    def algorithm(self) -> str:
        return self.record.algorithm

    def sign(self, message: bytes) -> bytes:
        if threading.get_ident() != self._owner:
            raise RuntimeError("key handle used outside its owning thread; clone() it first")
        return scheme_for(self.record.algorithm).sign(self._key, message)

    def clone(self) -> "PrivateKeyHandle":
        return PrivateKeyHandle(self._key, self.record)

    def export_pem(self, passphrase: Optional[bytes]) -> bytes:
        enc = (
            serialization.BestAvailableEncryption(passphrase)
            if passphrase
            else serialization.NoEncryption()
        )
        return self._key.private_bytes(serialization.Encoding.PEM, serialization.PrivateFormat.PKCS8, enc)

    @classmethod
    def import_pem(cls, pem: bytes, passphrase: Optional[bytes], record: AuthorityRecord) -> "PrivateKeyHandle":
        key = serialization.load_pem_private_key(pem, password=passphrase or None)
        if scheme_for(record.algorithm).public_bytes(key) != record.public_key:
            raise ValueError("private key does not match the authority record")
        return cls(key, record)

    def __repr__(self):
        return f"PrivateKeyHandle({self.authority_id!r}, {self.algorithm!r})"


def authority_id_for(public_key: bytes) -> str:
    return "auth:" + digest(public_key).hex[:16]


def generate_authority(
    algorithm: str = DEFAULT_ALGORITHM,
    display_name: str = "",
    domains: Iterable[str] = (),
    seed: Optional[bytes] = None,
) -> tuple[PrivateKeyHandle, AuthorityRecord]:
    """Create a fresh key pair and the public record describing it.

    ``seed`` makes key generation deterministic (ed25519 and ecdsa-p256 only);
    it exists for fixtures and demos, never for production keys.
    """
    scheme = scheme_for(algorithm)
    key = scheme.generate(seed)
    pub = scheme.public_bytes(key)
    record = AuthorityRecord(
        authority_id=authority_id_for(pub),
        display_name=display_name,
        public_key=pub,
        algorithm=algorithm,
        domains=tuple(domains),
    )
    return PrivateKeyHandle(key, record), record


# -- signing and verification -------------------------------------------------

def sign_sections(
    key: PrivateKeyHandle,
    doc,
    scope: Iterable[str],
    confidence: float,
    signed_at: datetime,
) -> SignatureBlock:
    from .model import validate_document

    if isinstance(confidence, bool) or not (0.0 <= confidence <= 1.0):
        raise InvalidConfidence(f"confidence must lie in [0, 1], got {confidence!r}")
    errors = [f for f in validate_document(doc).findings if f.severity == "error"]
    if errors:
        raise ValidationFailed(errors)
    names = check_scope(scope)
    payload = section_payload(doc, names)
    block = SignatureBlock(
        authority_id=key.authority_id,
        signed_at=utc(signed_at),
        scope=tuple(names),
        confidence=confidence,
        algorithm=key.algorithm,
        agent_id=doc.identity.agent_id,
        version_seq=doc.identity.version_seq,
    )
    return replace(block, signature=key.sign(payload.bytes + block.header()))


def verify_payload(sig: SignatureBlock, authority: AuthorityRecord, payload: bytes) -> bool:
    """Cryptographic check only: does ``sig`` cover exactly ``payload``?"""
    if sig.algorithm != authority.algorithm or sig.algorithm not in ALGORITHMS:
        return False
    return ALGORITHMS[sig.algorithm].verify(authority.public_key, sig.signature, payload + sig.header())


def verify_revocation(entry: RevocationEntry, authorities: Mapping[str, AuthorityRecord]) -> bool:
    issuer = authorities.get(entry.issuer)
    if issuer is None or issuer.algorithm not in ALGORITHMS:
        return False
    if entry.target == "authority" and entry.target_ref != entry.issuer:
        return False
    return ALGORITHMS[issuer.algorithm].verify(issuer.public_key, entry.signature, entry.signed_bytes())


def is_revoked(
    sig: SignatureBlock,
    authorities: Mapping[str, AuthorityRecord],
    revocations: Iterable[RevocationEntry],
    now: datetime,
) -> bool:
    sig_ref = None
    for entry in revocations:
        if entry.issuer != sig.authority_id or utc(entry.revoked_at) > utc(now):
            continue
        if entry.target == "authority":
            hit = entry.target_ref == sig.authority_id
        else:
            if sig_ref is None:
                sig_ref = str(sig.digest())
            hit = entry.target_ref == sig_ref
        if hit and verify_revocation(entry, authorities):
            return True
    return False


def signature_expiry(doc, sig: SignatureBlock) -> Optional[datetime]:
    """Most restrictive per-section verification TTL over the signature scope."""
    ver = doc.verification
    if ver is None:
        return None
    ttls = [ver.verification_ttl[s] for s in sig.scope if s in ver.verification_ttl]
    if not ttls:
        return None
    return utc(sig.signed_at) + timedelta(seconds=min(ttls))


def verify_signature(
    doc,
    sig: SignatureBlock,
    authorities: Mapping[str, AuthorityRecord],
    revocations: Iterable[RevocationEntry],
    now: datetime,
) -> SigStatus:
    authority = authorities.get(sig.authority_id)
    if authority is None:
        return SigStatus.UNKNOWN_AUTHORITY
    if is_revoked(sig, authorities, revocations, now):
        return SigStatus.REVOKED
    if sig.agent_id != doc.identity.agent_id or sig.version_seq != doc.identity.version_seq:
        return SigStatus.SCOPE_MISMATCH
    try:
        if list(sig.scope) != check_scope(sig.scope):
            return SigStatus.SCOPE_MISMATCH
        payload = section_payload(doc, sig.scope)
    except (UnknownSection, MissingSection):
        return SigStatus.SCOPE_MISMATCH
    if not verify_payload(sig, authority, payload.bytes):
        return SigStatus.BAD_SIGNATURE
    expiry = signature_expiry(doc, sig)
    if expiry is not None and utc(now) > expiry:
        return SigStatus.EXPIRED
    return SigStatus.VALID


def revoke(
    key: PrivateKeyHandle,
    target: Union[SignatureBlock, Digest, str],
    reason: str,
    at: datetime,
) -> RevocationEntry:
    """Issue a self-revocation for one of ``key``'s signatures or for ``key`` itself."""
    if isinstance(target, SignatureBlock):
        if target.authority_id != key.authority_id:
            raise NotOwner(f"{key.authority_id} cannot revoke a signature made by {target.authority_id}")
        kind, ref = "signature", str(target.digest())
    elif isinstance(target, Digest):
        kind, ref = "signature", str(target)
    elif isinstance(target, str) and target.startswith("sha-256:"):
        kind, ref = "signature", str(Digest.from_data(target))
    elif isinstance(target, str):
        if target != key.authority_id:
            raise NotOwner(f"{key.authority_id} cannot revoke authority {target}")
        kind, ref = "authority", target
    else:
        raise TypeError(f"cannot revoke {type(target).__name__}")
    entry = RevocationEntry(target=kind, target_ref=ref, reason=reason, revoked_at=utc(at), issuer=key.authority_id)
    return replace(entry, signature=key.sign(entry.signed_bytes()))


def authority_map(records: Iterable[AuthorityRecord]) -> dict[str, AuthorityRecord]:
    out: dict[str, AuthorityRecord] = {}
    for rec in records:
        if rec.authority_id in out and out[rec.authority_id] != rec:
            raise ValueError(f"duplicate authority id {rec.authority_id}")
        out[rec.authority_id] = rec
    return out
