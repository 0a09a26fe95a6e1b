"""Trust-policy evaluation with graduated per-section verdicts.

Section score is ``max(weight(authority) * confidence)`` over qualifying
signatures. Arithmetic is exact: weights and confidences are held as integer
millionths, so a product lives on a 10**12 scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Literal, Mapping, Optional

from ._serde import Micro, Record, format_ts, to_micros, utc
from .canon import SECTION_NAMES
from .errors import InvalidPolicy, UnknownSectionInPolicy
from .signing import AuthorityRecord, RevocationEntry, SigStatus, verify_signature

DEFAULT_CRITICAL = ("identity", "compliance", "verification")
FAILED_STATUSES = frozenset({SigStatus.BAD_SIGNATURE, SigStatus.REVOKED, SigStatus.SCOPE_MISMATCH})
AGE_REASONS = frozenset({"too_old", SigStatus.EXPIRED.value})
OVERALL_RANK = {"untrusted": 0, "degraded": 1, "trusted": 2}
PRODUCT_SCALE = 10**12


@dataclass(frozen=True)
class TrustPolicy(Record):
    """A consumer's per-section verification requirements.

    Missing per-section entries fall back to: one signature, confidence 0,
    any authority, no age cap. Authorities without an explicit weight get
    ``default_weight``. ``critical_sections`` defaults to identity,
    compliance and verification, intersected with ``required_sections``.
    """

    authority_weights: dict[str, Micro] = field(default_factory=dict)
    allowed_authorities: Optional[dict[str, tuple[str, ...]]] = None
    min_signatures: dict[str, int] = field(default_factory=dict)
    min_confidence: dict[str, Micro] = field(default_factory=dict)
    max_signature_age: Optional[dict[str, int]] = None
    required_sections: tuple[str, ...] = DEFAULT_CRITICAL
    critical_sections: Optional[tuple[str, ...]] = None
    default_weight: Micro = 1.0

    def critical(self) -> tuple[str, ...]:
        if self.critical_sections is not None:
            return self.critical_sections
        return tuple(s for s in DEFAULT_CRITICAL if s in self.required_sections)

    def weight_micros(self, authority_id: str) -> int:
        return to_micros(self.authority_weights.get(authority_id, self.default_weight))

    def explicit(self) -> dict:
        """The policy with every default spelled out."""
        req = _ordered(self.required_sections)
        return {
            "authority_weights": dict(sorted(self.authority_weights.items())),
            "default_weight": self.default_weight,
            "allowed_authorities": {s: sorted(v) for s, v in sorted((self.allowed_authorities or {}).items())},
            "min_signatures": {s: self.min_signatures.get(s, 1) for s in req},
            "min_confidence": {s: self.min_confidence.get(s, 0.0) for s in req},
            "max_signature_age": {s: (self.max_signature_age or {}).get(s) for s in req},
            "required_sections": req,
            "critical_sections": _ordered(self.critical()),
        }


def _ordered(names: Iterable[str]) -> list[str]:
    names = set(names)
    return [s for s in SECTION_NAMES if s in names]


def check_policy(policy: TrustPolicy) -> None:
    mentioned = set(policy.required_sections) | set(policy.critical())
    mentioned |= set(policy.min_signatures) | set(policy.min_confidence)
    mentioned |= set(policy.allowed_authorities or {}) | set(policy.max_signature_age or {})
    unknown = sorted(mentioned - set(SECTION_NAMES))
    if unknown:
        raise UnknownSectionInPolicy(f"policy names unknown section(s): {', '.join(unknown)}")
    if not set(policy.critical()) <= set(policy.required_sections):
        raise InvalidPolicy("critical_sections must be a subset of required_sections")
    for name, w in list(policy.authority_weights.items()) + [("default_weight", policy.default_weight)]:
        if not 0.0 <= w <= 1.0:
            raise InvalidPolicy(f"weight for {name} must lie in [0, 1]")
    for s, v in policy.min_confidence.items():
        if not 0.0 <= v <= 1.0:
            raise InvalidPolicy(f"min_confidence[{s}] must lie in [0, 1]")
    for s, n in policy.min_signatures.items():
        if n < 1:
            raise InvalidPolicy(f"min_signatures[{s}] must be >= 1")
    for s, age in (policy.max_signature_age or {}).items():
        if age < 0:
            raise InvalidPolicy(f"max_signature_age[{s}] must be >= 0")


@dataclass(frozen=True)
class SignatureAssessment:
    index: int
    authority_id: str
    signed_at: datetime
    status: str
    in_scope: bool
    reasons: tuple[str, ...]
    weight: float
    confidence: float
    product_units: int  # weight * confidence on the 10**12 scale

    @property
    def qualifying(self) -> bool:
        return self.in_scope and not self.reasons

    def to_data(self) -> dict:
        return {
            "index": self.index,
            "authority_id": self.authority_id,
            "signed_at": format_ts(self.signed_at),
            "status": self.status,
            "in_scope": self.in_scope,
            "reasons": list(self.reasons),
            "weight": self.weight,
            "confidence": self.confidence,
            "product": self.product_units / PRODUCT_SCALE,
        }


@dataclass(frozen=True)
class SectionVerdict:
    status: Literal["trusted", "insufficient", "stale", "failed"]
    score_units: int
    min_signatures: int
    min_confidence: float
    assessments: tuple[SignatureAssessment, ...]

    @property
    def score(self) -> float:
        return self.score_units / PRODUCT_SCALE

    @property
    def qualifying_signatures(self) -> list[SignatureAssessment]:
        return [a for a in self.assessments if a.qualifying]

    def to_data(self) -> dict:
        return {
            "status": self.status,
            "score": self.score,
            "min_signatures": self.min_signatures,
            "min_confidence": self.min_confidence,
            "qualifying_signatures": [a.index for a in self.qualifying_signatures],
            "assessments": [a.to_data() for a in self.assessments],
        }


@dataclass(frozen=True)
class TrustVerdict:
    per_section: dict[str, SectionVerdict]
    overall: Literal["trusted", "degraded", "untrusted"]
    evaluated_at: datetime
    critical_sections: tuple[str, ...] = ()

    def to_data(self) -> dict:
        return {
            "overall": self.overall,
            "evaluated_at": format_ts(self.evaluated_at),
            "critical_sections": list(self.critical_sections),
            "per_section": {s: v.to_data() for s, v in self.per_section.items()},
        }


def _assess(doc, sig, index, status, section, policy, now) -> SignatureAssessment:
    weight_u = policy.weight_micros(sig.authority_id)
    conf_u = to_micros(sig.confidence)
    in_scope = section in sig.scope
    reasons: list[str] = []
    if in_scope:
        if status != SigStatus.VALID:
            reasons.append(status.value)
        allowed = (policy.allowed_authorities or {}).get(section)
        if allowed is not None and sig.authority_id not in allowed:
            reasons.append("not_allowed")
        max_age = (policy.max_signature_age or {}).get(section)
        if max_age is not None and (utc(now) - utc(sig.signed_at)).total_seconds() > max_age:
            reasons.append("too_old")
    return SignatureAssessment(
        index=index,
        authority_id=sig.authority_id,
        signed_at=sig.signed_at,
        status=status.value,
        in_scope=in_scope,
        reasons=tuple(reasons),
        weight=weight_u / 1_000_000,
        confidence=conf_u / 1_000_000,
        product_units=weight_u * conf_u,
    )


def _section_status(assessments, n_required: int, threshold_units: int) -> tuple[str, int]:
    qualifying = [a for a in assessments if a.qualifying]
    score = max((a.product_units for a in qualifying), default=0)
    if len(qualifying) >= n_required and score >= threshold_units:
        return "trusted", score
    if any(a.in_scope and a.status in {s.value for s in FAILED_STATUSES} for a in assessments):
        return "failed", score
    relaxed = [a for a in assessments if a.in_scope and a.reasons and set(a.reasons) <= AGE_REASONS]
    relaxed += qualifying
    relaxed_score = max((a.product_units for a in relaxed), default=0)
    if relaxed and len(relaxed) >= n_required and relaxed_score >= threshold_units:
        return "stale", score
    return "insufficient", score


def overall_status(per_section: Mapping[str, str], critical: Iterable[str]) -> str:
    critical = set(critical)
    if all(st == "trusted" for st in per_section.values()):
        return "trusted"
    if all(per_section[s] == "trusted" for s in per_section if s in critical) and all(
        st in ("trusted", "stale", "insufficient") for s, st in per_section.items() if s not in critical
    ):
        return "degraded"
    return "untrusted"


def evaluate_trust(
    doc,
    policy: TrustPolicy,
    authorities: Mapping[str, AuthorityRecord],
    revocations: Iterable[RevocationEntry],
    now: datetime,
) -> TrustVerdict:
    check_policy(policy)
    revocations = list(revocations)
    sigs = doc.verification.signatures if doc.verification is not None else ()
    statuses = [verify_signature(doc, s, authorities, revocations, now) for s in sigs]
    per_section: dict[str, SectionVerdict] = {}
    for section in _ordered(policy.required_sections):
        assessments = tuple(
            _assess(doc, sig, i, st, section, policy, now) for i, (sig, st) in enumerate(zip(sigs, statuses))
        )
        n_required = policy.min_signatures.get(section, 1)
        min_conf = policy.min_confidence.get(section, 0.0)
        status, score = _section_status(assessments, n_required, to_micros(min_conf) * 1_000_000)
        per_section[section] = SectionVerdict(status, score, n_required, min_conf, assessments)
    critical = tuple(_ordered(policy.critical()))
    overall = overall_status({s: v.status for s, v in per_section.items()}, critical)
    return TrustVerdict(per_section, overall, utc(now), critical)


# -- explanation --------------------------------------------------------------

_REASON_TEXT = {
    "revoked": "revoked",
    "unknown_authority": "unknown authority",
    "bad_signature": "bad signature",
    "scope_mismatch": "binding mismatch (agent_id/version_seq)",
    "expired": "expired (verification ttl)",
    "not_allowed": "authority not allowed for section",
    "too_old": "too old",
}


def _num(x: float) -> str:
    text = f"{x:.6f}".rstrip("0")
    return text + "0" if text.endswith(".") else text


@dataclass(frozen=True)
class ExplanationReport:
    lines: tuple[str, ...]
    disqualifications: int

    def __str__(self):
        return "\n".join(self.lines)


def explain_verdict(verdict: TrustVerdict) -> ExplanationReport:
    lines = [f"overall: {verdict.overall} (evaluated {format_ts(verdict.evaluated_at)})"]
    disq = 0
    for section, sv in verdict.per_section.items():
        crit = " [critical]" if section in verdict.critical_sections else ""
        lines.append(
            f"section {section}{crit}: {sv.status} score={_num(sv.score)} "
            f"(need {sv.min_signatures} signature(s), confidence >= {_num(sv.min_confidence)})"
        )
        quals = sv.qualifying_signatures
        if quals:
            terms = [f"{_num(a.weight)}×{_num(a.confidence)}" for a in quals]
            expr = terms[0] if len(terms) == 1 else f"max({', '.join(terms)})"
            lines.append(f"  score = {expr} = {_num(sv.score)}")
        for a in sv.assessments:
            tag = f"  sig#{a.index} {a.authority_id}"
            if not a.in_scope:
                lines.append(f"{tag}: out of scope")
                continue
            if a.qualifying:
                lines.append(f"{tag}: qualifying {_num(a.weight)}×{_num(a.confidence)}={_num(a.product_units / PRODUCT_SCALE)}")
                continue
            disq += 1
            lines.append(f"{tag}: disqualified: {', '.join(_REASON_TEXT.get(r, r) for r in a.reasons)}")
        if sv.status != "trusted":
            if len(quals) < sv.min_signatures:
                lines.append(f"  below threshold: {len(quals)} of {sv.min_signatures} required signature(s)")
            elif sv.score < sv.min_confidence:
                lines.append(f"  below threshold: score {_num(sv.score)} < {_num(sv.min_confidence)}")
    return ExplanationReport(tuple(lines), disq)
