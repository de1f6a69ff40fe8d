"""Who may read a shared record: TLP channels plus attribute policies.

Attribute policies are monotone AND/OR formulas over attribute tags,
written in config files as s-expressions like
``(and ICS-ISAC (or critical-infra gov))``. Envelope encryption is
simulated with keyed digests: the access decision is what matters here,
not cryptographic strength.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Optional

from .encoding import Digest
from .errors import AccessDenied, PolicyParseError
from .ledger import sha256

if TYPE_CHECKING:
    from .cti import CtiRecord
    from .identity import Credential


class TlpChannel(Enum):
    Red = "Red"
    Orange = "Orange"
    Green = "Green"
    White = "White"


@dataclass(frozen=True)
class TlpLabel:
    channel: TlpChannel
    designated: Optional[frozenset[Digest]] = None

    def problems(self) -> list[str]:
        if self.channel is TlpChannel.Red:
            if self.designated is None or len(self.designated) != 1:
                return ["Red requires exactly one designated recipient"]
        elif self.channel is TlpChannel.Orange:
            if not self.designated:
                return ["Orange requires a non-empty designated group"]
        elif self.designated is not None:
            return [f"{self.channel.value} must not carry a designated set"]
        return []


# --- attribute policies -----------------------------------------------------

@dataclass(frozen=True)
class AttributePolicy:
    """Monotone boolean formula: op is "attr", "and" or "or"."""

    op: str
    tag: str = ""
    children: tuple["AttributePolicy", ...] = ()


def attr(tag: str) -> AttributePolicy:
    return AttributePolicy(op="attr", tag=tag)


def all_of(*children: AttributePolicy) -> AttributePolicy:
    return AttributePolicy(op="and", children=tuple(children))


def any_of(*children: AttributePolicy) -> AttributePolicy:
    return AttributePolicy(op="or", children=tuple(children))


def evaluate_policy(policy: AttributePolicy, attributes: Iterable[str]) -> bool:
    attrs = set(attributes)

    def walk(node: AttributePolicy) -> bool:
        if node.op == "attr":
            return node.tag in attrs
        if node.op == "and":
            return all(walk(c) for c in node.children)
        if node.op == "or":
            return any(walk(c) for c in node.children)
        raise PolicyParseError(f"unknown policy operator {node.op!r}")

    return walk(policy)


def policy_leaves(policy: AttributePolicy) -> list[str]:
    if policy.op == "attr":
        return [policy.tag]
    out: list[str] = []
    for child in policy.children:
        out.extend(policy_leaves(child))
    return out


def parse_policy(text: str) -> AttributePolicy:
    """Parse an s-expression policy; a bare atom is a single attribute leaf."""
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    if not tokens:
        raise PolicyParseError("empty policy")
    pos = 0

    def parse_expr() -> AttributePolicy:
        nonlocal pos
        if pos >= len(tokens):
            raise PolicyParseError("unexpected end of policy")
        tok = tokens[pos]
        pos += 1
        if tok == ")":
            raise PolicyParseError("unexpected ')'")
        if tok != "(":
            return attr(tok)
        if pos >= len(tokens):
            raise PolicyParseError("unterminated '('")
        op = tokens[pos]
        pos += 1
        if op not in ("and", "or"):
            raise PolicyParseError(f"operator must be 'and' or 'or', got {op!r}")
        children: list[AttributePolicy] = []
        while pos < len(tokens) and tokens[pos] != ")":
            children.append(parse_expr())
        if pos >= len(tokens):
            raise PolicyParseError("unterminated '('")
        pos += 1  # consume ')'
        if not children:
            raise PolicyParseError(f"'{op}' needs at least one operand")
        return AttributePolicy(op=op, children=tuple(children))

    result = parse_expr()
    if pos != len(tokens):
        raise PolicyParseError("trailing tokens after policy")
    return result


def policy_to_string(policy: AttributePolicy) -> str:
    if policy.op == "attr":
        return policy.tag
    inner = " ".join(policy_to_string(c) for c in policy.children)
    return f"({policy.op} {inner})"


# --- authorization ----------------------------------------------------------

def authorize(
    requester: "Credential",
    tlp: TlpLabel,
    policy: Optional[AttributePolicy],
    group_members: set[Digest],
) -> bool:
    """TLP gate AND optional attribute policy; revoked requesters never pass."""
    if requester.revoked:
        return False
    rid = requester.stakeholder
    if tlp.channel is TlpChannel.Red:
        tlp_ok = tlp.designated is not None and rid in tlp.designated
    elif tlp.channel is TlpChannel.Orange:
        tlp_ok = tlp.designated is not None and rid in tlp.designated
    elif tlp.channel is TlpChannel.Green:
        tlp_ok = rid in group_members
    else:
        tlp_ok = True
    if not tlp_ok:
        return False
    if policy is None:
        return True
    return evaluate_policy(policy, requester.attributes)


# --- simulated envelope encryption ------------------------------------------

def _xor(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b))


def _witness(tlp: TlpLabel, policy: Optional[AttributePolicy]) -> str:
    designated = sorted(d.hex() for d in tlp.designated) if tlp.designated else []
    pol = policy_to_string(policy) if policy is not None else ""
    return f"{tlp.channel.value}|{','.join(designated)}|{pol}"


@dataclass(frozen=True)
class EncryptedEnvelope:
    record_id: Digest
    ciphertext: bytes
    wrapped_keys: tuple[tuple[str, bytes], ...]
    tlp: TlpLabel
    policy: Optional[AttributePolicy]

    @property
    def ciphertext_digest(self) -> Digest:
        return sha256(self.ciphertext)


def seal(record: "CtiRecord") -> EncryptedEnvelope:
    """Wrap the record's content digest under its TLP label and policy."""
    content_key = sha256(b"content-key:" + record.record_id)
    witness = _witness(record.tlp, record.policy)
    wrapped = _xor(content_key, sha256(b"wrap:" + witness.encode("utf-8")))
    return EncryptedEnvelope(
        record_id=record.record_id,
        ciphertext=_xor(record.narrative_digest, content_key),
        wrapped_keys=((witness, wrapped),),
        tlp=record.tlp,
        policy=record.policy,
    )


def open_envelope(
    envelope: EncryptedEnvelope,
    requester: "Credential",
    group_members: set[Digest],
) -> Digest:
    """Return the content digest, or raise AccessDenied."""
    if not authorize(requester, envelope.tlp, envelope.policy, group_members):
        raise AccessDenied(f"requester {requester.stakeholder.hex()[:12]} not authorized")
    witness, wrapped = envelope.wrapped_keys[0]
    content_key = _xor(wrapped, sha256(b"wrap:" + witness.encode("utf-8")))
    return _xor(envelope.ciphertext, content_key)
