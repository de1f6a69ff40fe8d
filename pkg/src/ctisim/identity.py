"""Authority-mediated registration of pseudonymous stakeholders.

Identity proofs are abstracted to an evidence digest; a registration is
accepted whenever the digest is non-empty. Stakeholder ids and signing
secrets are derived deterministically from the evidence digest so that a
scenario replays byte-identically.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .encoding import Digest
from .errors import DuplicateRegistration, NotAnAuthority, UnknownStakeholder
from .ledger import Transaction, TxKind, keyed_digest, sha256
from .payloads import RegisterBody


class Role(Enum):
    Producer = "Producer"
    Consumer = "Consumer"
    Verifier = "Verifier"
    Authority = "Authority"


@dataclass(frozen=True)
class ProofOfIdentity:
    claimed_roles: frozenset[Role]
    attributes: frozenset[str]
    evidence_digest: Digest


@dataclass
class Credential:
    stakeholder: Digest
    roles: frozenset[Role]
    attributes: frozenset[str]
    issued_round: int
    revoked: bool
    secret: bytes


def stakeholder_id(evidence_digest: Digest) -> Digest:
    return sha256(b"stakeholder:" + evidence_digest)


def derive_secret(evidence_digest: Digest) -> bytes:
    return sha256(b"credential-secret:" + evidence_digest)


def evidence_for(name: str) -> Digest:
    """Deterministic stand-in for real identity evidence, keyed by agent name."""
    return sha256(b"evidence:" + name.encode("utf-8"))


def verify_signature(credential: Credential, payload: bytes, signature: bytes) -> bool:
    if credential.revoked:
        return False
    return signature == keyed_digest(credential.secret, payload)


class Registry:
    """Credential store; the single writer is the simulation round loop."""

    def __init__(self, initial_score: int = 50):
        self.credentials: dict[Digest, Credential] = {}
        self.initial_score = initial_score

    def get(self, stakeholder: Digest) -> Credential:
        try:
            return self.credentials[stakeholder]
        except KeyError:
            raise UnknownStakeholder(stakeholder.hex()) from None

    def bootstrap(self, proof: ProofOfIdentity, round_no: int = 0) -> tuple[Credential, Transaction]:
        """Self-registration of the first authority; only valid on an empty registry."""
        if self.credentials:
            raise NotAnAuthority("bootstrap only allowed on an empty registry")
        if Role.Authority not in proof.claimed_roles:
            raise NotAnAuthority("bootstrap credential must claim the Authority role")
        return self._issue(proof, author=None, round_no=round_no)

    def register(
        self, proof: ProofOfIdentity, authority: Digest, round_no: int = 0
    ) -> tuple[Credential, Transaction]:
        auth_cred = self.credentials.get(authority)
        if auth_cred is None or auth_cred.revoked or Role.Authority not in auth_cred.roles:
            raise NotAnAuthority(f"{authority.hex()[:12]} is not an acting authority")
        return self._issue(proof, author=auth_cred, round_no=round_no)

    def _issue(
        self, proof: ProofOfIdentity, author: Optional[Credential], round_no: int
    ) -> tuple[Credential, Transaction]:
        if not proof.claimed_roles:
            raise NotAnAuthority("credential must claim at least one role")
        if not proof.evidence_digest:
            raise NotAnAuthority("identity evidence required")
        sid = stakeholder_id(proof.evidence_digest)
        if sid in self.credentials:
            raise DuplicateRegistration(sid.hex())
        secret = derive_secret(proof.evidence_digest)
        cred = Credential(
            stakeholder=sid,
            roles=frozenset(proof.claimed_roles),
            attributes=frozenset(proof.attributes),
            issued_round=round_no,
            revoked=False,
            secret=secret,
        )
        self.credentials[sid] = cred
        body = RegisterBody(
            stakeholder=sid,
            roles=tuple(sorted(r.value for r in cred.roles)),
            attributes=tuple(sorted(cred.attributes)),
            evidence_digest=proof.evidence_digest,
            secret=secret,
            initial_score=self.initial_score,
        )
        signer = author if author is not None else cred
        tx = Transaction.create(signer.stakeholder, TxKind.Register, body.encode(), signer.secret)
        return cred, tx

    def revoke(self, stakeholder: Digest, authority: Optional[Digest] = None, automatic: bool = False) -> None:
        """Revoke a credential. Manual revocation needs an authority; the
        automatic path is triggered by reputation falling below threshold.
        Idempotent."""
        if not automatic:
            auth = self.credentials.get(authority) if authority else None
            if auth is None or Role.Authority not in auth.roles:
                raise NotAnAuthority("manual revocation requires an authority")
        cred = self.get(stakeholder)
        cred.revoked = True

    def verify_signature(self, author: Digest, payload: bytes, signature: bytes) -> bool:
        """Live check used when creating transactions: revoked fails."""
        cred = self.credentials.get(author)
        if cred is None:
            return False
        return verify_signature(cred, payload, signature)

    def authenticate_committed(self, author: Digest, payload: bytes, signature: bytes) -> bool:
        """Position-independent check used when sealing already-authored
        transactions; revocation ordering is handled by chain replay."""
        cred = self.credentials.get(author)
        if cred is None:
            return False
        return signature == keyed_digest(cred.secret, payload)

    def is_authority(self, stakeholder: Digest) -> bool:
        cred = self.credentials.get(stakeholder)
        return cred is not None and not cred.revoked and Role.Authority in cred.roles

    def has_role(self, stakeholder: Digest, role: Role) -> bool:
        cred = self.credentials.get(stakeholder)
        return cred is not None and role in cred.roles

    def active_ids(self) -> list[Digest]:
        """Registered, unrevoked stakeholders in stable (id) order."""
        return sorted(sid for sid, c in self.credentials.items() if not c.revoked)
