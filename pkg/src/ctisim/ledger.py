"""Append-only hash-linked block store.

One block is sealed per simulation round by the platform authority; block
timestamps are round numbers, never wall clock. Tamper evidence comes from
three commitments: transaction ids (hash of author, kind and payload),
per-block Merkle roots over transaction ids, and the previous-header hash
carried by every block. verify_chain replays the whole chain, rebuilding
the credential map from Register payloads so that a bare dump can be
re-verified with no out-of-band state.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Optional

from .encoding import ZERO_DIGEST, Digest, Writer
from .errors import (
    EmptyTransactionList,
    EncodingError,
    InvalidSignature,
    UnauthorizedSealer,
)
from .payloads import RegisterBody, ReputationUpdateBody


def sha256(data: bytes) -> Digest:
    return hashlib.sha256(data).digest()


def keyed_digest(secret: bytes, payload: bytes) -> bytes:
    """Simulated signature: digest keyed by the credential secret."""
    return sha256(Writer().put_bytes(secret).put_bytes(payload).getvalue())


class TxKind(Enum):
    Register = "Register"
    SubmitCti = "SubmitCti"
    Vote = "Vote"
    FinalizeVerification = "FinalizeVerification"
    Purchase = "Purchase"
    RenewSubscription = "RenewSubscription"
    ReputationUpdate = "ReputationUpdate"
    AccessGrant = "AccessGrant"


@dataclass(frozen=True)
class Transaction:
    tx_id: Digest
    author: Digest
    kind: TxKind
    payload: bytes
    signature: bytes

    @staticmethod
    def compute_id(author: Digest, kind: TxKind, payload: bytes) -> Digest:
        w = Writer().put_bytes(author).put_str(kind.value).put_bytes(payload)
        return sha256(w.getvalue())

    @classmethod
    def create(cls, author: Digest, kind: TxKind, payload: bytes, secret: bytes) -> "Transaction":
        return cls(
            tx_id=cls.compute_id(author, kind, payload),
            author=author,
            kind=kind,
            payload=payload,
            signature=keyed_digest(secret, payload),
        )


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: Digest
    merkle_root: Digest
    timestamp: int
    nonce: int
    sealer: Digest
    transactions: tuple[Transaction, ...]


@dataclass
class Chain:
    blocks: list[Block] = field(default_factory=list)
    difficulty: int = 0

    @classmethod
    def new(cls, difficulty: int = 0) -> "Chain":
        return cls(blocks=[make_genesis()], difficulty=difficulty)

    @property
    def head(self) -> Block:
        return self.blocks[-1]


def make_genesis() -> Block:
    """Genesis is fixed: all-zero linkage, no transactions, zero sealer."""
    return Block(
        height=0,
        prev_hash=ZERO_DIGEST,
        merkle_root=merkle_root(()),
        timestamp=0,
        nonce=0,
        sealer=ZERO_DIGEST,
        transactions=(),
    )


def merkle_root(transactions: Iterable[Transaction]) -> Digest:
    """Merkle root over transaction ids; odd levels duplicate the last node."""
    level = [tx.tx_id for tx in transactions]
    if not level:
        return ZERO_DIGEST
    while len(level) > 1:
        if len(level) % 2 == 1:
            level.append(level[-1])
        level = [sha256(level[i] + level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


def hash_header(block: Block) -> Digest:
    w = Writer()
    w.put_uint(block.height)
    w.put_bytes(block.prev_hash)
    w.put_bytes(block.merkle_root)
    w.put_uint(block.timestamp)
    w.put_uint(block.nonce)
    w.put_bytes(block.sealer)
    return sha256(w.getvalue())


def leading_zero_bits(digest: Digest) -> int:
    bits = 0
    for byte in digest:
        if byte == 0:
            bits += 8
            continue
        for shift in range(7, -1, -1):
            if byte >> shift:
                return bits + (7 - shift)
        return bits
    return bits


Authenticator = Callable[[Digest, bytes, bytes], bool]


def append_block(
    chain: Chain,
    txs: list[Transaction],
    sealer: Digest,
    authenticator: Authenticator,
    is_authority: Callable[[Digest], bool],
    timestamp: int,
    allow_empty: bool = False,
    round_sealer: Optional[Digest] = None,
) -> Block:
    """Seal a new block onto the chain.

    The authenticator checks each committed signature against the author's
    credential secret. It is position-independent on purpose: a round's
    block may contain transactions authored just before a same-round
    revocation, and revocation ordering is enforced at transaction creation
    time and by verify_chain replay.
    """
    if not txs and not allow_empty:
        raise EmptyTransactionList("only heartbeat blocks may be empty")
    for tx in txs:
        if tx.tx_id != Transaction.compute_id(tx.author, tx.kind, tx.payload):
            raise InvalidSignature(tx.tx_id)
        if not authenticator(tx.author, tx.payload, tx.signature):
            raise InvalidSignature(tx.tx_id)
    if not is_authority(sealer) and sealer != round_sealer:
        raise UnauthorizedSealer(f"sealer {sealer.hex()[:12]} lacks authority")

    height = len(chain.blocks)
    prev_hash = hash_header(chain.head)
    root = merkle_root(txs)
    nonce = 0
    block = Block(height, prev_hash, root, timestamp, nonce, sealer, tuple(txs))
    if chain.difficulty > 0:
        while leading_zero_bits(hash_header(block)) < chain.difficulty:
            nonce += 1
            block = Block(height, prev_hash, root, timestamp, nonce, sealer, tuple(txs))
    chain.blocks.append(block)
    return block


@dataclass(frozen=True)
class VerificationReport:
    valid: bool
    first_bad_height: Optional[int] = None
    reason: Optional[str] = None


def verify_chain(chain: Chain) -> VerificationReport:
    """Replay the chain and report the earliest invariant violation.

    Rebuilds credentials from Register payloads in chain order, so every
    signature (including the bootstrap self-registration) is recheckable
    from the dump alone. Revocations recorded on-chain invalidate any later
    transaction by the revoked author.
    """
    if not chain.blocks:
        return VerificationReport(False, 0, "missing genesis block")

    secrets: dict[Digest, bytes] = {}
    roles: dict[Digest, set[str]] = {}
    revoked: set[Digest] = set()
    prev_timestamp = 0

    for i, block in enumerate(chain.blocks):
        def bad(reason: str) -> VerificationReport:
            return VerificationReport(False, i, reason)

        if block.height != i:
            return bad("height mismatch")
        if i == 0:
            if block.prev_hash != ZERO_DIGEST:
                return bad("genesis prev_hash not zero")
            if block.sealer != ZERO_DIGEST:
                return bad("genesis sealer not zero")
            if block.transactions:
                return bad("genesis carries transactions")
            if block.timestamp != 0:
                return bad("genesis timestamp not zero")
        else:
            if block.prev_hash != hash_header(chain.blocks[i - 1]):
                return bad("broken prev_hash link")
            if block.timestamp < prev_timestamp:
                return bad("timestamp decreased")
        if block.merkle_root != merkle_root(block.transactions):
            return bad("merkle root mismatch")
        if chain.difficulty > 0:
            if leading_zero_bits(hash_header(block)) < chain.difficulty:
                return bad("difficulty not met")
        elif block.nonce != 0:
            return bad("nonzero nonce at difficulty 0")

        for tx in block.transactions:
            if tx.tx_id != Transaction.compute_id(tx.author, tx.kind, tx.payload):
                return bad("transaction id mismatch")
            if tx.kind is TxKind.Register:
                try:
                    body = RegisterBody.decode(tx.payload)
                except EncodingError:
                    return bad("malformed Register payload")
                if tx.author in revoked:
                    return bad("transaction by revoked author")
                if tx.author in secrets:
                    expected = keyed_digest(secrets[tx.author], tx.payload)
                elif tx.author == body.stakeholder:
                    # Bootstrap: the first authority self-registers.
                    expected = keyed_digest(body.secret, tx.payload)
                else:
                    return bad("Register by unregistered author")
                if tx.signature != expected:
                    return bad("bad Register signature")
                if body.stakeholder in secrets:
                    return bad("duplicate registration")
                secrets[body.stakeholder] = body.secret
                roles[body.stakeholder] = set(body.roles)
            else:
                if tx.author not in secrets:
                    return bad("transaction by unregistered author")
                if tx.author in revoked:
                    return bad("transaction by revoked author")
                if tx.signature != keyed_digest(secrets[tx.author], tx.payload):
                    return bad("bad signature")
                if tx.kind is TxKind.ReputationUpdate:
                    try:
                        body = ReputationUpdateBody.decode(tx.payload)
                    except EncodingError:
                        return bad("malformed ReputationUpdate payload")
                    if body.revoked:
                        revoked.add(body.stakeholder)

        if i > 0 and "Authority" not in roles.get(block.sealer, set()):
            return bad("sealer lacks Authority role")
        prev_timestamp = block.timestamp

    return VerificationReport(True)


def query(
    chain: Chain,
    kind: Optional[TxKind] = None,
    author: Optional[Digest] = None,
    round_range: Optional[tuple[int, int]] = None,
) -> list[Transaction]:
    """All matching transactions in chain order; filters are conjunctive."""
    out: list[Transaction] = []
    for block in chain.blocks:
        if round_range is not None:
            lo, hi = round_range
            if not (lo <= block.timestamp <= hi):
                continue
        for tx in block.transactions:
            if kind is not None and tx.kind is not kind:
                continue
            if author is not None and tx.author != author:
                continue
            out.append(tx)
    return out


# --- chain.json dump -------------------------------------------------------

def chain_to_obj(chain: Chain) -> list[dict]:
    blocks = []
    for b in chain.blocks:
        blocks.append(
            {
                "height": b.height,
                "prev_hash": b.prev_hash.hex(),
                "merkle_root": b.merkle_root.hex(),
                "timestamp": b.timestamp,
                "nonce": b.nonce,
                "sealer": b.sealer.hex(),
                "transactions": [
                    {
                        "tx_id": t.tx_id.hex(),
                        "author": t.author.hex(),
                        "kind": t.kind.value,
                        "payload": t.payload.hex(),
                        "signature": t.signature.hex(),
                    }
                    for t in b.transactions
                ],
            }
        )
    return blocks


def chain_to_json(chain: Chain) -> str:
    return json.dumps(chain_to_obj(chain), indent=2) + "\n"


def chain_from_json(text: str, difficulty: int = 0) -> Chain:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise EncodingError(f"unparseable chain dump: {exc}") from exc
    if not isinstance(raw, list):
        raise EncodingError("chain dump must be a JSON array of blocks")
    blocks: list[Block] = []
    try:
        for rb in raw:
            txs = tuple(
                Transaction(
                    tx_id=bytes.fromhex(rt["tx_id"]),
                    author=bytes.fromhex(rt["author"]),
                    kind=TxKind(rt["kind"]),
                    payload=bytes.fromhex(rt["payload"]),
                    signature=bytes.fromhex(rt["signature"]),
                )
                for rt in rb["transactions"]
            )
            blocks.append(
                Block(
                    height=int(rb["height"]),
                    prev_hash=bytes.fromhex(rb["prev_hash"]),
                    merkle_root=bytes.fromhex(rb["merkle_root"]),
                    timestamp=int(rb["timestamp"]),
                    nonce=int(rb["nonce"]),
                    sealer=bytes.fromhex(rb["sealer"]),
                    transactions=txs,
                )
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise EncodingError(f"malformed chain dump: {exc}") from exc
    return Chain(blocks=blocks, difficulty=difficulty)
