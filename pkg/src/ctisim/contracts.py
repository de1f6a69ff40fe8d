"""Deterministic contract state machines executed against ledger transactions.

Covers the whole money and trust path of a submission: deposit escrow,
three-verifier quality votes, the validity score combining vote fraction
with producer reputation, deposit refund or forfeiture, subscription
discounts, verification-fee payouts, marketplace purchases, and the 1-100
reputation ledger with its participation threshold.

All state is a pure fold over the chain's transactions, so read-side
recomputation can run in parallel; the single writer is the engine's
round loop.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .access_control import authorize
from .cti import CtiRecord, record_bytes, validate_format
from .encoding import Digest
from .errors import (
    AccessDenied,
    AlreadyFinalized,
    AlreadyVoted,
    BelowTrustThreshold,
    ContractClosed,
    DuplicateRecord,
    FormatInvalid,
    InsufficientBalance,
    NotAssigned,
    NotForSale,
    NotVerified,
    NotYetExpired,
    QuorumNotMet,
    UnknownStakeholder,
    VerifierPoolTooSmall,
)
from .identity import Registry, Role
from .ledger import Transaction, TxKind
from .payloads import (
    AccessGrantBody,
    FinalizeBody,
    PurchaseBody,
    RenewBody,
    ReputationUpdateBody,
    SubmitCtiBody,
    VoteBody,
)


class Vote(Enum):
    HighQuality = "HighQuality"
    LowQuality = "LowQuality"


class ContractStatus(Enum):
    PendingVerification = "PendingVerification"
    Verified = "Verified"
    Rejected = "Rejected"


class DepositState(Enum):
    Escrowed = "Escrowed"
    Refunded = "Refunded"
    Forfeited = "Forfeited"


class ForfeiturePolicy(Enum):
    Split = "Split"
    Burn = "Burn"
    HoldInContract = "HoldInContract"


@dataclass
class VerificationPolicy:
    """Parameters of the validity score: weight on the vote fraction,
    acceptance threshold, and quorum size."""

    alpha: float = 0.8
    tau: float = 0.5
    quorum: int = 3


@dataclass(frozen=True)
class PiResult:
    valid: bool
    score: float


def evaluate_pi(policy: VerificationPolicy, votes: list[Vote], producer_score: int) -> PiResult:
    """score = alpha * (high-quality fraction) + (1 - alpha) * (reputation / 100)."""
    if len(votes) != policy.quorum:
        raise QuorumNotMet(f"need {policy.quorum} votes, have {len(votes)}")
    hq = sum(1 for v in votes if v is Vote.HighQuality)
    score = policy.alpha * (hq / policy.quorum) + (1.0 - policy.alpha) * (producer_score / 100.0)
    return PiResult(valid=score >= policy.tau, score=score)


@dataclass
class ReputationLedger:
    """Per-stakeholder score in [1, 100] with a participation threshold."""

    trust_threshold: int = 30
    delta_valid: int = 2
    delta_invalid: int = -10
    delta_majority_vote: int = 1
    delta_minority_vote: int = -3
    initial_score: int = 50
    scores: dict[Digest, int] = field(default_factory=dict)

    def add(self, stakeholder: Digest) -> int:
        self.scores[stakeholder] = self._clamp(self.initial_score)
        return self.scores[stakeholder]

    def score_of(self, stakeholder: Digest) -> int:
        try:
            return self.scores[stakeholder]
        except KeyError:
            raise UnknownStakeholder(stakeholder.hex()) from None

    def apply(self, stakeholder: Digest, delta: int) -> int:
        new = self._clamp(self.score_of(stakeholder) + delta)
        self.scores[stakeholder] = new
        return new

    def is_trusted(self, stakeholder: Digest) -> bool:
        return self.score_of(stakeholder) >= self.trust_threshold

    @staticmethod
    def _clamp(score: int) -> int:
        return max(1, min(100, score))


@dataclass
class ReportContract:
    contract_id: Digest
    record: CtiRecord
    content_ref: Digest
    status: ContractStatus
    assigned_verifiers: tuple[Digest, Digest, Digest]
    votes: dict[Digest, Vote]
    deposit: int
    deposit_state: DepositState
    verification_fee: int
    created_round: int
    finalized_round: Optional[int] = None
    pi_score: Optional[float] = None


@dataclass
class SubscriptionContract:
    base_fee: int = 0
    period_rounds: int = 10
    discount_per_hq: int = 0
    accrued_discount: dict[Digest, int] = field(default_factory=dict)
    paid_through: dict[Digest, int] = field(default_factory=dict)

    def enroll(self, stakeholder: Digest, round_no: int) -> None:
        # Registration covers the first period; renewals are charged after.
        self.accrued_discount[stakeholder] = 0
        self.paid_through[stakeholder] = round_no + self.period_rounds

    def accrue(self, stakeholder: Digest, amount: int) -> None:
        self.accrued_discount[stakeholder] = self.accrued_discount.get(stakeholder, 0) + amount


@dataclass
class MarketContract:
    """Balances, escrow and the forfeit/burn pools; conservation is
    minted == sum(balances) + escrow + held + burned at all times."""

    balances: dict[Digest, int] = field(default_factory=dict)
    escrow: int = 0
    held: int = 0
    burned: int = 0
    minted: int = 0
    listings: dict[Digest, int] = field(default_factory=dict)

    def mint(self, stakeholder: Digest, amount: int) -> None:
        self.balances[stakeholder] = self.balances.get(stakeholder, 0) + amount
        self.minted += amount

    def balance_of(self, stakeholder: Digest) -> int:
        return self.balances.get(stakeholder, 0)

    def transfer(self, src: Digest, dst: Digest, amount: int) -> None:
        if self.balance_of(src) < amount:
            raise InsufficientBalance(f"{src.hex()[:12]} short {amount - self.balance_of(src)}")
        self.balances[src] -= amount
        self.balances[dst] = self.balances.get(dst, 0) + amount

    def to_escrow(self, src: Digest, amount: int) -> None:
        if self.balance_of(src) < amount:
            raise InsufficientBalance(f"{src.hex()[:12]} short {amount - self.balance_of(src)}")
        self.balances[src] -= amount
        self.escrow += amount

    def escrow_to(self, dst: Digest, amount: int) -> None:
        assert self.escrow >= amount, "escrow underflow"
        self.escrow -= amount
        self.balances[dst] = self.balances.get(dst, 0) + amount

    def escrow_burn(self, amount: int) -> None:
        assert self.escrow >= amount, "escrow underflow"
        self.escrow -= amount
        self.burned += amount

    def escrow_hold(self, amount: int) -> None:
        assert self.escrow >= amount, "escrow underflow"
        self.escrow -= amount
        self.held += amount

    def total_supply(self) -> int:
        return sum(self.balances.values()) + self.escrow + self.held

    def conserved(self) -> bool:
        return self.total_supply() + self.burned == self.minted


@dataclass(frozen=True)
class VerificationOutcome:
    contract_id: Digest
    status: ContractStatus
    pi_score: float
    deposit_state: DepositState
    majority_high_quality: bool
    verifier_payouts: dict[Digest, int]
    reputation_changes: dict[Digest, int]
    discounts: dict[Digest, int]
    revoked: tuple[Digest, ...]
    burned: int


@dataclass(frozen=True)
class AccessGrant:
    contract_id: Digest
    consumer: Digest
    price: int
    content_digest: Digest


class ContractSystem:
    """Executes the contract operations and emits the matching transactions.

    Transactions returned by each operation are the engine's to batch into
    the current round's block.
    """

    def __init__(
        self,
        registry: Registry,
        policy: VerificationPolicy,
        reputation: ReputationLedger,
        subscription: SubscriptionContract,
        market: MarketContract,
        authority: Digest,
        forfeiture: ForfeiturePolicy = ForfeiturePolicy.Split,
        verification_fee: int = 0,
    ):
        self.registry = registry
        self.policy = policy
        self.reputation = reputation
        self.subscription = subscription
        self.market = market
        self.authority = authority
        self.forfeiture = forfeiture
        self.verification_fee = verification_fee
        self.contracts: dict[Digest, ReportContract] = {}

    # -- submission -----------------------------------------------------

    def verifier_pool(self, producer: Digest) -> list[Digest]:
        """Trusted verifiers eligible for assignment, in stable id order."""
        pool = []
        for sid, cred in self.registry.credentials.items():
            if cred.revoked or Role.Verifier not in cred.roles or sid == producer:
                continue
            if sid in self.reputation.scores and self.reputation.is_trusted(sid):
                pool.append(sid)
        return sorted(pool)

    def submit_report(
        self, producer: Digest, record: CtiRecord, deposit: int, rng: random.Random
    ) -> tuple[ReportContract, list[Transaction]]:
        cred = self.registry.get(producer)
        if not self.reputation.is_trusted(producer):
            raise BelowTrustThreshold(
                f"score {self.reputation.score_of(producer)} < {self.reputation.trust_threshold}"
            )
        violations = validate_format(record)
        if violations:
            raise FormatInvalid(violations)
        if record.record_id in self.contracts:
            raise DuplicateRecord(record.record_id.hex())
        fee = self.verification_fee if record.sale_price is not None else 0
        need = deposit + fee
        if self.market.balance_of(producer) < need:
            raise InsufficientBalance(f"need {need}, have {self.market.balance_of(producer)}")
        pool = self.verifier_pool(producer)
        if len(pool) < self.policy.quorum:
            raise VerifierPoolTooSmall(f"{len(pool)} eligible, need {self.policy.quorum}")
        verifiers = tuple(rng.sample(pool, self.policy.quorum))

        self.market.to_escrow(producer, need)
        contract = ReportContract(
            contract_id=record.record_id,
            record=record,
            content_ref=record.narrative_digest,
            status=ContractStatus.PendingVerification,
            assigned_verifiers=verifiers,
            votes={},
            deposit=deposit,
            deposit_state=DepositState.Escrowed,
            verification_fee=fee,
            created_round=record.created_round,
        )
        self.contracts[contract.contract_id] = contract
        if record.sale_price is not None:
            self.market.listings[contract.contract_id] = record.sale_price
        body = SubmitCtiBody(
            contract_id=contract.contract_id,
            record_bytes=record_bytes(record),
            deposit=deposit,
            verification_fee=fee,
            verifiers=verifiers,
        )
        tx = Transaction.create(producer, TxKind.SubmitCti, body.encode(), cred.secret)
        return contract, [tx]

    # -- voting ----------------------------------------------------------

    def cast_vote(self, verifier: Digest, contract_id: Digest, vote: Vote) -> list[Transaction]:
        contract = self.contracts.get(contract_id)
        if contract is None or contract.status is not ContractStatus.PendingVerification:
            raise ContractClosed(contract_id.hex())
        if verifier not in contract.assigned_verifiers:
            raise NotAssigned(verifier.hex()[:12])
        if verifier in contract.votes:
            raise AlreadyVoted(verifier.hex()[:12])
        if not self.reputation.is_trusted(verifier):
            raise BelowTrustThreshold(f"verifier score below {self.reputation.trust_threshold}")
        cred = self.registry.get(verifier)
        contract.votes[verifier] = vote
        body = VoteBody(contract_id=contract_id, vote=vote.value)
        return [Transaction.create(verifier, TxKind.Vote, body.encode(), cred.secret)]

    # -- finalization ----------------------------------------------------

    def finalize_verification(
        self, contract_id: Digest, round_no: int
    ) -> tuple[VerificationOutcome, list[Transaction]]:
        contract = self.contracts.get(contract_id)
        if contract is None:
            raise ContractClosed(contract_id.hex())
        if contract.status is not ContractStatus.PendingVerification:
            raise AlreadyFinalized(contract_id.hex())
        ordered_votes = [
            contract.votes[v] for v in contract.assigned_verifiers if v in contract.votes
        ]
        if len(ordered_votes) != self.policy.quorum:
            raise QuorumNotMet(f"{len(ordered_votes)} of {self.policy.quorum} votes cast")

        producer = contract.record.producer
        pi = evaluate_pi(self.policy, ordered_votes, self.reputation.score_of(producer))
        hq_count = sum(1 for v in ordered_votes if v is Vote.HighQuality)
        majority_hq = hq_count * 2 > self.policy.quorum
        majority_vote = Vote.HighQuality if majority_hq else Vote.LowQuality

        payouts: dict[Digest, int] = {}
        burned = 0

        # (a) status
        contract.status = ContractStatus.Verified if pi.valid else ContractStatus.Rejected
        contract.finalized_round = round_no
        contract.pi_score = pi.score

        # (b) deposit
        if pi.valid:
            self.market.escrow_to(producer, contract.deposit)
            contract.deposit_state = DepositState.Refunded
        else:
            contract.deposit_state = DepositState.Forfeited
            if self.forfeiture is ForfeiturePolicy.Burn:
                self.market.escrow_burn(contract.deposit)
                burned += contract.deposit
            elif self.forfeiture is ForfeiturePolicy.HoldInContract:
                self.market.escrow_hold(contract.deposit)
            else:
                share = contract.deposit // self.policy.quorum
                for v in contract.assigned_verifiers:
                    self.market.escrow_to(v, share)
                    payouts[v] = payouts.get(v, 0) + share
                remainder = contract.deposit - share * self.policy.quorum
                if remainder:
                    self.market.escrow_burn(remainder)
                    burned += remainder

        # (c) subscription discounts: verifiers always, producer only on
        # a high-quality majority
        discounts: dict[Digest, int] = {}
        per_hq = self.subscription.discount_per_hq
        if per_hq > 0:
            for v in contract.assigned_verifiers:
                self.subscription.accrue(v, per_hq)
                discounts[v] = per_hq
            if majority_hq:
                self.subscription.accrue(producer, per_hq)
                discounts[producer] = per_hq

        # (d) reputation
        rep_changes: dict[Digest, int] = {}
        producer_delta = self.reputation.delta_valid if pi.valid else self.reputation.delta_invalid
        rep_changes[producer] = self.reputation.apply(producer, producer_delta)
        for v in contract.assigned_verifiers:
            delta = (
                self.reputation.delta_majority_vote
                if contract.votes[v] is majority_vote
                else self.reputation.delta_minority_vote
            )
            rep_changes[v] = self.reputation.apply(v, delta)

        # (e) verification fee payout
        if contract.verification_fee:
            share = contract.verification_fee // self.policy.quorum
            for v in contract.assigned_verifiers:
                self.market.escrow_to(v, share)
                payouts[v] = payouts.get(v, 0) + share
            remainder = contract.verification_fee - share * self.policy.quorum
            if remainder:
                self.market.escrow_burn(remainder)
                burned += remainder

        # (f) on-chain result + any threshold revocations
        txs: list[Transaction] = []
        auth_cred = self.registry.get(self.authority)
        body = FinalizeBody(
            contract_id=contract_id,
            status=contract.status.value,
            score_micro=int(round(pi.score * 1_000_000)),
            deposit_state=contract.deposit_state.value,
        )
        txs.append(
            Transaction.create(self.authority, TxKind.FinalizeVerification, body.encode(), auth_cred.secret)
        )

        revoked: list[Digest] = []
        for sid in [producer, *contract.assigned_verifiers]:
            if not self.reputation.is_trusted(sid) and not self.registry.get(sid).revoked:
                self.registry.revoke(sid, automatic=True)
                revoked.append(sid)
                rb = ReputationUpdateBody(
                    stakeholder=sid,
                    score=self.reputation.score_of(sid),
                    revoked=True,
                    reason="reputation below trust threshold",
                )
                txs.append(
                    Transaction.create(self.authority, TxKind.ReputationUpdate, rb.encode(), auth_cred.secret)
                )

        outcome = VerificationOutcome(
            contract_id=contract_id,
            status=contract.status,
            pi_score=pi.score,
            deposit_state=contract.deposit_state,
            majority_high_quality=majority_hq,
            verifier_payouts=payouts,
            reputation_changes=rep_changes,
            discounts=discounts,
            revoked=tuple(revoked),
            burned=burned,
        )
        return outcome, txs

    # -- marketplace -----------------------------------------------------

    def purchase(
        self, consumer: Digest, contract_id: Digest, group_members: set[Digest]
    ) -> tuple[AccessGrant, list[Transaction]]:
        contract = self.contracts.get(contract_id)
        if contract is None:
            raise NotForSale(contract_id.hex())
        if contract.status is not ContractStatus.Verified:
            raise NotVerified(contract_id.hex())
        price = self.market.listings.get(contract_id)
        if price is None:
            raise NotForSale(contract_id.hex())
        if consumer == contract.record.producer:
            raise AccessDenied("producers may not consume their own records")
        if self.market.balance_of(consumer) < price:
            raise InsufficientBalance(f"need {price}, have {self.market.balance_of(consumer)}")
        cred = self.registry.get(consumer)
        record = contract.record
        if not authorize(cred, record.tlp, record.policy, group_members):
            raise AccessDenied(consumer.hex()[:12])

        self.market.transfer(consumer, record.producer, price)
        grant = AccessGrant(
            contract_id=contract_id,
            consumer=consumer,
            price=price,
            content_digest=contract.content_ref,
        )
        auth_cred = self.registry.get(self.authority)
        txs = [
            Transaction.create(
                consumer, TxKind.Purchase, PurchaseBody(contract_id, price).encode(), cred.secret
            ),
            Transaction.create(
                self.authority,
                TxKind.AccessGrant,
                AccessGrantBody(contract_id, consumer).encode(),
                auth_cred.secret,
            ),
        ]
        return grant, txs

    # -- subscriptions ---------------------------------------------------

    def renew_subscription(self, user: Digest, round_no: int) -> tuple[int, list[Transaction]]:
        """Charge max(0, base_fee - accrued discount); returns the charge."""
        sub = self.subscription
        if user not in sub.paid_through:
            raise UnknownStakeholder(user.hex())
        if round_no < sub.paid_through[user]:
            raise NotYetExpired(f"paid through round {sub.paid_through[user]}")
        accrued = sub.accrued_discount.get(user, 0)
        charge = max(0, sub.base_fee - accrued)
        if self.market.balance_of(user) < charge:
            raise InsufficientBalance(f"renewal needs {charge}")
        if charge:
            self.market.transfer(user, self.authority, charge)
        sub.accrued_discount[user] = 0
        sub.paid_through[user] = sub.paid_through[user] + sub.period_rounds
        cred = self.registry.get(user)
        body = RenewBody(charge=charge, paid_through=sub.paid_through[user])
        tx = Transaction.create(user, TxKind.RenewSubscription, body.encode(), cred.secret)
        return charge, [tx]

    def reputation_of(self, user: Digest) -> int:
        return self.reputation.score_of(user)
