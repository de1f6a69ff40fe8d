"""Agent-based round engine.

Registrations happen at round 0; every later round runs the same
synchronous phases: submissions, votes, finalizations, purchases,
renewals, then one sealed block. All state transitions materialize as
ledger transactions, and a fixed (config, seed) pair replays to a
byte-identical chain. Contract errors raised by an agent's action are
recorded as rejected-action events and never abort the run.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Optional

from .access_control import EncryptedEnvelope, TlpLabel, open_envelope, seal
from .contracts import (
    ContractSystem,
    ContractStatus,
    ForfeiturePolicy,
    MarketContract,
    ReportContract,
    ReputationLedger,
    SubscriptionContract,
    VerificationPolicy,
    Vote,
)
from .cti import CtiCategory, CtiRecord, GroundTruth, Ioc, IocKind, make_record
from .encoding import ZERO_DIGEST, Digest
from .errors import CtiSimError, NotYetExpired
from .identity import Credential, ProofOfIdentity, Registry, Role, evidence_for
from .ledger import Chain, Transaction, append_block, sha256
from .mining import Campaign, mine_campaigns

if TYPE_CHECKING:
    from .config import ScenarioConfig


class StrategyKind(Enum):
    HonestProducer = "HonestProducer"
    FreeRider = "FreeRider"
    FalseSharer = "FalseSharer"
    DoIFlooder = "DoIFlooder"
    HonestVerifier = "HonestVerifier"
    NoisyVerifier = "NoisyVerifier"
    LazyConsumer = "LazyConsumer"


SUBMITTING_KINDS = (StrategyKind.HonestProducer, StrategyKind.FalseSharer, StrategyKind.DoIFlooder)


@dataclass
class AgentStrategy:
    kind: StrategyKind
    share_rate: float = 1.0
    fabrication_rate: float = 0.0
    flood_multiplier: int = 1
    p_acc: float = 1.0
    consume_rate: float = 0.0
    utility_responsive: bool = False
    sale_price: Optional[int] = None


@dataclass
class UtilityModel:
    """Per-agent economics: what a genuine share risks, what consuming is
    worth, and the trailing window used to estimate incentive income."""

    sharing_risk_cost: int = 0
    consumption_benefit: int = 0
    window: int = 5


def verifier_vote_model(truth: GroundTruth, p_acc: float, rng: random.Random) -> Vote:
    """Truth-aligned vote with probability p_acc, the opposite otherwise."""
    aligned = Vote.HighQuality if truth is GroundTruth.Genuine else Vote.LowQuality
    opposite = Vote.LowQuality if aligned is Vote.HighQuality else Vote.HighQuality
    return aligned if rng.random() < p_acc else opposite


@dataclass
class AgentRoundLog:
    round_no: int
    shares: int = 0
    genuine_shares: int = 0
    verified: int = 0
    rejected: int = 0
    consumes: int = 0
    forfeited: int = 0
    income: int = 0  # realized: renewal discounts, sale revenue, verifier payouts


def compute_utility(history: list[AgentRoundLog], model: UtilityModel) -> list[int]:
    """utility_t = benefit*consumes - risk_cost*genuine_shares + realized income."""
    return [
        model.consumption_benefit * h.consumes
        - model.sharing_risk_cost * h.genuine_shares
        + h.income
        for h in history
    ]


@dataclass
class AgentState:
    name: str
    sid: Digest
    credential: Credential
    strategy: AgentStrategy
    endowment: int
    rounds: list[AgentRoundLog] = field(default_factory=list)
    events: list[tuple[int, str]] = field(default_factory=list)
    share_rounds: list[int] = field(default_factory=list)
    est_income_events: list[tuple[int, int]] = field(default_factory=list)
    record_counter: int = 0
    inactive: bool = False
    revoked_round: Optional[int] = None

    @property
    def current(self) -> AgentRoundLog:
        return self.rounds[-1]


@dataclass(frozen=True)
class MetricsRow:
    round_no: int
    agent: str
    reputation: int
    balance: int
    shares: int
    verified: int
    rejected: int
    consumes: int
    forfeited: int
    utility: int


CSV_COLUMNS = (
    "round",
    "agent",
    "reputation",
    "balance",
    "shares",
    "verified",
    "rejected",
    "consumes",
    "forfeited",
    "utility",
)


@dataclass
class MetricsSeries:
    rows: list[MetricsRow] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = [",".join(CSV_COLUMNS)]
        for r in self.rows:
            lines.append(
                f"{r.round_no},{r.agent},{r.reputation},{r.balance},{r.shares},"
                f"{r.verified},{r.rejected},{r.consumes},{r.forfeited},{r.utility}"
            )
        return "\n".join(lines) + "\n"

    def to_obj(self) -> list[dict]:
        return [
            {
                "round": r.round_no,
                "agent": r.agent,
                "reputation": r.reputation,
                "balance": r.balance,
                "shares": r.shares,
                "verified": r.verified,
                "rejected": r.rejected,
                "consumes": r.consumes,
                "forfeited": r.forfeited,
                "utility": r.utility,
            }
            for r in self.rows
        ]


@dataclass
class ScenarioResult:
    chain: Chain
    metrics: MetricsSeries
    contracts: dict[Digest, ReportContract]
    campaigns: list[Campaign]
    summary: dict
    agents: list[AgentState]


class Engine:
    """One scenario run; construct a fresh engine per run for parallel sweeps."""

    def __init__(self, config: "ScenarioConfig", seed: Optional[int] = None):
        self.cfg = config
        self.seed = config.seed if seed is None else seed
        self.rng = random.Random(self.seed)
        self.agents: list[AgentState] = []
        self.by_id: dict[Digest, AgentState] = {}
        self.envelopes: dict[Digest, EncryptedEnvelope] = {}

    # -- setup ------------------------------------------------------------

    def _register_all(self) -> list[Transaction]:
        cfg = self.cfg
        self.registry = Registry(initial_score=cfg.verification.initial_score)
        self.reputation = ReputationLedger(
            trust_threshold=cfg.verification.trust_threshold,
            delta_valid=cfg.verification.delta_valid,
            delta_invalid=cfg.verification.delta_invalid,
            delta_majority_vote=cfg.verification.delta_majority_vote,
            delta_minority_vote=cfg.verification.delta_minority_vote,
            initial_score=cfg.verification.initial_score,
        )
        subscription = SubscriptionContract(
            base_fee=cfg.economics.base_fee,
            period_rounds=cfg.economics.period_rounds,
            discount_per_hq=cfg.economics.discount_per_hq,
        )
        market = MarketContract()

        authority_spec = next(s for s in cfg.agents if Role.Authority in s.roles)
        txs: list[Transaction] = []
        ordered = [authority_spec] + [s for s in cfg.agents if s is not authority_spec]
        sid_by_name: dict[str, Digest] = {}
        for spec in ordered:
            proof = ProofOfIdentity(
                claimed_roles=spec.roles,
                attributes=spec.attributes,
                evidence_digest=evidence_for(spec.name),
            )
            if spec is authority_spec:
                cred, tx = self.registry.bootstrap(proof, round_no=0)
                self.authority = cred.stakeholder
            else:
                cred, tx = self.registry.register(proof, self.authority, round_no=0)
            txs.append(tx)
            sid_by_name[spec.name] = cred.stakeholder
            self.reputation.add(cred.stakeholder)
            market.mint(cred.stakeholder, spec.endowment)
            subscription.enroll(cred.stakeholder, 0)

        self.contracts = ContractSystem(
            registry=self.registry,
            policy=VerificationPolicy(
                alpha=cfg.verification.alpha,
                tau=cfg.verification.tau,
                quorum=3,
            ),
            reputation=self.reputation,
            subscription=subscription,
            market=market,
            authority=self.authority,
            forfeiture=cfg.economics.forfeiture,
            verification_fee=cfg.economics.verification_fee,
        )

        # agent action order follows the config, not registration order
        for spec in cfg.agents:
            sid = sid_by_name[spec.name]
            state = AgentState(
                name=spec.name,
                sid=sid,
                credential=self.registry.credentials[sid],
                strategy=spec.strategy,
                endowment=spec.endowment,
            )
            self.agents.append(state)
            self.by_id[sid] = state
        self._specs = {s.name: s for s in cfg.agents}
        self._names = {a.sid: a.name for a in self.agents}
        return txs

    def _resolve_access(self, spec_name: str):
        """TLP label and policy for records produced by this agent."""
        spec = self._specs[spec_name]
        access = spec.access if spec.access is not None else self.cfg.access
        designated = None
        if access.designated_names:
            designated = frozenset(
                a.sid for a in self.agents if a.name in access.designated_names
            )
        return TlpLabel(access.channel, designated), access.policy

    # -- per-round behavior -------------------------------------------------

    def _worth_sharing(self, agent: AgentState, round_no: int) -> bool:
        window = self.cfg.utility.window
        lo = round_no - window
        recent_shares = sum(1 for rr in agent.share_rounds if lo <= rr < round_no)
        if recent_shares == 0:
            return True  # probe: refresh the income estimate
        recent_income = sum(
            amt for rr, amt in agent.est_income_events if lo <= rr < round_no
        )
        return recent_income / recent_shares >= self.cfg.utility.sharing_risk_cost

    def _submission_plan(self, agent: AgentState, round_no: int) -> list[bool]:
        s = agent.strategy
        if s.kind is StrategyKind.DoIFlooder:
            return [True] * s.flood_multiplier
        if s.kind not in (StrategyKind.HonestProducer, StrategyKind.FalseSharer):
            return []
        if self.rng.random() >= s.share_rate:
            return []
        if s.kind is StrategyKind.FalseSharer:
            return [self.rng.random() < s.fabrication_rate]
        if s.utility_responsive and not self._worth_sharing(agent, round_no):
            return []
        return [False]

    def _sale_price_for(self, agent: AgentState) -> Optional[int]:
        mode = self.cfg.economics.sale_mode
        if mode == "fixed":
            return self.cfg.economics.fixed_price
        if mode == "producer-set":
            return agent.strategy.sale_price
        return None

    def _make_record(self, agent: AgentState, fabricated: bool, round_no: int) -> CtiRecord:
        agent.record_counter += 1
        n = agent.record_counter
        if fabricated:
            iocs = (Ioc(IocKind.Domain, f"bogus-{agent.name}-{n}.example", round_no),)
            truth = GroundTruth.Fabricated
        else:
            truth = GroundTruth.Genuine
            if self.rng.random() < 0.5:
                hint = f"camp-{self.rng.randint(1, 3)}"
                # the shared value is an opaque derivation of the hidden hint,
                # so the label itself never reaches emitted bytes
                shared = sha256(b"campaign-indicator:" + hint.encode())[:6].hex()
                iocs = (
                    Ioc(IocKind.Domain, f"shared-{shared}.example", round_no, hint),
                    Ioc(IocKind.Domain, f"{agent.name}-{n}.example", round_no, hint),
                )
            else:
                iocs = (Ioc(IocKind.Domain, f"{agent.name}-{n}.example", round_no),)
        tlp, policy = self._resolve_access(agent.name)
        return make_record(
            producer=agent.sid,
            category=CtiCategory.Technical,
            indicators=iocs,
            narrative_digest=ZERO_DIGEST,
            tlp=tlp,
            policy=policy,
            sale_price=self._sale_price_for(agent),
            created_round=round_no,
            ground_truth=truth,
        )

    def _can_act(self, agent: AgentState) -> Optional[str]:
        if agent.credential.revoked:
            return "Revoked"
        if agent.inactive:
            return "SubscriptionLapsed"
        return None

    # -- the run ------------------------------------------------------------

    def run(self) -> ScenarioResult:
        cfg = self.cfg
        chain = Chain.new(difficulty=0)
        metrics = MetricsSeries()
        if cfg.rounds == 0:
            return ScenarioResult(chain, metrics, {}, [], self._empty_summary(), [])

        reg_txs = self._register_all()
        append_block(
            chain,
            reg_txs,
            sealer=self.authority,
            authenticator=self.registry.authenticate_committed,
            is_authority=self.registry.is_authority,
            timestamp=0,
        )

        for round_no in range(1, cfg.rounds + 1):
            self._run_round(chain, metrics, round_no)

        campaigns = mine_campaigns(
            chain,
            window_rounds=cfg.mining.window_rounds,
            min_support=cfg.mining.min_support,
            min_overlap=cfg.mining.min_overlap,
        )
        summary = self._build_summary(campaigns)
        return ScenarioResult(
            chain=chain,
            metrics=metrics,
            contracts=self.contracts.contracts,
            campaigns=campaigns,
            summary=summary,
            agents=self.agents,
        )

    def _run_round(self, chain: Chain, metrics: MetricsSeries, round_no: int) -> None:
        cfg = self.cfg
        for agent in self.agents:
            agent.rounds.append(AgentRoundLog(round_no=round_no))
        round_txs: list[Transaction] = []
        submitted: list[ReportContract] = []

        # submissions
        for agent in self.agents:
            plan = self._submission_plan(agent, round_no)
            for fabricated in plan:
                blocker = self._can_act(agent)
                if blocker:
                    agent.events.append((round_no, blocker))
                    continue
                record = self._make_record(agent, fabricated, round_no)
                try:
                    contract, txs = self.contracts.submit_report(
                        agent.sid, record, cfg.economics.deposit, self.rng
                    )
                except CtiSimError as exc:
                    agent.events.append((round_no, type(exc).__name__))
                    continue
                self.envelopes[contract.contract_id] = seal(record)
                round_txs.extend(txs)
                submitted.append(contract)
                agent.current.shares += 1
                if not fabricated:
                    agent.current.genuine_shares += 1
                agent.share_rounds.append(round_no)

        # votes: the engine guarantees every assigned verifier votes this round
        for contract in submitted:
            for v_sid in contract.assigned_verifiers:
                v_agent = self.by_id[v_sid]
                vote = verifier_vote_model(
                    contract.record.ground_truth, v_agent.strategy.p_acc, self.rng
                )
                try:
                    round_txs.extend(self.contracts.cast_vote(v_sid, contract.contract_id, vote))
                except CtiSimError as exc:
                    v_agent.events.append((round_no, type(exc).__name__))

        # finalizations
        newly_verified: list[ReportContract] = []
        for contract in submitted:
            try:
                outcome, txs = self.contracts.finalize_verification(contract.contract_id, round_no)
            except CtiSimError as exc:
                self.by_id[contract.record.producer].events.append(
                    (round_no, type(exc).__name__)
                )
                continue
            round_txs.extend(txs)
            producer = self.by_id[contract.record.producer]
            if outcome.status is ContractStatus.Verified:
                producer.current.verified += 1
                newly_verified.append(contract)
            else:
                producer.current.rejected += 1
                producer.current.forfeited += contract.deposit
            for v_sid, amount in outcome.verifier_payouts.items():
                self.by_id[v_sid].current.income += amount
            for sid, amount in outcome.discounts.items():
                self.by_id[sid].est_income_events.append((round_no, amount))
            for sid in outcome.revoked:
                self.by_id[sid].revoked_round = round_no

        # purchases and free reads of this round's newly verified records
        group = set(self.registry.active_ids())
        for agent in self.agents:
            rate = agent.strategy.consume_rate
            if rate <= 0 or Role.Consumer not in agent.credential.roles:
                continue
            if self.rng.random() >= rate:
                continue
            if self._can_act(agent):
                continue
            for contract in newly_verified:
                if contract.record.producer == agent.sid:
                    continue
                cid = contract.contract_id
                if cid in self.contracts.market.listings:
                    try:
                        grant, txs = self.contracts.purchase(agent.sid, cid, group)
                    except CtiSimError as exc:
                        agent.events.append((round_no, type(exc).__name__))
                        continue
                    round_txs.extend(txs)
                    agent.current.consumes += 1
                    seller = self.by_id[contract.record.producer]
                    seller.current.income += grant.price
                    seller.est_income_events.append((round_no, grant.price))
                else:
                    try:
                        open_envelope(self.envelopes[cid], agent.credential, group)
                    except CtiSimError as exc:
                        agent.events.append((round_no, type(exc).__name__))
                        continue
                    agent.current.consumes += 1

        # subscription renewals at period boundaries
        if cfg.economics.base_fee > 0:
            for agent in self.agents:
                if agent.credential.revoked:
                    continue
                sub = self.contracts.subscription
                while sub.paid_through.get(agent.sid, 0) <= round_no:
                    try:
                        charge, txs = self.contracts.renew_subscription(agent.sid, round_no)
                    except NotYetExpired:
                        break
                    except CtiSimError as exc:
                        agent.events.append((round_no, type(exc).__name__))
                        agent.inactive = True
                        break
                    round_txs.extend(txs)
                    agent.current.income += cfg.economics.base_fee - charge
                    agent.inactive = False

        # metrics and the round's block
        for agent in self.agents:
            log = agent.current
            utility = compute_utility([log], cfg.utility)[0]
            metrics.rows.append(
                MetricsRow(
                    round_no=round_no,
                    agent=agent.name,
                    reputation=self.reputation.score_of(agent.sid),
                    balance=self.contracts.market.balance_of(agent.sid),
                    shares=log.shares,
                    verified=log.verified,
                    rejected=log.rejected,
                    consumes=log.consumes,
                    forfeited=log.forfeited,
                    utility=utility,
                )
            )

        if round_txs or cfg.heartbeat:
            append_block(
                chain,
                round_txs,
                sealer=self.authority,
                authenticator=self.registry.authenticate_committed,
                is_authority=self.registry.is_authority,
                timestamp=round_no,
                allow_empty=not round_txs,
            )

    # -- summaries ------------------------------------------------------------

    def _empty_summary(self) -> dict:
        return {
            "scenario": self.cfg.name,
            "rounds": 0,
            "seed": self.seed,
            "agents": {},
            "contracts": [],
            "campaigns": [],
            "aggregates": {},
        }

    def _build_summary(self, campaigns: list[Campaign]) -> dict:
        market = self.contracts.market
        contracts = sorted(
            self.contracts.contracts.values(),
            key=lambda c: (c.created_round, c.contract_id),
        )
        total_verified = sum(1 for c in contracts if c.status is ContractStatus.Verified)
        total_rejected = sum(1 for c in contracts if c.status is ContractStatus.Rejected)
        verified_fabricated = sum(
            1
            for c in contracts
            if c.status is ContractStatus.Verified
            and c.record.ground_truth is GroundTruth.Fabricated
        )
        poisoning_rate = verified_fabricated / total_verified if total_verified else 0.0
        # moral-hazard observable: currency verifiers pocketed from forfeits
        if self.cfg.economics.forfeiture is ForfeiturePolicy.Split:
            verifier_forfeit_income = sum(
                (c.deposit // 3) * 3
                for c in contracts
                if c.status is ContractStatus.Rejected
            )
        else:
            verifier_forfeit_income = 0

        agents_summary = {}
        for agent in self.agents:
            agents_summary[agent.name] = {
                "reputation": self.reputation.score_of(agent.sid),
                "balance": market.balance_of(agent.sid),
                "revoked": agent.credential.revoked,
                "revoked_round": agent.revoked_round,
                "rejected_actions": len(agent.events),
                "total_utility": sum(compute_utility(agent.rounds, self.cfg.utility)),
            }

        return {
            "scenario": self.cfg.name,
            "rounds": self.cfg.rounds,
            "seed": self.seed,
            "agents": agents_summary,
            "contracts": [
                {
                    "contract_id": c.contract_id.hex(),
                    "producer": self._names[c.record.producer],
                    "status": c.status.value,
                    "pi_score": round(c.pi_score, 6) if c.pi_score is not None else None,
                    "deposit": c.deposit,
                    "deposit_state": c.deposit_state.value,
                    "verification_fee": c.verification_fee,
                    "sale_price": c.record.sale_price,
                    "created_round": c.created_round,
                    "finalized_round": c.finalized_round,
                    "votes": {
                        self._names[v]: c.votes[v].value
                        for v in c.assigned_verifiers
                        if v in c.votes
                    },
                }
                for c in contracts
            ],
            "campaigns": [
                {
                    "campaign_id": c.campaign_id.hex(),
                    "member_records": sorted(m.hex() for m in c.member_records),
                    "shared_indicators": sorted(c.shared_indicators),
                    "window": list(c.window),
                    "support": c.support,
                }
                for c in campaigns
            ],
            "aggregates": {
                "total_submissions": sum(len(a.share_rounds) for a in self.agents),
                "total_verified": total_verified,
                "total_rejected": total_rejected,
                "verified_fabricated": verified_fabricated,
                "poisoning_rate": round(poisoning_rate, 6),
                "revoked_agents": sum(1 for a in self.agents if a.credential.revoked),
                "verifier_forfeit_income": verifier_forfeit_income,
                "escrow": market.escrow,
                "held": market.held,
                "burned": market.burned,
                "total_supply": market.total_supply(),
                "minted": market.minted,
                "campaigns": len(campaigns),
            },
        }


def run_scenario(config: "ScenarioConfig", seed: Optional[int] = None) -> ScenarioResult:
    return Engine(config, seed).run()
