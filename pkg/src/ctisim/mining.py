"""Campaign derivation from low-level indicators committed to the ledger.

Verified technical records become graph nodes; records sharing enough
indicator values inside a sliding round window are linked, and connected
components with sufficient support are reported as campaigns. Any node can
re-run the derivation from the immutable chain, which is what
verify_derivation does.
"""

from __future__ import annotations

from dataclasses import dataclass

from .cti import CtiCategory, CtiRecord, decode_record
from .encoding import Digest, Writer
from .errors import EncodingError
from .ledger import Chain, TxKind, sha256
from .payloads import FinalizeBody, SubmitCtiBody


@dataclass(frozen=True)
class MiningParams:
    window_rounds: int
    min_support: int
    min_overlap: int


@dataclass(frozen=True)
class Campaign:
    campaign_id: Digest
    member_records: frozenset[Digest]
    shared_indicators: frozenset[str]
    window: tuple[int, int]
    support: int
    params: MiningParams


def verified_technical_records(chain: Chain) -> list[CtiRecord]:
    """Decode submissions from the chain, keeping Verified Technical ones."""
    records: dict[Digest, CtiRecord] = {}
    verified: set[Digest] = set()
    for block in chain.blocks:
        for tx in block.transactions:
            try:
                if tx.kind is TxKind.SubmitCti:
                    body = SubmitCtiBody.decode(tx.payload)
                    records[body.contract_id] = decode_record(body.record_bytes)
                elif tx.kind is TxKind.FinalizeVerification:
                    fin = FinalizeBody.decode(tx.payload)
                    if fin.status == "Verified":
                        verified.add(fin.contract_id)
            except EncodingError:
                continue
    out = [
        rec
        for cid, rec in records.items()
        if cid in verified and rec.category is CtiCategory.Technical
    ]
    out.sort(key=lambda r: (r.created_round, r.record_id))
    return out


def _campaign_id(members: list[Digest], params: MiningParams) -> Digest:
    w = Writer()
    w.put_count(len(members))
    for m in sorted(members):
        w.put_bytes(m)
    w.put_uint(params.window_rounds)
    w.put_uint(params.min_support)
    w.put_uint(params.min_overlap)
    return sha256(b"campaign:" + w.getvalue())


def _components(records: list[CtiRecord], params: MiningParams) -> list[list[CtiRecord]]:
    """Union-find over records linked by indicator overlap within the window."""
    parent = list(range(len(records)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i: int, j: int) -> None:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[rj] = ri

    values = [set(ioc.value for ioc in r.indicators) for r in records]
    for i in range(len(records)):
        for j in range(i + 1, len(records)):
            if abs(records[i].created_round - records[j].created_round) >= params.window_rounds:
                continue
            if len(values[i] & values[j]) >= params.min_overlap:
                union(i, j)

    groups: dict[int, list[CtiRecord]] = {}
    for i, rec in enumerate(records):
        groups.setdefault(find(i), []).append(rec)
    return list(groups.values())


def _build_campaign(members: list[CtiRecord], params: MiningParams) -> Campaign:
    seen: dict[str, int] = {}
    for rec in members:
        for value in set(ioc.value for ioc in rec.indicators):
            seen[value] = seen.get(value, 0) + 1
    shared = frozenset(v for v, n in seen.items() if n >= 2)
    ids = [r.record_id for r in members]
    rounds = [r.created_round for r in members]
    return Campaign(
        campaign_id=_campaign_id(ids, params),
        member_records=frozenset(ids),
        shared_indicators=shared,
        window=(min(rounds), max(rounds)),
        support=len(members),
        params=params,
    )


def mine_campaigns(
    chain: Chain, window_rounds: int, min_support: int, min_overlap: int
) -> list[Campaign]:
    if min_support < 2:
        raise ValueError("min_support must be at least 2")
    if min_overlap < 1:
        raise ValueError("min_overlap must be at least 1")
    params = MiningParams(window_rounds, min_support, min_overlap)
    records = verified_technical_records(chain)
    campaigns = [
        _build_campaign(group, params)
        for group in _components(records, params)
        if len(group) >= min_support
    ]
    campaigns.sort(key=lambda c: c.campaign_id)
    return campaigns


def verify_derivation(campaign: Campaign, chain: Chain) -> bool:
    """Audit a mined claim: re-derive it from the cited members on the chain."""
    by_id = {rec.record_id: rec for rec in verified_technical_records(chain)}
    if not campaign.member_records:
        return False
    members = []
    for rid in campaign.member_records:
        rec = by_id.get(rid)
        if rec is None:
            return False
        members.append(rec)
    if len(members) < campaign.params.min_support:
        return False
    groups = _components(members, campaign.params)
    if len(groups) != 1:
        return False
    rebuilt = _build_campaign(groups[0], campaign.params)
    return rebuilt == campaign


def campaign_record_inputs(campaign: Campaign) -> tuple[str, ...]:
    """Shared indicator values in stable order, for building a derived record."""
    return tuple(sorted(campaign.shared_indicators))
