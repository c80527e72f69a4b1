"""Turns a fetched account graph into a bounded, model-readable subgraph.

Retention keeps the k most informative transfers by a weighted value/recency
score while statistics always cover the full fetched set, so truncation never
distorts counts or totals. Amount math is integer string manipulation: wei
values exceed 64-bit and must never pass through float.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone

from .model import Address, CrossChainPair, TracerConfig, TransactionRecord

PAYLOAD_VERSION = 1

# Display-unit tables; unknown symbols fall back to raw smallest units.
DEFAULT_DECIMALS = {
    "ETH": 18,
    "WETH": 18,
    "stETH": 18,
    "mETH": 18,
    "cmETH": 18,
    "BNB": 18,
    "MATIC": 18,
}
NATIVE_SYMBOLS = {"ethereum": "ETH", "bsc": "BNB", "polygon": "MATIC"}

NATIVE_KEY = "native"


@dataclass(frozen=True)
class AccountStats:
    """Full-set statistics for one account (failed txs count, but move no value)."""

    in_count: int
    out_count: int
    in_total: dict
    out_total: dict
    first_seen: int
    last_seen: int
    distinct_counterparties_in: int
    distinct_counterparties_out: int
    tx_per_day_mean: float
    max_burst_1h: int


@dataclass
class AccountSubgraph:
    center: Address
    retained_txs: list[TransactionRecord]
    cross_chain: list[CrossChainPair]
    stats: AccountStats
    truncated: bool
    total_tx_count: int
    now: int


def _token_key(tx: TransactionRecord) -> str:
    return tx.tokenSymbol or NATIVE_KEY


def compute_stats(center: Address, txs: list[TransactionRecord]) -> AccountStats:
    in_count = out_count = 0
    in_total: dict[str, int] = {}
    out_total: dict[str, int] = {}
    senders = set()
    receivers = set()
    timestamps = sorted(t.timeStamp for t in txs)
    for tx in txs:
        incoming = tx.to_addr == center
        outgoing = tx.from_addr == center
        if incoming:
            in_count += 1
            if tx.from_addr != center:
                senders.add(tx.from_addr)
            if not tx.isError:
                key = _token_key(tx)
                in_total[key] = in_total.get(key, 0) + tx.value_int
        if outgoing:
            out_count += 1
            if tx.to_addr != center:
                receivers.add(tx.to_addr)
            if not tx.isError:
                key = _token_key(tx)
                out_total[key] = out_total.get(key, 0) + tx.value_int
    first_seen = timestamps[0] if timestamps else 0
    last_seen = timestamps[-1] if timestamps else 0
    span_s = last_seen - first_seen
    if not txs:
        per_day = 0.0
    elif span_s == 0:
        per_day = float(len(txs))  # all activity inside a single day bucket
    else:
        per_day = len(txs) / (span_s / 86400.0)
    return AccountStats(
        in_count=in_count,
        out_count=out_count,
        in_total={k: str(v) for k, v in sorted(in_total.items())},
        out_total={k: str(v) for k, v in sorted(out_total.items())},
        first_seen=first_seen,
        last_seen=last_seen,
        distinct_counterparties_in=len(senders),
        distinct_counterparties_out=len(receivers),
        tx_per_day_mean=per_day,
        max_burst_1h=max_burst(timestamps, 3600),
    )


def max_burst(sorted_timestamps: list[int], window_s: int) -> int:
    """Most transactions inside any window of `window_s` seconds (inclusive)."""
    best = 0
    lo = 0
    for hi, ts in enumerate(sorted_timestamps):
        while ts - sorted_timestamps[lo] > window_s:
            lo += 1
        best = max(best, hi - lo + 1)
    return best


def score_transactions(
    txs: list[TransactionRecord], now: int, value_weight: float, recency_weight: float
) -> dict[str, float]:
    """score(tx) = value_weight * vnorm + recency_weight * rnorm, per tx hash+key.

    vnorm normalizes against the max value of the same token in the full set;
    rnorm is linear recency against the oldest tx (degenerate spans score 1.0).
    """
    if not txs:
        return {}
    max_by_token: dict[str, int] = {}
    for tx in txs:
        key = _token_key(tx)
        max_by_token[key] = max(max_by_token.get(key, 0), tx.value_int)
    oldest = min(t.timeStamp for t in txs)
    span = now - oldest
    scores = {}
    for tx in txs:
        token_max = max_by_token[_token_key(tx)]
        vnorm = tx.value_int / token_max if token_max > 0 else 0.0
        rnorm = 1.0 if span <= 0 else 1.0 - (now - tx.timeStamp) / span
        scores[_score_key(tx)] = value_weight * vnorm + recency_weight * rnorm
    return scores


def _score_key(tx: TransactionRecord) -> str:
    # hash alone can repeat across native/token rows; direction disambiguates
    return f"{tx.hash}/{tx.from_addr.hex}/{tx.to_addr.hex}/{tx.tokenSymbol}"


def build_subgraph(
    center: Address,
    txs: list[TransactionRecord],
    pairs: list[CrossChainPair],
    cfg: TracerConfig,
    now: int,
) -> AccountSubgraph:
    stats = compute_stats(center, txs)
    scores = score_transactions(txs, now, cfg.value_weight, cfg.recency_weight)
    ranked = sorted(txs, key=lambda t: (-scores[_score_key(t)], t.hash))
    retained = ranked[: cfg.k]
    return AccountSubgraph(
        center=center,
        retained_txs=retained,
        cross_chain=list(pairs),
        stats=stats,
        truncated=len(txs) > cfg.k,
        total_tx_count=len(txs),
        now=now,
    )


def scaled_amount(value: str, decimals: int) -> str:
    """Exact decimal-point shift on an integer string; no float anywhere."""
    if decimals == 0:
        return value
    value = value.rjust(decimals + 1, "0")
    whole, frac = value[:-decimals], value[-decimals:]
    frac = frac.rstrip("0") or "0"
    return f"{whole}.{frac}"


def display_amount(value: str, token_symbol: str, chain: str, decimals=None, natives=None) -> str:
    decimals = DEFAULT_DECIMALS if decimals is None else decimals
    natives = NATIVE_SYMBOLS if natives is None else natives
    label = token_symbol or natives.get(chain, NATIVE_KEY)
    d = decimals.get(label)
    if d is None:
        return f"{value} (raw) {label}"
    return f"{scaled_amount(value, d)} {label}"


def _iso(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).isoformat()


def to_reasoner_payload(sub: AccountSubgraph, decimals=None, natives=None) -> dict:
    """Canonical dict the prompt embeds; key order is part of the contract."""
    natives = NATIVE_SYMBOLS if natives is None else natives
    chain = sub.center.chain

    def totals_display(totals: dict) -> dict:
        out = {}
        for key, raw in totals.items():
            symbol = "" if key == NATIVE_KEY else key
            out[key if key != NATIVE_KEY else natives.get(chain, NATIVE_KEY)] = display_amount(
                raw, symbol, chain, decimals, natives
            )
        return out

    statistics = {
        "in_count": sub.stats.in_count,
        "out_count": sub.stats.out_count,
        "in_total": totals_display(sub.stats.in_total),
        "out_total": totals_display(sub.stats.out_total),
        "first_seen": _iso(sub.stats.first_seen) if sub.stats.first_seen else None,
        "last_seen": _iso(sub.stats.last_seen) if sub.stats.last_seen else None,
        "distinct_counterparties_in": sub.stats.distinct_counterparties_in,
        "distinct_counterparties_out": sub.stats.distinct_counterparties_out,
        "tx_per_day_mean": round(sub.stats.tx_per_day_mean, 6),
        "max_burst_1h": sub.stats.max_burst_1h,
        "total_tx_count": sub.total_tx_count,
        "retained_tx_count": len(sub.retained_txs),
        "truncated": sub.truncated,
    }
    transactions = [
        {
            "hash": tx.hash,
            "from": tx.from_addr.hex,
            "to": tx.to_addr.hex,
            "value": display_amount(tx.value, tx.tokenSymbol, tx.chain, decimals, natives),
            "tokenSymbol": tx.tokenSymbol or natives.get(tx.chain, NATIVE_KEY),
            "timeStamp": _iso(tx.timeStamp),
            "isError": tx.isError,
        }
        for tx in sub.retained_txs
    ]
    cross_chain = [
        {
            "src_hash": p.src_tx.hash,
            "dst_hash": p.dst_tx.hash,
            "src_chain": p.src_tx.chain,
            "dst_chain": p.dst_tx.chain,
            "dst_to": p.dst_tx.to_addr.hex,
            "token": p.token,
            "amount_src": display_amount(p.amount_src, p.src_tx.tokenSymbol, p.src_tx.chain, decimals, natives),
            "amount_dst": display_amount(p.amount_dst, p.dst_tx.tokenSymbol, p.dst_tx.chain, decimals, natives),
            "time_delta_s": p.time_delta_s,
            "bridge_hint": p.bridge_hint,
        }
        for p in sub.cross_chain
    ]
    return {
        "payload_version": PAYLOAD_VERSION,
        "target_address": {"hex": sub.center.hex, "chain": chain},
        "statistics": statistics,
        "transactions": transactions,
        "cross_chain": cross_chain,
    }


def payload_json(payload: dict) -> str:
    # insertion order is the canonical order; never sort_keys here
    return json.dumps(payload, indent=2, ensure_ascii=False)
