"""Deterministic rule engine, packaged as a reasoning backend.

It answers the same prompts the hosted model would: an analyst prompt gets a
verdict JSON in the documented output schema, an auditor (reflection) prompt
gets a "No flaw" review. The payload is recovered from the rendered prompt
text, so the engine sees exactly what a live model would see.

Rule table (a dimension "fires" when its predicate holds):
  a  transaction_patterns   >= 20 txs in any 1h window, or a round-number
                            transfer (exact positive multiple of 10^21
                            smallest units / 1000 display units)
  b  fund_flows             fan-in from >= 10 distinct senders AND dispersal
                            to >= 2 distinct receivers within 3600 s
  c  associated_addresses   any counterparty on the blacklist
  d  temporal_signs         >= 50% of transfers between 02:00 and 04:00 UTC
Level: >=2 fired -> High; exactly one of {b,c} -> Medium; exactly one of
{a,d} -> Low; none -> No Suspicion. Adding a blacklist hit can only raise
the level (monotonicity is exercised in the tests).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime
from decimal import Decimal

from ..errors import BackendFailure
from ..model import SuspicionLevel
from .blacklist import Blacklist

ROUND_UNIT_RAW = 10**21
ROUND_UNIT_DISPLAY = Decimal(1000)


@dataclass(frozen=True)
class RuleThresholds:
    fan_in_min: int = 10
    dispersal_receivers_min: int = 2
    dispersal_window_s: int = 3600
    burst_tx_min: int = 20
    night_start_hour: int = 2
    night_end_hour: int = 4
    night_fraction: float = 0.5


def decide_level(fired: set) -> SuspicionLevel:
    """The documented decision table over the fired dimension letters."""
    if len(fired) >= 2:
        return SuspicionLevel.HIGH
    if len(fired) == 1:
        return SuspicionLevel.MEDIUM if fired <= {"b", "c"} else SuspicionLevel.LOW
    return SuspicionLevel.NO_SUSPICION


def _parse_display_value(value: str):
    """Payload row value -> ('raw', int) or ('display', Decimal)."""
    if " (raw) " in value:
        return "raw", int(value.split(" ", 1)[0])
    amount = value.split(" ", 1)[0]
    return "display", Decimal(amount)


def _is_round(value: str) -> bool:
    kind, amount = _parse_display_value(value)
    if amount <= 0:
        return False  # zero is arithmetically round and semantically noise
    if kind == "raw":
        return amount % ROUND_UNIT_RAW == 0
    return amount % ROUND_UNIT_DISPLAY == 0


def _epoch(iso_ts: str) -> int:
    return int(datetime.fromisoformat(iso_ts).timestamp())


def _hour_utc(iso_ts: str) -> int:
    return datetime.fromisoformat(iso_ts).hour  # payload timestamps are UTC


def rule_backend_assess(payload: dict, blacklist: Blacklist, thresholds: RuleThresholds | None = None) -> dict:
    """Apply the rule table to one reasoner payload; returns the verdict dict."""
    th = thresholds or RuleThresholds()
    target = payload.get("target_address", {}).get("hex", "")
    stats = payload.get("statistics", {})
    rows = payload.get("transactions", [])

    if not rows:
        quiet = {"result": "no activity", "evidence": "no transaction rows for this account"}
        return {
            "suspicion_level": SuspicionLevel.NO_SUSPICION.value,
            "a_transaction_patterns": dict(quiet),
            "b_fund_flows": dict(quiet),
            "c_associated_addresses": dict(quiet),
            "d_temporal_behavioral_signs": dict(quiet),
            "justification": "Account shows no transactions in the analyzed window.",
            "gaps": "No transaction rows were available for this account.",
        }

    ok_rows = [r for r in rows if not r.get("isError")]
    out_rows = [r for r in ok_rows if r.get("from") == target]

    # a) burst over the full fetched set, or any round-number transfer
    burst = int(stats.get("max_burst_1h", 0))
    round_rows = [r for r in ok_rows if _is_round(r.get("value", "0"))]
    a_fired = burst >= th.burst_tx_min or bool(round_rows)

    # b) fan-in (full-set counterparties) plus quick dispersal among outgoing rows
    fan_in = int(stats.get("distinct_counterparties_in", 0))
    dispersal, dispersal_span = _max_dispersal(out_rows, th.dispersal_window_s)
    b_fired = fan_in >= th.fan_in_min and dispersal >= th.dispersal_receivers_min

    # c) blacklist counterparties
    hits = {}
    for r in rows:
        for side in ("from", "to"):
            counterparty = r.get(side, "")
            if counterparty and counterparty != target and counterparty in blacklist:
                hits.setdefault(counterparty, blacklist.label_of(counterparty))
    c_fired = bool(hits)

    # d) night-hour concentration over all rows (failed probes count as behavior)
    night = [
        r
        for r in rows
        if th.night_start_hour <= _hour_utc(r["timeStamp"]) < th.night_end_hour
    ]
    night_share = len(night) / len(rows)
    d_fired = night_share >= th.night_fraction

    fired = {letter for letter, flag in (("a", a_fired), ("b", b_fired), ("c", c_fired), ("d", d_fired)) if flag}
    level = decide_level(fired)

    def cite(selected_rows, limit=3):
        return "; ".join(r["hash"] for r in selected_rows[:limit])

    if a_fired:
        parts = []
        if burst >= th.burst_tx_min:
            parts.append(f"burst of {burst} transfers inside one hour")
        if round_rows:
            parts.append(f"round-number transfers ({len(round_rows)} rows)")
        a_dim = {"result": "Anomalous pattern: " + " and ".join(parts), "evidence": cite(round_rows or ok_rows)}
    else:
        a_dim = {"result": "No transaction-pattern anomalies detected", "evidence": f"max 1h burst {burst}, no round-number transfers"}

    if b_fired:
        b_dim = {
            "result": (
                f"Aggregation-dispersion pattern: funds pooled from {fan_in} distinct senders, "
                f"then dispersed to {dispersal} receivers within {dispersal_span} s"
            ),
            "evidence": cite(out_rows),
        }
    else:
        b_dim = {"result": "No aggregation-dispersion pattern", "evidence": f"{fan_in} distinct senders, max dispersal {dispersal} receivers"}

    if c_fired:
        listed = ", ".join(f"{hex_} ({label})" for hex_, label in sorted(hits.items()))
        c_dim = {"result": f"Blacklisted counterparty exposure: {listed}", "evidence": cite([r for r in rows if r.get("from") in hits or r.get("to") in hits])}
    else:
        c_dim = {"result": "No known high-risk counterparties", "evidence": "no blacklist matches among counterparties"}

    if d_fired:
        d_dim = {
            "result": (
                f"Night-hour concentration: {night_share:.0%} of transfers between "
                f"{th.night_start_hour:02d}:00 and {th.night_end_hour:02d}:00 UTC"
            ),
            "evidence": cite(night),
        }
    else:
        d_dim = {"result": "No unusual temporal concentration", "evidence": f"{night_share:.0%} of transfers in night hours"}

    fired_list = ", ".join(sorted(fired)) if fired else "none"
    risk_bits = [d["result"] for d, flag in ((a_dim, a_fired), (b_dim, b_fired), (c_dim, c_fired), (d_dim, d_fired)) if flag]
    justification = (
        f"Rule dimensions fired: {fired_list}. " + " ".join(risk_bits)
        if fired
        else "No rule dimension fired; activity looks routine at the configured thresholds."
    )
    return {
        "suspicion_level": level.value,
        "a_transaction_patterns": a_dim,
        "b_fund_flows": b_dim,
        "c_associated_addresses": c_dim,
        "d_temporal_behavioral_signs": d_dim,
        "justification": justification,
        "gaps": "Counterparty identities beyond the configured blacklist are unverified.",
    }


def _max_dispersal(out_rows: list, window_s: int) -> tuple[int, int]:
    """Max distinct receivers inside any time window among outgoing rows."""
    if not out_rows:
        return 0, window_s
    events = sorted((_epoch(r["timeStamp"]), r["to"]) for r in out_rows)
    best = 0
    for i, (t0, _) in enumerate(events):
        receivers = {to for t, to in events[i:] if t - t0 <= window_s}
        best = max(best, len(receivers))
    return best, window_s


class RuleBackend:
    """BackendPort over the rule table; a pure function of the prompt text."""

    name = "rules"

    def __init__(self, blacklist: Blacklist | None = None, thresholds: RuleThresholds | None = None):
        self.blacklist = blacklist or Blacklist()
        self.thresholds = thresholds or RuleThresholds()

    def complete(self, prompt: str, temperature: float, max_tokens: int) -> str:
        if "blockchain security auditor" in prompt[:200]:
            return (
                "No flaw. The deterministic rule table was applied over the full "
                "account statistics; every fired dimension cites transaction rows."
            )
        payload = self._payload_from_prompt(prompt)
        verdict = rule_backend_assess(payload, self.blacklist, self.thresholds)
        return json.dumps(verdict, indent=2, ensure_ascii=False)

    @staticmethod
    def _payload_from_prompt(prompt: str) -> dict:
        marker = prompt.find('"payload_version"')
        if marker < 0:
            raise BackendFailure("rule backend got a prompt without an embedded payload")
        start = prompt.rfind("{", 0, marker)
        if start < 0:
            raise BackendFailure("embedded payload is not an object")
        try:
            payload, _ = json.JSONDecoder().raw_decode(prompt, start)
        except json.JSONDecodeError as exc:
            raise BackendFailure(f"embedded payload unparseable: {exc}") from exc
        return payload
