"""Per-account inference: analyst pass, consistency checks, bounded reflection.

Backend call budget for reflection_rounds = R: at most 1 + R verdict calls
and at most R reflection calls. A round only re-issues the analyst prompt
when the auditor actually listed flaws; "No flaw" lets the verdict stand.
"""

from __future__ import annotations

import json
import re

from ..model import Address, RiskAssessment, SuspicionLevel
from ..translator import AccountSubgraph, to_reasoner_payload
from .backends import DEFAULT_MAX_TOKENS, DEFAULT_TEMPERATURE, BackendPort
from .blacklist import Blacklist
from .parsing import VerdictFragment, parse_verdict
from .prompts import build_cot_prompt, build_reflection_prompt

_NO_FLAW_RE = re.compile(r"\bno flaw", re.IGNORECASE)
_BULLET_RE = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s+(.*\S)\s*$")


def consistency_trigger(fragment: VerdictFragment) -> str | None:
    """Reflection triggers, checked in documented order."""
    risky = sum(1 for d in fragment.dimensions.values() if d.indicates_risk())
    if fragment.suspicion_level in (SuspicionLevel.HIGH, SuspicionLevel.MEDIUM) and risky == 0:
        return "level_without_risk_dimensions"
    if fragment.suspicion_level is SuspicionLevel.NO_SUSPICION and risky >= 2:
        return "no_suspicion_despite_risk_dimensions"
    if fragment.repaired:
        return "verdict_required_repair"
    return None


def parse_reflection(text: str) -> list[str]:
    """Issue list from the auditor completion; empty means 'No flaw'."""
    if _NO_FLAW_RE.search(text):
        return []
    section = text
    m = re.search(r"critical issues identified\s*:?", text, re.IGNORECASE)
    if m:
        section = text[m.end():]
    issues = [m.group(1) for line in section.splitlines() if (m := _BULLET_RE.match(line))]
    if issues:
        return issues
    flat = " ".join(text.split())
    return [flat[:300]] if flat else []


def collect_out_neighbors(sub: AccountSubgraph) -> list[Address]:
    """Distinct receivers of outgoing retained txs, then cross-chain landings."""
    neighbors: list[Address] = []
    seen = set()
    for tx in sub.retained_txs:
        if tx.from_addr == sub.center and tx.to_addr != sub.center and tx.to_addr not in seen:
            seen.add(tx.to_addr)
            neighbors.append(tx.to_addr)
    for pair in sub.cross_chain:
        dst = pair.dst_tx.to_addr
        if dst != sub.center and dst not in seen:
            seen.add(dst)
            neighbors.append(dst)
    return neighbors


def infer_risk(
    sub: AccountSubgraph,
    blacklist: Blacklist,
    backend: BackendPort,
    hop_depth: int = 0,
    reflection_rounds: int = 1,
    temperature: float = DEFAULT_TEMPERATURE,
    max_tokens: int = DEFAULT_MAX_TOKENS,
    prompts_dir=None,
) -> RiskAssessment:
    payload = to_reasoner_payload(sub)
    prompt = build_cot_prompt(payload, sub.center, prompts_dir=prompts_dir)
    raw = backend.complete(prompt, temperature, max_tokens)
    fragment = parse_verdict(raw)

    issues: list[str] = []
    for _ in range(max(0, reflection_rounds)):
        trigger = consistency_trigger(fragment)
        if trigger is None:
            break
        reflection_prompt = build_reflection_prompt(
            sub.center,
            json.dumps(fragment.raw, indent=2, ensure_ascii=False),
            prompts_dir=prompts_dir,
        )
        review = backend.complete(reflection_prompt, temperature, max_tokens)
        round_issues = parse_reflection(review)
        if not round_issues:
            break  # auditor found no flaw; the verdict stands as issued
        issues.extend(round_issues)
        addenda = (
            prompt
            + "\n\nReflection Addenda\nA review of your previous answer identified these flaws; "
            + "address each one and re-issue the full output JSON:\n"
            + "\n".join(f"- {issue}" for issue in round_issues)
        )
        raw = backend.complete(addenda, temperature, max_tokens)
        fragment = parse_verdict(raw)

    dims = fragment.dimensions
    return RiskAssessment(
        target_address=sub.center,
        suspicion_level=fragment.suspicion_level,
        transaction_patterns=dims["transaction_patterns"],
        fund_flows=dims["fund_flows"],
        associated_addresses=dims["associated_addresses"],
        temporal_signs=dims["temporal_signs"],
        justification=fragment.justification,
        gaps=fragment.gaps,
        out_neighbors=collect_out_neighbors(sub),
        hop_depth=hop_depth,
        reflection_issues=issues,
        reasoner_backend=backend.name,
    )
