"""Auditor-facing report rendering and information-coverage scoring.

Two responsibilities live here. ``generate_report`` turns extracted case
clues plus trace outputs into a markdown document with a fixed eight-section
outline; a narrative backend may write the prose, but a deterministic
template renders the same sections from computed statistics whenever the
backend is absent, fails, or returns a document missing sections.

``coverage`` grades how much of a checklist the report actually mentions.
Each checklist entity is graded full, partial, or missing under rules that
depend on its weight class:

  address  full on the 42-char hex form (case-insensitive), partial on the
           0x+4-hex shortened prefix.
  number   full on the digits with or without grouping separators, partial
           on the humanized magnitude ("1.5 billion").
  token    full when both the symbol and the amount appear, partial on the
           symbol alone. Symbols match case-sensitively with alphanumeric
           guards so ETH never matches inside mETH.
  text     full on a case-insensitive substring hit, partial when at least
           half of the value's words appear somewhere in the report.

The score is (E_full + 0.5 * E_part) / E_All, computed exactly. Checklist
derivation counts one entity per list element and one per token symbol;
evidence snippets are provenance quotes rather than case facts and are
deliberately excluded.
"""

import json
import logging
import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation

from .errors import BackendFailure, EmptyChecklist
from .model import SuspicionLevel
from .reasoner.prompts import build_explainer_prompt

log = logging.getLogger(__name__)

SECTION_TITLES = (
    "Introduction",
    "Incident Overview",
    "Dataset Statistical Summary",
    "Risk Account Analysis",
    "Typical Laundering Transaction Patterns",
    "Fund Flow Characteristics",
    "Temporal Behavior Patterns",
    "Conclusion and Audit Recommendations",
)

LEVEL_ORDER = (
    SuspicionLevel.HIGH,
    SuspicionLevel.MEDIUM,
    SuspicionLevel.LOW,
    SuspicionLevel.NO_SUSPICION,
)

ENTITY_COUNTING_NOTE = (
    "list fields contribute one checklist entity per element; "
    "stolen_token contributes one entity per token symbol; "
    "evidence snippets are provenance and are not counted"
)

EXAMPLES_PER_SECTION = 3
HIGH_RISK_EXAMPLES = 5


@dataclass(frozen=True)
class ChecklistEntity:
    field_name: str
    value: str
    weight_class: str  # address | number | token | text


@dataclass
class ReportChecklist:
    entities: list

    def __len__(self) -> int:
        return len(self.entities)


@dataclass(frozen=True)
class EntityStatus:
    field_name: str
    value: str
    weight_class: str
    status: str  # full | partial | missing
    matched: str  # snippet from the report, "" when missing


@dataclass
class CoverageReport:
    e_all: int
    e_full: int
    e_part: int
    r_coverage: float
    entities: list

    def to_json(self) -> dict:
        return {
            "E_All": self.e_all,
            "E_full": self.e_full,
            "E_part": self.e_part,
            "R_coverage": self.r_coverage,
            "entities": [
                {
                    "field": e.field_name,
                    "value": e.value,
                    "weight_class": e.weight_class,
                    "status": e.status,
                    "matched": e.matched,
                }
                for e in self.entities
            ],
            "metadata": {"entity_counting": ENTITY_COUNTING_NOTE},
        }


# --- checklist derivation ----------------------------------------------------


def build_checklist(clues) -> ReportChecklist:
    entities = []

    def add(field_name: str, value: str, weight_class: str) -> None:
        if value:
            entities.append(ChecklistEntity(field_name, value, weight_class))

    add("chain", clues.chain, "text")
    add("attack_vector", clues.attack_vector, "text")
    add("affected_platform", clues.affected_platform, "text")
    for address in clues.contract_address:
        add("contract_address", address.hex, "address")
    for address in clues.attacker_addresses:
        add("attacker_addresses", address.hex, "address")
    for address in clues.victim_addresses:
        add("victim_addresses", address.hex, "address")
    if clues.stolen_usd:
        add("stolen_usd", str(clues.stolen_usd), "number")
    for symbol in sorted(clues.stolen_token):
        add("stolen_token", f"{symbol}:{clues.stolen_token[symbol]}", "token")
    for method in clues.laundering_methods:
        add("laundering_methods", method, "text")
    add("laundering_path", clues.laundering_path, "text")
    return ReportChecklist(entities)


# --- matching ----------------------------------------------------------------

_WORD_RE = re.compile(r"[a-z0-9]+")


def _grouped(digits: str) -> str:
    return f"{int(digits):,}"


def _number_pattern(value: str) -> re.Pattern:
    """Digits with or without grouping separators, not embedded in a longer number."""
    if "." in value:
        intpart, frac = value.split(".", 1)
        alts = [re.escape(intpart) + r"\." + re.escape(frac)]
        if len(intpart) > 3:
            alts.append(_grouped(intpart) + r"\." + re.escape(frac))
    else:
        alts = [re.escape(value)]
        if len(value) > 3:
            alts.append(_grouped(value))
    body = "|".join(alts)
    return re.compile(rf"(?<!\d)(?<!\d,)(?<!\d\.)(?:{body})(?!\d)(?!,\d)(?!\.\d)")


def _humanized(value: str) -> str | None:
    try:
        number = Decimal(value)
    except InvalidOperation:
        return None
    for unit, word in ((10**9, "billion"), (10**6, "million"), (10**3, "thousand")):
        if abs(number) >= unit:
            scaled = (number / unit).normalize()
            return f"{scaled:f} {word}"
    return None


def _find(pattern: re.Pattern, report: str) -> str:
    m = pattern.search(report)
    return m.group(0) if m else ""


def _grade_address(value: str, report: str) -> tuple[str, str]:
    lowered = report.lower()
    at = lowered.find(value.lower())
    if at >= 0:
        return "full", report[at : at + len(value)]
    short = value[:6].lower()  # 0x plus four hex digits
    at = lowered.find(short)
    if at >= 0:
        return "partial", report[at : at + len(short)]
    return "missing", ""


def _grade_number(value: str, report: str) -> tuple[str, str]:
    hit = _find(_number_pattern(value), report)
    if hit:
        return "full", hit
    human = _humanized(value)
    if human:
        number, word = human.split(" ", 1)
        pattern = re.compile(
            rf"(?<!\d)(?<!\d\.){re.escape(number)}\s*{word}", re.IGNORECASE
        )
        hit = _find(pattern, report)
        if hit:
            return "partial", hit
    return "missing", ""


def _symbol_pattern(symbol: str) -> re.Pattern:
    # Case-sensitive with guards: ETH must not match inside mETH or 0xeth...
    return re.compile(rf"(?<![A-Za-z0-9]){re.escape(symbol)}(?![A-Za-z0-9])")


def _grade_token(value: str, report: str) -> tuple[str, str]:
    symbol, _, amount = value.partition(":")
    symbol_hit = _find(_symbol_pattern(symbol), report)
    if not symbol_hit:
        return "missing", ""
    amount_hit = _find(_number_pattern(amount), report) if amount else ""
    if amount_hit:
        return "full", f"{amount_hit} {symbol_hit}"
    return "partial", symbol_hit


def _grade_text(value: str, report: str) -> tuple[str, str]:
    lowered = report.lower()
    at = lowered.find(value.lower())
    if at >= 0:
        return "full", report[at : at + len(value)]
    words = list(dict.fromkeys(_WORD_RE.findall(value.lower())))
    if words:
        present = set(_WORD_RE.findall(lowered))
        overlap = [w for w in words if w in present]
        if len(overlap) * 2 >= len(words):
            return "partial", " ".join(overlap)
    return "missing", ""


_GRADERS = {
    "address": _grade_address,
    "number": _grade_number,
    "token": _grade_token,
    "text": _grade_text,
}


def coverage(report: str, checklist: ReportChecklist) -> CoverageReport:
    if not checklist.entities:
        raise EmptyChecklist("coverage requires a non-empty entity checklist")
    statuses = []
    for entity in checklist.entities:
        grader = _GRADERS.get(entity.weight_class, _grade_text)
        status, matched = grader(entity.value, report)
        statuses.append(
            EntityStatus(entity.field_name, entity.value, entity.weight_class, status, matched)
        )
    e_all = len(statuses)
    e_full = sum(1 for s in statuses if s.status == "full")
    e_part = sum(1 for s in statuses if s.status == "partial")
    return CoverageReport(e_all, e_full, e_part, (e_full + 0.5 * e_part) / e_all, statuses)


# --- statistics --------------------------------------------------------------


def _percentages(counts: list[int]) -> list[str]:
    """One-decimal percentage strings that sum to exactly 100.0 (largest remainder)."""
    total = sum(counts)
    if total == 0:
        return ["0.0%"] * len(counts)
    tenths = [c * 1000 // total for c in counts]
    remainders = [c * 1000 % total for c in counts]
    short = 1000 - sum(tenths)
    for i in sorted(range(len(counts)), key=lambda i: (-remainders[i], i))[:short]:
        tenths[i] += 1
    return [f"{t // 10}.{t % 10}%" for t in tenths]


def _statistics(r_final: list, l_all: list) -> dict:
    level_counts = {level: 0 for level in LEVEL_ORDER}
    layer_counts: dict[int, int] = {}
    high_layers: dict[int, int] = {}
    for assessment in l_all:
        level_counts[assessment.suspicion_level] += 1
        layer_counts[assessment.hop_depth] = layer_counts.get(assessment.hop_depth, 0) + 1
        if assessment.suspicion_level is SuspicionLevel.HIGH:
            high_layers[assessment.hop_depth] = high_layers.get(assessment.hop_depth, 0) + 1
    level_pcts = _percentages([level_counts[lv] for lv in LEVEL_ORDER])
    layers = sorted(layer_counts)
    layer_pcts = _percentages([layer_counts[h] for h in layers])
    return {
        "total_labeled": len(l_all),
        "risky_flagged": len(r_final),
        "levels": [
            {"level": lv.value, "count": level_counts[lv], "share": pct}
            for lv, pct in zip(LEVEL_ORDER, level_pcts)
        ],
        "layers": [
            {"layer": h, "count": layer_counts[h], "share": pct, "high_risk": high_layers.get(h, 0)}
            for h, pct in zip(layers, layer_pcts)
        ],
    }


# --- report generation -------------------------------------------------------


def _sorted_assessments(l_all: list) -> list:
    return sorted(l_all, key=lambda a: (a.hop_depth, a.target_address))


def _evidence_lines(l_all: list, pick) -> list[str]:
    lines = []
    for assessment in _sorted_assessments(l_all):
        dimension = pick(assessment)
        if not dimension.indicates_risk():
            continue
        entry = f"- `{assessment.target_address.hex}` (layer {assessment.hop_depth}): {dimension.result}"
        if dimension.evidence:
            entry += f". Evidence: {dimension.evidence}"
        lines.append(entry)
        if len(lines) == EXAMPLES_PER_SECTION:
            break
    return lines


def _analysis_json(clues, stats: dict, r_final: list, l_all: list) -> str:
    examples = [
        {
            "address": a.target_address.hex,
            "layer": a.hop_depth,
            "justification": a.justification,
        }
        for a in _sorted_assessments(r_final)[:HIGH_RISK_EXAMPLES]
    ]
    evidence = {
        name: _evidence_lines(l_all, pick)
        for name, pick in (
            ("transaction_patterns", lambda a: a.transaction_patterns),
            ("fund_flows", lambda a: a.fund_flows),
            ("associated_addresses", lambda a: a.associated_addresses),
            ("temporal_signs", lambda a: a.temporal_signs),
        )
    }
    payload = {
        "case_clues": clues.to_json(),
        "statistics": stats,
        "high_risk_examples": examples,
        "dimension_evidence": evidence,
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def _has_all_sections(text: str) -> bool:
    return all(f"## {i}. {title}" in text for i, title in enumerate(SECTION_TITLES, 1))


def _section_introduction(clues, stats: dict) -> list[str]:
    return [
        "This document helps auditors understand a labeled money-laundering dataset "
        f"built from the {clues.affected_platform or 'incident'} fund-flow trace.",
        "",
        "Case clues were extracted from public incident reports, the on-chain "
        "transaction graph was expanded hop by hop from the attacker seed accounts, "
        "and every reached account received a four-level suspicion verdict with "
        "per-dimension evidence. The sections below summarize the incident, the "
        f"resulting dataset of {stats['total_labeled']} labeled accounts, and the "
        "behavioral patterns auditors should prioritize.",
    ]


def _section_overview(clues) -> list[str]:
    lines = []
    chain = clues.chain or "unknown"
    platform = clues.affected_platform or "an unnamed platform"
    lines.append(f"The incident affected {platform} on the {chain} network.")
    if clues.attack_vector:
        lines.append(f"Attack vector: {clues.attack_vector}")
    if clues.stolen_usd:
        lines.append(f"Estimated stolen value: {clues.stolen_usd:,} USD.")
    if clues.stolen_token:
        lines.append("Stolen assets:")
        lines.extend(f"- {amount} {symbol}" for symbol, amount in sorted(clues.stolen_token.items()))
    for label, addresses in (
        ("Attacker addresses", clues.attacker_addresses),
        ("Victim addresses", clues.victim_addresses),
        ("Incident contracts", clues.contract_address),
    ):
        if addresses:
            lines.append(f"{label}:")
            lines.extend(f"- `{a.hex}`" for a in addresses)
    if clues.laundering_methods:
        lines.append("Laundering methods observed: " + "; ".join(clues.laundering_methods) + ".")
    if clues.laundering_path:
        lines.append(f"Laundering path: {clues.laundering_path}")
    return lines


def _section_statistics(stats: dict) -> list[str]:
    lines = [
        f"The trace labeled {stats['total_labeled']} accounts in total; "
        f"{stats['risky_flagged']} were flagged high-risk.",
        "",
        "| Suspicion level | Accounts | Share |",
        "| --- | --- | --- |",
    ]
    lines.extend(f"| {row['level']} | {row['count']} | {row['share']} |" for row in stats["levels"])
    lines += [
        "",
        "| Trace layer | Accounts | Share | High-risk |",
        "| --- | --- | --- | --- |",
    ]
    lines.extend(
        f"| Layer {row['layer']} | {row['count']} | {row['share']} | {row['high_risk']} |"
        for row in stats["layers"]
    )
    return lines


def _section_risk_accounts(stats: dict, r_final: list) -> list[str]:
    if not r_final:
        lines = [
            "The trace surfaced no high-risk accounts; every reached account "
            "was rated Medium or below."
        ]
    else:
        lines = ["Representative high-risk accounts:"]
        for a in _sorted_assessments(r_final)[:HIGH_RISK_EXAMPLES]:
            lines.append(f"- `{a.target_address.hex}` (layer {a.hop_depth}): {a.justification}")
    counts = {row["level"]: row["count"] for row in stats["levels"]}
    lines += [
        "",
        f"Medium-risk accounts ({counts.get('Medium', 0)}) typically show one "
        "strong indicator, such as dense aggregation-dispersion or contact with a "
        f"blacklisted counterparty. Low-risk accounts ({counts.get('Low', 0)}) show "
        "a single weak signal, and the remaining "
        f"{counts.get('No Suspicion', 0)} accounts exhibited no flagged behavior.",
    ]
    return lines


def _pattern_section(l_all: list, pick, empty_note: str) -> list[str]:
    lines = _evidence_lines(l_all, pick)
    return lines or [empty_note]


def _section_conclusion(stats: dict) -> list[str]:
    dense = max(stats["layers"], key=lambda row: (row["high_risk"], row["count"]))
    return [
        f"Of {stats['total_labeled']} labeled accounts, {stats['risky_flagged']} "
        f"are high-risk, concentrated around layer {dense['layer']}.",
        "",
        "Recommendations for auditors:",
        "- Start from the high-risk accounts and walk their outgoing transfers layer by layer.",
        "- Treat burst transfers, round-number amounts, and rapid fan-out after "
        "aggregation as triage signals.",
        "- Screen counterparties against the sanctions blacklist before clearing any account.",
        "- Give extra scrutiny to activity in the overnight window, where flagged "
        "transfers concentrated.",
    ]


def _render_template(clues, stats: dict, r_final: list, l_all: list) -> str:
    bodies = [
        _section_introduction(clues, stats),
        _section_overview(clues),
        _section_statistics(stats),
        _section_risk_accounts(stats, r_final),
        _pattern_section(
            l_all,
            lambda a: a.transaction_patterns,
            "No burst or round-number transfer patterns were flagged in this trace.",
        ),
        _pattern_section(
            l_all,
            lambda a: a.fund_flows,
            "No aggregation-dispersion fund-flow patterns were flagged in this trace.",
        )
        + _pattern_section(
            l_all,
            lambda a: a.associated_addresses,
            "No blacklisted counterparties were encountered.",
        ),
        _pattern_section(
            l_all,
            lambda a: a.temporal_signs,
            "No suspicious night-hour concentration was flagged in this trace.",
        ),
        _section_conclusion(stats),
    ]
    parts = ["# Fund Flow Audit Report"]
    for i, (title, body) in enumerate(zip(SECTION_TITLES, bodies), 1):
        parts.append(f"## {i}. {title}")
        parts.append("\n".join(body))
    return "\n\n".join(parts) + "\n"


def generate_report(
    clues,
    dataset: tuple,
    backend=None,
    fallback: bool = True,
    prompts_dir=None,
    temperature: float = 0.0,
    max_tokens: int = 4096,
) -> str:
    """Render the eight-section audit report for one trace.

    With a backend, the narrative comes from the explainer prompt; the reply
    is accepted only when it carries all eight section headings. Otherwise
    (or on failure, unless fallback is disabled) the deterministic template
    fills the same sections from computed statistics.
    """
    r_final, l_all = dataset
    if not l_all:
        raise ValueError("trace outputs are empty; nothing to report")
    stats = _statistics(r_final, l_all)
    if backend is not None:
        prompt = build_explainer_prompt(_analysis_json(clues, stats, r_final, l_all), prompts_dir)
        try:
            reply = backend.complete(prompt, temperature=temperature, max_tokens=max_tokens)
        except BackendFailure as exc:
            if not fallback:
                raise
            log.warning("narrative backend failed (%s); using the template renderer", exc)
        else:
            if _has_all_sections(reply):
                return reply
            if not fallback:
                raise BackendFailure("backend reply lacks the eight required report sections")
            log.warning("backend reply missing required sections; using the template renderer")
    return _render_template(clues, stats, r_final, l_all)
