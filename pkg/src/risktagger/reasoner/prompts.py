"""Prompt template registry and rendering.

Templates live as plain text files under risktagger/prompts and are loaded
verbatim (sans trailing newline); the analyst/auditor/explainer texts are
long-lived transcriptions and must never be edited casually, which is why
hashes can be pinned in the run config. The extractor templates are original
to this project (origin "original" below).
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from ..errors import MissingPlaceholder, PromptHashMismatch
from ..model import Address

# id -> (required placeholders, origin)
REGISTRY = {
    "cot_part1": ({"target_address", "formatted_analysis"}, "transcription"),
    "cot_part2": (set(), "transcription"),
    "reflection": ({"target_address", "analysis_result"}, "transcription"),
    "explainer_part1": ({"analysis_result"}, "transcription"),
    "explainer_part2": (set(), "transcription"),
    "extractor_chunk": ({"chunk_id", "chunk_text"}, "original"),
    "extractor_consolidate": ({"candidates"}, "original"),
}

_ALL_PLACEHOLDERS = set().union(*(spec[0] for spec in REGISTRY.values()))


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    text: str
    placeholders: frozenset
    origin: str

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()


def _prompts_dir() -> Path:
    return Path(resources.files("risktagger") / "prompts")


def load_template(template_id: str, prompts_dir: str | Path | None = None) -> PromptTemplate:
    if template_id not in REGISTRY:
        raise KeyError(f"unknown prompt template {template_id!r}")
    placeholders, origin = REGISTRY[template_id]
    base = Path(prompts_dir) if prompts_dir else _prompts_dir()
    text = (base / f"{template_id}.txt").read_text(encoding="utf-8").rstrip("\n")
    return PromptTemplate(
        id=template_id, text=text, placeholders=frozenset(placeholders), origin=origin
    )


def render(template: PromptTemplate, values: dict) -> str:
    """Substitute {name} slots; every required slot must be bound.

    str.format would choke on the literal JSON braces inside the templates,
    so substitution is plain token replacement for the known slot names only.
    """
    missing = template.placeholders - set(values)
    if missing:
        raise MissingPlaceholder(
            f"template {template.id!r} missing values for {sorted(missing)}"
        )
    text = template.text
    for name in template.placeholders:
        text = text.replace("{" + name + "}", str(values[name]))
    leftover = [
        name
        for name in _ALL_PLACEHOLDERS
        if re.search(r"\{" + re.escape(name) + r"\}", text)
    ]
    if leftover:
        raise MissingPlaceholder(f"unbound placeholders survive rendering: {sorted(leftover)}")
    return text


def template_hashes(prompts_dir: str | Path | None = None) -> dict:
    return {tid: load_template(tid, prompts_dir).sha256 for tid in sorted(REGISTRY)}


def verify_pins(pins: dict, prompts_dir: str | Path | None = None) -> None:
    """Compare on-disk template hashes against pinned values from the config."""
    actual = template_hashes(prompts_dir)
    drifted = sorted(
        tid for tid, expected in pins.items() if actual.get(tid) != expected
    )
    if drifted:
        raise PromptHashMismatch(f"prompt templates drifted from pinned hashes: {drifted}")


def build_cot_prompt(payload: dict, target: Address | str, prompts_dir=None) -> str:
    """Part 1 (rendered) + part 2, one analyst prompt for one account."""
    from ..translator import payload_json

    target_hex = target.hex if isinstance(target, Address) else str(target)
    embedded = payload.get("target_address", {}).get("hex")
    if embedded != target_hex:
        raise MissingPlaceholder(
            f"payload target {embedded!r} does not match requested target {target_hex!r}"
        )
    part1 = render(
        load_template("cot_part1", prompts_dir),
        {"target_address": target_hex, "formatted_analysis": payload_json(payload)},
    )
    part2 = load_template("cot_part2", prompts_dir).text
    return part1 + "\n\n" + part2


def build_reflection_prompt(target: Address | str, analysis_result: str, prompts_dir=None) -> str:
    target_hex = target.hex if isinstance(target, Address) else str(target)
    return render(
        load_template("reflection", prompts_dir),
        {"target_address": target_hex, "analysis_result": analysis_result},
    )


def build_explainer_prompt(analysis_result: str, prompts_dir=None) -> str:
    part1 = render(load_template("explainer_part1", prompts_dir), {"analysis_result": analysis_result})
    part2 = load_template("explainer_part2", prompts_dir).text
    return part1 + "\n\n" + part2
