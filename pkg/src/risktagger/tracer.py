"""Hop-by-hop fund tracing: fetch, bridge-expand, summarize, assess, filter.

The loop walks the transaction graph outward from the seed accounts one hop
at a time, bounded by cfg.D. Each hop is a barrier: its frontier is fixed
before any account in it is analyzed, accounts may then be processed by a
worker pool, and a single coordinator folds completed assessments back into
the state in (hop_depth, address) order so sequential and concurrent runs
produce identical output bytes.

Frontier admission happens at the end of every hop: duplicates collapse
(first mention wins), already-visited accounts break cycles, candidates
funded below min_value_threshold drop out, and the survivors are ranked by

    priority = value_weight*vnorm + recency_weight*rnorm + flag_weight*flag

where vnorm/rnorm use the same normalization as transaction retention and
flag is 1 when any funder of the candidate was rated High or Medium this
hop. Funding value is the raw smallest-unit sum across assets, a coarse
knob on purpose; failed transfers still nominate their receiver but move
no value.
"""

from __future__ import annotations

import json
import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    BackendFailure,
    ChainUnavailable,
    CheckpointError,
    RateLimited,
    SchemaMismatch,
    SchemaViolation,
    UnknownChain,
    UnparseableVerdict,
)
from .model import Address, RiskAssessment, SuspicionLevel, TracerConfig, normalize_address
from .reasoner import Blacklist, infer_risk
from .reasoner.backends import DEFAULT_MAX_TOKENS, DEFAULT_TEMPERATURE
from .translator import AccountSubgraph, build_subgraph

logger = logging.getLogger(__name__)

# per-account failures that skip the account instead of killing the run
SKIPPABLE_ERRORS = (
    ChainUnavailable,
    RateLimited,
    UnknownChain,
    SchemaMismatch,
    BackendFailure,
    UnparseableVerdict,
    SchemaViolation,
)

_CHECKPOINT_RE = re.compile(r"^checkpoint_(\d+)\.json$")


def _fresh_diagnostics() -> dict:
    return {
        "fetched": 0,
        "pruned_dup": 0,
        "pruned_visited": 0,
        "pruned_low_value": 0,
        "pruned_cap": 0,
        "errors": [],
    }


@dataclass
class TracerState:
    depth: int = 0
    C_current: list[Address] = field(default_factory=list)
    visited: set[Address] = field(default_factory=set)
    R_final: list[RiskAssessment] = field(default_factory=list)
    L_all: list[RiskAssessment] = field(default_factory=list)
    diagnostics: dict = field(default_factory=_fresh_diagnostics)

    def to_json(self) -> dict:
        return {
            "depth": self.depth,
            "C_current": [a.to_json() for a in self.C_current],
            "visited": [a.to_json() for a in sorted(self.visited)],
            "R_final": [r.to_json() for r in self.R_final],
            "L_all": [r.to_json() for r in self.L_all],
            "diagnostics": self.diagnostics,
        }

    @staticmethod
    def from_json(obj: dict) -> "TracerState":
        return TracerState(
            depth=int(obj["depth"]),
            C_current=[Address.from_json(a) for a in obj["C_current"]],
            visited={Address.from_json(a) for a in obj["visited"]},
            R_final=[RiskAssessment.from_json(r) for r in obj["R_final"]],
            L_all=[RiskAssessment.from_json(r) for r in obj["L_all"]],
            diagnostics=obj["diagnostics"],
        )


@dataclass
class TracerPorts:
    """Everything the loop talks to, injected so tests can swap any piece."""

    client_for: object  # chain id -> adapter with fetch_transactions(Address)
    backend: object  # BackendPort
    blacklist: Blacklist
    now: int
    matcher: object = None  # cross-chain matcher; None disables bridge expansion
    reflection_rounds: int = 1
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    out_dir: Path | None = None  # checkpoints land here when set
    strict: bool = False
    workers: int = 1


@dataclass
class FrontierContext:
    """Aggregated funding facts per frontier candidate, for filter scoring."""

    now: int
    value_of: dict = field(default_factory=dict)  # Address -> raw int sum
    latest_ts: dict = field(default_factory=dict)  # Address -> newest funding ts
    flagged: set = field(default_factory=set)  # funded by a High/Medium account

    def add(self, address: Address, value: int, ts: int, sender_flagged: bool) -> None:
        if address not in self.value_of:
            self.value_of[address] = 0
            self.latest_ts[address] = ts
        self.value_of[address] += value
        self.latest_ts[address] = max(self.latest_ts[address], ts)
        if sender_flagged:
            self.flagged.add(address)


def filter_frontier(
    c_next: list[Address],
    visited: set,
    context: FrontierContext,
    cfg: TracerConfig,
    counters: dict,
) -> list[Address]:
    """Dedup, break cycles, prune dust, rank, cap. Returns the next frontier."""
    seen = set()
    deduped = []
    for address in c_next:
        if address in seen:
            counters["pruned_dup"] += 1
            continue
        seen.add(address)
        deduped.append(address)

    threshold = int(cfg.min_value_threshold)
    survivors = []
    for address in deduped:
        if address in visited:
            counters["pruned_visited"] += 1
            continue
        if context.value_of.get(address, 0) < threshold:
            counters["pruned_low_value"] += 1
            continue
        survivors.append(address)
    if not survivors:
        return []

    max_value = max(context.value_of[a] for a in survivors)
    oldest = min(context.latest_ts[a] for a in survivors)
    span = context.now - oldest

    def priority(address: Address) -> float:
        vnorm = context.value_of[address] / max_value if max_value > 0 else 0.0
        ts = context.latest_ts[address]
        rnorm = 1.0 if span <= 0 else 1.0 - (context.now - ts) / span
        flag = 1.0 if address in context.flagged else 0.0
        return cfg.value_weight * vnorm + cfg.recency_weight * rnorm + cfg.flag_weight * flag

    survivors.sort(key=lambda a: (-priority(a), a))
    if cfg.frontier_cap is not None and len(survivors) > cfg.frontier_cap:
        counters["pruned_cap"] += len(survivors) - cfg.frontier_cap
        survivors = survivors[: cfg.frontier_cap]
    return survivors


def collect_frontier(
    analyzed: list[tuple[RiskAssessment, AccountSubgraph]], cfg: TracerConfig, now: int
) -> tuple[list[Address], FrontierContext]:
    """Out-neighbor nominations plus their funding context, in analysis order."""
    context = FrontierContext(now=now)
    c_next: list[Address] = []
    for assessment, sub in analyzed:
        if assessment.suspicion_level not in cfg.expand_levels:
            continue
        sender_flagged = assessment.suspicion_level in (
            SuspicionLevel.HIGH,
            SuspicionLevel.MEDIUM,
        )
        funding: dict[Address, tuple[int, int]] = {}
        for tx in sub.retained_txs:
            if tx.from_addr != sub.center or tx.to_addr == sub.center:
                continue
            moved = 0 if tx.isError else tx.value_int
            value, ts = funding.get(tx.to_addr, (0, tx.timeStamp))
            funding[tx.to_addr] = (value + moved, max(ts, tx.timeStamp))
        for pair in sub.cross_chain:
            dst = pair.dst_tx.to_addr
            if dst == sub.center:
                continue
            value, ts = funding.get(dst, (0, pair.dst_tx.timeStamp))
            funding[dst] = (value + int(pair.amount_dst), max(ts, pair.dst_tx.timeStamp))
        for neighbor in assessment.out_neighbors:
            value, ts = funding.get(neighbor, (0, now))
            context.add(neighbor, value, ts, sender_flagged)
            c_next.append(neighbor)
    return c_next, context


def _analyze_account(account: Address, depth: int, cfg: TracerConfig, ports: TracerPorts):
    """Worker body: fetch, expand, summarize, assess. Never raises; reports."""
    fetched = False
    try:
        client = ports.client_for(account.chain)
        txs = client.fetch_transactions(account)
        fetched = True
        pairs = ports.matcher.expand(account, txs) if ports.matcher is not None else []
        sub = build_subgraph(account, txs, pairs, cfg, ports.now)
        assessment = infer_risk(
            sub,
            ports.blacklist,
            ports.backend,
            hop_depth=depth,
            reflection_rounds=ports.reflection_rounds,
            temperature=ports.temperature,
            max_tokens=ports.max_tokens,
        )
        return account, assessment, sub, None, fetched
    except SKIPPABLE_ERRORS as err:
        return account, None, None, err, fetched


def _write_checkpoint(state: TracerState, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"checkpoint_{state.depth}.json"
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(state.to_json(), indent=2, ensure_ascii=False) + "\n")
    os.replace(tmp, path)


def load_latest_checkpoint(out_dir: str | Path) -> TracerState | None:
    """Highest-depth checkpoint in out_dir, or None when there is none."""
    out_dir = Path(out_dir)
    best = None
    for path in out_dir.glob("checkpoint_*.json"):
        m = _CHECKPOINT_RE.match(path.name)
        if m:
            depth = int(m.group(1))
            if best is None or depth > best[0]:
                best = (depth, path)
    if best is None:
        return None
    try:
        return TracerState.from_json(json.loads(best[1].read_text()))
    except (json.JSONDecodeError, KeyError, ValueError) as err:
        raise CheckpointError(f"unreadable checkpoint {best[1]}: {err}") from err


def trace(
    seeds: list,
    chain: str,
    cfg: TracerConfig,
    ports: TracerPorts,
    resume: bool = False,
) -> TracerState:
    """Runs the trace to depth cfg.D and returns the final state.

    Seeds may be Address objects or bare hex strings; strings are placed on
    `chain`. With resume=True the latest checkpoint under ports.out_dir is
    picked up and the seeds argument only matters when none exists.
    """
    if not seeds:
        raise ValueError("at least one seed address is required")
    state = None
    if resume and ports.out_dir is not None:
        state = load_latest_checkpoint(ports.out_dir)
        if state is not None:
            logger.info("resuming from depth %d (%d analyzed)", state.depth, len(state.L_all))
    if state is None:
        frontier = []
        for seed in seeds:
            address = seed if isinstance(seed, Address) else normalize_address(seed, chain)
            if address not in frontier:
                frontier.append(address)
        state = TracerState(C_current=frontier)

    while state.C_current and state.depth < cfg.D:
        frontier = list(state.C_current)
        logger.info("hop %d: %d account(s)", state.depth, len(frontier))
        if ports.workers > 1 and len(frontier) > 1:
            with ThreadPoolExecutor(max_workers=ports.workers) as pool:
                results = list(
                    pool.map(lambda a: _analyze_account(a, state.depth, cfg, ports), frontier)
                )
        else:
            results = [_analyze_account(a, state.depth, cfg, ports) for a in frontier]

        analyzed: list[tuple[RiskAssessment, AccountSubgraph]] = []
        for account, assessment, sub, err, fetched in results:
            if fetched:
                state.diagnostics["fetched"] += 1
            state.visited.add(account)
            if err is not None:
                if ports.strict:
                    raise err
                logger.warning("skipping %s: %s", account.hex, err)
                state.diagnostics["errors"].append(
                    {
                        "address": account.hex,
                        "chain": account.chain,
                        "hop_depth": state.depth,
                        "error": type(err).__name__,
                        "detail": str(err),
                    }
                )
                continue
            analyzed.append((assessment, sub))

        # deterministic merge regardless of worker interleaving
        analyzed.sort(key=lambda pair: (pair[0].hop_depth, pair[0].target_address))
        for assessment, _sub in analyzed:
            state.L_all.append(assessment)
            if assessment.suspicion_level is SuspicionLevel.HIGH:
                state.R_final.append(assessment)

        c_next, context = collect_frontier(analyzed, cfg, ports.now)
        state.C_current = filter_frontier(
            c_next, state.visited, context, cfg, state.diagnostics
        )
        state.depth += 1
        if ports.out_dir is not None:
            _write_checkpoint(state, Path(ports.out_dir))
    return state


def write_outputs(state: TracerState, out_dir: str | Path) -> None:
    """labels.jsonl (all assessments), risky.jsonl (High only), diagnostics.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "labels.jsonl", "w", encoding="utf-8") as fh:
        for assessment in state.L_all:
            fh.write(json.dumps(assessment.to_json(), ensure_ascii=False) + "\n")
    with open(out_dir / "risky.jsonl", "w", encoding="utf-8") as fh:
        for assessment in state.R_final:
            fh.write(json.dumps(assessment.to_json(), ensure_ascii=False) + "\n")
    (out_dir / "diagnostics.json").write_text(
        json.dumps(state.diagnostics, indent=2, ensure_ascii=False) + "\n"
    )
