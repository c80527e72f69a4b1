"""Release acceptance gate.

One test per release criterion; the pytest -v line for each test is the
pass/fail record. These intentionally re-derive expectations from scratch
(independent BFS oracle, closed-form coverage, hand-built rule table) so a
regression in the package cannot hide behind a matching regression here.
"""

import csv
import json
import random
import time

import pytest

from conftest import FIXTURES, GOLDEN, REPO_ROOT
from oracle_bfs import bfs_oracle, read_rows
from risktagger.chaindata import EtherscanClient, FetchCache, FixtureChainClient, FixtureStore
from risktagger.cli import main
from risktagger.errors import BackendFailure
from risktagger.explainer import ChecklistEntity, ReportChecklist, coverage
from risktagger.extractor import extract_case_clues
from risktagger.model import SuspicionLevel, TracerConfig
from risktagger.reasoner import Blacklist, RuleBackend, decide_level, load_template, render
from risktagger.tracer import TracerPorts, trace
from stub_chain_server import StubChainServer

SEED = "0x47666fab8bd0ac7003bce3f5c3585383f09486e2"
NOW = 1_740_700_000
SYNTHETIC = FIXTURES / "synthetic"
BYBIT_DOC = FIXTURES / "bybit_incident.txt"


@pytest.fixture(autouse=True)
def _no_ambient_config(monkeypatch):
    monkeypatch.delenv("RISKTAGGER_LLM_ENDPOINT", raising=False)
    monkeypatch.delenv("RISKTAGGER_CACHE_DIR", raising=False)


def synthetic_ports(**overrides):
    client = FixtureChainClient(FixtureStore.load_dir(SYNTHETIC))
    blacklist = Blacklist.load(FIXTURES / "blacklist.txt")
    kwargs = dict(
        client_for=lambda chain: client,
        backend=RuleBackend(blacklist),
        blacklist=blacklist,
        now=NOW,
    )
    kwargs.update(overrides)
    return TracerPorts(**kwargs)


def synthetic_cfg(**overrides):
    kwargs = dict(
        D=20,
        k=100,
        frontier_cap=None,
        min_value_threshold="0",
        value_weight=0.6,
        recency_weight=0.4,
        flag_weight=0.0,
    )
    kwargs.update(overrides)
    return TracerConfig(**kwargs)


# --- 1. extraction fidelity ---------------------------------------------------


def test_criterion_1_extraction_recovers_all_gold_fields_under_5s():
    started = time.monotonic()
    clues, _audit = extract_case_clues(BYBIT_DOC.read_text())
    elapsed = time.monotonic() - started

    assert clues.chain == "ethereum"
    assert clues.stolen_usd == 1_500_000_000
    assert [a.hex for a in clues.attacker_addresses] == [SEED]
    assert [a.hex for a in clues.victim_addresses] == [
        "0x1db92e2eebc8e0c075a02bea49a2935bcd2dfcf4"
    ]
    assert [a.hex for a in clues.contract_address] == [
        "0xbdd077f651ebe7f7b3ce16fe5f2b025be2969516",
        "0x96221423681a6d52e184d440a8efcebb105c7242",
    ]
    assert clues.stolen_token == {
        "ETH": "401000",
        "stETH": "90000",
        "mETH": "8000",
        "cmETH": "15000",
    }
    assert clues.attack_vector == (
        "Supply chain compromise via malicious JavaScript injection in "
        "Safe{Wallet} frontend. DELEGATECALL-based contract logic hijacking."
    )
    assert clues.affected_platform == "Bybit (via compromised Safe{Wallet} infrastructure)"
    assert elapsed < 5.0, f"extraction took {elapsed:.2f}s"


# --- 2. tracer against the independent oracle ---------------------------------


def test_criterion_2_tracer_matches_independent_bfs_oracle_on_all_depth_cap_combos():
    rows = read_rows(SYNTHETIC / "ethereum.csv")
    started = time.monotonic()
    for depth_limit in (1, 3, 20):
        for cap in (None, 10):
            cfg = synthetic_cfg(D=depth_limit, frontier_cap=cap)
            state = trace([SEED], "ethereum", cfg, synthetic_ports())
            got = {a.target_address.hex: a.hop_depth for a in state.L_all}
            want = bfs_oracle(
                rows, [SEED], depth_limit, NOW,
                frontier_cap=cap, min_value_threshold=0,
                value_weight=0.6, recency_weight=0.4,
            )
            assert got == want, f"divergence at D={depth_limit} cap={cap}"
    elapsed = time.monotonic() - started
    assert elapsed < 10.0, f"six traces took {elapsed:.2f}s"


# --- 3. coverage formula --------------------------------------------------------


def _entity(i: int) -> ChecklistEntity:
    # first 4 hex digits unique per index so shortened forms never collide
    return ChecklistEntity("attacker_addresses", "0x" + f"{i:04x}" + f"{i:036x}", "address")


def _scored(e_full: int, e_part: int, e_all: int) -> float:
    entities = [_entity(i) for i in range(e_all)]
    statuses = ["full"] * e_full + ["partial"] * e_part + ["missing"] * (e_all - e_full - e_part)
    lines = ["Audit narrative filler."]
    for ent, status in zip(entities, statuses):
        if status == "full":
            lines.append(f"Account {ent.value} moved funds onward.")
        elif status == "partial":
            lines.append(f"Account {ent.value[:6]}… moved funds onward.")
    report = coverage("\n".join(lines), ReportChecklist(entities))
    assert (report.e_full, report.e_part, report.e_all) == (e_full, e_part, e_all)
    return report.r_coverage


def test_criterion_3_coverage_formula_exact_on_1000_random_triples():
    assert _scored(8, 2, 10) == 0.9
    rng = random.Random(20260819)
    for _ in range(1000):
        e_all = rng.randint(1, 24)
        e_full = rng.randint(0, e_all)
        e_part = rng.randint(0, e_all - e_full)
        assert _scored(e_full, e_part, e_all) == (e_full + 0.5 * e_part) / e_all


# --- 4. prompt fidelity ---------------------------------------------------------


def test_criterion_4_rendered_prompts_are_byte_identical_to_goldens():
    for template_id in ("cot_part1", "cot_part2", "reflection", "explainer_part1", "explainer_part2"):
        template = load_template(template_id)
        blanked = render(template, {name: "" for name in template.placeholders})
        golden = (GOLDEN / f"{template_id}.golden.txt").read_bytes()
        assert blanked.encode("utf-8") == golden, f"{template_id} drifted from golden"


# --- 5. determinism and resume ---------------------------------------------------


def _run_config(tmp_path, out_dir):
    cfg = {
        "chain": "ethereum",
        "adapter": "fixture",
        "fixture_dir": str(SYNTHETIC),
        "blacklist_path": str(FIXTURES / "blacklist.txt"),
        "backend": "rules",
        "out_dir": str(out_dir),
        "seed": 7,
        "now": NOW,
        "tracer": {
            "D": 20,
            "k": 100,
            "frontier_cap": None,
            "min_value_threshold": "0",
            "value_weight": 0.6,
            "recency_weight": 0.4,
            "flag_weight": 0.0,
        },
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


class CrashAfter:
    """Backend wrapper that fails hard once its call budget is spent."""

    def __init__(self, inner, allow: int):
        self.inner = inner
        self.name = inner.name
        self.allow = allow
        self.calls = 0

    def complete(self, prompt: str, temperature: float, max_tokens: int) -> str:
        self.calls += 1
        if self.calls > self.allow:
            raise BackendFailure("simulated mid-hop crash")
        return self.inner.complete(prompt, temperature, max_tokens)


def test_criterion_5_pipeline_is_deterministic_and_resume_matches_uninterrupted(tmp_path):
    # full-pipeline determinism: rerunning into the same directory changes nothing
    out = tmp_path / "out"
    cfg = _run_config(tmp_path, out)
    assert main(["run", str(BYBIT_DOC), "--config", str(cfg)]) == 0
    names = sorted(p.name for p in out.iterdir())
    first = {name: (out / name).read_bytes() for name in names}
    assert main(["run", str(BYBIT_DOC), "--config", str(cfg)]) == 0
    assert sorted(p.name for p in out.iterdir()) == names
    assert {name: (out / name).read_bytes() for name in names} == first

    # interrupt inside hop 3, then resume from the checkpoint
    straight = trace([SEED], "ethereum", synthetic_cfg(), synthetic_ports())
    before_hop_3 = sum(1 for a in straight.L_all if a.hop_depth <= 2)

    work = tmp_path / "interrupted"
    work.mkdir()
    blacklist = Blacklist.load(FIXTURES / "blacklist.txt")
    crashing = CrashAfter(RuleBackend(blacklist), allow=before_hop_3 + 3)
    with pytest.raises(BackendFailure):
        trace(
            [SEED], "ethereum", synthetic_cfg(),
            synthetic_ports(backend=crashing, out_dir=work, strict=True),
        )
    assert (work / "checkpoint_3.json").exists()
    assert not (work / "checkpoint_4.json").exists()

    resumed = trace(
        [SEED], "ethereum", synthetic_cfg(),
        synthetic_ports(out_dir=work), resume=True,
    )
    assert [a.to_json() for a in resumed.L_all] == [a.to_json() for a in straight.L_all]
    assert [a.to_json() for a in resumed.R_final] == [a.to_json() for a in straight.R_final]


# --- 6. fetch cache soundness ----------------------------------------------------


def _pages_from_fixture():
    pages = {}
    with open(SYNTHETIC / "ethereum.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            action = "tokentx" if row["tokenSymbol"] else "txlist"
            for endpoint in (row["from"], row["to"]):
                pages.setdefault((endpoint, action, 1), []).append(row)
    return pages


def test_criterion_6_warm_cache_live_rerun_issues_zero_upstream_requests(tmp_path):
    cache_dir = tmp_path / "cache"
    cfg = synthetic_cfg(D=2)

    def live_trace(server):
        client = EtherscanClient(
            server.url, "ethereum", api_key="test",
            cache=FetchCache(cache_dir),
            rate_limit_per_s=0.0, backoff_base_s=0.01,
        )
        state = trace([SEED], "ethereum", cfg, synthetic_ports(client_for=lambda chain: client))
        return [a.to_json() for a in state.L_all]

    with StubChainServer(_pages_from_fixture()) as server:
        cold = live_trace(server)
        cold_requests = server.request_count
        assert cold_requests > 0
        warm = live_trace(server)
        assert server.request_count == cold_requests, "warm run hit the network"
    assert warm == cold


# --- 7. rule decision table --------------------------------------------------------


def test_criterion_7_rule_table_exhaustive_and_blacklist_monotone():
    def expected(fired: set) -> SuspicionLevel:
        if len(fired) >= 2:
            return SuspicionLevel.HIGH
        if fired & {"b", "c"}:
            return SuspicionLevel.MEDIUM
        if fired:
            return SuspicionLevel.LOW
        return SuspicionLevel.NO_SUSPICION

    combos = []
    for mask in range(16):
        combos.append({dim for bit, dim in enumerate("abcd") if mask >> bit & 1})
    assert len(combos) == 16
    for fired in combos:
        assert decide_level(fired) is expected(fired), f"combo {sorted(fired)}"
        # flagging the counterparty list can only push the level up
        assert decide_level(fired | {"c"}).rank >= decide_level(fired).rank, f"combo {sorted(fired)}"


# --- 8. golden label snapshot -------------------------------------------------------


def test_criterion_8_labels_match_committed_golden_snapshot_with_all_levels(tmp_path, monkeypatch):
    monkeypatch.chdir(REPO_ROOT)

    extract_dir = tmp_path / "extract"
    assert main(["extract", str(BYBIT_DOC), "--out", str(extract_dir)]) == 0
    out = tmp_path / "trace"
    committed = REPO_ROOT / "fixtures" / "synthetic" / "config.json"
    assert main([
        "trace", str(extract_dir / "case_clues.json"),
        "--config", str(committed), "--out", str(out),
    ]) == 0

    got = (out / "labels.jsonl").read_bytes()
    assert got == (GOLDEN / "synthetic_labels.golden.jsonl").read_bytes()

    levels = {json.loads(line)["suspicion_level"] for line in got.decode().splitlines()}
    assert levels == {"High", "Medium", "Low", "No Suspicion"}
