"""Bridge deposit/withdrawal matching across chains.

Detection is table-driven: a configured list of bridge endpoints per chain.
A deposit (transfer from the traced account into a bridge endpoint, or a tx
whose input carries a configured bridge marker) is matched against
withdrawals sent by the same bridge's endpoints on other chains, by token,
amount tolerance and time window. Matching is brute force over the candidate
rows; data volumes here are per-account, not per-chain-history.
"""

from __future__ import annotations

from decimal import Decimal
from pathlib import Path

from ..errors import ParseError
from ..model import Address, CrossChainPair, TransactionRecord, normalize_address, normalize_chain

DEFAULT_AMOUNT_TOLERANCE = 0.01  # fraction of the deposited amount
DEFAULT_TIME_WINDOW_S = 3600
DEFAULT_CLOCK_SKEW_S = 0


class BridgeTable:
    """Configured bridge endpoints: `chain,address,bridge_name` per line.

    An `input:0x...` marker in the address column tags deposits by calldata
    prefix instead of destination address (some routers take deposits at
    per-user proxy addresses).
    """

    def __init__(self):
        self.endpoint_bridge: dict[Address, str] = {}
        self.by_bridge_chain: dict[tuple[str, str], list[Address]] = {}
        self.input_markers: dict[str, list[tuple[str, str]]] = {}  # chain -> [(prefix, bridge)]

    @staticmethod
    def load(path: str | Path) -> "BridgeTable":
        table = BridgeTable()
        path = Path(path)
        for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 3:
                raise ParseError(f"{path}:{line_no}: expected 'chain,address,bridge_name'")
            chain, raw_addr, bridge = parts
            chain = normalize_chain(chain)
            if raw_addr.lower().startswith("input:"):
                prefix = raw_addr[len("input:"):].lower()
                table.input_markers.setdefault(chain, []).append((prefix, bridge))
                continue
            try:
                address = normalize_address(raw_addr, chain)
            except Exception as exc:
                raise ParseError(f"{path}:{line_no}: {exc}") from exc
            table.endpoint_bridge[address] = bridge
            table.by_bridge_chain.setdefault((bridge, chain), []).append(address)
        return table

    def bridges(self) -> set[str]:
        return set(self.endpoint_bridge.values()) | {
            b for markers in self.input_markers.values() for _, b in markers
        }

    def chains_of(self, bridge: str) -> list[str]:
        return sorted({chain for (b, chain) in self.by_bridge_chain if b == bridge})

    def deposit_bridge(self, tx: TransactionRecord) -> str | None:
        """Bridge name if this outgoing tx looks like a bridge deposit."""
        bridge = self.endpoint_bridge.get(tx.to_addr)
        if bridge:
            return bridge
        for prefix, name in self.input_markers.get(tx.chain, []):
            if tx.input.lower().startswith(prefix):
                return name
        return None


def _within_tolerance(amount_src: int, amount_dst: int, tolerance: float) -> bool:
    # Decimal keeps the product exact for 10^24-scale smallest-unit amounts.
    return abs(amount_dst - amount_src) <= Decimal(str(tolerance)) * amount_src


class BridgeMatcher:
    """CrossChainMatcherPort over a per-chain record source (fixture or cache)."""

    def __init__(
        self,
        table: BridgeTable,
        chain_records,  # callable: chain -> list[TransactionRecord]
        amount_tolerance: float = DEFAULT_AMOUNT_TOLERANCE,
        time_window_s: int = DEFAULT_TIME_WINDOW_S,
        clock_skew_s: int = DEFAULT_CLOCK_SKEW_S,
    ):
        self.table = table
        self.chain_records = chain_records
        self.amount_tolerance = amount_tolerance
        self.time_window_s = time_window_s
        self.clock_skew_s = clock_skew_s
        self.diagnostics: list[dict] = []

    def expand(self, address: Address, txs: list[TransactionRecord]) -> list[CrossChainPair]:
        pairs = []
        for tx in txs:
            if tx.from_addr != address or tx.isError:
                continue
            bridge = self.table.deposit_bridge(tx)
            if bridge is None:
                continue
            matched = self._match_withdrawals(tx, bridge)
            if matched:
                pairs.extend(matched)
            else:
                self.diagnostics.append(
                    {
                        "kind": "unmatched_deposit",
                        "address": address.hex,
                        "chain": address.chain,
                        "tx": tx.hash,
                        "bridge": bridge,
                    }
                )
        return pairs

    def _match_withdrawals(self, deposit: TransactionRecord, bridge: str) -> list[CrossChainPair]:
        out = []
        for dst_chain in self.table.chains_of(bridge):
            if dst_chain == deposit.chain:
                continue
            endpoints = set(self.table.by_bridge_chain.get((bridge, dst_chain), []))
            if not endpoints:
                continue
            candidates = [
                r
                for r in self.chain_records(dst_chain)
                if r.from_addr in endpoints and not r.isError and r.tokenSymbol == deposit.tokenSymbol
            ]
            candidates.sort(key=lambda r: (r.timeStamp, r.hash))
            for wd in candidates:
                delta = wd.timeStamp - deposit.timeStamp
                if delta < -self.clock_skew_s or delta > self.time_window_s:
                    continue
                if not _within_tolerance(deposit.value_int, wd.value_int, self.amount_tolerance):
                    continue
                out.append(
                    CrossChainPair(
                        src_tx=deposit,
                        dst_tx=wd,
                        token=deposit.tokenSymbol or "native",
                        amount_src=deposit.value,
                        amount_dst=wd.value,
                        time_delta_s=delta,
                        bridge_hint=bridge,
                    )
                )
        return out


class NullMatcher:
    """No bridge table configured: cross-chain expansion is a no-op."""

    def __init__(self):
        self.diagnostics: list[dict] = []

    def expand(self, address: Address, txs: list[TransactionRecord]) -> list[CrossChainPair]:
        return []
