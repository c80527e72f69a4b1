"""CSV fixture replay: one `<chain>.csv` per chain, crawler column schema."""

from __future__ import annotations

import csv
from pathlib import Path

from ..errors import ParseError, SchemaMismatch, UnknownChain
from ..model import Address, TransactionRecord, normalize_address, normalize_chain

# Canonical header, exact names and order. Header drift is a hard error:
# silently remapping columns is how value/gas swaps slip into datasets.
FIXTURE_COLUMNS = (
    "hash",
    "from",
    "to",
    "value",
    "timeStamp",
    "blockNumber",
    "tokenSymbol",
    "contractAddress",
    "isError",
    "input",
    "nonce",
    "blockHash",
    "gas",
    "gasPrice",
    "gasUsed",
    "confirmations",
)


def _row_to_record(row: dict, chain: str, path: Path, line_no: int) -> TransactionRecord:
    try:
        contract = row["contractAddress"].strip()
        return TransactionRecord(
            hash=row["hash"],
            from_addr=normalize_address(row["from"], chain),
            to_addr=normalize_address(row["to"], chain),
            value=row["value"].strip(),
            timeStamp=int(row["timeStamp"]),
            blockNumber=int(row["blockNumber"]),
            tokenSymbol=row["tokenSymbol"].strip(),
            contractAddress=normalize_address(contract, chain) if contract else None,
            isError=row["isError"].strip() == "1",
            input=row["input"].strip() or "0x",
            nonce=int(row["nonce"]),
            blockHash=row["blockHash"].strip(),
            gas=row["gas"].strip(),
            gasPrice=row["gasPrice"].strip(),
            gasUsed=row["gasUsed"].strip(),
            confirmations=int(row["confirmations"]),
        )
    except (KeyError, ValueError, ArithmeticError) as exc:
        raise ParseError(f"{path}:{line_no}: bad fixture row: {exc}") from exc


def load_fixture(path: str | Path, chain: str | None = None) -> list[TransactionRecord]:
    """Load one per-chain fixture CSV; the chain defaults to the file stem."""
    path = Path(path)
    chain = normalize_chain(chain or path.stem)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot open fixture {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch(f"{path}: empty fixture file, expected header row")
        if tuple(h.strip() for h in header) != FIXTURE_COLUMNS:
            raise SchemaMismatch(
                f"{path}: header mismatch: got {header!r}, expected {list(FIXTURE_COLUMNS)!r}"
            )
        records = []
        for line_no, values in enumerate(reader, start=2):
            if not values or (len(values) == 1 and not values[0].strip()):
                continue  # blank line
            if len(values) != len(FIXTURE_COLUMNS):
                raise ParseError(
                    f"{path}:{line_no}: expected {len(FIXTURE_COLUMNS)} columns, got {len(values)}"
                )
            row = dict(zip(FIXTURE_COLUMNS, values))
            records.append(_row_to_record(row, chain, path, line_no))
    return records


class FixtureStore:
    """All fixture chains loaded into memory, indexed by chain and address."""

    def __init__(self, records_by_chain: dict[str, list[TransactionRecord]]):
        self.records_by_chain = records_by_chain
        self._by_address: dict[Address, list[TransactionRecord]] = {}
        for recs in records_by_chain.values():
            for rec in recs:
                self._by_address.setdefault(rec.from_addr, []).append(rec)
                if rec.to_addr != rec.from_addr:
                    self._by_address.setdefault(rec.to_addr, []).append(rec)

    @staticmethod
    def load_dir(fixture_dir: str | Path) -> "FixtureStore":
        fixture_dir = Path(fixture_dir)
        by_chain = {}
        for csv_path in sorted(fixture_dir.glob("*.csv")):
            chain = normalize_chain(csv_path.stem)
            by_chain[chain] = load_fixture(csv_path, chain)
        if not by_chain:
            raise ParseError(f"no <chain>.csv fixture files under {fixture_dir}")
        return FixtureStore(by_chain)

    def chains(self) -> list[str]:
        return sorted(self.records_by_chain)

    def records_for(self, address: Address) -> list[TransactionRecord]:
        if address.chain not in self.records_by_chain:
            raise UnknownChain(f"no fixture data for chain {address.chain!r}")
        return [r for r in self._by_address.get(address, []) if r.chain == address.chain]

    def chain_records(self, chain: str) -> list[TransactionRecord]:
        if chain not in self.records_by_chain:
            raise UnknownChain(f"no fixture data for chain {chain!r}")
        return self.records_by_chain[chain]

    def all_addresses(self, chain: str) -> list[Address]:
        """Every distinct address appearing on a chain, sorted by hex."""
        seen = set()
        for rec in self.chain_records(chain):
            seen.add(rec.from_addr)
            seen.add(rec.to_addr)
        return sorted(seen)


class FixtureChainClient:
    """ChainClientPort backed by a FixtureStore; replay is exact and offline."""

    def __init__(self, store: FixtureStore):
        self.store = store

    def supported_chains(self) -> list[str]:
        return self.store.chains()

    def fetch_transactions(self, address: Address) -> list[TransactionRecord]:
        from .fetch import dedup_and_sort

        return dedup_and_sort(self.store.records_for(address))
