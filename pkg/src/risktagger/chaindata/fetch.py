"""Account-graph fetch: dedup and canonical ordering shared by all adapters."""

from __future__ import annotations

from ..model import Address, TransactionRecord


def dedup_and_sort(records: list[TransactionRecord]) -> list[TransactionRecord]:
    """Collapse duplicate rows, then order by (blockNumber, hash) ascending.

    The dedup key keeps one row per asset movement: the same hash can
    legitimately carry a native transfer plus a token transfer, but two rows
    identical in hash and direction collapse to one (first occurrence wins).
    """
    seen = set()
    out = []
    for rec in records:
        key = (
            rec.hash,
            rec.from_addr,
            rec.to_addr,
            rec.tokenSymbol,
            rec.contractAddress.hex if rec.contractAddress else "",
        )
        if key in seen:
            continue
        seen.add(key)
        out.append(rec)
    out.sort(key=lambda r: (r.blockNumber, r.hash))
    return out


def fetch_account_graph(client, address: Address) -> list[TransactionRecord]:
    """Fetch every transfer touching `address`, deduplicated and sorted.

    Postcondition enforced here rather than trusted: every record references
    the queried address as sender or receiver.
    """
    records = dedup_and_sort(client.fetch_transactions(address))
    for rec in records:
        if not rec.involves(address):
            raise AssertionError(
                f"adapter returned record {rec.hash} not involving {address.hex}"
            )
    return records
