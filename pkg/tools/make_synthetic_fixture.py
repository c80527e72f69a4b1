"""Generate the committed 200-account synthetic trace fixture.

Layered transfer graph rooted at the incident's attacker address. The shape
is chosen so every rule dimension fires somewhere, every suspicion level
appears in the labels, and the frontier logic gets exercised: more than ten
candidates at the first two hops (cap pruning), duplicate nominations, cycle
edges back to visited accounts, a self-transfer, failed transfers, and a long
single-file tail so shallow and deep depth limits disagree.

Constraints the tracer's test oracle depends on:
  - every account touches fewer than 100 rows (nothing hits the retention cap)
  - all transfers stay on one chain (no bridge deposits)
  - amounts are either `innocent(...)` values, which are never a positive
    multiple of 10^21 raw or 1000 display units, or deliberate round numbers.

Deterministic for a given --seed; the committed CSV is frozen and tests read
it directly, so regenerate only on purpose.
"""

from __future__ import annotations

import argparse
import csv
import random
from collections import Counter
from pathlib import Path

SEED_HEX = "0x47666fab8bd0ac7003bce3f5c3585383f09486e2"  # incident attacker
VICTIM_HEX = "0x1db92e2eebc8e0c075a02bea49a2935bcd2dfcf4"
MIXER_HEX = "0x" + "a1" * 20  # second blacklist entry; makes the seed rate Medium

BASE_TS = 1_740_009_600  # 2025-02-20 00:00:00 UTC, a day boundary
DAY = 86_400

COLUMNS = (
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

N_L1, N_L2, N_L3, N_TAIL, N_CTRL = 14, 30, 80, 12, 58
USDT_CONTRACT = "0x" + "dac1" * 10


def band(prefix: str, i: int) -> str:
    # Readable addresses: band prefix + index, zero padded to 40 hex digits.
    body = f"{prefix}{i:02x}"
    return "0x" + body + "0" * (40 - len(body))


class GraphWriter:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.rows: list[dict] = []
        self.nonces: Counter = Counter()

    def innocent(self) -> str:
        # 1.001 .. 999.999 display units: never round in raw or display form.
        return str(self.rng.randint(1001, 999_999) * 10**15)

    def tx(self, src: str, dst: str, ts: int, value: str | None = None, *, failed=False, token=False):
        value = value if value is not None else self.innocent()
        n = len(self.rows) + 1
        self.nonces[src] += 1
        self.rows.append(
            {
                "hash": f"0x{n:064x}",
                "from": src,
                "to": dst,
                "value": value,
                "timeStamp": str(ts),
                "blockNumber": str(21_000_000 + (ts - BASE_TS) // 12),
                "tokenSymbol": "USDT" if token else "",
                "contractAddress": USDT_CONTRACT if token else "",
                "isError": "1" if failed else "0",
                "input": "0x",
                "nonce": str(self.nonces[src]),
                "blockHash": f"0x{(ts // 12):064x}",
                "gas": "21000",
                "gasPrice": "30000000000",
                "gasUsed": "21000",
                "confirmations": "1000",
            }
        )


def day_ts(rng: random.Random, day: int, hour_lo=9, hour_hi=18) -> int:
    # Daytime hours, safely outside the 02:00-04:00 UTC night window.
    return BASE_TS + day * DAY + rng.randint(hour_lo * 3600, hour_hi * 3600 - 1)


def night_ts(rng: random.Random, day: int) -> int:
    return BASE_TS + day * DAY + 2 * 3600 + rng.randint(0, 2 * 3600 - 1)


def build(rng: random.Random) -> list[dict]:
    g = GraphWriter(rng)
    l1 = [band("11", i) for i in range(N_L1)]
    l2 = [band("22", i) for i in range(N_L2)]
    hub, burst, round1, round2, night1, night2 = l2[:6]
    quiet = l2[6:]
    l3 = [band("33", i) for i in range(N_L3)]
    tail = [band("44", i) for i in range(N_TAIL)]
    funder2 = band("f0", 1)
    n1, n2 = band("ee", 1), band("ee", 2)
    ctrl = [band("cc", i) for i in range(N_CTRL)]

    # Victim drains into the seed, then the seed brushes a sanctioned mixer
    # (its blacklist hit) and fans out to every first-hop account.
    g.tx(VICTIM_HEX, SEED_HEX, day_ts(rng, 0), str(320_000 * 10**15))
    g.tx(funder2, SEED_HEX, day_ts(rng, 0), str(150_000 * 10**15))
    g.tx(SEED_HEX, MIXER_HEX, day_ts(rng, 1))
    for i, account in enumerate(l1):
        g.tx(SEED_HEX, account, BASE_TS + DAY + 9 * 3600 + i * 1800)

    # l1[0..2]: blacklisted counterparty plus night-hour concentration -> High.
    for i in range(3):
        for j in range(3):
            g.tx(l1[i], quiet[3 * i + j], night_ts(rng, 2 + i))
    # l1[3..12]: ten distinct senders pooling into the hub -> its fan-in side.
    for i in range(3, 13):
        g.tx(l1[i], hub, day_ts(rng, 2))
    for i, dst in enumerate([burst, round1, round2, night1, night2]):
        g.tx(l1[3 + i], dst, day_ts(rng, 2))
    for i in range(9, 14):
        g.tx(l1[i], quiet[i], day_ts(rng, 2))
    for i, dst in enumerate(quiet[14:24]):
        g.tx(l1[13], dst, day_ts(rng, 3, 10, 17) + i * 311)
    g.tx(l1[5], n1, day_ts(rng, 3), failed=True)
    g.tx(l1[7], l1[8], day_ts(rng, 3))  # already-visited nomination

    # Hub empties fast: dispersal within the hour completes dimension (b).
    t0 = day_ts(rng, 4, 10, 11)
    for i in range(3):
        g.tx(hub, l3[i], t0 + i * 600)
    # Burst: 22 transfers inside one hour, five distinct receivers.
    t0 = day_ts(rng, 4, 13, 14)
    for i in range(22):
        g.tx(burst, l3[3 + i % 5], t0 + i * 150)
    g.tx(burst, n2, t0 + 22 * 150, failed=True)
    # Round-number movers.
    g.tx(round1, l3[8], day_ts(rng, 5), str(3 * 10**21))
    g.tx(round1, l3[9], day_ts(rng, 5), str(2 * 10**21))
    g.tx(round2, l3[10], day_ts(rng, 5), str(5 * 10**21))
    g.tx(round2, l3[11], day_ts(rng, 5))
    # Night movers: two of four rows inside the night window.
    for mover, offset in ((night1, 12), (night2, 15)):
        g.tx(mover, l3[offset], night_ts(rng, 6))
        g.tx(mover, l3[offset + 1], night_ts(rng, 6))
        g.tx(mover, l3[offset + 2], day_ts(rng, 6))

    # Quiet accounts forward three daytime transfers each; receivers of the
    # High accounts' night rows need them so night never reaches 50% there.
    for j, account in enumerate(quiet):
        targets = [l3[18 + (3 * j + m) % 62] for m in range(3)]
        if j == 0:
            targets[0] = SEED_HEX  # cycle back to the (visited) seed
        for m, dst in enumerate(targets):
            g.tx(account, dst, day_ts(rng, 7) + m * 97, token=(j in (4, 9) and m == 0))
    g.tx(quiet[3], quiet[3], day_ts(rng, 7))  # self-transfer, skipped by the frontier

    # Long single-file tail: depths 4 through 15.
    g.tx(l3[0], tail[0], day_ts(rng, 8))
    for i in range(N_TAIL - 1):
        g.tx(tail[i], tail[i + 1], day_ts(rng, 8) + (i + 1) * 417)
    g.tx(l3[5], l1[3], day_ts(rng, 8))  # another visited-account nomination

    # Control cluster: unreachable from the seed (they only ever send).
    for i in range(0, N_CTRL - 1, 2):
        g.tx(ctrl[i], ctrl[i + 1], day_ts(rng, 9))
    for i, dst in enumerate((l3[20], l3[40], l3[60])):
        g.tx(ctrl[2 * i], dst, day_ts(rng, 9))

    return g.rows


def audit(rows: list[dict]) -> tuple[int, int]:
    addresses = set()
    touches: Counter = Counter()
    for row in rows:
        addresses.update((row["from"], row["to"]))
        touches[row["from"]] += 1
        if row["to"] != row["from"]:
            touches[row["to"]] += 1
    busiest = max(touches.values())
    if busiest >= 100:
        raise SystemExit(f"account with {busiest} rows would hit the retention cap")
    return len(addresses), busiest


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="fixtures/synthetic/ethereum.csv")
    parser.add_argument("--seed", type=int, default=1337)
    args = parser.parse_args()

    rows = build(random.Random(args.seed))
    rows.sort(key=lambda r: (int(r["timeStamp"]), r["hash"]))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=COLUMNS)
        writer.writeheader()
        writer.writerows(rows)

    n_addresses, busiest = audit(rows)
    print(f"{out}: {len(rows)} rows, {n_addresses} distinct addresses, busiest account {busiest} rows")
    if n_addresses != 200:
        raise SystemExit(f"expected exactly 200 addresses, got {n_addresses}")


if __name__ == "__main__":
    main()
