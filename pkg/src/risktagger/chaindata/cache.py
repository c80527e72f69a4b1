"""On-disk fetch cache keyed by (chain, address, page token).

A key, once written, is never re-fetched in the same run and a second run
against a warm cache issues zero upstream requests. Writes go through a
temp file + rename so a crash never leaves a torn page behind.
"""

from __future__ import annotations

import os
import threading
from pathlib import Path


class FetchCache:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.hits = 0
        self.misses = 0
        self._write_lock = threading.Lock()

    def path_for(self, chain: str, address_hex: str, page_token: str) -> Path:
        return self.root / chain / address_hex / f"{page_token}.json"

    def get(self, chain: str, address_hex: str, page_token: str) -> bytes | None:
        path = self.path_for(chain, address_hex, page_token)
        try:
            payload = path.read_bytes()
        except FileNotFoundError:
            self.misses += 1
            return None
        self.hits += 1
        return payload

    def put(self, chain: str, address_hex: str, page_token: str, payload: bytes) -> None:
        path = self.path_for(chain, address_hex, page_token)
        with self._write_lock:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(payload)
            os.replace(tmp, path)
