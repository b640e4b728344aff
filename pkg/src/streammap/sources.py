"""Message sources: NDJSON replay files and stdin.

One message object per line: {"id": str, "ts": int, "text": str,
"author": str?}. Malformed lines are skipped and counted, never fatal.
HTTP ingestion is wired up in the server module.
"""

from __future__ import annotations

import json
import logging
import sys
import time
from dataclasses import dataclass, field
from typing import IO, Iterator

from streammap.messages import Message

log = logging.getLogger(__name__)


@dataclass
class SourceStats:
    accepted: int = 0
    malformed: int = 0


def parse_line(line: str) -> Message | None:
    """Parse one NDJSON record; None for blank or malformed lines."""
    line = line.strip()
    if not line:
        return None
    try:
        obj = json.loads(line)
        if not isinstance(obj, dict):
            raise ValueError("record is not an object")
        author = obj.get("author")
        if author is not None and not isinstance(author, str):
            raise ValueError("author must be a string")
        return Message(
            id=str(obj["id"]),
            ts=int(obj["ts"]),
            text=str(obj["text"]),
            author=author,
        )
    except (KeyError, TypeError, ValueError) as exc:
        log.warning("skipping malformed line: %s", exc)
        return None


def read_ndjson(fp: IO[str], stats: SourceStats | None = None) -> Iterator[Message]:
    """Yield messages from an NDJSON stream in file order."""
    stats = stats if stats is not None else SourceStats()
    for line in fp:
        msg = parse_line(line)
        if msg is None:
            if line.strip():
                stats.malformed += 1
            continue
        stats.accepted += 1
        yield msg


@dataclass
class ReplaySource:
    """Replays an NDJSON file in (ts, id) order.

    speed > 0 paces emission by wall clock (message-time seconds divided
    by `speed`); speed = 0 replays unpaced (batch mode).
    """

    path: str
    speed: float = 0.0
    stats: SourceStats = field(default_factory=SourceStats)

    def load(self) -> list[Message]:
        with open(self.path, "r", encoding="utf-8") as fp:
            msgs = list(read_ndjson(fp, self.stats))
        msgs.sort(key=lambda m: m.sort_key)
        return msgs

    def __iter__(self) -> Iterator[Message]:
        msgs = self.load()
        prev_ts: int | None = None
        for msg in msgs:
            if self.speed > 0 and prev_ts is not None and msg.ts > prev_ts:
                time.sleep((msg.ts - prev_ts) / 1000.0 / self.speed)
            prev_ts = msg.ts
            yield msg


@dataclass
class StdinSource:
    """Reads NDJSON from stdin as it arrives (no ordering guarantee)."""

    stats: SourceStats = field(default_factory=SourceStats)

    def __iter__(self) -> Iterator[Message]:
        yield from read_ndjson(sys.stdin, self.stats)
