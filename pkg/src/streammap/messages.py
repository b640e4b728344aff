"""Messages, the bounded sliding window, and keyword queries."""

from __future__ import annotations

import threading
from bisect import insort
from dataclasses import dataclass, field, replace


class DuplicateMessageError(ValueError):
    """A message with this id is already in the window."""


@dataclass(frozen=True)
class Message:
    """One ingested text packet."""

    id: str
    ts: int  # milliseconds since epoch
    text: str
    author: str | None = None
    tokens: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.id:
            raise ValueError("message id must be non-empty")
        if self.ts < 0:
            raise ValueError("message ts must be >= 0")

    def with_tokens(self, tokens: tuple[str, ...]) -> "Message":
        return replace(self, tokens=tuple(tokens))

    @property
    def sort_key(self) -> tuple[int, str]:
        return (self.ts, self.id)


@dataclass(frozen=True)
class Query:
    """Keyword filter with AND semantics; empty matches everything."""

    keywords: tuple[str, ...] = ()

    def __post_init__(self):
        for kw in self.keywords:
            if not kw or kw != kw.lower():
                raise ValueError(f"query keywords must be lowercase, non-empty: {kw!r}")

    @classmethod
    def parse(cls, raw: str) -> "Query":
        """Parse a whitespace-separated keyword string (case-folded)."""
        return cls(tuple(sorted(set(raw.lower().split()))))

    def normalized(self) -> str:
        return " ".join(sorted(set(self.keywords)))


def matches(msg: Message, query: Query) -> bool:
    """True iff every query keyword occurs among the message tokens."""
    if not query.keywords:
        return True
    toks = set(msg.tokens)
    return all(kw in toks for kw in query.keywords)


@dataclass
class Window:
    """Bounded sliding window of messages, ordered by (ts, id).

    Holds at most `capacity` messages; when `max_age_ms` is set, entries
    older than the newest timestamp minus `max_age_ms` are evicted. One
    writer plus snapshot readers: `snapshot()` returns an immutable tuple
    a pipeline tick can work on while ingestion continues.
    """

    capacity: int = 500
    max_age_ms: int | None = None
    _entries: list[Message] = field(default_factory=list, repr=False)
    _ids: set[str] = field(default_factory=set, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        if self.capacity <= 0:
            raise ValueError("capacity must be positive")
        if self.max_age_ms is not None and self.max_age_ms <= 0:
            raise ValueError("max_age_ms must be positive when set")

    def __len__(self) -> int:
        return len(self._entries)

    def push(self, msg: Message) -> list[Message]:
        """Insert a message; returns the evicted messages, oldest first."""
        with self._lock:
            if msg.id in self._ids:
                raise DuplicateMessageError(msg.id)
            insort(self._entries, msg, key=lambda m: m.sort_key)
            self._ids.add(msg.id)
            return self._evict()

    def _evict(self) -> list[Message]:
        evicted: list[Message] = []
        if self.max_age_ms is not None and self._entries:
            cutoff = self._entries[-1].ts - self.max_age_ms
            while self._entries and self._entries[0].ts < cutoff:
                evicted.append(self._entries.pop(0))
        while len(self._entries) > self.capacity:
            evicted.append(self._entries.pop(0))
        for m in evicted:
            self._ids.discard(m.id)
        return evicted

    def snapshot(self) -> tuple[Message, ...]:
        with self._lock:
            return tuple(self._entries)
