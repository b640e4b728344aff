from __future__ import annotations

from pathlib import Path

import pytest

from streammap.messages import Message
from streammap.semantics import SimilarityGraph, tokenize

DATA_DIR = Path(__file__).parent / "data"
STREAM200 = DATA_DIR / "stream200.ndjson"


def make_message(mid: str, ts: int = 0, text: str = "", tokens=None) -> Message:
    msg = Message(id=mid, ts=ts, text=text or mid)
    return msg.with_tokens(tuple(tokens) if tokens is not None else tokenize(msg.text))


def make_graph(edges, nodes=None, theta: float = 0.3, k: int = 10) -> SimilarityGraph:
    """Graph literal: edges as (u, v, w); nodes inferred unless given."""
    if nodes is None:
        nodes = sorted({n for u, v, _ in edges for n in (u, v)})
    return SimilarityGraph(nodes=tuple(sorted(nodes)), edges=tuple(sorted(edges)),
                           theta=theta, k=k)


@pytest.fixture
def stream200_path() -> str:
    return str(STREAM200)
