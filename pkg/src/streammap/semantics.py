"""Tokenization, TF-IDF weighting, and the similarity graph."""

from __future__ import annotations

import math
import string
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Mapping

from streammap.messages import Message

_PUNCT = string.punctuation + "‘’“”…"


def load_stopwords(path: str | None = None) -> frozenset[str]:
    """Load the stop-word list (one lowercase term per line, '#' comments)."""
    if path is None:
        text = resources.files("streammap.data").joinpath("stopwords.txt").read_text("utf-8")
    else:
        with open(path, "r", encoding="utf-8") as fp:
            text = fp.read()
    words = set()
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            words.add(line)
    return frozenset(words)


_DEFAULT_STOPWORDS = load_stopwords()


def tokenize(text: str, stopwords: frozenset[str] | None = None) -> tuple[str, ...]:
    """Normalize raw text into an ordered term tuple.

    Lowercases, drops URL tokens (http:// or https://) and @-mentions,
    strips punctuation from token edges, removes stop-words and tokens
    shorter than 2 characters. Original token order is preserved.
    """
    stops = _DEFAULT_STOPWORDS if stopwords is None else stopwords
    out = []
    for raw in text.lower().split():
        if raw.startswith(("http://", "https://")) or raw.startswith("@"):
            continue
        tok = raw.strip(_PUNCT)
        if len(tok) < 2 or tok in stops:
            continue
        out.append(tok)
    return tuple(out)


@dataclass(frozen=True)
class TermVector:
    """Sparse TF-IDF vector with its Euclidean norm; zero weights omitted."""

    weights: Mapping[str, float]
    norm: float

    @classmethod
    def from_weights(cls, weights: Mapping[str, float]) -> "TermVector":
        clean = {t: w for t, w in weights.items() if w != 0.0}
        norm = math.sqrt(sum(w * w for w in clean.values()))
        return cls(clean, norm)


def tfidf(messages: Iterable[Message]) -> dict[str, TermVector]:
    """TF-IDF vectors over a window snapshot.

    tf(t, d) is the raw count of t in d; idf(t) = ln((1 + N) / (1 + df(t))) + 1
    where N is the number of documents and df the document frequency.
    Iteration order is fixed by message id so results are bit-reproducible.
    """
    docs = sorted(messages, key=lambda m: m.id)
    n = len(docs)
    df: dict[str, int] = {}
    for msg in docs:
        for term in set(msg.tokens):
            df[term] = df.get(term, 0) + 1
    idf = {t: math.log((1 + n) / (1 + f)) + 1.0 for t, f in df.items()}
    vectors: dict[str, TermVector] = {}
    for msg in docs:
        counts: dict[str, int] = {}
        for term in msg.tokens:
            counts[term] = counts.get(term, 0) + 1
        weights = {t: c * idf[t] for t, c in sorted(counts.items())}
        vectors[msg.id] = TermVector.from_weights(weights)
    return vectors


def cosine(u: TermVector, v: TermVector) -> float:
    """Cosine similarity; 0 when either vector has zero norm."""
    if u.norm == 0.0 or v.norm == 0.0:
        return 0.0
    small, big = (u, v) if len(u.weights) <= len(v.weights) else (v, u)
    dot = 0.0
    for term in sorted(small.weights):
        w = big.weights.get(term)
        if w is not None:
            dot += small.weights[term] * w
    return min(1.0, max(0.0, dot / (u.norm * v.norm)))


@dataclass(frozen=True)
class SimilarityGraph:
    """Messages as nodes; cosine-similarity edges above a threshold.

    Edges are canonical (u < v) pairs with weight in (0, 1]. The graph may
    be disconnected; downstream stages must not assume otherwise.
    """

    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str, float], ...]
    theta: float
    k: int
    _adj: dict[str, dict[str, float]] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        adj: dict[str, dict[str, float]] = {n: {} for n in self.nodes}
        for u, v, w in self.edges:
            adj[u][v] = w
            adj[v][u] = w
        object.__setattr__(self, "_adj", adj)

    def neighbors(self, node: str) -> dict[str, float]:
        return self._adj[node]

    def subgraph(self, keep: Iterable[str]) -> "SimilarityGraph":
        keep_set = set(keep)
        return SimilarityGraph(
            nodes=tuple(n for n in self.nodes if n in keep_set),
            edges=tuple(e for e in self.edges if e[0] in keep_set and e[1] in keep_set),
            theta=self.theta,
            k=self.k,
        )


def _pairwise_cosine(ids: list[str], vectors: Mapping[str, TermVector]):
    """Sparse upper-triangular cosine matrix over the sorted id list."""
    import numpy as np
    from scipy import sparse

    vocab: dict[str, int] = {}
    rows, cols, vals = [], [], []
    for i, doc in enumerate(ids):
        vec = vectors[doc]
        if vec.norm == 0.0:
            continue
        for term in sorted(vec.weights):
            col = vocab.setdefault(term, len(vocab))
            rows.append(i)
            cols.append(col)
            vals.append(vec.weights[term] / vec.norm)
    x = sparse.csr_matrix(
        (vals, (rows, cols)), shape=(len(ids), max(len(vocab), 1)), dtype=np.float64
    )
    sim = sparse.triu(x @ x.T, k=1).tocoo()
    return sim


def build_graph(vectors: Mapping[str, TermVector], theta: float = 0.3, k: int = 10) -> SimilarityGraph:
    """Union k-NN similarity graph: keep edge (i, j) iff cosine >= theta and
    j is among i's top-k most similar nodes or vice versa.

    Top-k ranking breaks similarity ties by lexicographic id, so the result
    is invariant under input permutation. The pairwise step runs as one
    sparse matrix product; it agrees with cosine() up to float rounding.
    """
    if not 0.0 < theta <= 1.0:
        raise ValueError("theta must be in (0, 1]")
    if k <= 0:
        raise ValueError("k must be positive")
    ids = sorted(vectors)
    sims: dict[str, list[tuple[float, str]]] = {i: [] for i in ids}
    weight: dict[tuple[str, str], float] = {}
    if ids:
        sim = _pairwise_cosine(ids, vectors)
        for i, j, s in zip(sim.row, sim.col, sim.data):
            s = min(1.0, float(s))
            if s >= theta:
                a, b = ids[i], ids[j]
                weight[(a, b)] = s
                sims[a].append((s, b))
                sims[b].append((s, a))
    kept: set[tuple[str, str]] = set()
    for node, cand in sims.items():
        cand.sort(key=lambda sw: (-sw[0], sw[1]))
        for _, other in cand[:k]:
            kept.add((node, other) if node < other else (other, node))
    edges = tuple((u, v, weight[(u, v)]) for u, v in sorted(kept))
    return SimilarityGraph(nodes=tuple(ids), edges=edges, theta=theta, k=k)
