"""Graph partitioning: connected components, subtopic clusters, labels,
and stable identity propagation across ticks."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Mapping, Sequence

from streammap.semantics import SimilarityGraph, TermVector


@dataclass(frozen=True)
class Component:
    """A connected component of the similarity graph."""

    id: str
    nodes: frozenset[str]


@dataclass(frozen=True)
class Cluster:
    """A subtopic: a group of mutually similar messages within a component."""

    id: str
    members: frozenset[str]
    label: tuple[str, ...] = ()

    def with_id(self, new_id: str) -> "Cluster":
        return replace(self, id=new_id)

    def with_label(self, label: tuple[str, ...]) -> "Cluster":
        return replace(self, label=label)


def connected_components(graph: SimilarityGraph) -> list[Component]:
    """Connected components, ordered by smallest member id.

    Each component's provisional id is its smallest member id; stable ids
    are assigned separately via `assign_stable_ids`.
    """
    seen: set[str] = set()
    comps: list[frozenset[str]] = []
    for start in sorted(graph.nodes):
        if start in seen:
            continue
        stack = [start]
        members = {start}
        seen.add(start)
        while stack:
            node = stack.pop()
            for nbr in graph.neighbors(node):
                if nbr not in seen:
                    seen.add(nbr)
                    members.add(nbr)
                    stack.append(nbr)
        comps.append(frozenset(members))
    comps.sort(key=min)
    return [Component(id=min(c), nodes=c) for c in comps]


def modularity(graph: SimilarityGraph, partition: Iterable[Iterable[str]]) -> float:
    """Weighted Newman modularity of a node partition."""
    m = sum(w for _, _, w in graph.edges)
    if m == 0.0:
        return 0.0
    strength = {n: 0.0 for n in graph.nodes}
    for u, v, w in graph.edges:
        strength[u] += w
        strength[v] += w
    q = 0.0
    for group in partition:
        members = set(group)
        internal = sum(w for u, v, w in graph.edges if u in members and v in members)
        degree = sum(strength[n] for n in members)
        q += internal / m - (degree / (2.0 * m)) ** 2
    return q


def cluster_component(graph: SimilarityGraph) -> list[Cluster]:
    """Greedy modularity agglomeration over one component's weighted subgraph.

    Starts from singletons and repeatedly merges the cluster pair with the
    largest modularity gain until the best gain is <= 0. A cluster is keyed
    by its smallest member id; gain ties prefer the lexicographically
    smallest (key, partner-key) pair. Returned clusters are ordered by key.
    """
    nodes = sorted(graph.nodes)
    if not nodes:
        return []
    m = sum(w for _, _, w in graph.edges)
    members: dict[str, set[str]] = {n: {n} for n in nodes}
    if m == 0.0:
        return [Cluster(id=n, members=frozenset(members[n])) for n in nodes]

    strength = {n: 0.0 for n in nodes}
    for u, v, w in graph.edges:
        strength[u] += w
        strength[v] += w
    frac = {n: strength[n] / (2.0 * m) for n in nodes}  # degree fraction a_i

    # e[a][b]: total weight between clusters a and b (both directions kept).
    e: dict[str, dict[str, float]] = {n: {} for n in nodes}
    for u, v, w in graph.edges:
        e[u][v] = e[u].get(v, 0.0) + w
        e[v][u] = e[v].get(u, 0.0) + w

    while len(members) > 1:
        best_gain = 0.0
        best_pair: tuple[str, str] | None = None
        for a in sorted(e):
            for b in sorted(e[a]):
                if a >= b:
                    continue
                gain = e[a][b] / m - 2.0 * frac[a] * frac[b]
                if gain > best_gain or (gain == best_gain and best_pair is not None
                                        and (a, b) < best_pair):
                    best_gain = gain
                    best_pair = (a, b)
        if best_pair is None or best_gain <= 0.0:
            break
        a, b = best_pair
        members[a] |= members.pop(b)
        frac[a] += frac.pop(b)
        nbrs_b = e.pop(b)
        for c, w in nbrs_b.items():
            if c == a:
                continue
            e[c].pop(b, None)
            e[a][c] = e[a].get(c, 0.0) + w
            e[c][a] = e[a][c]
        e[a].pop(b, None)
        # re-key if b brought in a smaller id than a
        new_key = min(members[a])
        if new_key != a:
            members[new_key] = members.pop(a)
            frac[new_key] = frac.pop(a)
            e[new_key] = e.pop(a)
            for c in e[new_key]:
                e[c][new_key] = e[c].pop(a)
    return [Cluster(id=k, members=frozenset(v)) for k, v in sorted(members.items())]


def label_cluster(cluster: Cluster, vectors: Mapping[str, TermVector],
                  top_n: int = 5) -> tuple[str, ...]:
    """Top-N terms by summed TF-IDF weight over members; ties lexicographic."""
    totals: dict[str, float] = {}
    for member in cluster.members:
        for term, w in vectors[member].weights.items():
            totals[term] = totals.get(term, 0.0) + w
    ranked = sorted(totals.items(), key=lambda tw: (-tw[1], tw[0]))
    return tuple(t for t, _ in ranked[:top_n])


def assign_stable_ids(
    current: Sequence[tuple[str, frozenset[str]]],
    previous: Sequence[tuple[str, frozenset[str]]],
    fresh_ids: Iterator[str],
) -> dict[str, str]:
    """Map current group ids to stable ids by greedy maximum member overlap.

    Pairs are considered in descending overlap; ties prefer the smaller
    previous id, then the smaller current id. Each previous id is used at
    most once; unmatched current groups draw from `fresh_ids`.
    """
    overlaps: list[tuple[int, str, str]] = []
    for cur_id, cur_members in current:
        for prev_id, prev_members in previous:
            shared = len(cur_members & prev_members)
            if shared > 0:
                overlaps.append((shared, prev_id, cur_id))
    overlaps.sort(key=lambda t: (-t[0], t[1], t[2]))
    mapping: dict[str, str] = {}
    used_prev: set[str] = set()
    for shared, prev_id, cur_id in overlaps:
        if cur_id in mapping or prev_id in used_prev:
            continue
        mapping[cur_id] = prev_id
        used_prev.add(prev_id)
    for cur_id, _ in current:
        if cur_id not in mapping:
            mapping[cur_id] = next(fresh_ids)
    if len(set(mapping.values())) != len(mapping):
        raise AssertionError("stable id assignment must be injective")
    return mapping
