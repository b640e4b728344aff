from __future__ import annotations

import itertools
import random

import pytest

from streammap.clustering import (
    assign_stable_ids,
    cluster_component,
    connected_components,
    label_cluster,
    modularity,
)
from streammap.semantics import TermVector

from conftest import make_graph


def dfs_partition(nodes, edges):
    """Independent connected-components oracle: explicit-stack DFS."""
    adj = {n: [] for n in nodes}
    for u, v, _ in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen, parts = set(), []
    for start in nodes:
        if start in seen:
            continue
        stack, part = [start], set()
        while stack:
            n = stack.pop()
            if n in seen:
                continue
            seen.add(n)
            part.add(n)
            stack.extend(adj[n])
        parts.append(frozenset(part))
    return set(parts)


def oracle_modularity(edges, partition):
    """Independent weighted-modularity evaluation."""
    m = sum(w for _, _, w in edges)
    if m == 0:
        return 0.0
    strength = {}
    for u, v, w in edges:
        strength[u] = strength.get(u, 0.0) + w
        strength[v] = strength.get(v, 0.0) + w
    q = 0.0
    for group in partition:
        inside = sum(w for u, v, w in edges if u in group and v in group)
        deg = sum(strength.get(n, 0.0) for n in group)
        q += inside / m - (deg / (2 * m)) ** 2
    return q


def all_partitions(items):
    """Every set partition (restricted-growth enumeration)."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for sub in all_partitions(rest):
        for i in range(len(sub)):
            yield sub[:i] + [sub[i] | {first}] + sub[i + 1:]
        yield sub + [{first}]


class TestConnectedComponents:
    def test_edgeless_graph_singletons(self):
        g = make_graph([], nodes=["a", "b", "c"])
        comps = connected_components(g)
        assert [sorted(c.nodes) for c in comps] == [["a"], ["b"], ["c"]]
        assert [c.id for c in comps] == ["a", "b", "c"]

    def test_path_single_component(self):
        g = make_graph([("a", "b", 0.5), ("b", "c", 0.5)])
        comps = connected_components(g)
        assert len(comps) == 1
        assert comps[0].nodes == frozenset("abc")

    def test_random_graphs_match_dfs_oracle(self):
        rng = random.Random(5)
        for _ in range(25):
            nodes = [f"n{i}" for i in range(20)]
            edges = [
                (u, v, round(rng.uniform(0.3, 1.0), 3))
                for u, v in itertools.combinations(nodes, 2) if rng.random() < 0.08
            ]
            g = make_graph(edges, nodes=nodes)
            got = {c.nodes for c in connected_components(g)}
            assert got == dfs_partition(nodes, edges)

    def test_partition_property(self):
        g = make_graph([("a", "b", 0.5)], nodes=["a", "b", "c"])
        comps = connected_components(g)
        union = set().union(*(c.nodes for c in comps))
        assert union == set(g.nodes)
        assert sum(len(c.nodes) for c in comps) == len(g.nodes)


class TestClusterComponent:
    def test_single_node(self):
        g = make_graph([], nodes=["a"])
        clusters = cluster_component(g)
        assert len(clusters) == 1
        assert clusters[0].members == frozenset(["a"])

    def test_two_cliques_light_bridge_matches_brute_force(self):
        heavy, light = 0.9, 0.1
        edges = [(u, v, heavy) for u, v in itertools.combinations("abc", 2)]
        edges += [(u, v, heavy) for u, v in itertools.combinations("xyz", 2)]
        edges += [("c", "x", light)]
        g = make_graph(edges)
        best_q, best = max(
            ((oracle_modularity(edges, part), part) for part in all_partitions("abcxyz")),
            key=lambda qp: qp[0])
        best_sets = {frozenset(p) for p in best}
        assert best_sets == {frozenset("abc"), frozenset("xyz")}
        got = {c.members for c in cluster_component(g)}
        assert got == best_sets
        assert modularity(g, got) == pytest.approx(best_q, abs=1e-12)

    def test_complete_uniform_graph_single_cluster(self):
        edges = [(u, v, 0.7) for u, v in itertools.combinations("abcde", 2)]
        g = make_graph(edges)
        whole = [set("abcde")]
        for part in all_partitions("abcde"):
            assert oracle_modularity(edges, part) <= oracle_modularity(edges, whole) + 1e-12
        clusters = cluster_component(g)
        assert len(clusters) == 1
        assert clusters[0].members == frozenset("abcde")

    def test_no_edges_all_singletons(self):
        g = make_graph([], nodes=["a", "b"])
        assert {c.members for c in cluster_component(g)} == {
            frozenset(["a"]), frozenset(["b"])}

    def test_partition_and_modularity_floor(self):
        rng = random.Random(11)
        for _ in range(10):
            nodes = [f"n{i}" for i in range(9)]
            edges = [
                (u, v, round(rng.uniform(0.3, 1.0), 3))
                for u, v in itertools.combinations(nodes, 2) if rng.random() < 0.3
            ]
            g = make_graph(edges, nodes=nodes)
            for comp in connected_components(g):
                sub = g.subgraph(comp.nodes)
                clusters = cluster_component(sub)
                members = [c.members for c in clusters]
                assert set().union(*members) == comp.nodes
                assert sum(len(m) for m in members) == len(comp.nodes)
                singles = [{n} for n in comp.nodes]
                assert modularity(sub, members) >= modularity(sub, singles) - 1e-12

    def test_deterministic(self):
        edges = [("a", "b", 0.5), ("b", "c", 0.5), ("c", "d", 0.5), ("a", "d", 0.5)]
        g = make_graph(edges)
        assert cluster_component(g) == cluster_component(g)


class TestLabelCluster:
    def test_single_term(self):
        cluster = cluster_component(make_graph([], nodes=["m"]))[0]
        vectors = {"m": TermVector.from_weights({"t": 2.0})}
        assert label_cluster(cluster, vectors) == ("t",)

    def test_dominant_shared_term_first(self):
        g = make_graph([("a", "b", 0.9)])
        cluster = cluster_component(g)[0]
        vectors = {
            "a": TermVector.from_weights({"graph": 1.0, "zeta": 0.9}),
            "b": TermVector.from_weights({"graph": 1.0, "eta": 0.8}),
        }
        label = label_cluster(cluster, vectors)
        assert label[0] == "graph"

    def test_four_message_hand_sum(self):
        g = make_graph([(u, v, 0.9) for u, v in itertools.combinations("abcd", 2)])
        cluster = cluster_component(g)[0]
        vectors = {
            "a": TermVector.from_weights({"t1": 1.0, "t2": 0.5, "t7": 0.1}),
            "b": TermVector.from_weights({"t1": 0.4, "t3": 0.9}),
            "c": TermVector.from_weights({"t2": 0.8, "t3": 0.3, "t4": 0.2}),
            "d": TermVector.from_weights({"t5": 0.25, "t6": 0.25}),
        }
        # hand sums: t1=1.4, t2=1.3, t3=1.2, t4=0.2, t5=0.25, t6=0.25, t7=0.1
        assert label_cluster(cluster, vectors) == ("t1", "t2", "t3", "t5", "t6")

    def test_tie_breaks_lexicographic(self):
        cluster = cluster_component(make_graph([], nodes=["m"]))[0]
        vectors = {"m": TermVector.from_weights({"b": 1.0, "a": 1.0, "c": 1.0})}
        assert label_cluster(cluster, vectors) == ("a", "b", "c")


def fresh_gen(prefix="f"):
    counter = itertools.count()
    while True:
        yield f"{prefix}{next(counter)}"


class TestAssignStableIds:
    def test_identical_partitions_keep_ids(self):
        prev = [("p1", frozenset("ab")), ("p2", frozenset("cd"))]
        cur = [("x", frozenset("ab")), ("y", frozenset("cd"))]
        mapping = assign_stable_ids(cur, prev, fresh_gen())
        assert mapping == {"x": "p1", "y": "p2"}

    def test_split_keeps_id_on_larger_part(self):
        prev = [("p1", frozenset("abcde"))]
        cur = [("big", frozenset("abcd")), ("small", frozenset("e"))]
        mapping = assign_stable_ids(cur, prev, fresh_gen())
        assert mapping["big"] == "p1"
        assert mapping["small"] == "f0"

    def test_disjoint_all_fresh(self):
        prev = [("p1", frozenset("ab"))]
        cur = [("x", frozenset("cd")), ("y", frozenset("ef"))]
        mapping = assign_stable_ids(cur, prev, fresh_gen())
        assert set(mapping.values()) == {"f0", "f1"}

    def test_merge_prefers_larger_overlap(self):
        prev = [("p1", frozenset("abc")), ("p2", frozenset("de"))]
        cur = [("m", frozenset("abcde"))]
        mapping = assign_stable_ids(cur, prev, fresh_gen())
        assert mapping == {"m": "p1"}

    def test_each_previous_id_used_once(self):
        prev = [("p1", frozenset("abcd"))]
        cur = [("x", frozenset("ab")), ("y", frozenset("cd"))]
        mapping = assign_stable_ids(cur, prev, fresh_gen())
        assert sorted(mapping.values()) == ["f0", "p1"]

    def test_overlap_tie_prefers_smaller_previous_id(self):
        prev = [("p2", frozenset("ab")), ("p1", frozenset("cd"))]
        cur = [("x", frozenset("ac"))]  # overlap 1 with both
        mapping = assign_stable_ids(cur, prev, fresh_gen())
        assert mapping == {"x": "p1"}

    def test_idempotent(self):
        prev = [("p1", frozenset("ab")), ("p2", frozenset("cde"))]
        cur = [("u", frozenset("abc")), ("v", frozenset("de"))]
        first = assign_stable_ids(cur, prev, fresh_gen())
        second = assign_stable_ids(cur, prev, fresh_gen())
        assert first == second

    def test_injective_over_random_inputs(self):
        rng = random.Random(3)
        universe = [f"n{i}" for i in range(30)]
        for _ in range(50):
            rng.shuffle(universe)
            prev_groups, cur_groups = [], []
            i = 0
            while i < 30:
                size = rng.randrange(1, 6)
                prev_groups.append(frozenset(universe[i:i + size]))
                i += size
            rng.shuffle(universe)
            i = 0
            while i < 30:
                size = rng.randrange(1, 6)
                cur_groups.append(frozenset(universe[i:i + size]))
                i += size
            prev = [(f"p{j}", g) for j, g in enumerate(prev_groups)]
            cur = [(f"c{j}", g) for j, g in enumerate(cur_groups)]
            mapping = assign_stable_ids(cur, prev, fresh_gen())
            assert len(set(mapping.values())) == len(mapping)
