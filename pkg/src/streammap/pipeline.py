"""Per-tick pipeline: snapshot in, frame out, carried state in between.

tick() is a pure function of (snapshot, state, config, ts): all stability
machinery (warm starts, Procrustes, stable packing, stable ids and
colors) lives in the state threaded through consecutive calls.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from streammap import clustering, layout, mapgen, packing, stability
from streammap.config import PipelineConfig
from streammap.mapgen import FrameMetrics, MapFrame
from streammap.messages import DuplicateMessageError, Message, Window
from streammap.semantics import build_graph, load_stopwords, tfidf, tokenize
from streammap.sources import ReplaySource
from streammap.svg import render_frame_svg
from streammap.wire import frame_to_json

STAGES = ("semantics", "cluster", "layout", "align", "pack", "mapgen")


@dataclass(frozen=True)
class TickReport:
    seq: int
    durations: dict[str, float]
    message_count: int
    component_count: int


@dataclass(frozen=True)
class PipelineState:
    """Everything one tick hands to the next.

    Node positions are stored in their component's own layout frame, with
    the grid offset that placed that frame on the map kept per node: a
    node whose component did not change is warm-started from the exact
    same floats, which is what makes end-to-end stasis exact.
    """

    seq: int = 0
    components: tuple[tuple[str, frozenset[str]], ...] = ()
    clusters: tuple[tuple[str, frozenset[str]], ...] = ()
    node_positions: dict[str, tuple[float, float]] = field(default_factory=dict)
    node_offsets: dict[str, tuple[int, int]] = field(default_factory=dict)
    map_positions: dict[str, tuple[float, float]] = field(default_factory=dict)
    layouts: dict[str, tuple[str, layout.ComponentLayout]] = field(default_factory=dict)
    packing: packing.PackingState | None = None
    colors: dict[str, str] = field(default_factory=dict)
    color_last_used: dict[str, int] = field(default_factory=dict)
    fresh_counter: int = 0
    frame: MapFrame | None = None


class _FreshIds:
    """Deterministic fresh-id source; `counter` survives into the next state."""

    def __init__(self, start: int):
        self.counter = start

    def __iter__(self):
        return self

    def __next__(self) -> str:
        value = f"g{self.counter:07d}"
        self.counter += 1
        return value


def _component_diameter(positions: Mapping[str, tuple[float, float]]) -> float:
    pts = list(positions.values())
    best = 0.0
    for i, (xi, yi) in enumerate(pts):
        for xj, yj in pts[i + 1:]:
            best = max(best, math.hypot(xi - xj, yi - yj))
    return best


def _median(values: Sequence[float]) -> float:
    ordered = sorted(values)
    n = len(ordered)
    if n == 0:
        return 0.0
    mid = n // 2
    return ordered[mid] if n % 2 else (ordered[mid - 1] + ordered[mid]) / 2.0


def _layout_digest(ids: Sequence[str], dist, config: PipelineConfig) -> str:
    """Fingerprint of a component layout subproblem. An unchanged component
    reuses its stored positions outright, so a map region never moves
    unless its content (or the layout configuration) actually changed."""
    h = hashlib.sha1()
    h.update("\x00".join(ids).encode("utf-8"))
    h.update(dist.tobytes())
    h.update(f"|{config.seed}|{config.layout_max_iter}|{config.layout_rtol}".encode())
    return h.hexdigest()


def tick(
    snapshot: Sequence[Message],
    state: PipelineState,
    config: PipelineConfig,
    ts: int,
) -> tuple[MapFrame, PipelineState, TickReport]:
    """Run one full pipeline pass over an immutable window snapshot."""
    durations: dict[str, float] = {}
    t0 = time.perf_counter()

    # semantics: vectors and the similarity graph
    messages = {m.id: m for m in snapshot}
    vectors = tfidf(snapshot) if snapshot else {}
    graph = build_graph(vectors, config.theta, config.k)
    durations["semantics"] = time.perf_counter() - t0

    # clustering: components, subtopics, labels, stable identity
    t0 = time.perf_counter()
    comps = clustering.connected_components(graph)
    comp_subgraphs = {c.id: graph.subgraph(c.nodes) for c in comps}
    clusters_by_comp: dict[str, list[clustering.Cluster]] = {}
    for comp in comps:
        found = clustering.cluster_component(comp_subgraphs[comp.id])
        clusters_by_comp[comp.id] = [
            cl.with_label(clustering.label_cluster(cl, vectors)) for cl in found
        ]
    fresh = _FreshIds(state.fresh_counter)
    cur_comps = [(c.id, c.nodes) for c in comps]
    comp_ids = clustering.assign_stable_ids(cur_comps, state.components, fresh)
    all_clusters = [cl for comp in comps for cl in clusters_by_comp[comp.id]]
    cur_clusters = [(cl.id, cl.members) for cl in all_clusters]
    cluster_ids = clustering.assign_stable_ids(cur_clusters, state.clusters, fresh)
    fresh_counter = fresh.counter
    durations["cluster"] = time.perf_counter() - t0

    # layout: per-component stress majorization, warm-started; unchanged
    # subproblems reuse their stored solution
    t0 = time.perf_counter()
    prev_cs = state.packing.cell_size if state.packing else 1.0
    prev_offsets = state.packing.placements if state.packing else {}
    fresh_layouts: dict[str, layout.ComponentLayout] = {}
    warm_sets: dict[str, dict[str, tuple[float, float]]] = {}
    digests: dict[str, str] = {}
    reused: set[str] = set()
    for comp in sorted(comps, key=lambda c: comp_ids[c.id]):
        stable_id = comp_ids[comp.id]
        subgraph = comp_subgraphs[comp.id]
        ids, dist = layout.target_distances(subgraph)
        digest = _layout_digest(ids, dist, config)
        digests[stable_id] = digest
        cached = state.layouts.get(stable_id)
        if cached is not None and cached[0] == digest:
            fresh_layouts[stable_id] = cached[1]
            warm_sets[stable_id] = cached[1].positions
            reused.add(stable_id)
            continue
        ref = prev_offsets.get(stable_id)
        warm: dict[str, tuple[float, float]] = {}
        for n in comp.nodes:
            pos = state.node_positions.get(n)
            if pos is None:
                continue
            prev_off = state.node_offsets[n]
            if ref is None:
                # fresh component: use the map frame as its layout frame
                warm[n] = (pos[0] + prev_off[0] * prev_cs,
                           pos[1] + prev_off[1] * prev_cs)
            elif prev_off == ref:
                warm[n] = pos  # same frame: reuse the exact floats
            else:
                warm[n] = (pos[0] + (prev_off[0] - ref[0]) * prev_cs,
                           pos[1] + (prev_off[1] - ref[1]) * prev_cs)
        warm_sets[stable_id] = warm
        fresh_layouts[stable_id] = layout.layout_component(
            subgraph, stable_id, distances=(ids, dist), warm_start=warm,
            seed=config.seed, max_iter=config.layout_max_iter,
            rtol=config.layout_rtol,
        )
    durations["layout"] = time.perf_counter() - t0

    # align: rigid Procrustes onto each component's previous positions
    t0 = time.perf_counter()
    identity = stability.RigidTransform.identity()
    aligned: dict[str, layout.ComponentLayout] = {}
    for stable_id, lay in fresh_layouts.items():
        warm = warm_sets[stable_id]
        if stable_id not in reused:
            shared = set(lay.positions) & set(warm)
            if len(shared) >= 2:
                transform, _ = stability.procrustes_align(lay.positions, warm)
                if transform != identity:
                    lay = stability.apply_transform(lay, transform)
        aligned[stable_id] = lay
    durations["align"] = time.perf_counter() - t0

    # pack: stable placement, or a periodic compaction refresh
    t0 = time.perf_counter()
    prev_pack = state.packing
    refresh = (
        prev_pack is None
        or packing.utilization(prev_pack) < config.refresh_utilization
        or prev_pack.ticks_since_refresh >= config.refresh_period_ticks
    )
    if refresh:
        diameters = [
            _component_diameter(aligned[comp_ids[c.id]].positions) for c in comps
        ]
        med = _median(diameters)
        cell_size = med / config.cell_divisor if med > 0 else 1.0
    else:
        cell_size = prev_pack.cell_size
    margin = config.margin_cells * cell_size
    masks = [
        (stable_id, packing.rasterize(lay, cell_size, margin))
        for stable_id, lay in sorted(aligned.items())
    ]
    if refresh:
        pack_state = packing.refresh_pack(masks, cell_size)
    else:
        pack_state = packing.pack(masks, prev_pack)
    durations["pack"] = time.perf_counter() - t0

    # mapgen: positions, metrics, countries, colors, the frame itself
    t0 = time.perf_counter()
    positions = mapgen.map_positions(aligned.values(), pack_state)
    shared_nodes = [n for n in positions if n in state.map_positions]
    node_disp = (
        sum(
            math.hypot(positions[n][0] - state.map_positions[n][0],
                       positions[n][1] - state.map_positions[n][1])
            for n in shared_nodes
        ) / len(shared_nodes)
        if shared_nodes else 0.0
    )
    pack_disp = (
        packing.packing_displacement(prev_pack, pack_state) if prev_pack else 0.0
    )
    metrics = FrameMetrics(
        stress=sum(lay.stress for lay in aligned.values()),
        node_disp=node_disp,
        pack_disp=pack_disp,
        utilization=packing.utilization(pack_state),
    )
    stable_clusters = [cl.with_id(cluster_ids[cl.id]) for cl in all_clusters]
    node_clusters = {
        n: cl.id for cl in stable_clusters for n in cl.members
    }
    countries = mapgen.generate_countries(positions, stable_clusters)
    palette = mapgen.load_palette(config.palette_path) if config.palette_path \
        else mapgen.DEFAULT_PALETTE
    seq = state.seq + 1
    colored, last_used = mapgen.assign_colors(
        countries, state.colors, state.color_last_used, seq, palette
    )
    frame = mapgen.compose_frame(
        seq, ts, colored, list(aligned.values()), pack_state,
        node_clusters, messages, graph, metrics,
    )
    durations["mapgen"] = time.perf_counter() - t0

    node_positions: dict[str, tuple[float, float]] = {}
    node_offsets: dict[str, tuple[int, int]] = {}
    for stable_id, lay in aligned.items():
        off = pack_state.placements[stable_id]
        for n, pos in lay.positions.items():
            node_positions[n] = pos
            node_offsets[n] = off
    layouts = {sid: (digests[sid], lay) for sid, lay in aligned.items()}
    new_state = PipelineState(
        seq=seq,
        components=tuple((comp_ids[cid], members) for cid, members in cur_comps),
        clusters=tuple((cluster_ids[cid], members) for cid, members in cur_clusters),
        node_positions=node_positions,
        node_offsets=node_offsets,
        map_positions=positions,
        layouts=layouts,
        packing=pack_state,
        colors={c.cluster_id: c.color for c in colored},
        color_last_used=last_used,
        fresh_counter=fresh_counter,
        frame=frame,
    )
    report = TickReport(
        seq=seq,
        durations=durations,
        message_count=len(snapshot),
        component_count=len(comps),
    )
    return frame, new_state, report


def prepare_message(msg: Message, stopwords: frozenset[str] | None = None) -> Message:
    """Tokenize an incoming message (idempotent)."""
    if msg.tokens:
        return msg
    return msg.with_tokens(tokenize(msg.text, stopwords))


CSV_FIELDS = ("seq", "ts", "messages", "node_disp", "pack_disp", "stress", "utilization")


@dataclass
class ReplayResult:
    frames: int = 0
    malformed: int = 0
    duplicates: int = 0
    csv_text: str = ""


def _metrics_row(frame: MapFrame, message_count: int) -> dict:
    return {
        "seq": frame.seq,
        "ts": frame.ts,
        "messages": message_count,
        "node_disp": repr(frame.metrics.node_disp),
        "pack_disp": repr(frame.metrics.pack_disp),
        "stress": repr(frame.metrics.stress),
        "utilization": repr(frame.metrics.utilization),
    }


def run_replay(
    path: str,
    config: PipelineConfig,
    out_dir: str | Path | None,
    write_svg: bool = True,
) -> ReplayResult:
    """Unpaced batch replay: one tick per crossed tick_ms boundary.

    Writes frame-NNNN.json (wire schema) and frame-NNNN.svg per tick plus
    a metrics.csv, all byte-deterministic for a given (file, config, seed).
    """
    stopwords = load_stopwords(config.stopwords_path)
    source = ReplaySource(path, speed=0.0)
    msgs = source.load()
    window = Window(capacity=config.window_capacity, max_age_ms=config.window_max_age_ms)
    state = PipelineState()
    result = ReplayResult()
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()

    def emit(ts: int) -> None:
        nonlocal state
        snapshot = window.snapshot()
        frame, state, _report = tick(snapshot, state, config, ts)
        writer.writerow(_metrics_row(frame, len(snapshot)))
        result.frames += 1
        if out is not None:
            (out / f"frame-{frame.seq:04d}.json").write_text(
                frame_to_json(frame) + "\n", encoding="utf-8")
            if write_svg:
                (out / f"frame-{frame.seq:04d}.svg").write_text(
                    render_frame_svg(frame), encoding="utf-8")

    boundary: int | None = None
    newest_ts = 0
    for msg in msgs:
        if boundary is None:
            boundary = msg.ts + config.tick_ms
        elif msg.ts >= boundary:
            emit(newest_ts)
            periods = (msg.ts - boundary) // config.tick_ms + 1
            boundary += periods * config.tick_ms
        try:
            window.push(prepare_message(msg, stopwords))
            newest_ts = max(newest_ts, msg.ts)
        except DuplicateMessageError:
            result.duplicates += 1
    if msgs:
        emit(newest_ts)
    result.malformed = source.stats.malformed
    result.csv_text = buf.getvalue()
    if out is not None:
        (out / "metrics.csv").write_text(result.csv_text, encoding="utf-8")
    return result
