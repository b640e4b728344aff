"""Frame wire schema: serialization, parsing, and validation.

Field names are part of the contract and must not drift:

{"seq":int,"ts":int,
 "countries":[{"cluster_id":str,"color":"#RRGGBB","label":[str],"rings":[[[x,y],...]]}],
 "nodes":[{"id":str,"x":num,"y":num,"cluster_id":str,"text":str,"ts":int}],
 "edges":[{"src":str,"dst":str,"w":num}],
 "metrics":{"stress":num,"node_disp":num,"pack_disp":num,"utilization":num}}
"""

from __future__ import annotations

import json
import re
from typing import Any

from streammap.mapgen import Country, FrameMetrics, FrameNode, MapFrame

_COLOR_RE = re.compile(r"^#[0-9a-fA-F]{6}$")

FRAME_KEYS = {"seq", "ts", "countries", "nodes", "edges", "metrics"}
COUNTRY_KEYS = {"cluster_id", "color", "label", "rings"}
NODE_KEYS = {"id", "x", "y", "cluster_id", "text", "ts"}
EDGE_KEYS = {"src", "dst", "w"}
METRIC_KEYS = {"stress", "node_disp", "pack_disp", "utilization"}


class WireError(ValueError):
    """The payload does not conform to the frame wire schema."""


def frame_to_dict(frame: MapFrame) -> dict[str, Any]:
    return {
        "seq": frame.seq,
        "ts": frame.ts,
        "countries": [
            {
                "cluster_id": c.cluster_id,
                "color": c.color,
                "label": list(c.label),
                "rings": [[[x, y] for x, y in ring] for ring in c.rings],
            }
            for c in frame.countries
        ],
        "nodes": [
            {"id": n.id, "x": n.x, "y": n.y, "cluster_id": n.cluster_id,
             "text": n.text, "ts": n.ts}
            for n in frame.nodes
        ],
        "edges": [{"src": u, "dst": v, "w": w} for u, v, w in frame.edges],
        "metrics": {
            "stress": frame.metrics.stress,
            "node_disp": frame.metrics.node_disp,
            "pack_disp": frame.metrics.pack_disp,
            "utilization": frame.metrics.utilization,
        },
    }


def frame_to_json(frame: MapFrame) -> str:
    return json.dumps(frame_to_dict(frame), separators=(",", ":"), ensure_ascii=False)


def frame_from_dict(data: dict[str, Any]) -> MapFrame:
    validate_frame_dict(data)
    countries = tuple(
        Country(
            cluster_id=c["cluster_id"],
            color=c["color"],
            label=tuple(c["label"]),
            rings=tuple(tuple((x, y) for x, y in ring) for ring in c["rings"]),
        )
        for c in data["countries"]
    )
    nodes = tuple(
        FrameNode(n["id"], n["x"], n["y"], n["cluster_id"], n["text"], n["ts"])
        for n in data["nodes"]
    )
    edges = tuple((e["src"], e["dst"], e["w"]) for e in data["edges"])
    m = data["metrics"]
    metrics = FrameMetrics(m["stress"], m["node_disp"], m["pack_disp"], m["utilization"])
    return MapFrame(data["seq"], data["ts"], countries, nodes, edges, metrics)


def frame_from_json(raw: str | bytes) -> MapFrame:
    return frame_from_dict(json.loads(raw))


def _want(cond: bool, msg: str) -> None:
    if not cond:
        raise WireError(msg)


def _is_int(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def validate_frame_dict(data: Any) -> None:
    """Raise WireError unless `data` is a schema-conforming frame object."""
    _want(isinstance(data, dict), "frame must be an object")
    _want(set(data) == FRAME_KEYS, f"frame keys must be exactly {sorted(FRAME_KEYS)}")
    _want(_is_int(data["seq"]) and data["seq"] >= 0, "seq must be a non-negative int")
    _want(_is_int(data["ts"]) and data["ts"] >= 0, "ts must be a non-negative int")
    _want(isinstance(data["countries"], list), "countries must be a list")
    _want(isinstance(data["nodes"], list), "nodes must be a list")
    _want(isinstance(data["edges"], list), "edges must be a list")

    country_ids = set()
    for c in data["countries"]:
        _want(isinstance(c, dict) and set(c) == COUNTRY_KEYS, "bad country keys")
        _want(isinstance(c["cluster_id"], str) and c["cluster_id"], "bad cluster_id")
        _want(isinstance(c["color"], str) and bool(_COLOR_RE.match(c["color"])),
              f"bad color {c.get('color')!r}")
        _want(isinstance(c["label"], list) and all(isinstance(t, str) for t in c["label"]),
              "label must be a list of strings")
        _want(len(c["label"]) <= 5, "label holds at most 5 terms")
        _want(isinstance(c["rings"], list), "rings must be a list")
        for ring in c["rings"]:
            _want(isinstance(ring, list) and len(ring) >= 4, "ring too short")
            for pt in ring:
                _want(isinstance(pt, list) and len(pt) == 2
                      and _is_num(pt[0]) and _is_num(pt[1]), "ring point must be [x,y]")
            _want(ring[0] == ring[-1], "ring must be closed")
        country_ids.add(c["cluster_id"])

    node_ids = set()
    for n in data["nodes"]:
        _want(isinstance(n, dict) and set(n) == NODE_KEYS, "bad node keys")
        _want(isinstance(n["id"], str) and n["id"], "bad node id")
        _want(_is_num(n["x"]) and _is_num(n["y"]), "node x/y must be numbers")
        _want(isinstance(n["cluster_id"], str), "bad node cluster_id")
        _want(n["cluster_id"] in country_ids, f"node {n['id']} cluster has no country")
        _want(isinstance(n["text"], str), "node text must be a string")
        _want(_is_int(n["ts"]), "node ts must be an int")
        _want(n["id"] not in node_ids, f"duplicate node id {n['id']}")
        node_ids.add(n["id"])

    for e in data["edges"]:
        _want(isinstance(e, dict) and set(e) == EDGE_KEYS, "bad edge keys")
        _want(e["src"] in node_ids and e["dst"] in node_ids,
              "edge endpoints must be present nodes")
        _want(_is_num(e["w"]) and 0.0 < e["w"] <= 1.0, "edge weight must be in (0,1]")

    m = data["metrics"]
    _want(isinstance(m, dict) and set(m) == METRIC_KEYS,
          f"metrics keys must be exactly {sorted(METRIC_KEYS)}")
    for key in METRIC_KEYS:
        _want(_is_num(m[key]), f"metric {key} must be a number")
