"""Static SVG export of a map frame (batch mode), same geometry as the wire."""

from __future__ import annotations

from streammap.mapgen import MapFrame

_STYLE = (
    "polygon{stroke:#555;stroke-width:0.4%;fill-opacity:0.55}"
    "line{stroke:#888;stroke-width:0.2%}"
    "circle{fill:#222}"
    "text{font-family:sans-serif;fill:#111}"
)


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def render_frame_svg(frame: MapFrame, size: int = 800) -> str:
    """Render countries, edges, nodes, and labels into a standalone SVG."""
    xs = [n.x for n in frame.nodes]
    ys = [n.y for n in frame.nodes]
    for c in frame.countries:
        for ring in c.rings:
            xs.extend(p[0] for p in ring)
            ys.extend(p[1] for p in ring)
    if xs:
        minx, maxx = min(xs), max(xs)
        miny, maxy = min(ys), max(ys)
        span = max(maxx - minx, maxy - miny, 1e-9)
        pad = 0.05 * span
        minx, miny, span = minx - pad, miny - pad, span + 2 * pad
    else:
        minx = miny = 0.0
        span = 1.0
    scale = size / span
    node_r = max(1.5, 0.004 * size)

    def sx(x: float) -> str:
        return _fmt((x - minx) * scale)

    def sy(y: float) -> str:
        # flip so +y in layout units points up on screen
        return _fmt(size - (y - miny) * scale)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f"<style>{_STYLE}</style>",
    ]
    pos = {n.id: (n.x, n.y) for n in frame.nodes}
    for c in frame.countries:
        for ring in c.rings:
            points = " ".join(f"{sx(px)},{sy(py)}" for px, py in ring[:-1])
            out.append(f'<polygon points="{points}" fill="{c.color}"/>')
    for u, v, _ in frame.edges:
        (x1, y1), (x2, y2) = pos[u], pos[v]
        out.append(f'<line x1="{sx(x1)}" y1="{sy(y1)}" x2="{sx(x2)}" y2="{sy(y2)}"/>')
    for n in frame.nodes:
        out.append(f'<circle cx="{sx(n.x)}" cy="{sy(n.y)}" r="{_fmt(node_r)}"/>')
    for c in frame.countries:
        if not c.rings or not c.label:
            continue
        ring = c.rings[0][:-1]
        cx = sum(p[0] for p in ring) / len(ring)
        cy = sum(p[1] for p in ring) / len(ring)
        label = " ".join(c.label[:3])
        out.append(
            f'<text x="{sx(cx)}" y="{sy(cy)}" font-size="{_fmt(0.02 * size)}" '
            f'text-anchor="middle">{_escape(label)}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
