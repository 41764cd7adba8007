"""SVG figures: circular frame diagrams, emotional flowers, Jaccard bar charts.

Output is plain SVG 1.1 with no external references and no time/RNG input,
so identical inputs give identical bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping
from xml.sax.saxutils import escape, quoteattr

from .affect import EmotionProfile
from .errors import EmptyFrame
from .frames import SemanticFrame
from .graph import closeness_centrality
from .ingestion import EMOTIONS, pair_key
from .valence import NEGATIVE, NEUTRAL, POSITIVE

JACCARD_FLOOR = 0.001
_LOG_AXIS_MIN = 1e-4

PLUTCHIK_COLORS = {
    "joy": "#f2c500",
    "trust": "#7cb342",
    "fear": "#2e7d32",
    "surprise": "#0288d1",
    "sadness": "#283593",
    "disgust": "#8e24aa",
    "anger": "#d32f2f",
    "anticipation": "#ef6c00",
}


@dataclass
class RenderSpec:
    layout: str = "circular"
    color_map: dict[str, str] = field(default_factory=lambda: {
        POSITIVE: "#00acc1",
        NEUTRAL: "#000000",
        NEGATIVE: "#d32f2f",
    })
    contrast_edge_color: str = "#800080"
    plain_edge_color: str = "#9e9e9e"
    min_edge_frequency: int = 1
    font_scale_metric: str = "closeness"
    translation_map: dict[str, str] = field(default_factory=dict)
    size: int = 800
    font_min: float = 9.0
    font_span: float = 14.0

    def __post_init__(self):
        if self.min_edge_frequency < 1:
            raise ValueError("min_edge_frequency must be >= 1")
        if self.layout != "circular":
            raise ValueError("only the circular layout is supported")


def _f(x: float) -> str:
    return f"{x:.2f}"


def _svg_open(width: int, height: int) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]


def edge_color(val_a: str, val_b: str, spec: RenderSpec) -> str:
    if {val_a, val_b} == {POSITIVE, NEGATIVE}:
        return spec.contrast_edge_color
    if val_a == val_b and val_a in (POSITIVE, NEGATIVE):
        return spec.color_map[val_a]
    return spec.plain_edge_color


def render_frame_svg(frame: SemanticFrame, spec: RenderSpec | None = None,
                     freq_table: Mapping[tuple[str, str], int] | None = None) -> str:
    """Nodes on a circle ordered by frame degree (desc) then word; chords bent
    toward the centre. Edges seen fewer than ``min_edge_frequency`` times are
    dropped, and so are members left without a visible edge."""
    spec = spec or RenderSpec()
    if not frame.members:
        raise EmptyFrame(frame.target)
    g = frame.graph()
    edges = list(g.edges)
    if spec.min_edge_frequency > 1 and freq_table is not None:
        edges = [e for e in edges if freq_table.get(pair_key(*e), 0) >= spec.min_edge_frequency]
    shown = {frame.target} | {u for e in edges for u in e}
    visible = g.subgraph(shown)
    order = sorted(shown, key=lambda u: (-sum(1 for e in edges if u in e), u))

    size = spec.size
    cx = cy = size / 2
    radius = size * 0.34
    pos = {}
    for i, u in enumerate(order):
        angle = -math.pi / 2 + 2 * math.pi * i / len(order)
        pos[u] = (cx + radius * math.cos(angle), cy + radius * math.sin(angle), angle)

    out = _svg_open(size, size)
    out.append(f'<title>{escape(spec.translation_map.get(frame.target, frame.target))}</title>')
    out.append('<g id="edges" fill="none" stroke-linecap="round">')
    for u, v in edges:
        x1, y1, _ = pos[u]
        x2, y2, _ = pos[v]
        qx = cx + 0.35 * ((x1 + x2) / 2 - cx)
        qy = cy + 0.35 * ((y1 + y2) / 2 - cy)
        color = edge_color(g.valence[u], g.valence[v], spec)
        out.append(
            f'<path d="M {_f(x1)} {_f(y1)} Q {_f(qx)} {_f(qy)} {_f(x2)} {_f(y2)}" stroke="{color}" '
            f'stroke-width="1.20" stroke-opacity="0.70" data-a={quoteattr(u)} data-b={quoteattr(v)}/>'
        )
    out.append("</g>")
    out.append('<g id="nodes" font-family="Helvetica, Arial, sans-serif">')
    for u in order:
        x, y, angle = pos[u]
        color = spec.color_map[g.valence[u]]
        font = spec.font_min + spec.font_span * closeness_centrality(visible, u)
        lx = cx + (radius + 10) * math.cos(angle)
        ly = cy + (radius + 10) * math.sin(angle)
        anchor = "start" if math.cos(angle) >= -1e-9 else "end"
        label = spec.translation_map.get(u, u)
        weight = "bold" if u == frame.target else "normal"
        out.append(f'<circle cx="{_f(x)}" cy="{_f(y)}" r="3.00" fill="{color}"/>')
        out.append(
            f'<text x="{_f(lx)}" y="{_f(ly)}" font-size="{_f(font)}" fill="{color}" '
            f'font-weight="{weight}" text-anchor="{anchor}" dominant-baseline="middle" '
            f'data-word={quoteattr(u)} data-valence="{g.valence[u]}">{escape(label)}</text>'
        )
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def petal_length(z: float, min_len: float = 20.0, per_unit: float = 25.0, max_len: float = 170.0) -> float:
    """Affine in z, clipped below at z = 0 and above at ``max_len``."""
    return min(min_len + per_unit * max(z, 0.0), max_len)


def render_flower_svg(profile: EmotionProfile, title: str = "", size: int = 420) -> str:
    """Eight petals at fixed Plutchik positions (joy at the top, clockwise).
    Only significant positive petals are filled; the central circle marks
    the significance threshold."""
    c = size / 2
    out = _svg_open(size, size)
    if title:
        out.append(f"<title>{escape(title)}</title>")
    threshold = petal_length(profile.z_crit)
    out.append(f'<circle cx="{_f(c)}" cy="{_f(c)}" r="{_f(threshold)}" fill="#f5f5f5" '
               f'stroke="#bdbdbd" stroke-width="1.00" data-role="neutral"/>')
    for i, emo in enumerate(EMOTIONS):
        z = profile.z[emo]
        length = petal_length(z)
        half = max(6.0, 0.3 * length)
        filled = profile.significant[emo] and z > 0
        color = PLUTCHIK_COLORS[emo]
        d = (f"M {_f(c)} {_f(c)} Q {_f(c + half)} {_f(c - length / 2)} {_f(c)} {_f(c - length)} "
             f"Q {_f(c - half)} {_f(c - length / 2)} {_f(c)} {_f(c)} Z")
        out.append(
            f'<path d="{d}" transform="rotate({45 * i} {_f(c)} {_f(c)})" '
            f'fill="{color if filled else "none"}" fill-opacity="0.75" stroke="{color}" '
            f'stroke-width="1.50" data-emotion="{emo}" data-z="{z:.4f}" '
            f'data-filled="{"true" if filled else "false"}" data-length="{_f(length)}"/>'
        )
        angle = math.radians(45 * i - 90)
        lx = c + (size * 0.45) * math.cos(angle)
        ly = c + (size * 0.45) * math.sin(angle)
        out.append(f'<text x="{_f(lx)}" y="{_f(ly)}" font-family="Helvetica, Arial, sans-serif" '
                   f'font-size="11.00" text-anchor="middle" dominant-baseline="middle" '
                   f'fill="{color}">{emo}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_jaccard_bars(values: Mapping[str, float], log_scale: bool = False, title: str = "") -> str:
    """One bar per sample in mapping order. Zeros are drawn at J = 0.001."""
    for label, v in values.items():
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"Jaccard value {v} for {label!r} outside [0, 1]")
    n = len(values)
    width = max(360, 90 + 70 * n)
    height = 400
    left, right, top, bottom = 60, 20, 30, 110
    plot_w = width - left - right
    plot_h = height - top - bottom
    base_y = top + plot_h

    def bar_height(v: float) -> float:
        if log_scale:
            lo = math.log10(_LOG_AXIS_MIN)
            return (math.log10(v) - lo) / (0.0 - lo) * plot_h
        return v * plot_h

    out = _svg_open(width, height)
    if title:
        out.append(f"<title>{escape(title)}</title>")
    font = 'font-family="Helvetica, Arial, sans-serif" font-size="11.00"'
    out.append(f'<g id="axes" stroke="#000000" stroke-width="1.00">'
               f'<line x1="{left}" y1="{top}" x2="{left}" y2="{base_y}"/>'
               f'<line x1="{left}" y1="{base_y}" x2="{left + plot_w}" y2="{base_y}"/></g>')
    ticks = [1e-4, 1e-3, 1e-2, 1e-1, 1.0] if log_scale else [0.0, 0.25, 0.5, 0.75, 1.0]
    for t in ticks:
        y = base_y - (bar_height(t) if (t > 0 or not log_scale) else 0.0)
        out.append(f'<line x1="{left - 4}" y1="{_f(y)}" x2="{left}" y2="{_f(y)}" stroke="#000000"/>')
        out.append(f'<text x="{left - 6}" y="{_f(y)}" {font} text-anchor="end" '
                   f'dominant-baseline="middle">{t:g}</text>')
    slot = plot_w / n if n else plot_w
    for i, (label, v) in enumerate(values.items()):
        plotted = max(v, JACCARD_FLOOR)
        h = bar_height(plotted)
        x = left + i * slot + slot * 0.15
        w = slot * 0.7
        out.append(f'<rect x="{_f(x)}" y="{_f(base_y - h)}" width="{_f(w)}" height="{_f(h)}" '
                   f'fill="#5c6bc0" data-sample={quoteattr(label)} data-value="{v:.6f}" '
                   f'data-plotted="{plotted:.6f}"/>')
        tx = x + w / 2
        out.append(f'<text x="{_f(tx)}" y="{base_y + 12}" {font} text-anchor="end" '
                   f'transform="rotate(-45 {_f(tx)} {base_y + 12})">{escape(label)}</text>')
    out.append(f'<text x="14" y="{_f(top + plot_h / 2)}" {font} text-anchor="middle" '
               f'transform="rotate(-90 14 {_f(top + plot_h / 2)})">Jaccard similarity</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
