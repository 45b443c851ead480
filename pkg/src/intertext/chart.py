"""Grouped-bar SVG chart of intertextuality ratios with CI error bars.

Pure text output: identical inputs produce identical bytes.
"""

from __future__ import annotations

import math
from typing import Sequence

from .errors import IntertextError
from .report import RatioRow, SCOPE_ORDER

_PALETTE = (
    "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2",
    "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
)

_WIDTH_PER_BAR = 46
_GROUP_GAP = 40
_MARGIN_LEFT = 64
_MARGIN_RIGHT = 20
_MARGIN_TOP = 24
_MARGIN_BOTTOM = 64
_PLOT_HEIGHT = 300


def render_ratio_chart(rows: Sequence[RatioRow]) -> str:
    """Render one bar per (scope, corpus) with a CI whisker."""
    if not rows:
        raise IntertextError("cannot chart an empty ratio report")
    for row in rows:
        if not all(math.isfinite(v) for v in (row.ratio, row.ci_low, row.ci_high)):
            raise IntertextError(f"non-finite values in row for {row.corpus_id}/{row.scope}")
        if row.ci_low > row.ci_high:
            raise IntertextError(
                f"corrupted interval for {row.corpus_id}/{row.scope}: "
                f"ci_low {row.ci_low!r} > ci_high {row.ci_high!r}"
            )

    corpora: list[str] = []
    for row in rows:
        if row.corpus_id not in corpora:
            corpora.append(row.corpus_id)
    scopes = [s.value for s in SCOPE_ORDER if any(r.scope == s.value for r in rows)]
    cell = {(r.scope, r.corpus_id): r for r in rows}

    y_max = max(max(r.ci_high, r.ratio) for r in rows)
    y_max = max(math.ceil(y_max * 1.1 / 0.25) * 0.25, 0.5)
    group_w = len(corpora) * _WIDTH_PER_BAR
    width = _MARGIN_LEFT + len(scopes) * (group_w + _GROUP_GAP) + _MARGIN_RIGHT
    height = _MARGIN_TOP + _PLOT_HEIGHT + _MARGIN_BOTTOM

    def y(v: float) -> float:
        return _MARGIN_TOP + _PLOT_HEIGHT * (1.0 - v / y_max)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    # y axis with ticks every y_max/5
    parts.append(
        f'<line x1="{_MARGIN_LEFT}" y1="{_MARGIN_TOP}" x2="{_MARGIN_LEFT}" '
        f'y2="{_MARGIN_TOP + _PLOT_HEIGHT}" stroke="black"/>'
    )
    for i in range(6):
        v = y_max * i / 5.0
        yy = y(v)
        parts.append(
            f'<line x1="{_MARGIN_LEFT - 4}" y1="{yy:.2f}" x2="{_MARGIN_LEFT}" '
            f'y2="{yy:.2f}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_MARGIN_LEFT - 8}" y="{yy + 4:.2f}" text-anchor="end">{v:.2f}</text>'
        )
    if y_max > 1.0:
        yy = y(1.0)
        parts.append(
            f'<line x1="{_MARGIN_LEFT}" y1="{yy:.2f}" x2="{width - _MARGIN_RIGHT}" '
            f'y2="{yy:.2f}" stroke="#888888" stroke-dasharray="4,3"/>'
        )

    for gi, scope in enumerate(scopes):
        gx = _MARGIN_LEFT + _GROUP_GAP / 2 + gi * (group_w + _GROUP_GAP)
        for ci, corpus_id in enumerate(corpora):
            row = cell.get((scope, corpus_id))
            if row is None:
                continue
            x = gx + ci * _WIDTH_PER_BAR + 6
            bar_w = _WIDTH_PER_BAR - 12
            top = y(row.ratio)
            parts.append(
                f'<rect class="bar" x="{x:.2f}" y="{top:.2f}" width="{bar_w}" '
                f'height="{y(0) - top:.2f}" fill="{_PALETTE[ci % len(_PALETTE)]}"/>'
            )
            cx = x + bar_w / 2
            y_lo, y_hi = y(row.ci_low), y(row.ci_high)
            parts.append(
                f'<line x1="{cx:.2f}" y1="{y_hi:.2f}" x2="{cx:.2f}" y2="{y_lo:.2f}" '
                f'stroke="black" stroke-width="1.5"/>'
            )
            for ye in (y_lo, y_hi):
                parts.append(
                    f'<line x1="{cx - 5:.2f}" y1="{ye:.2f}" x2="{cx + 5:.2f}" '
                    f'y2="{ye:.2f}" stroke="black" stroke-width="1.5"/>'
                )
        label_x = gx + group_w / 2
        parts.append(
            f'<text x="{label_x:.2f}" y="{_MARGIN_TOP + _PLOT_HEIGHT + 18}" '
            f'text-anchor="middle">{scope}</text>'
        )

    # legend
    lx = _MARGIN_LEFT
    ly = _MARGIN_TOP + _PLOT_HEIGHT + 36
    for ci, corpus_id in enumerate(corpora):
        parts.append(
            f'<rect x="{lx}" y="{ly - 10}" width="12" height="12" '
            f'fill="{_PALETTE[ci % len(_PALETTE)]}"/>'
        )
        parts.append(f'<text x="{lx + 16}" y="{ly}">{_escape(corpus_id)}</text>')
        lx += 16 + 8 * max(len(corpus_id), 4) + 16
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
