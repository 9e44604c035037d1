"""Deterministic SVG rendering of 2-D parameter-space verdict maps.

Output bytes are a pure function of the results document: fixed canvas,
fixed float formatting, regions drawn in document order.  Fill colors key on
the verdict pair; classification-boundary regions get a blue outline.
"""

from __future__ import annotations

import warnings

import numpy as np

from . import polytope as pt
from .errors import InputError
from .modelio import ResultsDocument
from .verify import AB, AR, CB, CR, IR, MR

CANVAS = 640
PAD = 60

FILL_GREEN = "#4daf4a"
FILL_AMBER = "#ffb000"
FILL_RED = "#e41a1c"
FILL_PURPLE = "#984ea3"
FILL_GRAY = "#bdbdbd"
STROKE_DARK = "#333333"
STROKE_BLUE = "#1f77b4"


def verdict_colors(cls_verdict: str, attn_verdict: str) -> tuple[str, str]:
    """(fill, stroke) for one region's verdict pair."""
    if cls_verdict == MR:
        fill = FILL_RED
    elif attn_verdict == IR:
        fill = FILL_PURPLE
    elif cls_verdict == CR and attn_verdict == AR:
        fill = FILL_GREEN
    elif (cls_verdict == CR and attn_verdict == AB) or (
        cls_verdict == CB and attn_verdict == AR
    ):
        fill = FILL_AMBER
    else:
        fill = FILL_GRAY
    stroke = STROKE_BLUE if cls_verdict == CB else STROKE_DARK
    return fill, stroke


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def render_svg(doc: ResultsDocument, out_path: str) -> None:
    """Write the 2-D verdict map of a results document as an SVG file.

    One polygon per region (degenerate regions with fewer than three vertices
    are skipped with a warning), an origin marker at theta = 0, and labeled
    axes.  Requires a 2-parameter problem.
    """
    box = np.array(doc.problem["theta_box"], dtype=float)
    if box.shape[0] != 2:
        raise InputError("SVG rendering requires a 2-D parameter space")
    lo, hi = box[:, 0], box[:, 1]
    span = np.maximum(hi - lo, 1e-12)
    inner = CANVAS - 2 * PAD

    def to_px(theta):
        x = PAD + (theta[0] - lo[0]) / span[0] * inner
        y = CANVAS - PAD - (theta[1] - lo[1]) / span[1] * inner
        return x, y

    names = doc.problem.get("parameter_names", ["theta1", "theta2"])
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS}" '
        f'height="{CANVAS}" viewBox="0 0 {CANVAS} {CANVAS}">',
        f'<rect x="0" y="0" width="{CANVAS}" height="{CANVAS}" fill="#ffffff"/>',
    ]
    for i, verdict in enumerate(doc.region_verdicts()):
        try:
            verts = pt.vertices_2d(verdict.region)
        except Exception:
            verts = []
        if len(verts) < 3:
            warnings.warn(f"region {i} is degenerate in 2-D; skipped in SVG")
            continue
        fill, stroke = verdict_colors(verdict.cls_verdict, verdict.attn_verdict)
        pts = " ".join("{},{}".format(*map(_fmt, to_px(v))) for v in verts)
        lines.append(
            f'<polygon points="{pts}" fill="{fill}" fill-opacity="0.75" '
            f'stroke="{stroke}" stroke-width="1.5"/>'
        )
    ax_low = to_px(lo)
    ax_xend = to_px((hi[0], lo[1]))
    ax_yend = to_px((lo[0], hi[1]))
    lines.append(
        f'<line x1="{_fmt(ax_low[0])}" y1="{_fmt(ax_low[1])}" '
        f'x2="{_fmt(ax_xend[0])}" y2="{_fmt(ax_xend[1])}" '
        f'stroke="#000000" stroke-width="1"/>'
    )
    lines.append(
        f'<line x1="{_fmt(ax_low[0])}" y1="{_fmt(ax_low[1])}" '
        f'x2="{_fmt(ax_yend[0])}" y2="{_fmt(ax_yend[1])}" '
        f'stroke="#000000" stroke-width="1"/>'
    )
    lines.append(
        f'<text x="{CANVAS // 2}" y="{CANVAS - PAD // 3}" font-size="16" '
        f'text-anchor="middle" font-family="monospace">{names[0]} '
        f"[{lo[0]:g}, {hi[0]:g}]</text>"
    )
    lines.append(
        f'<text x="{PAD // 3}" y="{CANVAS // 2}" font-size="16" '
        f'text-anchor="middle" font-family="monospace" '
        f'transform="rotate(-90 {PAD // 3} {CANVAS // 2})">{names[1]} '
        f"[{lo[1]:g}, {hi[1]:g}]</text>"
    )
    ox, oy = to_px((0.0, 0.0))
    lines.append(
        f'<circle cx="{_fmt(ox)}" cy="{_fmt(oy)}" r="5" fill="#000000"/>'
    )
    lines.append(
        f'<circle cx="{_fmt(ox)}" cy="{_fmt(oy)}" r="9" fill="none" '
        f'stroke="#000000" stroke-width="1.5"/>'
    )
    lines.append("</svg>")
    data = "\n".join(lines) + "\n"
    with open(out_path, "wb") as fh:
        fh.write(data.encode("utf-8"))
