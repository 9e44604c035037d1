"""Report generation: per-region CSV plus matplotlib figures.

The report path takes a results document (and optionally an oracle document)
and writes a delimited region table next to rendered figures: the 2-D verdict
map and the per-region inconsistency ranges.
"""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Polygon as MplPolygon

from . import polytope as pt
from .modelio import ResultsDocument
from .render import verdict_colors


def write_region_csv(doc: ResultsDocument, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "region",
                "cls_verdict",
                "attn_verdict",
                "ai_lo",
                "ai_up",
                "margin_min",
                "n_halfspaces",
                "witness",
            ]
        )
        for i, rec in enumerate(doc.regions):
            writer.writerow(
                [
                    i,
                    rec["cls_verdict"],
                    rec["attn_verdict"],
                    f"{rec['ai_range'][0]:.9g}",
                    f"{rec['ai_range'][1]:.9g}",
                    f"{rec['margin_min']:.9g}",
                    len(rec["halfspaces"]["b"]),
                    " ".join(f"{v:.6g}" for v in rec["witness"]),
                ]
            )


def region_map_figure(doc: ResultsDocument, path: str) -> None:
    """Verdict map of a 2-D parameter space as a matplotlib figure."""
    box = np.array(doc.problem["theta_box"], dtype=float)
    fig, ax = plt.subplots(figsize=(6, 6))
    for verdict in doc.region_verdicts():
        try:
            verts = pt.vertices_2d(verdict.region)
        except Exception:
            continue
        if len(verts) < 3:
            continue
        fill, stroke = verdict_colors(verdict.cls_verdict, verdict.attn_verdict)
        ax.add_patch(
            MplPolygon(
                np.array(verts), closed=True, facecolor=fill, edgecolor=stroke,
                alpha=0.75, linewidth=1.2,
            )
        )
    ax.plot([0], [0], marker="o", color="black", markersize=8)
    names = doc.problem.get("parameter_names", ["theta1", "theta2"])
    ax.set_xlim(box[0, 0], box[0, 1])
    ax.set_ylim(box[1, 0], box[1, 1])
    ax.set_xlabel(names[0])
    ax.set_ylabel(names[1])
    ax.set_title("region verdicts")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def ai_range_figure(doc: ResultsDocument, path: str) -> None:
    """Per-region inconsistency ranges against the threshold."""
    delta = float(doc.problem.get("delta", 0.0))
    fig, ax = plt.subplots(figsize=(7, 4))
    for i, rec in enumerate(doc.regions):
        lo, up = rec["ai_range"]
        fill, _ = verdict_colors(rec["cls_verdict"], rec["attn_verdict"])
        ax.plot([i, i], [lo, up], color=fill, linewidth=3)
        ax.plot([i], [lo], marker="_", color=fill, markersize=8)
        ax.plot([i], [up], marker="_", color=fill, markersize=8)
    ax.axhline(delta, color="black", linestyle="--", linewidth=1, label="delta")
    ax.set_xlabel("region (traversal order)")
    ax.set_ylabel("attention inconsistency")
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(
    doc: ResultsDocument, outdir: str, oracle=None
) -> list[str]:
    """Write regions.csv and the figures into outdir; returns written paths."""
    os.makedirs(outdir, exist_ok=True)
    written = []
    csv_path = os.path.join(outdir, "regions.csv")
    write_region_csv(doc, csv_path)
    written.append(csv_path)
    box = np.array(doc.problem["theta_box"], dtype=float)
    if box.shape[0] == 2:
        map_path = os.path.join(outdir, "region_map.png")
        region_map_figure(doc, map_path)
        written.append(map_path)
    ai_path = os.path.join(outdir, "ai_ranges.png")
    ai_range_figure(doc, ai_path)
    written.append(ai_path)
    if oracle is not None and box.shape[0] == 2:
        orc_path = os.path.join(outdir, "oracle_labels.png")
        fig, ax = plt.subplots(figsize=(6, 6))
        ax.imshow(
            oracle.labels.T,
            origin="lower",
            extent=(box[0, 0], box[0, 1], box[1, 0], box[1, 1]),
            aspect="auto",
            interpolation="nearest",
            cmap="tab10",
        )
        ax.set_title("oracle labels")
        fig.tight_layout()
        fig.savefig(orc_path, dpi=120)
        plt.close(fig)
        written.append(orc_path)
    return written
