"""Minimal SVG emitters for the report plots. Output is deterministic text."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")

W, H = 480, 400
PAD_L, PAD_R, PAD_T, PAD_B = 60, 20, 40, 50


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _doc(body: list[str], title: str, width: int = W, height: int = H) -> str:
    head = (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">'
    )
    return "\n".join([
        head,
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        *body,
        "</svg>",
    ]) + "\n"


class _Axes:
    def __init__(self, xlim, ylim):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 == self.x0:
            self.x0, self.x1 = self.x0 - 1, self.x1 + 1
        if self.y1 == self.y0:
            self.y0, self.y1 = self.y0 - 1, self.y1 + 1

    def px(self, x):
        return PAD_L + (x - self.x0) / (self.x1 - self.x0) * (W - PAD_L - PAD_R)

    def py(self, y):
        return H - PAD_B - (y - self.y0) / (self.y1 - self.y0) * (H - PAD_T - PAD_B)

    def frame(self, xlabel: str, ylabel: str) -> list[str]:
        out = [
            f'<rect x="{PAD_L}" y="{PAD_T}" width="{W - PAD_L - PAD_R}" height="{H - PAD_T - PAD_B}" '
            'fill="none" stroke="black"/>'
        ]
        for t in np.linspace(self.x0, self.x1, 5):
            out.append(f'<text x="{_fmt(self.px(t))}" y="{H - PAD_B + 16}" text-anchor="middle">{t:.2g}</text>')
        for t in np.linspace(self.y0, self.y1, 5):
            out.append(f'<text x="{PAD_L - 6}" y="{_fmt(self.py(t) + 4)}" text-anchor="end">{t:.2g}</text>')
        out.append(f'<text x="{(PAD_L + W - PAD_R) / 2:.1f}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>')
        cy = (PAD_T + H - PAD_B) / 2
        out.append(f'<text x="16" y="{cy:.1f}" text-anchor="middle" transform="rotate(-90 16 {cy:.1f})">'
                   f'{escape(ylabel)}</text>')
        return out


def scatter(coords, labels, title: str = "Clusters (PCA projection)",
            xlabel: str = "PC1", ylabel: str = "PC2") -> str:
    coords = np.asarray(coords, dtype=float)
    labels = np.asarray(labels)
    ax = _Axes((coords[:, 0].min(), coords[:, 0].max()), (coords[:, 1].min(), coords[:, 1].max()))
    body = ax.frame(xlabel, ylabel)
    for (x, y), lab in zip(coords, labels):
        color = PALETTE[int(lab) % len(PALETTE)]
        body.append(f'<circle class="point" cx="{_fmt(ax.px(x))}" cy="{_fmt(ax.py(y))}" r="3" '
                    f'fill="{color}" fill-opacity="0.7" data-cluster="{int(lab)}"/>')
    for i, lab in enumerate(sorted(set(int(v) for v in labels))):
        color = PALETTE[lab % len(PALETTE)]
        y = PAD_T + 14 + 16 * i
        body.append(f'<circle cx="{W - PAD_R - 70}" cy="{y - 4}" r="4" fill="{color}"/>')
        body.append(f'<text x="{W - PAD_R - 60}" y="{y}">cluster {lab}</text>')
    return _doc(body, title)


def roc(fold_curves, mean_fpr, mean_tpr, mean_auc: float | None, title: str = "ROC curves") -> str:
    ax = _Axes((0.0, 1.0), (0.0, 1.0))
    body = ax.frame("False positive rate", "True positive rate")
    body.append(f'<line x1="{_fmt(ax.px(0))}" y1="{_fmt(ax.py(0))}" x2="{_fmt(ax.px(1))}" y2="{_fmt(ax.py(1))}" '
                'stroke="#999" stroke-dasharray="4 3"/>')
    for i, pts in enumerate(fold_curves):
        path = " ".join(f"{_fmt(ax.px(x))},{_fmt(ax.py(y))}" for x, y in pts)
        body.append(f'<polyline class="fold" points="{path}" fill="none" stroke="{PALETTE[i % len(PALETTE)]}" '
                    'stroke-opacity="0.5"/>')
    if mean_tpr is not None:
        path = " ".join(f"{_fmt(ax.px(x))},{_fmt(ax.py(y))}" for x, y in zip(mean_fpr, mean_tpr))
        body.append(f'<polyline class="mean" points="{path}" fill="none" stroke="black" stroke-width="2"/>')
    if mean_auc is not None:
        body.append(f'<text x="{W - PAD_R - 8}" y="{H - PAD_B - 10}" text-anchor="end">mean AUC = {mean_auc:.3f}</text>')
    return _doc(body, title)


def confusion(matrix, title: str = "Average confusion matrix") -> str:
    """``matrix`` is [[TN, FP], [FN, TP]] (rows = true class)."""
    m = np.asarray(matrix, dtype=float)
    vmax = m.max() if m.max() > 0 else 1.0
    cell = 120
    x0, y0 = 140, 70
    body = []
    for r in range(2):
        for c in range(2):
            shade = int(255 - 200 * m[r, c] / vmax)
            fill = f"#{shade:02x}{shade:02x}ff"
            x, y = x0 + c * cell, y0 + r * cell
            body.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{fill}" stroke="black"/>')
            body.append(f'<text x="{x + cell / 2:.1f}" y="{y + cell / 2 + 5:.1f}" text-anchor="middle" '
                        f'font-size="16">{m[r, c]:.1f}</text>')
    for c, lab in enumerate(("Predicted 0", "Predicted 1")):
        body.append(f'<text x="{x0 + c * cell + cell / 2:.1f}" y="{y0 - 10}" text-anchor="middle">{lab}</text>')
    for r, lab in enumerate(("True 0", "True 1")):
        body.append(f'<text x="{x0 - 10}" y="{y0 + r * cell + cell / 2 + 4:.1f}" text-anchor="end">{lab}</text>')
    return _doc(body, title)
